#include "symflow/elements.hpp"

#include <array>
#include <sstream>

#include "symflow/embedded_data.hpp"
#include "symflow/error.hpp"

namespace symflow {
namespace {

std::array<Element, kMaxAtomicNumber + 1> load_table() {
  std::array<Element, kMaxAtomicNumber + 1> table{};
  std::istringstream in{std::string(embedded::file("elements.txt"))};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream fields(line);
    Element e;
    std::string states;
    if (!(fields >> e.number >> e.symbol >> e.mass >> states) || e.number < 1 ||
        e.number > kMaxAtomicNumber) {
      throw InputError("elements.txt:" + std::to_string(line_no) + ": malformed record");
    }
    if (states != "-") {
      e.has_oxidation_data = true;
      std::istringstream list(states);
      for (std::string tok; std::getline(list, tok, ',');) e.oxidation_states.push_back(std::stoi(tok));
    }
    table[e.number] = e;
  }
  for (int z = 1; z <= kMaxAtomicNumber; ++z) {
    if (table[z].number != z) throw InputError("elements.txt: missing element " + std::to_string(z));
  }
  return table;
}

const std::array<Element, kMaxAtomicNumber + 1>& table() {
  static const auto t = load_table();
  return t;
}

}  // namespace

const Element& element(int number) {
  if (number < 1 || number > kMaxAtomicNumber) {
    throw InputError("atomic number out of range: " + std::to_string(number));
  }
  return table()[number];
}

std::optional<int> find_atomic_number(std::string_view symbol) {
  for (int z = 1; z <= kMaxAtomicNumber; ++z) {
    if (table()[z].symbol == symbol) return z;
  }
  return std::nullopt;
}

int atomic_number(std::string_view symbol) {
  if (auto z = find_atomic_number(symbol)) return *z;
  throw InputError("unknown element symbol '" + std::string(symbol) + "'");
}

}  // namespace symflow
