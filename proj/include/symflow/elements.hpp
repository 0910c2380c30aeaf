#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace symflow {

struct Element {
  int number = 0;
  std::string symbol;
  double mass = 0.0;  // u
  std::vector<int> oxidation_states;
  bool has_oxidation_data = false;
};

inline constexpr int kMaxAtomicNumber = 103;

/// Throws InputError outside 1..103.
const Element& element(int number);

/// Case-sensitive symbol lookup ("Na", "Cl"); throws InputError if unknown.
int atomic_number(std::string_view symbol);
std::optional<int> find_atomic_number(std::string_view symbol);

}  // namespace symflow
