#include "symflow/prototypes.hpp"

#include <sstream>

#include "symflow/embedded_data.hpp"
#include "symflow/error.hpp"

namespace symflow {

std::vector<PrototypeRecord> parse_prototype_index(std::string_view text, std::string_view source) {
  const std::string index_name(source);
  std::istringstream in{std::string(text)};
  std::vector<PrototypeRecord> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream fields(line);
    PrototypeRecord rec;
    std::string file, training;
    if (!(fields >> rec.name >> rec.sg >> file >> rec.asymmetric_unit_size >> rec.cell_atom_count >>
          training) ||
        (training != "yes" && training != "no") || rec.sg < 1 || rec.sg > 230) {
      throw InputError(index_name + ":" + std::to_string(line_no) + ": malformed prototype entry");
    }
    rec.training = training == "yes";
    rec.cif = std::string(embedded::file("prototypes/" + file));
    out.push_back(std::move(rec));
  }
  if (out.empty()) throw InputError(index_name + ": no prototype entries");
  return out;
}

const std::vector<PrototypeRecord>& load_prototypes() {
  static const std::vector<PrototypeRecord> records =
      parse_prototype_index(embedded::file("prototypes/index.txt"), "prototypes/index.txt");
  return records;
}

}  // namespace symflow
