#pragma once

#include <string>
#include <string_view>
#include <vector>

/// Prototype crystals compiled into the library (data/prototypes/).
namespace symflow {

struct PrototypeRecord {
  std::string name;
  int sg = 1;
  std::string cif;
  int asymmetric_unit_size = 0;
  int cell_atom_count = 0;
  bool training = true;  // part of the default training corpus
};

/// Throws InputError naming the data file on malformed entries.
const std::vector<PrototypeRecord>& load_prototypes();

/// Parses an index in the format of data/prototypes/index.txt; the CIF
/// files it names are looked up among the embedded data.
std::vector<PrototypeRecord> parse_prototype_index(std::string_view text, std::string_view source);

}  // namespace symflow
