#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "symflow/crystal.hpp"
#include "symflow/lattice.hpp"

/// Minimal CIF subset: cell lengths and angles, one atom-site loop with
/// fractional coordinates, and the space-group number either as a
/// "# space_group: N" comment or an _space_group_IT_number /
/// _symmetry_Int_Tables_number tag. Symmetry-operation loops are ignored.
namespace symflow::cif {

struct AtomSite {
  std::string label;
  std::string symbol;
  Vec3 frac = Vec3::Zero();
};

struct Document {
  std::string name;
  lattice::CellParameters cell;
  std::vector<AtomSite> sites;
  std::optional<int> sg;
};

/// Throws InputError (with line numbers) on missing tags, unknown elements
/// or malformed numbers.
Document parse_document(std::string_view text, std::string_view source = "<cif>");

struct Structure {
  std::string name;
  Crystal crystal;
  std::optional<int> sg;
};

/// Lattice in the standard orientation; coordinates wrapped into [0, 1).
Structure parse_cif(std::string_view text, std::string_view source = "<cif>");
Structure read_cif(const std::filesystem::path& path);

/// P1 listing of every site; cell parameters with 6 decimals, coordinates with 8.
std::string write_cif(const Crystal& crystal, std::optional<int> sg, std::string_view name = "structure");

}  // namespace symflow::cif
