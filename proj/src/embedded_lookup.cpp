#include "symflow/embedded_data.hpp"
#include "symflow/error.hpp"

namespace symflow::embedded {

std::string_view file(const std::string& name) {
  const auto& table = files();
  auto it = table.find(name);
  if (it == table.end()) throw Error("embedded data file not found: " + name);
  return it->second;
}

}  // namespace symflow::embedded
