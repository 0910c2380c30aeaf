#pragma once

#include <map>
#include <string>
#include <string_view>

namespace symflow::embedded {

/// Data files compiled into the library, keyed by path relative to data/.
const std::map<std::string, std::string_view>& files();

/// Throws symflow::Error when the file was not embedded.
std::string_view file(const std::string& name);

}  // namespace symflow::embedded
