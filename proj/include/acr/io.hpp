#pragma once

#include <string>

namespace acr {

std::string read_file(const std::string& path);

/// Writes to <path>.tmp then renames, so partial outputs are never left behind
/// under the final name.
void write_file_atomic(const std::string& path, const std::string& content);

}  // namespace acr
