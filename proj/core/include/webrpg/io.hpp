#pragma once

#include <string>

namespace webrpg {

// Whole-file text helpers. Both throw IoError with the path in the message.
std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

}  // namespace webrpg
