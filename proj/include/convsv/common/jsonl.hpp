#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <string_view>

#include "json.hpp"

namespace convsv {

using Json = nlohmann::json;
using OrderedJson = nlohmann::ordered_json;

// Calls `fn(json, line_number)` for every non-blank line. Throws
// Error(kParse, ..., line) on the first line that is not valid JSON.
void for_each_jsonl(std::istream& in,
                    const std::function<void(const Json&, std::size_t)>& fn);

std::string read_file(const std::filesystem::path& path);

// Writes through a temporary sibling and renames, so readers never observe a
// partial file.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

// Shortest round-trip decimal form of a double.
std::string format_double(double v);

}  // namespace convsv
