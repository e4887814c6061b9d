#pragma once

#include <string>

namespace fedsim {

// Shortest decimal string that parses back to exactly `v` (fixed notation).
std::string format_fixed(double v);
// Shortest round-trip representation, fixed or scientific, whichever is shorter.
std::string format_shortest(double v);

// Writes `contents` to a sibling temp file and renames it over `path`.
// Throws std::runtime_error on I/O failure.
void write_file_atomic(const std::string& path, const std::string& contents);

}  // namespace fedsim
