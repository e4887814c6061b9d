#include "fedsim/format.hpp"

#include <array>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <system_error>

namespace fedsim {
namespace {

std::string to_chars_string(double v, std::chars_format fmt, bool use_fmt) {
  // Fixed notation of a double can need several hundred digits.
  std::array<char, 512> buf{};
  const auto res = use_fmt ? std::to_chars(buf.data(), buf.data() + buf.size(), v, fmt)
                           : std::to_chars(buf.data(), buf.data() + buf.size(), v);
  if (res.ec != std::errc()) throw std::runtime_error("number formatting failed");
  return std::string(buf.data(), res.ptr);
}

}  // namespace

std::string format_fixed(double v) { return to_chars_string(v, std::chars_format::fixed, true); }

std::string format_shortest(double v) { return to_chars_string(v, {}, false); }

void write_file_atomic(const std::string& path, const std::string& contents) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.flush();
    if (!out) throw std::runtime_error("write to " + tmp.string() + " failed");
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw std::runtime_error("cannot rename into " + target.string());
  }
}

}  // namespace fedsim
