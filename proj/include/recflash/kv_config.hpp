#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace recflash {

// Error raised for malformed configuration input; carries the 1-based line.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::size_t line, const std::string& what)
      : std::runtime_error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

struct KvEntry {
  std::string key;
  std::string value;
  std::size_t line = 0;
};

// Parses "key = value" lines. Blank lines and lines starting with '#' are
// skipped. Duplicate keys are an error.
std::vector<KvEntry> parse_kv(std::string_view text);
std::string read_text_file(const std::string& path);

double kv_double(const KvEntry& e);
std::uint64_t kv_uint(const KvEntry& e);
std::vector<std::string> kv_list(const KvEntry& e);

// Shortest round-trip decimal form.
std::string format_double(double v);

std::string_view trim(std::string_view s);

}  // namespace recflash
