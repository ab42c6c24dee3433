#include "recflash/kv_config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <unordered_set>

namespace recflash {

std::string_view trim(std::string_view s) {
  const auto ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

std::vector<KvEntry> parse_kv(std::string_view text) {
  std::vector<KvEntry> out;
  std::unordered_set<std::string> seen;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    auto line = trim(text.substr(pos, nl - pos));
    ++line_no;
    pos = nl + 1;
    if (line.empty() || line.front() == '#') {
      if (nl == text.size()) break;
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError(line_no, "expected 'key = value'");
    KvEntry e{std::string(trim(line.substr(0, eq))), std::string(trim(line.substr(eq + 1))), line_no};
    if (e.key.empty()) throw ConfigError(line_no, "empty key");
    if (!seen.insert(e.key).second) throw ConfigError(line_no, "duplicate key '" + e.key + "'");
    out.push_back(std::move(e));
    if (nl == text.size()) break;
  }
  return out;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

double kv_double(const KvEntry& e) {
  double v = 0;
  const char* first = e.value.data();
  const char* last = first + e.value.size();
  auto [p, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || p != last) throw ConfigError(e.line, "'" + e.key + "' expects a number, got '" + e.value + "'");
  return v;
}

std::uint64_t kv_uint(const KvEntry& e) {
  std::uint64_t v = 0;
  const char* first = e.value.data();
  const char* last = first + e.value.size();
  auto [p, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || p != last)
    throw ConfigError(e.line, "'" + e.key + "' expects a non-negative integer, got '" + e.value + "'");
  return v;
}

std::vector<std::string> kv_list(const KvEntry& e) {
  std::vector<std::string> out;
  std::string_view v = e.value;
  std::size_t pos = 0;
  while (pos <= v.size()) {
    auto c = v.find(',', pos);
    if (c == std::string_view::npos) c = v.size();
    auto item = trim(v.substr(pos, c - pos));
    if (item.empty()) throw ConfigError(e.line, "'" + e.key + "' has an empty list item");
    out.emplace_back(item);
    pos = c + 1;
  }
  return out;
}

std::string format_double(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw std::runtime_error("format_double failed");
  return std::string(buf, p);
}

}  // namespace recflash
