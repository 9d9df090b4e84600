#include "fcanet/common/kv.hpp"

#include <fstream>
#include <sstream>

namespace fcanet::kv {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

[[noreturn]] void bad(std::string_view key, std::string_view text, const char* what) {
  throw ConfigError("config key '" + std::string(key) + "': '" + std::string(text) + "' is not " + what);
}

}  // namespace

Document parse(std::string_view text) {
  Document doc;
  std::set<std::string, std::less<>> seen;
  std::size_t number = 0;
  while (!text.empty()) {
    const std::size_t nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++number;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError("config line " + std::to_string(number) + ": expected key=value");
    const std::string key(trim(line.substr(0, eq)));
    if (key.empty()) throw ConfigError("config line " + std::to_string(number) + ": empty key");
    if (!seen.insert(key).second) throw ConfigError("config key '" + key + "' appears twice");
    doc.push_back({key, std::string(trim(line.substr(eq + 1))), number});
  }
  return doc;
}

Document parse_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

std::string format(bool v) { return v ? "true" : "false"; }

std::string format(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string format(const std::string& v) { return v; }

void parse_value(std::string_view key, std::string_view text, bool& out) {
  if (text == "true") out = true;
  else if (text == "false") out = false;
  else bad(key, text, "true or false");
}

void parse_value(std::string_view key, std::string_view text, double& out) {
  const auto res = std::from_chars(text.data(), text.data() + text.size(), out);
  if (res.ec != std::errc{} || res.ptr != text.data() + text.size()) bad(key, text, "a number");
}

void parse_value(std::string_view, std::string_view text, std::string& out) { out = std::string(text); }

void parse_value(std::string_view key, std::string_view text, std::uint64_t& out) {
  const auto res = std::from_chars(text.data(), text.data() + text.size(), out);
  if (res.ec != std::errc{} || res.ptr != text.data() + text.size()) bad(key, text, "a nonnegative integer");
}

void Reader::reject_unknown() const {
  for (const Line& line : doc_) {
    if (!used_.count(line.key)) {
      throw ConfigError("unknown config key '" + line.key + "' on line " + std::to_string(line.number));
    }
  }
}

}  // namespace fcanet::kv
