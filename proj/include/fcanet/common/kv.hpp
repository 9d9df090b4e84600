#pragma once

// Flat UTF-8 key=value documents: one pair per line, '#' starts a comment.

#include <array>
#include <charconv>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "fcanet/common/errors.hpp"

namespace fcanet::kv {

struct Line {
  std::string key;
  std::string value;
  std::size_t number = 0;
};
using Document = std::vector<Line>;

// Throws ConfigError on a line without '=', an empty key, or a repeated key.
Document parse(std::string_view text);
Document parse_file(const std::string& path);

std::string format(bool v);
std::string format(double v);
std::string format(const std::string& v);
template <std::unsigned_integral U>
std::string format(U v) {
  return std::to_string(v);
}
template <std::unsigned_integral U, std::size_t N>
std::string format(const std::array<U, N>& v) {
  std::string out;
  for (std::size_t i = 0; i < N; ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

void parse_value(std::string_view key, std::string_view text, bool& out);
void parse_value(std::string_view key, std::string_view text, double& out);
void parse_value(std::string_view key, std::string_view text, std::string& out);
void parse_value(std::string_view key, std::string_view text, std::uint64_t& out);
template <std::unsigned_integral U, std::size_t N>
void parse_value(std::string_view key, std::string_view text, std::array<U, N>& out) {
  std::size_t start = 0;
  for (std::size_t i = 0; i < N; ++i) {
    const std::size_t comma = i + 1 < N ? text.find(',', start) : text.size();
    if (comma == std::string_view::npos) throw ConfigError(std::string(key) + ": expected " + std::to_string(N) + " values");
    std::uint64_t v = 0;
    parse_value(key, text.substr(start, comma - start), v);
    out[i] = static_cast<U>(v);
    start = comma + 1;
  }
}

class Writer {
 public:
  template <class V>
  void operator()(std::string_view key, const V& v) {
    out_.append(key).append("=").append(format(v)).append("\n");
  }
  const std::string& str() const { return out_; }

 private:
  std::string out_;
};

// Assigns every visited field present in the document and remembers which
// keys were consumed, so leftovers can be rejected.
class Reader {
 public:
  explicit Reader(const Document& doc) : doc_(doc) {}
  explicit Reader(Document&&) = delete;
  template <class V>
  void operator()(std::string_view key, V& v) {
    for (const Line& line : doc_) {
      if (line.key == key) {
        parse_value(key, line.value, v);
        used_.insert(line.key);
      }
    }
  }
  // Throws ConfigError naming the first key no visitor asked for.
  void reject_unknown() const;

 private:
  const Document& doc_;
  std::set<std::string> used_;
};

}  // namespace fcanet::kv
