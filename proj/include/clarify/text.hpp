#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace clarify::text {

// ASCII lowercase; bytes outside ASCII are left untouched.
std::string to_lower(std::string_view s);

std::string trim(std::string_view s);

// Lowercase word tokens. A word is a maximal run of ASCII letters, digits, or
// non-ASCII bytes; everything else separates words.
std::vector<std::string> words(std::string_view s);

// 64-bit FNV-1a.
class Fingerprint {
 public:
  void add(std::string_view bytes);
  void add_u64(unsigned long long v);
  unsigned long long value() const { return hash_; }
  std::string hex() const;

 private:
  unsigned long long hash_ = 0xcbf29ce484222325ULL;
};

}  // namespace clarify::text
