#pragma once

#include <filesystem>
#include <initializer_list>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rp2ends/types.hpp"

namespace rp2ends::cli {

// Flat "key = value" lines; '#' starts a comment; blank lines ignored.
class Config {
 public:
  Config() = default;
  static Config parse(std::istream& is, const std::string& origin = "<config>");
  static Config load(const std::filesystem::path& path);

  void set(const std::string& key, const std::string& value);
  bool has(const std::string& key) const { return values_.count(key) > 0; }
  const std::map<std::string, std::string>& values() const { return values_; }

  // Throws ConfigError naming the first key outside the schema.
  void require_known(std::initializer_list<std::string_view> keys,
                     std::initializer_list<std::string_view> prefixes = {}) const;

  std::string text(const std::string& key, const std::string& fallback) const;
  std::optional<std::string> text(const std::string& key) const;
  double real(const std::string& key, double fallback) const;
  std::optional<double> real(const std::string& key) const;
  int integer(const std::string& key, int fallback) const;
  bool flag(const std::string& key, bool fallback) const;
  cplx complex(const std::string& key, cplx fallback) const;
  std::optional<cplx> complex(const std::string& key) const;
  std::vector<double> reals(const std::string& key) const;
  std::vector<cplx> complexes(const std::string& key) const;

 private:
  template <class F>
  auto convert(const std::string& key, F f) const;

  std::map<std::string, std::string> values_;
  std::map<std::string, int> lines_;
  std::string origin_;
};

// Writes to a sibling temporary file and renames it into place.
void write_atomically(const std::filesystem::path& path, const std::string& content);

}  // namespace rp2ends::cli
