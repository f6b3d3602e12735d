#include "config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <system_error>

#include <unistd.h>

#include "literal.hpp"
#include "rp2ends/error.hpp"

namespace rp2ends::cli {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool valid_key(const std::string& k) {
  return !k.empty() && std::all_of(k.begin(), k.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.' || c == '-';
  });
}

}  // namespace

Config Config::parse(std::istream& is, const std::string& origin) {
  Config c;
  c.origin_ = origin;
  std::string line;
  int number = 0;
  while (std::getline(is, line)) {
    ++number;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    std::ostringstream where;
    where << origin << ":" << number << ": ";
    if (eq == std::string::npos) throw Error(ErrorCode::ConfigError, where.str() + "expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (!valid_key(key)) throw Error(ErrorCode::ConfigError, where.str() + "bad key '" + key + "'");
    if (value.empty()) throw Error(ErrorCode::ConfigError, where.str() + "empty value for '" + key + "'");
    if (c.values_.count(key)) throw Error(ErrorCode::ConfigError, where.str() + "duplicate key '" + key + "'");
    c.values_[key] = value;
    c.lines_[key] = number;
  }
  return c;
}

Config Config::load(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorCode::IoError, "cannot open config " + path.string());
  return parse(is, path.string());
}

void Config::set(const std::string& key, const std::string& value) { values_[key] = value; }

void Config::require_known(std::initializer_list<std::string_view> keys,
                           std::initializer_list<std::string_view> prefixes) const {
  for (const auto& [k, v] : values_) {
    const bool known = std::find(keys.begin(), keys.end(), k) != keys.end() ||
                       std::any_of(prefixes.begin(), prefixes.end(),
                                   [&](std::string_view p) { return k.rfind(p, 0) == 0; });
    if (!known) {
      std::ostringstream os;
      os << origin_;
      if (auto it = lines_.find(k); it != lines_.end()) os << ":" << it->second;
      os << ": unknown key '" << k << "'";
      throw Error(ErrorCode::ConfigError, os.str());
    }
  }
}

template <class F>
auto Config::convert(const std::string& key, F f) const {
  const std::string& v = values_.at(key);
  try {
    return f(v);
  } catch (const Error& e) {
    throw Error(ErrorCode::ConfigError, "key '" + key + "': " + e.what());
  }
}

std::string Config::text(const std::string& key, const std::string& fallback) const {
  return text(key).value_or(fallback);
}

std::optional<std::string> Config::text(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  return it->second;
}

double Config::real(const std::string& key, double fallback) const { return real(key).value_or(fallback); }

std::optional<double> Config::real(const std::string& key) const {
  if (!has(key)) return std::nullopt;
  return convert(key, [](const std::string& v) { return parse_real(v); });
}

int Config::integer(const std::string& key, int fallback) const {
  if (!has(key)) return fallback;
  return static_cast<int>(convert(key, [](const std::string& v) { return parse_integer(v); }));
}

bool Config::flag(const std::string& key, bool fallback) const {
  if (!has(key)) return fallback;
  return convert(key, [](const std::string& v) { return parse_bool(v); });
}

cplx Config::complex(const std::string& key, cplx fallback) const { return complex(key).value_or(fallback); }

std::optional<cplx> Config::complex(const std::string& key) const {
  if (!has(key)) return std::nullopt;
  return convert(key, [](const std::string& v) { return parse_complex(v); });
}

std::vector<double> Config::reals(const std::string& key) const {
  if (!has(key)) return {};
  return convert(key, [](const std::string& v) {
    std::vector<double> out;
    for (const auto& item : split_list(v)) out.push_back(parse_real(item));
    return out;
  });
}

std::vector<cplx> Config::complexes(const std::string& key) const {
  if (!has(key)) return {};
  return convert(key, [](const std::string& v) {
    std::vector<cplx> out;
    for (const auto& item : split_list(v)) out.push_back(parse_complex(item));
    return out;
  });
}

void write_atomically(const std::filesystem::path& path, const std::string& content) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create " + path.parent_path().string());
  std::filesystem::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw Error(ErrorCode::IoError, "cannot write " + tmp.string());
    os << content;
    os.flush();
    if (!os) throw Error(ErrorCode::IoError, "write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw Error(ErrorCode::IoError, "cannot rename into " + path.string() + ": " + ec.message());
  }
}

}  // namespace rp2ends::cli
