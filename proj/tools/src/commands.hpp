#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "config.hpp"

namespace rp2ends::cli {

enum class Format { Csv, Json };

struct Context {
  Config config;
  std::optional<std::filesystem::path> out;
  Format format = Format::Csv;
  bool svg = false;
  std::vector<std::string> positional;
  std::ostream* stdout_ = nullptr;

  std::ostream& console() const { return *stdout_; }
  // Resolved output directory; commands that always produce files use ".".
  std::filesystem::path out_dir() const { return out.value_or("."); }
};

int cmd_classify(Context& ctx);
int cmd_spectrum(Context& ctx);
int cmd_wang(Context& ctx);
int cmd_develop(Context& ctx);
int cmd_holonomy(Context& ctx);
int cmd_levinson(Context& ctx);
int cmd_family(Context& ctx);
int cmd_triangle(Context& ctx);

// 2 for configuration, parse and I/O errors, 3 for numerical failures.
int exit_code_for(const std::exception& e);

}  // namespace rp2ends::cli
