#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "rp2ends/types.hpp"

namespace rp2ends::cli {

// Grammar in the README: an optional real part followed by an optional
// signed imaginary part, e.g. 2, -2i, 1+i, -1.5e-3-2.5i.
cplx parse_complex(std::string_view token);
double parse_real(std::string_view token);
long parse_integer(std::string_view token);
bool parse_bool(std::string_view token);

// Comma-separated items, surrounding blanks trimmed; empty items rejected.
std::vector<std::string> split_list(std::string_view text);

std::string format_complex(cplx z);
std::string format_real(double v);

}  // namespace rp2ends::cli
