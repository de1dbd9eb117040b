#pragma once

#include <string>
#include <string_view>

namespace dynbool {

/// Shortest decimal that round-trips to the same double.
std::string format_double(double v);

/// Strict decimal parse; throws InvalidArgument on trailing garbage.
double parse_double(std::string_view s);
long long parse_int(std::string_view s);

}  // namespace dynbool
