// Fixed-point decimal text used by the plain-text interchange formats.
#pragma once

#include <string>
#include <string_view>

namespace igss {

// Exactly six fractional digits. The binary value is rounded correctly, with
// exact ties going to the even digit. Negative zero prints as "0.000000".
std::string format_fixed6(double value);

// Strict decimal parse; ParseError on trailing garbage or non-finite input.
double parse_double(std::string_view text);
long long parse_int(std::string_view text);

}  // namespace igss
