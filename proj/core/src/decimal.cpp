#include "igss/decimal.hpp"

#include <charconv>
#include <cmath>
#include <string>

#include "igss/error.hpp"

namespace igss {

std::string format_fixed6(double value) {
  if (!std::isfinite(value)) raise(ErrorKind::InvalidArgument, "non-finite value in decimal output");
  char buf[64];
  // std::to_chars with an explicit precision rounds the exact binary value
  // like printf("%.6f"), i.e. ties to even.
  auto res = std::to_chars(buf, buf + sizeof(buf), value, std::chars_format::fixed, 6);
  std::string out(buf, res.ptr);
  if (out == "-0.000000") out = "0.000000";
  return out;
}

double parse_double(std::string_view text) {
  double v = 0.0;
  const auto* end = text.data() + text.size();
  auto res = std::from_chars(text.data(), end, v);
  if (res.ec != std::errc() || res.ptr != end || !std::isfinite(v)) {
    raise(ErrorKind::ParseError, "bad decimal '" + std::string(text) + "'");
  }
  return v;
}

long long parse_int(std::string_view text) {
  long long v = 0;
  const auto* end = text.data() + text.size();
  auto res = std::from_chars(text.data(), end, v);
  if (res.ec != std::errc() || res.ptr != end) {
    raise(ErrorKind::ParseError, "bad integer '" + std::string(text) + "'");
  }
  return v;
}

}  // namespace igss
