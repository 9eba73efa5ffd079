#include "fluidmc/csv.hpp"

#include <charconv>

namespace fluidmc {

std::string format_double(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  (void)ec;
  return std::string(buf, ptr);
}

}  // namespace fluidmc
