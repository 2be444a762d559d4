#include "agscl/rng.hpp"

#include "agscl/errors.hpp"

#include <sstream>

namespace agscl {

std::string rng_state(const Rng& rng) {
  std::ostringstream out;
  out << rng;
  return out.str();
}

Rng rng_from_state(const std::string& state) {
  std::istringstream in(state);
  Rng rng;
  in >> rng;
  if (!in) throw FormatError("corrupt RNG state");
  return rng;
}

}  // namespace agscl
