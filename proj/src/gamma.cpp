#include "patrec/gamma.hpp"

#include <cmath>
#include <stdexcept>

namespace patrec {

double gamma_ground_truth(GammaCase c, double v) {
  switch (c) {
    case GammaCase::gamma1:
      return 0.3 * v + 0.7;
    case GammaCase::gamma2:
      return 0.3 * std::sqrt(v) + 0.7;
    case GammaCase::gamma3:
      return 0.3 * v * v + 0.7;
    case GammaCase::gamma4:
      return 0.7;
  }
  throw std::invalid_argument("gamma_ground_truth: unknown case");
}

std::pair<double, double> gamma_endpoints(GammaCase c) {
  return {0.7, c == GammaCase::gamma4 ? 0.7 : 1.0};
}

GammaCase gamma_case_from_string(const std::string& s) {
  if (s == "gamma1") return GammaCase::gamma1;
  if (s == "gamma2") return GammaCase::gamma2;
  if (s == "gamma3") return GammaCase::gamma3;
  if (s == "gamma4") return GammaCase::gamma4;
  throw std::invalid_argument("unknown gamma case: " + s);
}

std::string to_string(GammaCase c) {
  switch (c) {
    case GammaCase::gamma1:
      return "gamma1";
    case GammaCase::gamma2:
      return "gamma2";
    case GammaCase::gamma3:
      return "gamma3";
    case GammaCase::gamma4:
      return "gamma4";
  }
  throw std::invalid_argument("to_string: unknown gamma case");
}

} // namespace patrec
