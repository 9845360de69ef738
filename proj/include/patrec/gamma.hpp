#pragma once

#include <string>
#include <utility>

namespace patrec {

// The four speed laws used for data generation: linear, square root, square
// and constant. All share gamma(0) = 0.7; the constant law pins gamma(1) to
// 0.7 as well.
enum class GammaCase { gamma1 = 1, gamma2 = 2, gamma3 = 3, gamma4 = 4 };

double gamma_ground_truth(GammaCase c, double v);

// (c0, c1) = (gamma(0), gamma(1)) for the case.
std::pair<double, double> gamma_endpoints(GammaCase c);

GammaCase gamma_case_from_string(const std::string& s);
std::string to_string(GammaCase c);

} // namespace patrec
