#pragma once

#include <limits>
#include <vector>

namespace historic::detail {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

double log_sum_exp(double a, double b);
double log_sum_exp(const std::vector<double>& v);
std::size_t ipow(int k, int e);

}  // namespace historic::detail
