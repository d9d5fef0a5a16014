#pragma once

#include <functional>
#include <span>
#include <vector>

namespace dms {

using ScalarFunction = std::function<double(std::span<const double>)>;

/// Central differences (f(θ+h·e_i) − f(θ−h·e_i)) / 2h for every coordinate.
std::vector<double> finite_difference_gradient(const ScalarFunction& f,
                                               std::span<const double> theta, double step);

/// |a − b| / max(|a|, |b|, floor). The floor keeps coordinates whose true
/// gradient is ~0 from reporting cancellation noise as a relative error.
double relative_error(double a, double b, double floor = 1e-8);

double max_relative_error(std::span<const double> a, std::span<const double> b,
                          double floor = 1e-8);

}  // namespace dms
