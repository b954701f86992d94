#pragma once

#include <functional>

namespace tgmc::quad {

/// Adaptive composite Simpson on [a, b] with absolute tolerance `abs_tol`.
double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                        double abs_tol, int max_depth = 50);

/// Same, with a relative tolerance against the running magnitude of the
/// integral; suited to integrands whose scale is not known in advance.
double adaptive_simpson_rel(const std::function<double(double)>& f, double a, double b,
                            double rel_tol, int max_depth = 50);

}  // namespace tgmc::quad
