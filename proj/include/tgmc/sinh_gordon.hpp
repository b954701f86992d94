#pragma once

#include "tgmc/parallel.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace tgmc {

class ShgParams {
public:
  /// gamma in (0, 2), mu > 0, R > 0.
  ShgParams(double gamma, double mu, double R);

  double gamma() const { return gamma_; }
  double mu() const { return mu_; }
  double R() const { return R_; }
  /// 2 / gamma + gamma / 2.
  double Q() const { return 2.0 / gamma_ + 0.5 * gamma_; }
  /// gamma Q, evaluated as 2 + gamma^2 / 2.
  double gamma_Q() const { return 2.0 + 0.5 * gamma_ * gamma_; }

private:
  double gamma_;
  double mu_;
  double R_;
};

/// Modified Bessel function of the second kind, order 0. Power series for
/// x <= 2; for larger x a trapezoid rule on e^x K0(x) = int_0^inf
/// exp(-x (cosh t - 1)) dt. Throws InvalidArgument for x <= 0.
double bessel_k0(double x);
/// log K0(x), finite for any x > 0.
double bessel_k0_log(double x);

struct PairedMassSample {
  double m_plus = 0.0;
  double m_minus = 0.0;
  double geometric_mean = 0.0;
  std::uint64_t seed = 0;
};

/// SelfNormalized masses at +gamma and -gamma of one GFF draw on the unit
/// torus (the second uses the negated field).
std::vector<PairedMassSample> paired_masses(double gamma, int n, const StreamPlan& plan,
                                            int workers = 1);

struct LogEstimate {
  double value = 0.0;
  double stderr_value = 0.0;
};

/// log Z_R = log mean_i exp(-log gamma + log K0(2 mu R^{gamma Q} g_i)).
/// Summands are sorted before reduction, so the result does not depend on
/// sample order. Requires >= 2 samples.
LogEstimate partition_estimate(const ShgParams& params, std::span<const PairedMassSample> samples);

/// -log Z_R / (mu^{2 / (gamma Q)} R^2), with propagated standard error.
LogEstimate free_energy(const ShgParams& params, std::span<const PairedMassSample> samples);

/// int_0^inf exp(-a (c + 1/c)) dc / c with a = mu R^{gamma Q} g, by adaptive
/// quadrature in s = log c. Equals 2 K0(2a).
double zero_mode_quadrature(const ShgParams& params, double geometric_mean);

}  // namespace tgmc
