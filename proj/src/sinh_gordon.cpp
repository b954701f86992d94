#include "tgmc/sinh_gordon.hpp"

#include "tgmc/errors.hpp"
#include "tgmc/field_spec.hpp"
#include "tgmc/gmc.hpp"
#include "tgmc/grid_field.hpp"
#include "tgmc/quadrature.hpp"
#include "tgmc/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace tgmc {

ShgParams::ShgParams(double gamma, double mu, double R) : gamma_(gamma), mu_(mu), R_(R) {
  if (!(gamma > 0.0 && gamma < 2.0)) throw InvalidArgument("shg: gamma must lie in (0, 2)");
  if (!(mu > 0.0) || !std::isfinite(mu)) throw InvalidArgument("shg: mu must be > 0");
  if (!(R > 0.0) || !std::isfinite(R)) throw InvalidArgument("shg: R must be > 0");
}

namespace {

double k0_series(double x) {
  // K0 = -(log(x/2) + gamma_E) I0 + sum_{k>=1} (x^2/4)^k / (k!)^2 H_k
  const double q = 0.25 * x * x;
  double term = 1.0, i0 = 1.0, tail = 0.0, harmonic = 0.0;
  for (int k = 1; k < 60; ++k) {
    term *= q / (static_cast<double>(k) * k);
    harmonic += 1.0 / k;
    i0 += term;
    tail += term * harmonic;
    if (term < 1e-18 * i0) break;
  }
  return -(std::log(0.5 * x) + std::numbers::egamma) * i0 + tail;
}

double k0_scaled_trapezoid(double x) {
  const double h = std::min(0.25, 0.5 / std::sqrt(x));
  double sum = 0.5;
  for (int j = 1;; ++j) {
    const double t = j * h;
    // cosh t - 1 = 2 sinh^2(t/2), exact for small t.
    const double s = std::sinh(0.5 * t);
    const double v = std::exp(-2.0 * x * s * s);
    sum += v;
    if (v < 1e-18 * sum) break;
  }
  return h * sum;
}

void check_positive(double x) {
  if (!(x > 0.0) || std::isnan(x)) {
    std::ostringstream msg;
    msg << "bessel_k0: argument " << x << " must be > 0";
    throw InvalidArgument(msg.str());
  }
}

}  // namespace

double bessel_k0(double x) {
  check_positive(x);
  if (x <= 2.0) return k0_series(x);
  return std::exp(-x) * k0_scaled_trapezoid(x);
}

double bessel_k0_log(double x) {
  check_positive(x);
  if (std::isinf(x)) return -INFINITY;
  if (x <= 2.0) return std::log(k0_series(x));
  return -x + std::log(k0_scaled_trapezoid(x));
}

std::vector<PairedMassSample> paired_masses(double gamma, int n, const StreamPlan& plan,
                                            int workers) {
  const FieldSpec spec = make_gff_spec(2, 1.0);
  const GmcConfig cfg(gamma, Convention::SelfNormalized, 2);
  return parallel_map<PairedMassSample>(plan, workers, [&](std::size_t, std::uint64_t seed) {
    const GridField f = sample_field(spec, n, seed);
    PairedMassSample s;
    s.m_plus = gmc_mass(f, spec, cfg).mass;
    s.m_minus = gmc_mass(negated(f), spec, cfg).mass;
    s.geometric_mean = std::sqrt(s.m_plus * s.m_minus);
    s.seed = seed;
    return s;
  });
}

LogEstimate partition_estimate(const ShgParams& params, std::span<const PairedMassSample> samples) {
  if (samples.size() < 2) throw InvalidArgument("partition_estimate: need at least 2 samples");
  const double log_scale = std::log(2.0) + std::log(params.mu()) + params.gamma_Q() * std::log(params.R());
  std::vector<double> s;
  s.reserve(samples.size());
  for (const auto& p : samples) {
    if (!(p.geometric_mean > 0.0)) throw InvalidArgument("partition_estimate: geometric mean must be > 0");
    const double x = std::exp(log_scale + std::log(p.geometric_mean));
    s.push_back(-std::log(params.gamma()) + bessel_k0_log(x));
  }
  std::sort(s.begin(), s.end());
  const double top = s.back();
  std::vector<double> w(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) w[i] = std::exp(s[i] - top);
  const double N = static_cast<double>(s.size());
  const double mean = stats::compensated_sum(w) / N;
  std::vector<double> dev(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) dev[i] = (w[i] - mean) * (w[i] - mean);
  const double var = stats::compensated_sum(dev) / (N - 1.0);
  return {top + std::log(mean), std::sqrt(var / N) / mean};
}

LogEstimate free_energy(const ShgParams& params, std::span<const PairedMassSample> samples) {
  const LogEstimate z = partition_estimate(params, samples);
  const double norm = std::pow(params.mu(), 2.0 / params.gamma_Q()) * params.R() * params.R();
  return {-z.value / norm, z.stderr_value / norm};
}

double zero_mode_quadrature(const ShgParams& params, double geometric_mean) {
  if (!(geometric_mean > 0.0)) throw InvalidArgument("zero_mode_quadrature: geometric mean must be > 0");
  const double a = params.mu() * std::pow(params.R(), params.gamma_Q()) * geometric_mean;
  // int_R e^{-2a cosh s} ds = 2 e^{-2a} int_0^inf e^{-4a sinh^2(s/2)} ds.
  auto f = [a](double s) {
    const double h = std::sinh(0.5 * s);
    return std::exp(-4.0 * a * h * h);
  };
  // Past s_max the integrand is below e^{-60}.
  const double s_max = 2.0 * std::asinh(std::sqrt(60.0 / (4.0 * a)));
  const double scaled = quad::adaptive_simpson_rel(f, 0.0, s_max, 1e-13);
  return 2.0 * std::exp(-2.0 * a) * scaled;
}

}  // namespace tgmc
