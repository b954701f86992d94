#include "tgmc/errors.hpp"
#include "tgmc/sinh_gordon.hpp"

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/special_functions/bessel.hpp>

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

using namespace tgmc;

namespace {

/// e^x K0(x) = int_0^inf exp(-x (cosh t - 1)) dt by exp-sinh quadrature.
double k0_scaled_oracle(double x) {
  boost::math::quadrature::exp_sinh<double> q;
  return q.integrate([x](double t) { return std::exp(-2.0 * x * std::pow(std::sinh(0.5 * t), 2)); }, 1e-15);
}

std::vector<double> logspace(double lo, double hi, int count) {
  std::vector<double> out;
  for (int i = 0; i < count; ++i) out.push_back(lo * std::pow(hi / lo, i / (count - 1.0)));
  return out;
}

std::vector<PairedMassSample> synthetic(std::size_t count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::lognormal_distribution<double> ln(0.0, 0.4);
  std::vector<PairedMassSample> out;
  for (std::size_t i = 0; i < count; ++i) {
    PairedMassSample s;
    s.m_plus = ln(rng);
    s.m_minus = ln(rng);
    s.geometric_mean = std::sqrt(s.m_plus * s.m_minus);
    s.seed = i;
    out.push_back(s);
  }
  return out;
}

}  // namespace

TEST_CASE("shg parameters") {
  for (double g = 0.01; g < 2.0; g += 0.01) {
    const ShgParams p(g, 1.0, 1.0);
    CHECK(std::abs(g * p.Q() - p.gamma_Q()) <= 1e-14 * p.gamma_Q());
    CHECK(p.Q() > 2.0);
  }
  CHECK(ShgParams(1.0, 1.0, 1.0).Q() == 2.5);
  CHECK(2.0 / ShgParams(1.0, 1.0, 1.0).gamma_Q() == doctest::Approx(0.8));
  CHECK_THROWS_AS(ShgParams(0.0, 1.0, 1.0), InvalidArgument);
  CHECK_THROWS_AS(ShgParams(2.0, 1.0, 1.0), InvalidArgument);
  CHECK_THROWS_AS(ShgParams(1.0, 0.0, 1.0), InvalidArgument);
  CHECK_THROWS_AS(ShgParams(1.0, 1.0, -2.0), InvalidArgument);
}

TEST_CASE("K0 reference values") {
  CHECK(bessel_k0(1.0) == doctest::Approx(0.4210244382407084).epsilon(1e-14));
  const double x = 1e-3;
  CHECK(std::abs(bessel_k0(x) + std::log(x / 2) + 0.5772156649) < 1e-4);
  // 30-digit reference: 2 K0(2) = 0.227787745499066871305...
  CHECK(2 * bessel_k0(2.0) == doctest::Approx(0.22778774549906687).epsilon(1e-13));
  CHECK_THROWS_AS(bessel_k0(0.0), InvalidArgument);
  CHECK_THROWS_AS(bessel_k0(-1.0), InvalidArgument);
  CHECK_THROWS_AS(bessel_k0_log(0.0), InvalidArgument);
}

TEST_CASE("K0 matches the integral representation on a log grid") {
  for (double x : logspace(1e-3, 500, 50)) {
    CAPTURE(x);
    const double oracle = k0_scaled_oracle(x) * std::exp(-x);
    CHECK(std::abs(bessel_k0(x) / oracle - 1) < 1e-10);
  }
}

TEST_CASE("K0 matches Boost across [1e-6, 700]") {
  for (double x : logspace(1e-6, 700, 200)) {
    CAPTURE(x);
    CHECK(std::abs(bessel_k0(x) / boost::math::cyl_bessel_k(0, x) - 1) < 1e-10);
  }
  // Log form stays finite where K0 underflows.
  for (double x : {800.0, 2048.0, 1e5, 1e8}) {
    const double l = bessel_k0_log(x);
    CHECK(std::isfinite(l));
    const double asym = -x + 0.5 * std::log(M_PI / (2 * x)) + std::log1p(-1 / (8 * x));
    CHECK(std::abs(l - asym) < 1e-6 * std::abs(l));
  }
  for (double x : {0.01, 1.0, 50.0, 600.0}) {
    CHECK(bessel_k0_log(x) == doctest::Approx(std::log(bessel_k0(x))).epsilon(1e-13));
  }
  // Strictly decreasing.
  double prev = INFINITY;
  for (double x : logspace(1e-4, 1e4, 300)) {
    const double l = bessel_k0_log(x);
    CHECK(l < prev);
    prev = l;
  }
}

TEST_CASE("zero-mode quadrature") {
  // a = mu R^{gamma Q} g = 1.
  CHECK(zero_mode_quadrature(ShgParams(1.0, 1.0, 1.0), 1.0) ==
        doctest::Approx(0.22778774549906687).epsilon(1e-11));
  // Independent quadrature of the c-integral.
  boost::math::quadrature::tanh_sinh<double> q;
  for (double a : {0.05, 0.3, 1.0, 4.0}) {
    const double direct = q.integrate([a](double c) { return std::exp(-a * (c + 1 / c)) / c; }, 0.0,
                                      std::numeric_limits<double>::infinity());
    CHECK(zero_mode_quadrature(ShgParams(1.0, a, 1.0), 1.0) == doctest::Approx(direct).epsilon(1e-10));
  }
  // Evenness of exp(-2a cosh s): the two half-lines agree.
  boost::math::quadrature::exp_sinh<double> e;
  const double a = 0.7;
  const double right = e.integrate([a](double s) { return std::exp(-2 * a * std::cosh(s)); }, 0.0, INFINITY);
  const double left = e.integrate([a](double s) { return std::exp(-2 * a * std::cosh(-s)); }, 0.0, INFINITY);
  CHECK(left == right);
  CHECK(zero_mode_quadrature(ShgParams(1.0, a, 1.0), 1.0) == doctest::Approx(2 * right).epsilon(1e-10));
  // a = 50 against the log-domain Bessel.
  CHECK(zero_mode_quadrature(ShgParams(1.0, 50.0, 1.0), 1.0) ==
        doctest::Approx(2 * std::exp(bessel_k0_log(100.0))).epsilon(1e-8));
  CHECK_THROWS_AS(zero_mode_quadrature(ShgParams(1.0, 1.0, 1.0), 0.0), InvalidArgument);
}

// The quoted decimal 0.2277877004 differs from 2 K0(2) = 0.2277877455 in
// the eighth digit. Kept as a recorded known failure.
TEST_CASE("zero-mode identity against the quoted decimal" * doctest::may_fail()) {
  CHECK(std::abs(zero_mode_quadrature(ShgParams(1.0, 1.0, 1.0), 1.0) - 0.2277877004) < 1e-8);
}

TEST_CASE("paired masses") {
  StreamPlan plan{31, 3000, 128};
  const auto zero = paired_masses(1e-300, 16, StreamPlan{1, 4, 4});
  for (const auto& s : zero) {
    CHECK(s.m_plus == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(s.m_minus == doctest::Approx(1.0).epsilon(1e-12));
  }
  const auto s = paired_masses(1.0, 32, plan);
  REQUIRE(s.size() == 3000);
  std::vector<double> gm;
  for (const auto& p : s) {
    CHECK(p.m_plus > 0.0);
    CHECK(p.m_minus > 0.0);
    CHECK(p.geometric_mean * p.geometric_mean == doctest::Approx(p.m_plus * p.m_minus).epsilon(1e-12));
    gm.push_back(p.geometric_mean);
  }
  const double mean = std::accumulate(gm.begin(), gm.end(), 0.0) / gm.size();
  double var = 0;
  for (double v : gm) var += (v - mean) * (v - mean);
  const double se = std::sqrt(var / (gm.size() - 1) / gm.size());
  CHECK(mean <= 1.0 + 4 * se);
  // Negating gamma swaps the pair exactly.
  const auto neg = paired_masses(-1.0, 32, StreamPlan{31, 10, 128});
  for (std::size_t i = 0; i < neg.size(); ++i) {
    CHECK(neg[i].m_plus == s[i].m_minus);
    CHECK(neg[i].m_minus == s[i].m_plus);
  }
  // Worker count does not matter.
  CHECK(paired_masses(1.0, 32, StreamPlan{31, 50, 8}, 1)[49].m_plus ==
        paired_masses(1.0, 32, StreamPlan{31, 50, 8}, 4)[49].m_plus);
}

TEST_CASE("partition estimate on a repeated sample is exact") {
  const ShgParams p(1.0, 1.3, 4.0);
  PairedMassSample s{1.2, 0.8, std::sqrt(0.96), 0};
  const std::vector<PairedMassSample> two = {s, s};
  const double x = 2 * 1.3 * std::pow(4.0, 2.5) * s.geometric_mean;
  const auto e = partition_estimate(p, two);
  CHECK(e.value == doctest::Approx(-std::log(1.0) + bessel_k0_log(x)).epsilon(1e-15));
  CHECK(e.stderr_value == 0.0);
  const std::vector<PairedMassSample> one = {s};
  CHECK_THROWS_AS(partition_estimate(p, one), InvalidArgument);
  const ShgParams q(0.5, 1.0, 1.0);
  const double xq = 2 * std::pow(1.0, q.gamma_Q()) * s.geometric_mean;
  CHECK(partition_estimate(q, two).value == doctest::Approx(-std::log(0.5) + bessel_k0_log(xq)).epsilon(1e-15));
}

TEST_CASE("partition estimate: order invariance, monotonicity, collapse") {
  auto samples = synthetic(5000, 3);
  const ShgParams p(1.0, 1.0, 8.0);
  const auto base = partition_estimate(p, samples);
  std::mt19937 rng(1);
  std::shuffle(samples.begin(), samples.end(), rng);
  const auto shuffled = partition_estimate(p, samples);
  CHECK(shuffled.value == base.value);
  CHECK(shuffled.stderr_value == base.stderr_value);

  double prev = INFINITY;
  for (double mu : {0.1, 0.5, 1.0, 2.0, 10.0}) {
    const double v = partition_estimate(ShgParams(1.0, mu, 2.0), samples).value;
    CHECK(v < prev);
    prev = v;
  }

  for (double g : {0.5, 1.0, 1.5}) {
    for (double mu : {0.3, 2.0, 7.0}) {
      for (double R : {1.0, 4.0, 16.0}) {
        const ShgParams a(g, mu, R);
        const ShgParams b(g, 1.0, std::pow(mu, 1.0 / a.gamma_Q()) * R);
        const double la = partition_estimate(a, samples).value;
        const double lb = partition_estimate(b, samples).value;
        CHECK(std::abs(la - lb) <= 1e-12 * std::abs(la));
        const double fa = free_energy(a, samples).value;
        const double fb = free_energy(ShgParams(g, 1.0, std::pow(mu, 1.0 / a.gamma_Q()) * R), samples).value;
        CHECK(std::abs(fa - fb) <= 1e-12 * std::abs(fa));
      }
    }
  }
}

TEST_CASE("free energy") {
  StreamPlan plan{2026, 2000, 256};
  const auto s = paired_masses(1.0, 64, plan);
  std::vector<double> f;
  for (double R : {4.0, 8.0, 16.0}) {
    const ShgParams p(1.0, 1.0, R);
    const auto fe = free_energy(p, s);
    const auto lz = partition_estimate(p, s);
    CHECK(std::isfinite(fe.value));
    CHECK(fe.value > 0.0);
    CHECK(fe.value == doctest::Approx(-lz.value / (R * R)).epsilon(1e-14));
    CHECK(fe.stderr_value == doctest::Approx(lz.stderr_value / (R * R)).epsilon(1e-14));
    f.push_back(fe.value);
  }
  CHECK(*std::max_element(f.begin(), f.end()) / *std::min_element(f.begin(), f.end()) <= 2.0);
  // mu enters through mu^{2 / (gamma Q)}.
  const ShgParams p(1.0, 3.0, 4.0);
  CHECK(free_energy(p, s).value ==
        doctest::Approx(-partition_estimate(p, s).value / (std::pow(3.0, 0.8) * 16)).epsilon(1e-14));
}
