#include "tgmc/errors.hpp"
#include "tgmc/fft.hpp"
#include "tgmc/field_spec.hpp"
#include "tgmc/gmc.hpp"
#include "tgmc/small_dev.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

using namespace tgmc;
using std::numbers::pi;

namespace {

const FieldSpec gff2 = make_gff_spec(2, 1.0);

double mean_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double stderr_of(const std::vector<double>& v) {
  const double m = mean_of(v);
  double s = 0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / (v.size() - 1.0) / v.size());
}

/// log d mu / d nu recomputed from the drawn field through its Fourier
/// coefficients: for each tilted k, log r + u^2 (1 / r^2 - 1) / 2 with u the
/// coefficient in base standard-deviation units.
double log_rn_oracle(const FieldSpec& spec, const TiltSpec& tilt, const GridField& f) {
  const int n = f.n;
  std::vector<fft::Complex> full(f.values.begin(), f.values.end());
  fft::complex_inplace(2, n, full, -1);
  double s = 0;
  for (int iy = 0; iy < n; ++iy) {
    for (int jx = 0; jx < n; ++jx) {
      const Wavevector k{jx < n / 2 ? jx : jx - n, iy < n / 2 ? iy : iy - n};
      const double var = spec.symbol(k);
      const double r = tilt.ratio(k);
      if (var <= 0 || r == 1.0) continue;
      const double u2 = std::norm(full[iy * n + jx] / double(n * n)) / var;
      s += std::log(r) + 0.5 * u2 * (1 / (r * r) - 1);
    }
  }
  return s;
}

/// Analytic E_nu[mass] for the mean-removed GFF on the whole torus:
/// exp(-gamma^2 / 2 sum_{|k| < R} symbol(k) (1 - ratio^2)).
double tilted_mean_mass(double gamma, double R) {
  double s = 0;
  const int K = static_cast<int>(std::ceil(R));
  for (int kx = -K; kx <= K; ++kx)
    for (int ky = -K; ky <= K; ++ky) {
      const double k2 = double(kx) * kx + double(ky) * ky;
      if (k2 == 0 || k2 >= R * R) continue;
      s += (1 - k2 / (R * R)) / (2 * pi * k2);
    }
  return std::exp(-0.5 * gamma * gamma * s);
}

}  // namespace

TEST_CASE("tilt ratios") {
  const TiltSpec t(gff2, 5.0);
  for (int kx = -8; kx <= 8; ++kx) {
    for (int ky = -8; ky <= 8; ++ky) {
      const Wavevector k{kx, ky};
      const double r = t.ratio(k);
      CHECK(r >= 0.0);
      CHECK(r <= 1.0);
      CHECK(r == t.ratio(-k));
      if (k.norm() > 5.0) CHECK(r == 1.0);
    }
  }
  CHECK(t.ratio({0, 0}) == 1.0);  // zero base variance
  CHECK(t.ratio({3, 4}) == 1.0);
  CHECK(t.ratio({3, 0}) == doctest::Approx(0.6));
  const auto g = t.grid_ratios(16);
  CHECK(g.size() == 256);
  CHECK(g[1] == doctest::Approx(0.2));
  CHECK_THROWS_AS(TiltSpec(gff2, 0.0), InvalidArgument);
  CHECK_THROWS_AS(TiltSpec(gff2, -1.0), InvalidArgument);
}

TEST_CASE("entropy examples") {
  CHECK(entropy_exact(TiltSpec(gff2, 1.0), 1.0) == 0.0);
  CHECK(entropy_exact(TiltSpec(gff2, 0.5), 1.0) == 0.0);
  const auto two = FieldSpec::custom(
      2, 1.0, [](Wavevector k) { return (k.norm2() > 0 && k.norm2() <= 4) ? 1.0 : 0.0; }, "two");
  CHECK(entropy_exact(TiltSpec(two, 2.0), 2.0) ==
        doctest::Approx(6 * std::log(2.0) - 2.5).epsilon(1e-14));
  CHECK(entropy_exact(TiltSpec(gff2, 2.0), 4.0) == doctest::Approx(1.658883).epsilon(1e-6));

  // Riemann-sum oracle of the integral over the unit disk:
  //   int (log(1/|x|) + (|x|^2 - 1) / 2) d^2x = pi / 4.
  const double R = 512;
  const double e = entropy_exact(TiltSpec(gff2, R), R);
  CHECK(std::abs(e / (R * R) / (pi / 4) - 1) < 0.02);

  const auto star = make_star_spec(SeedCovariance::bump_autocorrelation(2), 1.0, 0.0, INFINITY, 2, 1.0, 64);
  CHECK_THROWS_AS(entropy_exact(TiltSpec(star, 4.0), 4.0), NumericalFailure);
  CHECK_THROWS_AS(entropy_exact(TiltSpec(gff2, 4.0), 3.0), InvalidArgument);
}

TEST_CASE("entropy is nonnegative and shrinks as ratios move toward 1") {
  double prev = 0;
  for (double R : {1.5, 2.0, 3.0, 5.0, 8.0, 13.0, 21.0}) {
    const double e = entropy_exact(TiltSpec(gff2, R), R);
    CHECK(e >= 0.0);
    CHECK(e >= prev);  // larger R lowers every ratio
    prev = e;
  }
  // Per-coordinate term log(1/r) + (r^2 - 1)/2 is decreasing in r on (0, 1].
  double last = INFINITY;
  for (double r = 0.05; r <= 1.0; r += 0.05) {
    const double term = -std::log(r) + 0.5 * (r * r - 1);
    CHECK(term <= last);
    CHECK(term >= 0.0);
    last = term;
  }
}

TEST_CASE("untilted sampling is the base law exactly") {
  const TiltSpec t(gff2, 0.9);
  const auto w = sample_tilted(t, 32, 77);
  CHECK(w.log_rn == 0.0);
  CHECK(w.field.values == sample_field(gff2, 32, 77).values);
  CHECK_THROWS_AS(sample_tilted(TiltSpec(gff2, 20.0), 32, 1), InvalidArgument);
}

TEST_CASE("log_rn equals the density ratio recomputed from the field") {
  const TiltSpec t(gff2, 6.0);
  for (std::uint64_t seed : {1u, 2u, 3u, 4u}) {
    const auto w = sample_tilted(t, 32, seed);
    const double oracle = log_rn_oracle(gff2, t, w.field);
    CHECK(w.log_rn == doctest::Approx(oracle).epsilon(1e-9));
    // log(d nu / d mu) is the exact negation.
    CHECK(w.log_rn + (-oracle) == doctest::Approx(0.0).epsilon(1e-9));
  }
}

namespace {

std::vector<double> log_ratios(const TiltSpec& t, std::uint64_t master) {
  StreamPlan plan{master, 10000, 256};
  return parallel_map<double>(plan, 1, [&](std::size_t, std::uint64_t s) {
    return sample_tilted(t, 32, s).log_rn;
  });
}

}  // namespace

TEST_CASE("importance weights integrate to one") {
  // E_nu[w^2] is finite only when every ratio exceeds 1 / sqrt(2); at
  // R_tilt = 1.4 the four |k| = 1 modes carry ratio 0.714.
  const TiltSpec t(gff2, 1.4);
  std::vector<double> w;
  for (double l : log_ratios(t, 404)) w.push_back(std::exp(l));
  CHECK(std::abs(mean_of(w) - 1.0) < 4 * stderr_of(w));
}

TEST_CASE("average log ratio under the tilt is the entropy") {
  for (double R : {1.4, 4.0, 9.0}) {
    const TiltSpec t(gff2, R);
    std::vector<double> neg;
    for (double l : log_ratios(t, 405)) neg.push_back(-l);
    CAPTURE(R);
    CHECK(std::abs(mean_of(neg) - entropy_exact(t, R)) < 4 * stderr_of(neg));
  }
}

TEST_CASE("change of measure reproduces a base-law probability") {
  const int n = 32;
  const double gamma = 1.0;
  StreamPlan base_plan{1, 10000, 256}, tilt_plan{2, 10000, 256}, median_plan{3, 2001, 256};
  const auto med_draws = tilted_masses(gff2, gamma, std::nullopt, n, median_plan);
  std::vector<double> m;
  for (const auto& d : med_draws) m.push_back(d.mass);
  std::nth_element(m.begin(), m.begin() + 1000, m.end());
  const double median = m[1000];

  const auto naive = small_dev_naive(gff2, gamma, median, n, base_plan);
  CHECK(std::abs(naive.p_hat - 0.5) < 4 * naive.stderr_p);
  const auto is = small_dev_is(gff2, gamma, median, 3.0, n, tilt_plan);
  CHECK(std::abs(is.p_hat - naive.p_hat) < 4 * std::hypot(is.stderr_p, naive.stderr_p));
}

TEST_CASE("naive estimator edge cases") {
  StreamPlan plan{8, 500, 128};
  const auto all = small_dev_naive(gff2, 1.0, 1e6, 32, plan);
  CHECK(all.p_hat == 1.0);
  CHECK(all.stderr_p == 0.0);
  const auto none = small_dev_naive(gff2, 1.0, 0.0, 32, plan);
  CHECK(none.p_hat == 0.0);
  CHECK(none.hits == 0);
  CHECK(none.upper_95 == doctest::Approx(3.0 / 500));
}

TEST_CASE("is estimator without tilt matches the naive estimator") {
  StreamPlan plan{9, 2000, 128};
  const double eps = 0.6;
  const auto naive = small_dev_naive(gff2, 1.0, eps, 32, plan);
  const auto is = small_dev_is(gff2, 1.0, eps, 0.5, 32, plan);
  CHECK(is.hits == naive.hits);
  CHECK(is.p_hat == doctest::Approx(naive.p_hat).epsilon(1e-13));
  CHECK(is.ess == doctest::Approx(double(naive.hits)).epsilon(1e-9));
  CHECK(default_R_tilt(0.25, 1.0) == doctest::Approx(16.0));
  CHECK_THROWS_AS(small_dev_is(gff2, 1.0, 0.0, 2.0, 32, plan), InvalidArgument);
}

TEST_CASE("is and naive agree at p around 1e-2") {
  const int n = 32;
  const double gamma = 1.0;
  StreamPlan q_plan{21, 4000, 256}, a{22, 10000, 256}, b{23, 10000, 256};
  const auto qd = tilted_masses(gff2, gamma, std::nullopt, n, q_plan);
  std::vector<double> m;
  for (const auto& d : qd) m.push_back(d.mass);
  std::sort(m.begin(), m.end());
  const double eps = m[40];  // about the 1% quantile
  const auto naive = small_dev_naive(gff2, gamma, eps, n, a);
  const auto is = small_dev_is(gff2, gamma, eps, std::nullopt, n, b);
  CHECK(naive.p_hat > 0.0);
  CHECK(std::abs(is.p_hat - naive.p_hat) < 3 * std::hypot(is.stderr_p, naive.stderr_p));
  CHECK_FALSE(is.low_ess);
}

TEST_CASE("tilted mean mass: analytic value and decay bound") {
  const int n = 64;
  const double gamma = 1.0;
  std::vector<double> mean, se;
  for (double R : {8.0, 16.0, 32.0}) {
    StreamPlan plan{static_cast<std::uint64_t>(R), 4000, 256};
    const auto d = tilted_masses(gff2, gamma, R, n, plan);
    std::vector<double> m;
    for (const auto& x : d) m.push_back(x.mass);
    CHECK(std::abs(mean_of(m) - tilted_mean_mass(gamma, R)) < 4 * stderr_of(m));
    mean.push_back(mean_of(m));
    se.push_back(stderr_of(m));
  }
  // C carries the sampling error of the R = 8 estimate.
  const double C = mean[0] * std::pow(8.0, 0.5 * gamma * gamma);
  const double C_se = se[0] * std::pow(8.0, 0.5 * gamma * gamma);
  for (int i : {1, 2}) {
    const double scale = std::pow(8.0 * (1 << i), -0.5 * gamma * gamma);
    CHECK(mean[i] <= C * scale + 3 * std::hypot(se[i], C_se * scale));
  }
}

TEST_CASE("estimate_probability with weights") {
  std::vector<TiltedMass> d = {{0.1, std::log(0.5)}, {0.2, std::log(2.0)}, {5.0, 0.0}, {0.3, std::log(1.0)}};
  const auto e = estimate_probability(d, 0.25);
  CHECK(e.hits == 2);
  CHECK(e.samples == 4);
  CHECK(e.p_hat == doctest::Approx((0.5 + 2.0) / 4));
  CHECK(e.ess == doctest::Approx(2.5 * 2.5 / 4.25));
  CHECK(e.low_ess);
}

// ---------------------------------------------------------------------------
// Exponent fit

TEST_CASE("exponent fit recovers planted exponents") {
  for (double a : {4.0, 2.0, 1.3}) {
    std::vector<FitPoint> pts;
    for (double eps : {0.3, 0.4, 0.5, 0.6, 0.7}) {
      const double p = std::exp(-1e-2 * std::pow(eps, -a));
      pts.push_back({eps, p, 0.0});
    }
    const auto f = exponent_fit(pts);
    CHECK_FALSE(f.weighted);
    CHECK(std::abs(f.slope - a) < 1e-10);
    CHECK(f.intercept == doctest::Approx(std::log(1e-2)).epsilon(1e-9));
    CHECK(f.slope_se < 1e-8);
  }
  // Weighted path, still exact.
  std::vector<FitPoint> pts;
  for (double eps : {0.3, 0.45, 0.6}) pts.push_back({eps, std::exp(-0.05 * std::pow(eps, -4)), 0.01});
  const auto f = exponent_fit(pts);
  CHECK(f.weighted);
  CHECK(std::abs(f.slope - 4.0) < 1e-10);
  CHECK(f.ci_low < 4.0);
  CHECK(f.ci_high > 4.0);
  // Targets 2d / gamma^2.
  CHECK(2 * 2 / (1.0 * 1.0) == 4.0);
  CHECK(2 * 2 / (std::sqrt(2.0) * std::sqrt(2.0)) == doctest::Approx(2.0));
}

TEST_CASE("exponent fit validation") {
  std::vector<FitPoint> dup = {{0.3, 0.1, 0.01}, {0.3, 0.2, 0.01}, {0.5, 0.4, 0.01}};
  CHECK_THROWS_AS(exponent_fit(dup), InvalidArgument);
  std::vector<FitPoint> two = {{0.3, 0.1, 0.01}, {0.5, 0.4, 0.01}};
  CHECK_THROWS_AS(exponent_fit(two), InvalidArgument);
  std::vector<FitPoint> zero = {{0.3, 0.0, 0.01}, {0.4, 0.2, 0.01}, {0.5, 0.4, 0.01}};
  CHECK_THROWS_AS(exponent_fit(zero), InvalidArgument);
  std::vector<FitPoint> one = {{0.3, 0.1, 0.01}, {0.4, 0.2, 0.01}, {0.5, 1.0, 0.0}};
  CHECK_THROWS_AS(exponent_fit(one), InvalidArgument);
}

// ---------------------------------------------------------------------------
// Dichotomy

TEST_CASE("ck constants") {
  CHECK(ck_min_kappa() == 12);
  const double q = 2 / std::exp(1.0);
  CHECK(ck_tail_constant(12) == doctest::Approx(8 * std::pow(q, 12) / (1 - q)).epsilon(1e-14));
  CHECK(ck_tail_constant(12) < 1.0);
  CHECK(ck_tail_constant(11) > 1.0);
  CHECK(ck_tail_constant(12) == doctest::Approx(0.762).epsilon(1e-3));
  CHECK(ck_tail_constant(11) == doctest::Approx(1.0356).epsilon(1e-4));
  const std::vector<double> v(4, 0.0), a(4, 1.0);
  const std::vector<std::uint8_t> D(4, 1);
  CHECK_THROWS_AS(ck_dichotomy(v, a, D, 1.0, 11), InvalidArgument);
  CHECK_THROWS_AS(ck_dichotomy(v, a, D, 1.0, 12, 1e-3), InvalidArgument);
  CHECK_THROWS_AS(ck_dichotomy(v, a, D, 0.0), InvalidArgument);
  const std::vector<double> off = {1.0, 1.0, 1.0, -2.0};
  CHECK_THROWS_AS(ck_dichotomy(off, a, D, 1.0), InvalidArgument);
}

TEST_CASE("ck: zero function gives branch 1 on all of D") {
  const std::vector<double> v(10, 0.0), a(10, 0.1);
  std::vector<std::uint8_t> D(10, 1);
  D[3] = 0;
  const auto r = ck_dichotomy(v, a, D, 0.5);
  CHECK(r.branch == CkBranch::Branch1);
  CHECK(r.cells.size() == 9);
  CHECK(r.measure == doctest::Approx(0.9));
}

namespace {

/// Recount from scratch.
bool verify(const CkReport& r, const std::vector<double>& v, const std::vector<double>& a,
            const std::vector<std::uint8_t>& D, double alpha, double beta) {
  double dm = 0, m = 0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!D[i]) continue;
    dm += a[i];
    if (r.branch == CkBranch::Branch1 && v[i] >= -alpha) m += a[i];
    if (r.branch == CkBranch::Branch2 && v[i] >= 4 * alpha * std::ldexp(1.0, r.level)) m += a[i];
  }
  if (r.branch == CkBranch::Branch1) return m >= beta * dm * (1 - 1e-12);
  if (r.branch == CkBranch::Branch2) return r.level >= 12 && m >= std::exp(-r.level) * dm * (1 - 1e-12);
  return false;
}

}  // namespace

TEST_CASE("ck: a branch is always found") {
  std::mt19937_64 rng(12345);
  std::normal_distribution<double> normal;
  std::student_t_distribution<double> heavy(1.5);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  int branch2 = 0, total = 0;
  for (int trial = 0; trial < 3000; ++trial) {
    for (int gen = 0; gen < 3; ++gen) {
      const std::size_t m = 64;
      std::vector<double> v(m), a(m);
      std::vector<std::uint8_t> D(m, 1);
      for (auto& x : a) x = 0.5 + unif(rng);
      const double alpha = std::array{0.1, 1.0, 10.0}[trial % 3];
      if (gen == 0) {
        for (auto& x : v) x = normal(rng);
      } else if (gen == 1) {
        for (auto& x : v) x = heavy(rng);
      } else {
        // Two levels: one tiny cell high, the rest below -alpha.
        const double p = std::exp(std::log(1e-8) + unif(rng) * (std::log(1e-5) - std::log(1e-8)));
        const double low = alpha * (1.0 + 9.0 * unif(rng));
        double rest = 0;
        for (std::size_t i = 1; i < m; ++i) rest += a[i];
        a[0] = p * rest / (1 - p);
        for (auto& x : v) x = -low;
        v[0] = low * rest / a[0];
      }
      double mean = 0, meas = 0;
      for (std::size_t i = 0; i < m; ++i) {
        mean += v[i] * a[i];
        meas += a[i];
      }
      mean /= meas;
      for (auto& x : v) x -= mean;
      const auto r = ck_dichotomy(v, a, D, alpha);
      CHECK(r.branch != CkBranch::None);
      CHECK(verify(r, v, a, D, alpha, 1e-5));
      branch2 += r.branch == CkBranch::Branch2;
      ++total;
    }
  }
  CHECK(total == 9000);
  CHECK(branch2 >= 2500);  // the adversarial generator exercises branch 2
}

// ---------------------------------------------------------------------------
// Concentration and DV objective

TEST_CASE("concentration probe") {
  const auto star = make_star_spec(SeedCovariance::bump_autocorrelation(2), 1.0, 0.0, INFINITY, 2, 1.0, 64);
  const int n = 32;
  const auto D = Mask::box(2, n, 0, 16, 0, 16);
  StreamPlan plan{77, 2000, 256};
  const std::vector<double> ts = {0.7, 1.0, 1.5, 2.0, 2.5};
  const auto zero = concentration_probe(star, 0.0, ts, D, n, plan);
  for (const auto& r : zero) CHECK(r.p_hat == 0.0);

  const auto rows = concentration_probe(star, 1.6, ts, D, n, plan);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    CHECK(rows[i].p_hat <= rows[i - 1].p_hat + 3 * std::hypot(rows[i].stderr_p, rows[i - 1].stderr_p));
  }
  // Slope of log p against e^{2t} over the cells with 0 < p < 1.
  std::vector<double> x, y;
  for (const auto& r : rows) {
    if (r.p_hat > 0 && r.p_hat < 1) {
      x.push_back(std::exp(2 * r.t));
      y.push_back(std::log(r.p_hat));
    }
  }
  REQUIRE(x.size() >= 2);
  CHECK((y.back() - y.front()) / (x.back() - x.front()) < 0.0);
  CHECK(rows.back().hits == 0);
  CHECK(rows.back().upper_95 == doctest::Approx(3.0 / 2000));

  const auto tiny = Mask::box(2, n, 0, 2, 0, 2);
  CHECK_THROWS_AS(concentration_probe(star, 1.0, ts, tiny, n, plan), InvalidArgument);
  CHECK_THROWS_AS(concentration_probe(gff2, 1.0, ts, D, n, plan), InvalidArgument);
}

TEST_CASE("dv objective parts") {
  StreamPlan plan{5, 2000, 256};
  const auto flat = dv_objective(gff2, 1.0, 0.8, 32, plan);
  CHECK(flat.entropy_part == 0.0);
  CHECK(flat.objective == doctest::Approx(std::pow(0.8, 2.5) * flat.mean_mass).epsilon(1e-14));
  CHECK(std::abs(flat.mean_mass - 1.0) < 4 * flat.mean_mass_stderr);

  const double R = 16;
  const auto d = dv_objective(gff2, 1.0, R, 32, plan);
  CHECK(d.entropy_part == doctest::Approx(entropy_exact(TiltSpec(gff2, R), R)).epsilon(1e-14));
  CHECK(d.mass_part == doctest::Approx(std::pow(R, 2.5) * d.mean_mass).epsilon(1e-14));
  CHECK(d.objective == doctest::Approx(d.mass_part + d.entropy_part).epsilon(1e-14));
  CHECK(std::abs(d.mean_mass - tilted_mean_mass(1.0, R)) < 4 * d.mean_mass_stderr);
  // Entropy share per R^2 approaches pi / 4 from below.
  double prev = 0;
  for (double r : {8.0, 16.0, 32.0, 64.0}) {
    const double e = entropy_exact(TiltSpec(gff2, r), r) / (r * r);
    CHECK(e > prev);
    CHECK(e < pi / 4);
    prev = e;
  }
}
