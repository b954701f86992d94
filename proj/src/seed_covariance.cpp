#include "tgmc/seed_covariance.hpp"

#include "tgmc/errors.hpp"
#include "tgmc/fft.hpp"

#include <boost/math/quadrature/gauss.hpp>

#include <cmath>
#include <numbers>

namespace tgmc {

struct SeedCovariance::Table {
  int dim = 0;
  double step = 0.0;
  std::vector<double> values;  // rho(i * step), i = 0..intervals, plus zero padding
};

namespace {

constexpr int kIntervals = 4096;
constexpr double kSupport = 0.5;
constexpr int kPad = 4;

double bump(double r) {
  const double q = 16.0 * r * r;
  return q < 1.0 ? std::exp(-1.0 / (1.0 - q)) : 0.0;
}

// (phi * phi)(r) in one dimension. The integrand is smooth with flat ends,
// so the trapezoid rule converges faster than any power of the step.
double autocorrelation_1d(double r) {
  const double lo = r - 0.25;
  const double hi = 0.25;
  if (hi <= lo) return 0.0;
  constexpr int m = 400;
  const double h = (hi - lo) / m;
  double sum = 0.0;
  for (int i = 1; i < m; ++i) {
    const double y = lo + i * h;
    sum += bump(y) * bump(y - r);
  }
  return sum * h;
}

// (phi * phi)(r) in two dimensions, in polar coordinates around the origin:
//   int_0^{1/4} s phi(s) int_0^{2 pi} phi(|s e_theta - r e_1|) dtheta ds.
// The angular integrand is even in theta and vanishes to all orders at the
// edge of its support cap, so the trapezoid rule on [0, theta_max] converges
// faster than any power.
double autocorrelation_2d(double r) {
  if (r >= kSupport) return 0.0;
  constexpr int m = 64;
  constexpr double quarter2 = 1.0 / 16.0;
  auto angular = [&](double s) {
    double theta_max = std::numbers::pi;
    if (s * r > 0.0) {
      const double c = (s * s + r * r - quarter2) / (2.0 * s * r);
      if (c >= 1.0) return 0.0;
      if (c > -1.0) theta_max = std::acos(c);
    }
    const double h = theta_max / m;
    double sum = 0.5 * (bump(std::abs(s - r)) + bump(std::sqrt(std::max(s * s + r * r - 2.0 * s * r * std::cos(theta_max), 0.0))));
    for (int i = 1; i < m; ++i) {
      const double d2 = s * s + r * r - 2.0 * s * r * std::cos(i * h);
      sum += bump(std::sqrt(std::max(d2, 0.0)));
    }
    return 2.0 * sum * h;
  };
  // Composite 20-point Gauss-Legendre in s: the s-integrand is smooth.
  constexpr int panels = 8;
  const double lo = std::max(0.0, r - 0.25);
  const double width = (0.25 - lo) / panels;
  double total = 0.0;
  for (int p = 0; p < panels; ++p) {
    total += boost::math::quadrature::gauss<double, 20>::integrate(
        [&](double s) { return s * bump(s) * angular(s); }, lo + p * width, lo + (p + 1) * width);
  }
  return total;
}

std::shared_ptr<const SeedCovariance::Table> build_table(int dim) {
  auto table = std::make_shared<SeedCovariance::Table>();
  table->dim = dim;
  table->step = kSupport / kIntervals;
  table->values.assign(kIntervals + 1 + kPad, 0.0);
  for (int i = 0; i < kIntervals; ++i) {
    const double r = i * table->step;
    table->values[i] = dim == 1 ? autocorrelation_1d(r) : autocorrelation_2d(r);
  }
  const double at_zero = table->values[0];
  for (auto& v : table->values) v /= at_zero;
  table->values[0] = 1.0;
  return table;
}

}  // namespace

SeedCovariance SeedCovariance::bump_autocorrelation(int dim) {
  if (dim != 1 && dim != 2) throw InvalidArgument("seed covariance: dim must be 1 or 2");
  if (dim == 1) {
    static const auto table1 = build_table(1);
    return SeedCovariance(table1);
  }
  static const auto table2 = build_table(2);
  return SeedCovariance(table2);
}

int SeedCovariance::dim() const { return table_->dim; }

double SeedCovariance::operator()(double r) const {
  r = std::abs(r);
  if (r >= kSupport) return 0.0;
  if (r == 0.0) return 1.0;
  const auto& v = table_->values;
  const double x = r / table_->step;
  int i0 = static_cast<int>(x) - 2;
  // Reflect the stencil at the origin: rho is even in r.
  auto at = [&](int i) { return v[static_cast<std::size_t>(std::abs(i))]; };
  double result = 0.0;
  for (int j = 0; j < 6; ++j) {
    double w = 1.0;
    const int ij = i0 + j;
    for (int m = 0; m < 6; ++m) {
      if (m == j) continue;
      w *= (x - (i0 + m)) / static_cast<double>(j - m);
    }
    result += w * at(ij);
  }
  return std::max(result, 0.0);
}

std::vector<double> SeedCovariance::torus_symbol(int n) const {
  const int dim = table_->dim;
  const std::size_t total = dim == 1 ? n : static_cast<std::size_t>(n) * n;
  std::vector<double> row(total);
  auto wrap = [n](int j) { return std::min(j, n - j) / static_cast<double>(n); };
  for (std::size_t idx = 0; idx < total; ++idx) {
    const int i = dim == 1 ? 0 : static_cast<int>(idx / n);
    const int j = static_cast<int>(idx % n);
    const double dx = wrap(j);
    const double dy = dim == 1 ? 0.0 : wrap(i);
    row[idx] = (*this)(std::hypot(dx, dy));
  }
  std::vector<fft::Complex> half(fft::half_size(dim, n));
  fft::forward_real(dim, n, row, half);
  // Expand the half spectrum to the full grid. The row is real and even, so
  // the coefficients are real.
  std::vector<double> symbol(total);
  const int hn = n / 2 + 1;
  const double norm = 1.0 / static_cast<double>(total);
  for (std::size_t idx = 0; idx < total; ++idx) {
    const int i = dim == 1 ? 0 : static_cast<int>(idx / n);
    int j = static_cast<int>(idx % n);
    int ii = i;
    if (j >= hn) {
      j = n - j;
      ii = (n - i) % n;
    }
    const std::size_t h = dim == 1 ? j : static_cast<std::size_t>(ii) * hn + j;
    symbol[idx] = half[h].real() * norm;
  }
  return symbol;
}

}  // namespace tgmc
