#include "tgmc/stats.hpp"

#include "tgmc/errors.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace tgmc::stats {

double kolmogorov_q(double lambda) {
  if (lambda < 0.2) return 1.0;
  double sum = 0.0;
  for (int j = 1; j <= 100; ++j) {
    const double term = std::exp(-2.0 * j * j * lambda * lambda);
    sum += (j % 2 == 1 ? term : -term);
    if (term < 1e-17) break;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

KsResult ks_two_sample(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw InvalidArgument("ks_two_sample: empty sample");
  std::vector<double> x(a.begin(), a.end()), y(b.begin(), b.end());
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  const double m = x.size(), n = y.size();
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < x.size() && j < y.size()) {
    const double v = std::min(x[i], y[j]);
    while (i < x.size() && x[i] == v) ++i;
    while (j < y.size() && y[j] == v) ++j;
    d = std::max(d, std::abs(i / m - j / n));
  }
  const double ne = std::sqrt(m * n / (m + n));
  return {d, kolmogorov_q((ne + 0.12 + 0.11 / ne) * d)};
}

LinearFit weighted_linear_fit(std::span<const double> x, std::span<const double> y,
                              std::span<const double> w) {
  if (x.size() != y.size() || x.size() != w.size()) {
    throw InvalidArgument("weighted_linear_fit: size mismatch");
  }
  if (x.size() < 2) throw InvalidArgument("weighted_linear_fit: need at least two points");
  double sw = 0, sx = 0, sy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(w[i] > 0.0) || !std::isfinite(w[i])) {
      throw InvalidArgument("weighted_linear_fit: weights must be positive and finite");
    }
    sw += w[i];
    sx += w[i] * x[i];
    sy += w[i] * y[i];
  }
  const double xm = sx / sw, ym = sy / sw;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += w[i] * (x[i] - xm) * (x[i] - xm);
    sxy += w[i] * (x[i] - xm) * (y[i] - ym);
  }
  double scale = 0;
  for (std::size_t i = 0; i < x.size(); ++i) scale = std::max(scale, std::abs(x[i] - xm));
  if (!(sxx > 1e-24 * sw * std::max(scale * scale, 1.0)) || scale == 0.0) {
    throw InvalidArgument("weighted_linear_fit: degenerate design (all x equal)");
  }
  LinearFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = ym - fit.slope * xm;
  fit.slope_se = std::sqrt(1.0 / sxx);
  fit.intercept_se = std::sqrt(1.0 / sw + xm * xm / sxx);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - fit.intercept - fit.slope * x[i];
    fit.chi2 += w[i] * r * r;
  }
  return fit;
}

double compensated_sum(std::span<const double> v) {
  double s = 0.0, c = 0.0;
  for (double x : v) {
    const double t = s + x;
    c += std::abs(s) >= std::abs(x) ? (s - t) + x : (x - t) + s;
    s = t;
  }
  return s + c;
}

}  // namespace tgmc::stats
