#include "tgmc/quadrature.hpp"

#include <cmath>

namespace tgmc::quad {

namespace {

struct Panel {
  double a, b, fa, fm, fb, whole;
};

double simpson(double a, double b, double fa, double fm, double fb) {
  return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

double refine(const std::function<double(double)>& f, const Panel& p, double tol, int depth) {
  const double m = 0.5 * (p.a + p.b);
  const double lm = 0.5 * (p.a + m);
  const double rm = 0.5 * (m + p.b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = simpson(p.a, m, p.fa, flm, p.fm);
  const double right = simpson(m, p.b, p.fm, frm, p.fb);
  const double delta = left + right - p.whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol) {
    return left + right + delta / 15.0;
  }
  return refine(f, {p.a, m, p.fa, flm, p.fm, left}, 0.5 * tol, depth - 1) +
         refine(f, {m, p.b, p.fm, frm, p.fb, right}, 0.5 * tol, depth - 1);
}

// Splitting the range into a few initial panels keeps the recursion from
// accepting a coarse estimate on integrands that vanish at the 3 seed points.
constexpr int kInitialPanels = 8;

}  // namespace

double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                        double abs_tol, int max_depth) {
  if (b <= a) return 0.0;
  const double h = (b - a) / kInitialPanels;
  double total = 0.0;
  double fa = f(a);
  for (int i = 0; i < kInitialPanels; ++i) {
    const double lo = a + i * h;
    const double hi = (i + 1 == kInitialPanels) ? b : a + (i + 1) * h;
    const double fm = f(0.5 * (lo + hi));
    const double fb = f(hi);
    total += refine(f, {lo, hi, fa, fm, fb, simpson(lo, hi, fa, fm, fb)},
                    abs_tol / kInitialPanels, max_depth);
    fa = fb;
  }
  return total;
}

double adaptive_simpson_rel(const std::function<double(double)>& f, double a, double b,
                            double rel_tol, int max_depth) {
  if (b <= a) return 0.0;
  // Coarse pass to fix the scale, then an absolute-tolerance pass.
  const double coarse = adaptive_simpson(f, a, b, 1e-3 * std::abs(b - a) * std::abs(f(0.5 * (a + b))) + 1e-300, 12);
  const double scale = std::abs(coarse) > 0.0 ? std::abs(coarse) : 1e-300;
  return adaptive_simpson(f, a, b, rel_tol * scale, max_depth);
}

}  // namespace tgmc::quad
