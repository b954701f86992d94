#include "tgmc/small_dev.hpp"

#include "tgmc/accumulator.hpp"
#include "tgmc/errors.hpp"
#include "tgmc/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace tgmc {

TiltSpec::TiltSpec(FieldSpec base, double R_tilt) : base_(std::move(base)), R_tilt_(R_tilt) {
  if (!(R_tilt > 0.0) || !std::isfinite(R_tilt)) throw InvalidArgument("tilt: R_tilt must be > 0");
}

double TiltSpec::ratio(Wavevector k) const {
  if (!(base_.symbol(k) > 0.0)) return 1.0;
  return std::min(k.norm() / R_tilt_, 1.0);
}

std::vector<double> TiltSpec::grid_ratios(int n) const {
  const auto grid = base_.grid_symbols(n);
  std::vector<double> r(grid->size(), 1.0);
  for (std::size_t idx = 0; idx < r.size(); ++idx) {
    if ((*grid)[idx] > 0.0) r[idx] = std::min(grid->mode(idx).norm() / R_tilt_, 1.0);
  }
  return r;
}

double entropy_exact(const TiltSpec& tilt, double k_cutoff) {
  if (!(k_cutoff >= tilt.R_tilt())) throw InvalidArgument("entropy_exact: k_cutoff must be >= R_tilt");
  const int dim = tilt.base().dim();
  const int K = static_cast<int>(std::ceil(tilt.R_tilt()));
  const double R2 = tilt.R_tilt() * tilt.R_tilt();
  std::vector<double> terms;
  for (int ky = dim == 1 ? 0 : -K; ky <= (dim == 1 ? 0 : K); ++ky) {
    for (int kx = -K; kx <= K; ++kx) {
      const Wavevector k{kx, ky};
      const double k2 = k.norm2();
      if (k2 >= R2) continue;
      if (!(tilt.base().symbol(k) > 0.0)) continue;
      if (k2 == 0.0) {
        throw NumericalFailure("entropy_exact: ratio 0 on the zero mode with positive variance");
      }
      const double r2 = k2 / R2;
      terms.push_back(-0.5 * std::log(r2) + 0.5 * (r2 - 1.0));
    }
  }
  return stats::compensated_sum(terms);
}

WeightedSample sample_tilted(const TiltSpec& tilt, int n, std::uint64_t seed) {
  if (tilt.R_tilt() > n / 2.0) {
    std::ostringstream msg;
    msg << "sample_tilted: R_tilt = " << tilt.R_tilt() << " exceeds the grid Nyquist " << n / 2;
    throw InvalidArgument(msg.str());
  }
  const auto ratios = tilt.grid_ratios(n);
  Synthesis s = synthesize(tilt.base(), n, seed, ratios);
  return {std::move(s.field), s.log_rn};
}

double default_R_tilt(double eps, double gamma) {
  if (!(eps > 0.0) || gamma == 0.0) throw InvalidArgument("default_R_tilt: need eps > 0, gamma != 0");
  return std::pow(eps, -2.0 / (gamma * gamma));
}

std::vector<TiltedMass> tilted_masses(const FieldSpec& spec, double gamma,
                                      std::optional<double> R_tilt, int n, const StreamPlan& plan,
                                      int workers, Convention convention) {
  const GmcConfig cfg(gamma, convention, spec.dim());
  const Mask full = Mask::full(spec.dim(), n);
  std::optional<TiltSpec> tilt;
  std::vector<double> ratios;
  if (R_tilt) {
    tilt.emplace(spec, *R_tilt);
    if (*R_tilt > n / 2.0) throw InvalidArgument("tilted_masses: R_tilt exceeds the grid Nyquist");
    ratios = tilt->grid_ratios(n);
  }
  return parallel_map<TiltedMass>(plan, workers, [&](std::size_t, std::uint64_t seed) {
    Synthesis s = synthesize(spec, n, seed, ratios);
    const GridField f = remove_mean(s.field, full);
    return TiltedMass{gmc_mass(f, spec, cfg).mass, s.log_rn};
  });
}

ProbabilityEstimate estimate_probability(std::span<const TiltedMass> draws, double eps) {
  if (!(eps >= 0.0)) throw InvalidArgument("estimate_probability: eps must be >= 0");
  McAccumulator acc;
  ProbabilityEstimate est;
  est.eps = eps;
  for (const auto& d : draws) {
    const bool hit = d.mass < eps;
    est.hits += hit;
    acc.push_log(hit ? d.log_rn : -std::numeric_limits<double>::infinity());
  }
  est.samples = acc.count();
  est.p_hat = acc.mean();
  est.stderr_p = acc.stderr_mean();
  est.ess = acc.ess();
  est.low_ess = est.ess < 10.0;
  if (est.hits == 0 && est.samples > 0) est.upper_95 = 3.0 / static_cast<double>(est.samples);
  return est;
}

ProbabilityEstimate small_dev_naive(const FieldSpec& spec, double gamma, double eps, int n,
                                    const StreamPlan& plan, int workers) {
  if (!(eps >= 0.0)) throw InvalidArgument("small_dev_naive: eps must be >= 0");
  const auto draws = tilted_masses(spec, gamma, std::nullopt, n, plan, workers);
  ProbabilityEstimate est;
  est.eps = eps;
  est.samples = draws.size();
  for (const auto& d : draws) est.hits += d.mass < eps;
  if (est.samples == 0) return est;
  const double N = static_cast<double>(est.samples);
  est.p_hat = static_cast<double>(est.hits) / N;
  est.stderr_p = std::sqrt(est.p_hat * (1.0 - est.p_hat) / N);
  est.ess = static_cast<double>(est.hits);
  if (est.hits == 0) est.upper_95 = 3.0 / N;
  return est;
}

ProbabilityEstimate small_dev_is(const FieldSpec& spec, double gamma, double eps,
                                 std::optional<double> R_tilt, int n, const StreamPlan& plan,
                                 int workers) {
  if (!(eps > 0.0)) throw InvalidArgument("small_dev_is: eps must be > 0");
  const double R = R_tilt.value_or(default_R_tilt(eps, gamma));
  const auto draws = tilted_masses(spec, gamma, R, n, plan, workers);
  ProbabilityEstimate est = estimate_probability(draws, eps);
  est.R_tilt = R;
  return est;
}

ExponentFit exponent_fit(std::span<const FitPoint> points) {
  if (points.size() < 3) throw InvalidArgument("exponent_fit: need at least 3 points");
  std::vector<double> eps;
  for (const auto& p : points) {
    if (!(p.p_hat > 0.0 && p.p_hat < 1.0)) {
      std::ostringstream msg;
      msg << "exponent_fit: p_hat = " << p.p_hat << " at eps = " << p.eps << " is outside (0, 1)";
      throw InvalidArgument(msg.str());
    }
    if (!(p.eps > 0.0)) throw InvalidArgument("exponent_fit: eps must be > 0");
    eps.push_back(p.eps);
  }
  std::sort(eps.begin(), eps.end());
  if (std::adjacent_find(eps.begin(), eps.end()) != eps.end()) {
    throw InvalidArgument("exponent_fit: repeated eps values give a degenerate design");
  }
  const bool weighted =
      std::all_of(points.begin(), points.end(), [](const FitPoint& p) { return p.stderr_p > 0.0; });
  std::vector<double> x, y, w;
  for (const auto& p : points) {
    const double lp = std::log(p.p_hat);
    x.push_back(-std::log(p.eps));
    y.push_back(std::log(-lp));
    w.push_back(weighted ? std::pow(p.p_hat * std::abs(lp) / p.stderr_p, 2) : 1.0);
  }
  const auto fit = stats::weighted_linear_fit(x, y, w);
  ExponentFit out;
  out.slope = fit.slope;
  out.intercept = fit.intercept;
  out.points = points.size();
  out.weighted = weighted;
  if (weighted) {
    out.slope_se = fit.slope_se;
  } else {
    // Residual-based error for unweighted data.
    out.slope_se = fit.slope_se * std::sqrt(fit.chi2 / static_cast<double>(points.size() - 2));
  }
  out.ci_low = out.slope - 1.96 * out.slope_se;
  out.ci_high = out.slope + 1.96 * out.slope_se;
  return out;
}

const char* to_string(CkBranch b) {
  switch (b) {
    case CkBranch::Branch1: return "branch1";
    case CkBranch::Branch2: return "branch2";
    case CkBranch::None: return "none";
  }
  return "?";
}

double ck_tail_constant(int kappa) {
  const double q = 2.0 / std::exp(1.0);
  return 8.0 * std::pow(q, kappa) / (1.0 - q);
}

int ck_min_kappa() {
  int k = 1;
  while (!(ck_tail_constant(k) < 1.0)) ++k;
  return k;
}

CkReport ck_dichotomy(std::span<const double> values, std::span<const double> areas,
                      std::span<const std::uint8_t> D_mask, double alpha, int kappa, double beta) {
  if (values.size() != areas.size() || values.size() != D_mask.size()) {
    throw InvalidArgument("ck_dichotomy: values, areas and mask differ in size");
  }
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw InvalidArgument("ck_dichotomy: alpha must be > 0");
  if (kappa < 1 || !(ck_tail_constant(kappa) < 1.0)) {
    std::ostringstream msg;
    msg << "ck_dichotomy: kappa = " << kappa << " gives 8 (2/e)^kappa / (1 - 2/e) = "
        << ck_tail_constant(kappa) << " >= 1";
    throw InvalidArgument(msg.str());
  }
  if (!(beta > 0.0) || !(1.0 - beta > 4.0 * beta * std::ldexp(1.0, kappa) + ck_tail_constant(kappa))) {
    std::ostringstream msg;
    msg << "ck_dichotomy: beta = " << beta << " is too large for kappa = " << kappa;
    throw InvalidArgument(msg.str());
  }

  std::vector<std::size_t> cells;
  double measure = 0.0, first = 0.0, second = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!D_mask[i]) continue;
    if (!(areas[i] > 0.0)) throw InvalidArgument("ck_dichotomy: cell areas must be > 0");
    if (!std::isfinite(values[i])) throw InvalidArgument("ck_dichotomy: non-finite value");
    cells.push_back(i);
    measure += areas[i];
    first += areas[i] * values[i];
    second += areas[i] * values[i] * values[i];
  }
  if (cells.empty()) throw InvalidArgument("ck_dichotomy: empty domain");
  const double mean = first / measure;
  const double rms = std::sqrt(second / measure);
  if (std::abs(mean) > 1e-9 * rms) {
    std::ostringstream msg;
    msg << "ck_dichotomy: mean over D is " << mean << ", not zero (rms " << rms << ")";
    throw InvalidArgument(msg.str());
  }

  CkReport rep;
  rep.domain_measure = measure;

  // Branch 1.
  double b_measure = 0.0;
  std::vector<std::size_t> b_cells;
  for (std::size_t i : cells) {
    if (values[i] >= -alpha) {
      b_cells.push_back(i);
      b_measure += areas[i];
    }
  }
  if (b_measure >= beta * measure) {
    rep.branch = CkBranch::Branch1;
    rep.cells = std::move(b_cells);
    rep.measure = b_measure;
    rep.required = beta * measure;
    rep.threshold = -alpha;
    return rep;
  }

  // Branch 2: scan levels n >= kappa using cumulative measures of the
  // cells sorted by decreasing value.
  std::vector<std::size_t> order = cells;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
  std::vector<double> cumulative(order.size());
  double acc = 0.0;
  for (std::size_t j = 0; j < order.size(); ++j) cumulative[j] = acc += areas[order[j]];
  const double vmax = values[order.front()];
  for (int lvl = kappa;; ++lvl) {
    const double thr = 4.0 * alpha * std::ldexp(1.0, lvl);
    if (!(thr <= vmax)) break;
    // Number of cells with value >= thr.
    const auto count = static_cast<std::size_t>(
        std::partition_point(order.begin(), order.end(),
                             [&](std::size_t i) { return values[i] >= thr; }) -
        order.begin());
    const double a_measure = count ? cumulative[count - 1] : 0.0;
    const double need = std::exp(-static_cast<double>(lvl)) * measure;
    if (a_measure >= need) {
      rep.branch = CkBranch::Branch2;
      rep.level = lvl;
      rep.cells.assign(order.begin(), order.begin() + count);
      std::sort(rep.cells.begin(), rep.cells.end());
      rep.measure = a_measure;
      rep.required = need;
      rep.threshold = thr;
      return rep;
    }
  }
  return rep;
}

std::vector<ConcentrationRow> concentration_probe(const FieldSpec& star_spec, double gamma,
                                                  std::span<const double> t_list, const Mask& D,
                                                  int n, const StreamPlan& plan, int workers) {
  if (star_spec.kind() != FieldKind::Star || !star_spec.seed_covariance()) {
    throw InvalidArgument("concentration_probe: a star-scale spec is required");
  }
  if (D.n() != n || D.dim() != star_spec.dim()) throw InvalidArgument("concentration_probe: mask grid mismatch");
  if (D.count() == 0) throw InvalidArgument("concentration_probe: empty region");
  const int dim = star_spec.dim();
  const double cell = std::pow(star_spec.side_length() / n, dim);
  const double d_measure = static_cast<double>(D.count()) * cell;
  const GmcConfig cfg(gamma, Convention::TildeNormalized, dim, D);
  const StarParams sp = *star_spec.star();

  std::vector<ConcentrationRow> rows;
  for (double t : t_list) {
    if (!(d_measure >= std::exp(-dim * t))) {
      std::ostringstream msg;
      msg << "concentration_probe: |D| = " << d_measure << " < e^{-d t} at t = " << t;
      throw InvalidArgument(msg.str());
    }
    const FieldSpec spec_t = make_star_spec(*star_spec.seed_covariance(), sp.xi, t, sp.t_high, dim,
                                            star_spec.side_length(), star_spec.reference_n());
    const auto masses = parallel_map<double>(plan, workers, [&](std::size_t, std::uint64_t seed) {
      return gmc_mass(remove_mean(sample_field(spec_t, n, seed), D), spec_t, cfg).mass;
    });
    ConcentrationRow row;
    row.t = t;
    row.samples = masses.size();
    for (double m : masses) row.hits += m <= 0.5 * d_measure;
    const double N = static_cast<double>(row.samples);
    row.p_hat = N > 0 ? row.hits / N : 0.0;
    row.stderr_p = N > 0 ? std::sqrt(row.p_hat * (1.0 - row.p_hat) / N) : 0.0;
    if (row.hits == 0 && N > 0) row.upper_95 = 3.0 / N;
    rows.push_back(row);
  }
  return rows;
}

DvObjective dv_objective(const FieldSpec& spec, double gamma, double R_tilt, int n,
                         const StreamPlan& plan, int workers) {
  const TiltSpec tilt(spec, R_tilt);
  const auto draws = tilted_masses(spec, gamma, R_tilt, n, plan, workers);
  RunningStats st;
  for (const auto& d : draws) st.push(d.mass);
  const double scale = std::pow(R_tilt, spec.dim() + 0.5 * gamma * gamma);
  DvObjective out;
  out.mean_mass = st.mean();
  out.mean_mass_stderr = st.stderr_mean();
  out.mass_part = scale * out.mean_mass;
  out.mass_part_stderr = scale * out.mean_mass_stderr;
  out.entropy_part = entropy_exact(tilt, R_tilt);
  out.objective = out.mass_part + out.entropy_part;
  return out;
}

}  // namespace tgmc
