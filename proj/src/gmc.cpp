#include "tgmc/gmc.hpp"

#include "tgmc/accumulator.hpp"
#include "tgmc/errors.hpp"
#include "tgmc/fft.hpp"

#include <cmath>
#include <sstream>

namespace tgmc {

const char* to_string(Convention c) {
  return c == Convention::SelfNormalized ? "self" : "tilde";
}

Convention parse_convention(const std::string& s) {
  if (s == "self" || s == "SelfNormalized") return Convention::SelfNormalized;
  if (s == "tilde" || s == "TildeNormalized") return Convention::TildeNormalized;
  throw InvalidArgument("unknown convention '" + s + "' (expected self or tilde)");
}

GmcConfig::GmcConfig(double gamma, Convention convention, int dim, std::optional<Mask> region)
    : gamma_(gamma), convention_(convention), dim_(dim), region_(std::move(region)) {
  if (dim != 1 && dim != 2) throw InvalidArgument("gmc: dim must be 1 or 2");
  if (!std::isfinite(gamma) || !(std::abs(gamma) < std::sqrt(2.0 * dim))) {
    std::ostringstream msg;
    msg << "gmc: gamma = " << gamma << " is not subcritical (|gamma| < " << std::sqrt(2.0 * dim)
        << ")";
    throw InvalidArgument(msg.str());
  }
  if (region_ && region_->dim() != dim) throw InvalidArgument("gmc: region dimension mismatch");
}

bool GmcConfig::near_critical() const { return std::abs(gamma_) >= 0.95 * std::sqrt(2.0 * dim_); }

namespace {

void check_field(const GridField& field, const FieldSpec& spec) {
  if (field.dim != spec.dim()) throw InvalidArgument("gmc: field and spec dimensions differ");
  if (field.n < 2 || field.values.size() != (field.dim == 1 ? static_cast<std::size_t>(field.n)
                                                            : static_cast<std::size_t>(field.n) * field.n)) {
    throw InvalidArgument("gmc: field size does not match its grid");
  }
}

/// Cov(X(z), mean of X over the mask) for every grid point z.
std::vector<double> covariance_with_mask_mean(const FieldSpec& spec, int n, const Mask& mask) {
  const int dim = spec.dim();
  const auto grid = spec.grid_symbols(n);
  std::vector<double> indicator(mask.size());
  for (std::size_t i = 0; i < mask.size(); ++i) indicator[i] = mask[i] ? 1.0 : 0.0;
  std::vector<fft::Complex> half(fft::half_size(dim, n));
  fft::forward_real(dim, n, indicator, half);
  const int hn = n / 2 + 1;
  const double inv_count = 1.0 / static_cast<double>(mask.count());
  for (std::size_t h = 0; h < half.size(); ++h) {
    const std::size_t jx = h % hn, iy = dim == 1 ? 0 : h / hn;
    half[h] *= (*grid)[dim == 1 ? jx : iy * n + jx] * inv_count;
  }
  std::vector<double> out(mask.size());
  fft::inverse_real(dim, n, half, out);
  return out;
}

}  // namespace

std::vector<double> normalizing_variance(const GridField& field, const FieldSpec& spec,
                                         Convention convention) {
  check_field(field, spec);
  const auto grid = spec.grid_symbols(field.n);
  const double shift = std::log(spec.side_length());
  const double total = grid->total() - shift;
  if (convention == Convention::TildeNormalized || !field.demeaned_on) {
    return std::vector<double>(field.size(), total);
  }
  const Mask& a = *field.demeaned_on;
  if (a.count() == a.size()) {
    return std::vector<double>(field.size(), total - (*grid)[0]);
  }
  const auto c = covariance_with_mask_mean(spec, field.n, a);
  double vbar = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i]) vbar += c[i];
  }
  vbar /= static_cast<double>(a.count());
  std::vector<double> out(field.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = total - 2.0 * c[i] + vbar;
  return out;
}

MassSample gmc_mass(const GridField& field, const FieldSpec& spec, const GmcConfig& cfg) {
  check_field(field, spec);
  if (cfg.dim() != field.dim) throw InvalidArgument("gmc: config and field dimensions differ");
  if (cfg.convention() == Convention::TildeNormalized && !field.demeaned_on) {
    throw PreconditionViolation("gmc: TildeNormalized requires a mean-removed field");
  }
  const Mask* region = nullptr;
  if (cfg.region()) {
    region = &*cfg.region();
    if (region->n() != field.n) throw InvalidArgument("gmc: region grid differs from field grid");
    if (region->count() == 0) throw InvalidArgument("gmc: empty region");
  }
  const double g = cfg.gamma();
  const double half_g2 = 0.5 * g * g;
  const std::size_t total = field.size();
  double sum = 0.0;
  if (g == 0.0) {
    sum = static_cast<double>(region ? region->count() : total);
  } else {
    const bool constant = cfg.convention() == Convention::TildeNormalized || !field.demeaned_on ||
                          field.demeaned_on->count() == field.demeaned_on->size();
    std::vector<double> var;
    double s2 = 0.0;
    if (constant) {
      const auto grid = spec.grid_symbols(field.n);
      s2 = grid->total() - std::log(spec.side_length());
      if (cfg.convention() == Convention::SelfNormalized && field.demeaned_on) s2 -= (*grid)[0];
    } else {
      var = normalizing_variance(field, spec, cfg.convention());
    }
    for (std::size_t i = 0; i < total; ++i) {
      if (region && !(*region)[i]) continue;
      sum += std::exp(g * field.values[i] - half_g2 * (constant ? s2 : var[i]));
    }
  }
  MassSample out;
  out.mass = sum * field.cell_volume();
  out.n = field.n;
  out.spec_id = field.spec_id.empty() ? spec.id() : field.spec_id;
  out.seed = field.seed;
  out.near_critical = cfg.near_critical();
  if (!(out.mass > 0.0) || !std::isfinite(out.mass)) {
    std::ostringstream msg;
    msg << "gmc: mass " << out.mass << " is not a positive finite number (seed " << field.seed
        << ")";
    throw NumericalFailure(msg.str());
  }
  return out;
}

GridField negated(const GridField& field) {
  GridField out = field;
  for (double& v : out.values) v = -v;
  return out;
}

std::pair<double, double> scaling_pair(double gamma, double R, int n, std::uint64_t seed_R,
                                       std::uint64_t seed_1) {
  const double nR = R * n;
  if (!(R > 0.0) || nR != std::round(nR) || !is_power_of_two(static_cast<long>(nR))) {
    throw InvalidArgument("scaling_pair: R n must be a power of two");
  }
  const GmcConfig cfg(gamma, Convention::SelfNormalized, 2);
  const FieldSpec unit = make_gff_spec(2, 1.0);
  const double m1 = gmc_mass(sample_field(unit, n, seed_1), unit, cfg).mass;
  double mR;
  if (R == 1.0) {
    mR = n == static_cast<int>(nR) && seed_R == seed_1
             ? m1
             : gmc_mass(sample_field(unit, n, seed_R), unit, cfg).mass;
  } else {
    const FieldSpec big = make_gff_spec(2, R);
    mR = gmc_mass(sample_field(big, static_cast<int>(nR), seed_R), big, cfg).mass;
  }
  return {mR, std::pow(R, 2.0 + 0.5 * gamma * gamma) * m1};
}

std::vector<ConvergenceRow> convergence_report(const FieldSpec& spec, double gamma,
                                               std::span<const int> n_list,
                                               std::span<const std::uint64_t> seeds,
                                               int workers) {
  if (n_list.empty()) throw InvalidArgument("convergence_report: empty resolution list");
  for (std::size_t i = 0; i < n_list.size(); ++i) {
    if (!is_power_of_two(n_list[i]) || (i > 0 && n_list[i] <= n_list[i - 1])) {
      throw InvalidArgument("convergence_report: resolutions must be increasing powers of two");
    }
  }
  if (seeds.size() < 2) throw InvalidArgument("convergence_report: need at least two seeds");
  const GmcConfig cfg(gamma, Convention::SelfNormalized, spec.dim());
  const double volume = std::pow(spec.side_length(), spec.dim());
  const double expected = volume * std::pow(spec.side_length(), 0.5 * gamma * gamma);

  std::vector<ConvergenceRow> rows;
  StreamPlan plan{0, seeds.size(), 64};
  for (int n : n_list) {
    const auto masses = parallel_map<double>(plan, workers, [&](std::size_t g, std::uint64_t) {
      return gmc_mass(sample_field(spec, n, seeds[g]), spec, cfg).mass;
    });
    RunningStats st;
    for (double m : masses) st.push(m);
    ConvergenceRow row;
    row.n = n;
    row.mean = st.mean();
    row.stderr_mean = st.stderr_mean();
    row.expected_mean = expected;
    if (!rows.empty()) {
      row.diff = std::abs(row.mean - rows.back().mean);
      row.diff_stderr = std::hypot(row.stderr_mean, rows.back().stderr_mean);
    }
    row.compatible = std::abs(row.mean - expected) <= 4.0 * row.stderr_mean ||
                     std::abs(row.mean - expected) <= 1e-12 * expected;
    rows.push_back(row);
  }
  return rows;
}

}  // namespace tgmc
