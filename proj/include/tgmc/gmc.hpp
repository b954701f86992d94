#pragma once

#include "tgmc/field_spec.hpp"
#include "tgmc/grid_field.hpp"
#include "tgmc/parallel.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace tgmc {

enum class Convention { SelfNormalized, TildeNormalized };

const char* to_string(Convention c);
Convention parse_convention(const std::string& s);

/// Subcritical GMC parameters. The region defaults to the whole grid.
class GmcConfig {
public:
  GmcConfig(double gamma, Convention convention, int dim = 2,
            std::optional<Mask> region = std::nullopt);

  double gamma() const { return gamma_; }
  Convention convention() const { return convention_; }
  int dim() const { return dim_; }
  const std::optional<Mask>& region() const { return region_; }
  /// |gamma| within 5% of the critical value sqrt(2 dim).
  bool near_critical() const;

private:
  double gamma_;
  Convention convention_;
  int dim_;
  std::optional<Mask> region_;
};

struct MassSample {
  double mass = 0.0;
  int n = 0;
  std::string spec_id;
  std::uint64_t seed = 0;
  bool near_critical = false;
};

/// Riemann sum over the region of exp(gamma X - gamma^2 sigma^2 / 2) times
/// the cell volume. sigma^2 is the variance of the synthesized field
/// (SelfNormalized: of the field as given, including the effect of a prior
/// remove_mean; TildeNormalized: of the field before mean removal) minus
/// log R, so that a torus of side R carries the metric normalization.
MassSample gmc_mass(const GridField& field, const FieldSpec& spec, const GmcConfig& cfg);

/// Pointwise normalizing variance used by gmc_mass (size n^dim).
std::vector<double> normalizing_variance(const GridField& field, const FieldSpec& spec,
                                         Convention convention);

/// Same values with opposite sign; provenance is kept.
GridField negated(const GridField& field);

/// Mass of the GFF on T^2_R sampled with n R points per side (the physical
/// spacing of the unit torus at n points), and R^{2 + gamma^2/2} times the
/// unit-torus mass at n points. The two entries are equal in law. R n must
/// be a power of two.
std::pair<double, double> scaling_pair(double gamma, double R, int n, std::uint64_t seed_R,
                                       std::uint64_t seed_1);
inline std::pair<double, double> scaling_pair(double gamma, double R, int n, std::uint64_t seed) {
  return scaling_pair(gamma, R, n, seed, seed);
}

struct ConvergenceRow {
  int n = 0;
  double mean = 0.0;
  double stderr_mean = 0.0;
  /// |mean(n) - mean(previous n)| and the combined standard error; zero in
  /// the first row.
  double diff = 0.0;
  double diff_stderr = 0.0;
  /// SelfNormalized mean within 4 standard errors of the analytic mean.
  bool compatible = true;
  double expected_mean = 0.0;
};

/// Mean total mass over the seeds at each resolution (whole torus).
std::vector<ConvergenceRow> convergence_report(const FieldSpec& spec, double gamma,
                                               std::span<const int> n_list,
                                               std::span<const std::uint64_t> seeds,
                                               int workers = 1);

}  // namespace tgmc
