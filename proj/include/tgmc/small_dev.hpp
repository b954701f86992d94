#pragma once

#include "tgmc/field_spec.hpp"
#include "tgmc/gmc.hpp"
#include "tgmc/grid_field.hpp"
#include "tgmc/parallel.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace tgmc {

/// Gaussian tilt nu of a base law mu: every mode with positive base
/// variance has its standard deviation scaled by min(|k| / R_tilt, 1).
class TiltSpec {
public:
  TiltSpec(FieldSpec base, double R_tilt);

  const FieldSpec& base() const { return base_; }
  double R_tilt() const { return R_tilt_; }

  /// 1 on modes with zero base variance.
  double ratio(Wavevector k) const;
  /// Ratios on the n-grid in FFT order, for synthesize().
  std::vector<double> grid_ratios(int n) const;

private:
  FieldSpec base_;
  double R_tilt_;
};

/// Ent(nu, mu) = sum over tilted k in Z^d, |k| <= k_cutoff, of
/// log(1 / ratio) + (ratio^2 - 1) / 2 (one real coordinate per k).
/// Throws NumericalFailure if some mode has ratio 0 and positive variance.
double entropy_exact(const TiltSpec& tilt, double k_cutoff);

struct WeightedSample {
  GridField field;
  double log_rn = 0.0;  // log d mu / d nu at the drawn field
};

/// Draw from nu. Requires R_tilt <= n / 2 so every tilted mode is on the grid.
WeightedSample sample_tilted(const TiltSpec& tilt, int n, std::uint64_t seed);

/// R_tilt = eps^{-2 / gamma^2}.
double default_R_tilt(double eps, double gamma);

struct ProbabilityEstimate {
  double eps = 0.0;
  double p_hat = 0.0;
  double stderr_p = 0.0;
  double ess = 0.0;
  std::uint64_t hits = 0;
  std::uint64_t samples = 0;
  /// Rule-of-three bound 3 / samples when there are no hits, else 0.
  double upper_95 = 0.0;
  /// ESS below 10.
  bool low_ess = false;
  double R_tilt = 0.0;  // 0 for the naive estimator
};

/// Total mass of the mean-removed field and log d mu / d nu for one draw.
struct TiltedMass {
  double mass = 0.0;
  double log_rn = 0.0;
};

/// Masses (whole torus, mean removed, given convention) of draws from the
/// tilted law; an empty R_tilt means no tilt.
std::vector<TiltedMass> tilted_masses(const FieldSpec& spec, double gamma,
                                      std::optional<double> R_tilt, int n, const StreamPlan& plan,
                                      int workers = 1,
                                      Convention convention = Convention::SelfNormalized);

/// Weighted estimate of P(mass < eps) from draws of any law: the mean of
/// 1{mass < eps} exp(log_rn). The ESS is taken over these summands.
ProbabilityEstimate estimate_probability(std::span<const TiltedMass> draws, double eps);

/// Binomial estimate of P(mass < eps) with standard error sqrt(p (1 - p) / N).
ProbabilityEstimate small_dev_naive(const FieldSpec& spec, double gamma, double eps, int n,
                                    const StreamPlan& plan, int workers = 1);

/// Importance-sampling estimate under the tilt at R_tilt (default
/// eps^{-2 / gamma^2}).
ProbabilityEstimate small_dev_is(const FieldSpec& spec, double gamma, double eps,
                                 std::optional<double> R_tilt, int n, const StreamPlan& plan,
                                 int workers = 1);

struct FitPoint {
  double eps;
  double p_hat;
  double stderr_p;
};

struct ExponentFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_se = 0.0;
  double ci_low = 0.0;   // 95%
  double ci_high = 0.0;
  std::size_t points = 0;
  bool weighted = false;
};

/// Least squares of log(-log p) on log(1 / eps), weighted by the delta-method
/// variances (stderr / (p |log p|))^2 when every stderr is positive.
/// Requires >= 3 points with distinct eps and p in (0, 1).
ExponentFit exponent_fit(std::span<const FitPoint> points);

enum class CkBranch { Branch1, Branch2, None };

const char* to_string(CkBranch b);

struct CkReport {
  CkBranch branch = CkBranch::None;
  int level = 0;                    // n for Branch2
  std::vector<std::size_t> cells;   // B or A_n, as indices into the inputs
  double measure = 0.0;             // |B| or |A_n|
  double required = 0.0;            // beta |D| or e^{-n} |D|
  double threshold = 0.0;           // -alpha or 4 alpha 2^n
  double domain_measure = 0.0;      // |D|
};

/// 8 (2/e)^kappa / (1 - 2/e).
double ck_tail_constant(int kappa);
/// Smallest kappa with ck_tail_constant(kappa) < 1.
int ck_min_kappa();

/// Exhaustive level-set scan for the dichotomy: either Z >= -alpha on a set
/// of measure >= beta |D|, or Z >= 4 alpha 2^n on a set of measure >=
/// e^{-n} |D| for some n >= kappa. Throws InvalidArgument for a nonzero
/// mean on D, alpha <= 0, or (kappa, beta) violating
/// 1 - beta > 4 beta 2^kappa + 8 (2/e)^kappa / (1 - 2/e).
CkReport ck_dichotomy(std::span<const double> values, std::span<const double> areas,
                      std::span<const std::uint8_t> D_mask, double alpha, int kappa = 12,
                      double beta = 1e-5);

struct ConcentrationRow {
  double t = 0.0;
  double p_hat = 0.0;
  double stderr_p = 0.0;
  std::uint64_t hits = 0;
  std::uint64_t samples = 0;
  double upper_95 = 0.0;
};

/// P(mean-removed mass of D <= |D| / 2) for the star field with scale
/// integral starting at t (TildeNormalized over D).
std::vector<ConcentrationRow> concentration_probe(const FieldSpec& star_spec, double gamma,
                                                  std::span<const double> t_list,
                                                  const Mask& D, int n, const StreamPlan& plan,
                                                  int workers = 1);

struct DvObjective {
  double objective = 0.0;
  double entropy_part = 0.0;
  double mass_part = 0.0;       // R_tilt^{d + gamma^2/2} E_nu[mass]
  double mass_part_stderr = 0.0;
  double mean_mass = 0.0;       // E_nu[mass]
  double mean_mass_stderr = 0.0;
};

DvObjective dv_objective(const FieldSpec& spec, double gamma, double R_tilt, int n,
                         const StreamPlan& plan, int workers = 1);

}  // namespace tgmc
