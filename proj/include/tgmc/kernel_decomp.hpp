#pragma once

#include "tgmc/field_spec.hpp"
#include "tgmc/grid_field.hpp"

#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace tgmc {

struct DecompParams {
  double xi = 0.5;
  int N = 8;
  double t = 0.0;
  double eps = 0.5;

  /// Throws InvalidArgument unless xi > 0, N >= 1, t >= 0, eps in (0, 1).
  void validate() const;
};

/// (1 / 2 pi)(|k|^-d - |k|^{-d - 2 xi}) for |k| > N, else 0.
double rough_symbol(double xi, int N, int dim, Wavevector k);

/// Spec of the rough part with the given parameters.
FieldSpec make_rough_spec(const DecompParams& params, int dim, double side_length);

struct SobolevProxy {
  int cutoff;
  double order;  // the weight is (1 + |k|^2)^{order / 2}
  double value;
};

/// Split of an input symbol into rough + smooth over the box |k_i| <= k_max.
struct DecompResult {
  FieldSpec rough_spec;
  DecompParams params;
  int k_max = 0;
  /// Remainder input(k) - rough(k) over the box [-k_max, k_max]^dim, x fastest.
  std::vector<double> smooth_symbol;
  /// Smallest remainder over 0 < |k| <= k_max and where it occurs.
  double min_remainder = 0.0;
  Wavevector min_location;
  /// Weighted partial sums at cutoffs k_max / 2 and k_max, orders d and d + xi.
  std::vector<SobolevProxy> sobolev_proxy;

  double smooth(Wavevector k) const;
};

inline constexpr int kDefaultDecompCutoff = 256;

DecompResult decompose(const FieldSpec& input, const DecompParams& params,
                       int k_max = kDefaultDecompCutoff);

struct SearchRow {
  int N;
  double xi;
  double min_remainder;
  Wavevector min_location;
  double sobolev_full;  // order d + xi at k_max
};

struct SearchResult {
  bool found = false;
  /// The first admissible candidate, or the least negative one if none is.
  DecompParams params;
  double min_remainder = 0.0;
  Wavevector min_location;
  std::vector<SearchRow> table;  // in scan order
};

std::vector<double> default_xi_grid();
std::vector<int> default_N_grid();

/// Scans N in increasing order and, for each N, xi in increasing order;
/// returns the first pair with min_remainder >= 0 over |k| <= k_max.
SearchResult search_params(const FieldSpec& input, std::span<const double> xi_grid,
                           std::span<const int> N_grid, int k_max = kDefaultDecompCutoff);

struct NondegeneracyOptions {
  /// Integer grid coordinates of each row (x, y). Empty means rows are
  /// already in canonical row-major order.
  std::vector<std::pair<int, int>> points;
  /// Leave the constant mode out of the test space.
  bool exclude_zero_mode = false;
};

/// Smallest eigenvalue of W^{-1/2} C_hat W^{-1/2}, where C_hat is the matrix
/// of the integral operator with kernel C(z_i, z_j) in the Fourier basis of
/// the m^dim grid and W = diag((1 + |k|^2)^{-dim/2}). The matrix is
/// row-major, size M x M with M = m^dim.
double nondegeneracy_delta(std::span<const double> kernel_matrix, int dim,
                           const NondegeneracyOptions& options = {});

/// Kernel matrix sum_k symbol(k) e^{2 pi i k (z_i - z_j)} over the m-grid
/// modes for points on the m^dim grid in canonical order.
std::vector<double> kernel_matrix_from_symbol(const FieldSpec& spec, int m);

struct DecomposedSample {
  GridField rough;
  GridField smooth;
};

/// Rough and smooth parts from independent streams mix64(seed, 0) and
/// mix64(seed, 1). Throws PreconditionViolation if the remainder is
/// negative on any mode of the n-grid.
DecomposedSample sample_decomposed(const FieldSpec& input, const DecompParams& params, int n,
                                   std::uint64_t seed);

}  // namespace tgmc
