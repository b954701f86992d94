#pragma once

#include <memory>
#include <vector>

namespace tgmc {

/// Radial seed covariance rho for star-scale kernels.
///
/// The concrete profile is rho = (phi * phi) / (phi * phi)(0), the normalized
/// autocorrelation of the standard bump phi(x) = exp(-1 / (1 - 16|x|^2)) on
/// B(0, 1/4). Autocorrelation makes rho positive definite, rho(0) = 1, and
/// supp rho = B(0, 1/2). The profile is tabulated once per dimension on a
/// fine radial grid and interpolated with 6-point Lagrange stencils.
class SeedCovariance {
public:
  static SeedCovariance bump_autocorrelation(int dim);

  double operator()(double r) const;

  int dim() const;
  double support_radius() const { return 0.5; }

  /// Fourier coefficients of x -> rho(d_T(x, 0)) on the n^dim grid of the unit
  /// torus, full grid in FFT order. Used as a positive-definiteness witness.
  std::vector<double> torus_symbol(int n) const;

  struct Table;

private:
  explicit SeedCovariance(std::shared_ptr<const Table> table) : table_(std::move(table)) {}
  std::shared_ptr<const Table> table_;
};

}  // namespace tgmc
