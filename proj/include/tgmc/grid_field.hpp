#pragma once

#include "tgmc/fft.hpp"
#include "tgmc/field_spec.hpp"

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace tgmc {

/// Region indicator on an n^dim grid (row-major, x fastest).
class Mask {
public:
  static Mask full(int dim, int n);
  /// Cells with x in [x0, x1) and y in [y0, y1); y bounds ignored for dim 1.
  static Mask box(int dim, int n, int x0, int x1, int y0 = 0, int y1 = 1);
  static Mask from_cells(int dim, int n, std::vector<std::uint8_t> cells);

  int dim() const { return dim_; }
  int n() const { return n_; }
  std::size_t size() const { return cells_.size(); }
  std::size_t count() const { return count_; }
  bool operator[](std::size_t idx) const { return cells_[idx] != 0; }
  std::span<const std::uint8_t> cells() const { return cells_; }

  friend bool operator==(const Mask& a, const Mask& b) {
    return a.dim_ == b.dim_ && a.n_ == b.n_ && a.cells_ == b.cells_;
  }

private:
  Mask(int dim, int n, std::vector<std::uint8_t> cells);
  int dim_;
  int n_;
  std::vector<std::uint8_t> cells_;
  std::size_t count_;
};

/// Field samples on the n^dim periodic lattice of T^d_R.
struct GridField {
  int dim = 2;
  double side_length = 1.0;
  int n = 0;
  std::vector<double> values;
  std::string spec_id;
  std::uint64_t seed = 0;
  /// Set by remove_mean: the region whose average was subtracted.
  std::shared_ptr<const Mask> demeaned_on;

  std::size_t size() const { return values.size(); }
  double cell_volume() const;
  double rms() const;
};

/// Spectral synthesis on the Hermitian half lattice followed by an inverse
/// real FFT. Each conjugate pair {k, -k} draws its two Gaussians from a
/// Philox block addressed by (seed, k), so a mode receives the same draws at
/// every resolution that contains it. Deterministic in (spec, n, seed).
GridField sample_field(const FieldSpec& spec, int n, std::uint64_t seed);

/// Subtracts the mask average from every value. Applying it again with the
/// same mask returns the field unchanged.
GridField remove_mean(const GridField& field, const Mask& mask);

/// Synthesis with a per-mode standard-deviation ratio (full grid in FFT
/// order; empty span means ratio 1). Alongside the field it returns
///   log_rn = log(d mu / d nu)
/// at the drawn point, where mu is the law with ratio 1 and nu the law with
/// the given ratios; the sum runs over real Fourier coordinates.
struct Synthesis {
  GridField field;
  double log_rn = 0.0;
};
Synthesis synthesize(const FieldSpec& spec, int n, std::uint64_t seed,
                     std::span<const double> ratio = {});

namespace detail {
/// Half spectrum that synthesize() feeds to the inverse transform.
std::vector<fft::Complex> half_spectrum(const FieldSpec& spec, int n, std::uint64_t seed,
                                        std::span<const double> ratio, double* log_rn);
}  // namespace detail

}  // namespace tgmc
