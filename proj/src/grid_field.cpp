#include "tgmc/grid_field.hpp"

#include "tgmc/errors.hpp"
#include "tgmc/rng.hpp"

#include <cmath>
#include <numbers>

namespace tgmc {

// ---------------------------------------------------------------------------
// Mask

Mask::Mask(int dim, int n, std::vector<std::uint8_t> cells)
    : dim_(dim), n_(n), cells_(std::move(cells)), count_(0) {
  for (auto c : cells_) count_ += c != 0;
}

Mask Mask::full(int dim, int n) {
  const std::size_t total = dim == 1 ? n : static_cast<std::size_t>(n) * n;
  return Mask(dim, n, std::vector<std::uint8_t>(total, 1));
}

Mask Mask::box(int dim, int n, int x0, int x1, int y0, int y1) {
  const std::size_t total = dim == 1 ? n : static_cast<std::size_t>(n) * n;
  std::vector<std::uint8_t> cells(total, 0);
  for (std::size_t idx = 0; idx < total; ++idx) {
    const int x = static_cast<int>(idx % n);
    const int y = dim == 1 ? 0 : static_cast<int>(idx / n);
    const bool in_y = dim == 1 || (y >= y0 && y < y1);
    cells[idx] = (x >= x0 && x < x1 && in_y) ? 1 : 0;
  }
  return Mask(dim, n, std::move(cells));
}

Mask Mask::from_cells(int dim, int n, std::vector<std::uint8_t> cells) {
  const std::size_t total = dim == 1 ? n : static_cast<std::size_t>(n) * n;
  if (cells.size() != total) throw InvalidArgument("mask size does not match grid");
  return Mask(dim, n, std::move(cells));
}

// ---------------------------------------------------------------------------
// GridField

double GridField::cell_volume() const {
  const double h = side_length / n;
  return dim == 1 ? h : h * h;
}

double GridField::rms() const {
  double s = 0.0;
  for (double v : values) s += v * v;
  return values.empty() ? 0.0 : std::sqrt(s / values.size());
}

namespace {

void check_grid_size(int n) {
  if (!is_power_of_two(n) || n < 4) throw InvalidArgument("n must be a power of two >= 4");
}

// Per real coordinate x = ratio * sd * zeta (zeta standard normal under nu):
//   log(d mu / d nu)(x) = log(ratio) + zeta^2 (1 - ratio^2) / 2.
double log_rn_term(double ratio, double zeta) {
  return std::log(ratio) + 0.5 * zeta * zeta * (1.0 - ratio * ratio);
}

}  // namespace

namespace detail {

std::vector<fft::Complex> half_spectrum(const FieldSpec& spec, int n, std::uint64_t seed,
                                        std::span<const double> ratio, double* log_rn) {
  check_grid_size(n);
  const int dim = spec.dim();
  auto symbols = spec.grid_symbols(n);
  const std::size_t total = symbols->size();
  if (!ratio.empty() && ratio.size() != total) throw InvalidArgument("ratio grid size mismatch");

  const Philox4x32 gen(seed);
  const int hn = n / 2 + 1;
  const int nyq = n / 2;
  std::vector<fft::Complex> half(fft::half_size(dim, n));
  double lrn = 0.0;

  // Draws for the conjugate pair whose representative is `key`.
  auto draw = [&](Wavevector key) {
    return normal_pair(gen, {static_cast<std::uint32_t>(key.x), static_cast<std::uint32_t>(key.y), 0u, 0u});
  };
  auto scale_of = [&](std::size_t full_idx) {
    const double var = (*symbols)[full_idx];
    double r = ratio.empty() ? 1.0 : ratio[full_idx];
    if (var > 0.0 && r < 1.0) {
      if (!(r > 0.0)) {
        const Wavevector k = symbols->mode(full_idx);
        throw NumericalFailure("tilt ratio is 0 on mode (" + std::to_string(k.x) + "," +
                               std::to_string(k.y) + ") with positive variance");
      }
    }
    return std::pair{var, r};
  };

  const int rows = dim == 1 ? 1 : n;
  for (int iy = 0; iy < rows; ++iy) {
    for (int jx = 0; jx < hn; ++jx) {
      const std::size_t h = static_cast<std::size_t>(iy) * hn + jx;
      const std::size_t full = dim == 1 ? jx : static_cast<std::size_t>(iy) * n + jx;
      const int kx = jx == nyq ? -nyq : jx;
      const int ky = dim == 1 ? 0 : (iy < nyq ? iy : iy - n);
      const bool edge_plane = jx == 0 || jx == nyq;
      const bool self_conjugate = edge_plane && (ky == 0 || ky == -nyq);
      if (self_conjugate) {
        const auto [var, r] = scale_of(full);
        if (var <= 0.0) continue;
        const double zeta = draw({kx, ky}).first;
        half[h] = {r * std::sqrt(var) * zeta, 0.0};
        if (r < 1.0) lrn += log_rn_term(r, zeta);
        continue;
      }
      if (edge_plane && ky < 0) continue;  // filled from its partner below
      const auto [var, r] = scale_of(full);
      if (var <= 0.0) continue;
      const auto [a, b] = draw({kx, ky});
      const double sd = r * std::sqrt(0.5 * var);
      half[h] = {sd * a, sd * b};
      if (r < 1.0) lrn += log_rn_term(r, a) + log_rn_term(r, b);
      if (edge_plane) {
        const std::size_t partner = static_cast<std::size_t>((n - iy) % n) * hn + jx;
        half[partner] = std::conj(half[h]);
      }
    }
  }
  if (log_rn != nullptr) *log_rn = lrn;
  return half;
}

}  // namespace detail

Synthesis synthesize(const FieldSpec& spec, int n, std::uint64_t seed, std::span<const double> ratio) {
  Synthesis out;
  auto half = detail::half_spectrum(spec, n, seed, ratio, &out.log_rn);
  GridField& f = out.field;
  f.dim = spec.dim();
  f.side_length = spec.side_length();
  f.n = n;
  f.values.assign(spec.dim() == 1 ? n : static_cast<std::size_t>(n) * n, 0.0);
  f.spec_id = spec.id();
  f.seed = seed;
  fft::inverse_real(spec.dim(), n, half, f.values);
  return out;
}

GridField sample_field(const FieldSpec& spec, int n, std::uint64_t seed) {
  return synthesize(spec, n, seed).field;
}

GridField remove_mean(const GridField& field, const Mask& mask) {
  if (mask.size() != field.values.size()) throw InvalidArgument("mask does not match field grid");
  if (mask.count() == 0) throw InvalidArgument("remove_mean: empty mask");
  GridField out = field;
  if (field.demeaned_on && *field.demeaned_on == mask) return out;
  // Compensated mean over the mask.
  double sum = 0.0, comp = 0.0;
  for (std::size_t i = 0; i < field.values.size(); ++i) {
    if (!mask[i]) continue;
    const double v = field.values[i];
    const double t = sum + v;
    comp += std::abs(sum) >= std::abs(v) ? (sum - t) + v : (v - t) + sum;
    sum = t;
  }
  const double mean = (sum + comp) / static_cast<double>(mask.count());
  for (double& v : out.values) v -= mean;
  out.demeaned_on = std::make_shared<const Mask>(mask);
  return out;
}

}  // namespace tgmc
