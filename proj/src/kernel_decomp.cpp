#include "tgmc/kernel_decomp.hpp"

#include "tgmc/errors.hpp"
#include "tgmc/fft.hpp"
#include "tgmc/rng.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace tgmc {

void DecompParams::validate() const {
  if (!(xi > 0.0)) throw InvalidArgument("decomp: xi must be > 0");
  if (N < 1) throw InvalidArgument("decomp: N must be >= 1");
  if (!(t >= 0.0)) throw InvalidArgument("decomp: t must be >= 0");
  if (!(eps > 0.0 && eps < 1.0)) throw InvalidArgument("decomp: eps must lie in (0, 1)");
}

double rough_symbol(double xi, int N, int dim, Wavevector k) {
  if (!(xi > 0.0)) throw InvalidArgument("rough_symbol: xi must be > 0");
  if (N < 0) throw InvalidArgument("rough_symbol: N must be >= 0");
  const double k2 = k.norm2();
  if (k2 == 0.0) {
    if (N == 0) throw InvalidArgument("rough_symbol: k = 0 with N = 0 is undefined");
    return 0.0;
  }
  if (k2 <= static_cast<double>(N) * N) return 0.0;
  const double a = std::pow(k2, -0.5 * dim);
  const double b = std::isinf(xi) ? 0.0 : a * std::pow(k2, -xi);
  return (a - b) / (2.0 * std::numbers::pi);
}

FieldSpec make_rough_spec(const DecompParams& params, int dim, double side_length) {
  params.validate();
  std::ostringstream id;
  id << "rough:d=" << dim << ":N=" << params.N << ":xi=" << params.xi;
  const double xi = params.xi;
  const int N = params.N;
  return FieldSpec::custom(
      dim, side_length, [xi, N, dim](Wavevector k) { return rough_symbol(xi, N, dim, k); },
      id.str());
}

namespace {

/// Input symbols on the box [-K, K]^dim, x fastest.
struct SymbolBox {
  int dim;
  int K;
  std::vector<double> values;

  int side() const { return 2 * K + 1; }
  Wavevector mode(std::size_t idx) const {
    const int s = side();
    return {static_cast<int>(idx % s) - K, dim == 1 ? 0 : static_cast<int>(idx / s) - K};
  }
};

SymbolBox input_box(const FieldSpec& input, int K) {
  SymbolBox box{input.dim(), K, {}};
  const std::size_t s = box.side();
  const std::size_t total = box.dim == 1 ? s : s * s;
  box.values.resize(total);
  for (std::size_t idx = 0; idx < total; ++idx) box.values[idx] = input.symbol(box.mode(idx));
  return box;
}

struct Scan {
  std::vector<double> smooth;
  double min_remainder = std::numeric_limits<double>::infinity();
  Wavevector where;
  std::vector<SobolevProxy> proxy;
};

Scan scan(const SymbolBox& box, const DecompParams& p) {
  Scan out;
  out.smooth.resize(box.values.size());
  const int d = box.dim;
  const double K2 = static_cast<double>(box.K) * box.K;
  const int half = box.K / 2;
  const double half2 = static_cast<double>(half) * half;
  const double orders[2] = {static_cast<double>(d), d + p.xi};
  double sums[2][2] = {{0, 0}, {0, 0}};
  for (std::size_t idx = 0; idx < box.values.size(); ++idx) {
    const Wavevector k = box.mode(idx);
    const double v = box.values[idx] - rough_symbol(p.xi, p.N, d, k);
    out.smooth[idx] = v;
    const double k2 = k.norm2();
    if (k2 > K2) continue;
    if (k2 > 0.0 && v < out.min_remainder) {
      out.min_remainder = v;
      out.where = k;
    }
    for (int o = 0; o < 2; ++o) {
      const double w = std::pow(1.0 + k2, 0.5 * orders[o]) * v;
      sums[o][1] += w;
      if (k2 <= half2) sums[o][0] += w;
    }
  }
  if (!std::isfinite(out.min_remainder)) out.min_remainder = 0.0;
  for (int o = 0; o < 2; ++o) {
    out.proxy.push_back({half, orders[o], sums[o][0]});
    out.proxy.push_back({box.K, orders[o], sums[o][1]});
  }
  return out;
}

}  // namespace

double DecompResult::smooth(Wavevector k) const {
  if (std::abs(k.x) > k_max || std::abs(k.y) > k_max) {
    throw InvalidArgument("DecompResult::smooth: mode outside the decomposition box");
  }
  const int s = 2 * k_max + 1;
  const std::size_t idx = rough_spec.dim() == 1
                              ? static_cast<std::size_t>(k.x + k_max)
                              : static_cast<std::size_t>(k.y + k_max) * s + (k.x + k_max);
  return smooth_symbol[idx];
}

DecompResult decompose(const FieldSpec& input, const DecompParams& params, int k_max) {
  params.validate();
  if (k_max < 4 * params.N) throw InvalidArgument("decompose: k_max must be >= 4 N");
  const SymbolBox box = input_box(input, k_max);
  Scan s = scan(box, params);
  DecompResult r{make_rough_spec(params, input.dim(), input.side_length()),
                 params,
                 k_max,
                 std::move(s.smooth),
                 s.min_remainder,
                 s.where,
                 std::move(s.proxy)};
  return r;
}

std::vector<double> default_xi_grid() { return {0.125, 0.25, 0.5, 1.0}; }
std::vector<int> default_N_grid() { return {2, 4, 8, 16, 32, 64}; }

SearchResult search_params(const FieldSpec& input, std::span<const double> xi_grid,
                           std::span<const int> N_grid, int k_max) {
  if (xi_grid.empty()) throw InvalidArgument("search_params: empty xi grid");
  if (N_grid.empty()) throw InvalidArgument("search_params: empty N grid");
  std::vector<double> xis(xi_grid.begin(), xi_grid.end());
  std::vector<int> Ns(N_grid.begin(), N_grid.end());
  std::stable_sort(xis.begin(), xis.end());
  std::stable_sort(Ns.begin(), Ns.end());
  if (k_max < 4 * Ns.back()) throw InvalidArgument("search_params: k_max must be >= 4 max(N)");
  const SymbolBox box = input_box(input, k_max);

  SearchResult result;
  double best = -std::numeric_limits<double>::infinity();
  for (int N : Ns) {
    for (double xi : xis) {
      DecompParams p{xi, N, 0.0, 0.5};
      p.validate();
      const Scan s = scan(box, p);
      result.table.push_back({N, xi, s.min_remainder, s.where, s.proxy.back().value});
      if (!result.found && s.min_remainder >= 0.0) {
        result.found = true;
        result.params = p;
        result.min_remainder = s.min_remainder;
        result.min_location = s.where;
      }
      if (!result.found && s.min_remainder > best) {
        best = s.min_remainder;
        result.params = p;
        result.min_remainder = s.min_remainder;
        result.min_location = s.where;
      }
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Nondegeneracy

double nondegeneracy_delta(std::span<const double> kernel_matrix, int dim,
                           const NondegeneracyOptions& options) {
  if (dim != 1 && dim != 2) throw InvalidArgument("nondegeneracy_delta: dim must be 1 or 2");
  const std::size_t total = kernel_matrix.size();
  const auto M = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(total))));
  if (M * M != total || M == 0) throw InvalidArgument("nondegeneracy_delta: matrix is not square");
  if (M > 4096) throw InvalidArgument("nondegeneracy_delta: matrix larger than 4096 x 4096");
  const int m = dim == 1 ? static_cast<int>(M)
                         : static_cast<int>(std::llround(std::sqrt(static_cast<double>(M))));
  if ((dim == 1 ? static_cast<std::size_t>(m) : static_cast<std::size_t>(m) * m) != M) {
    throw InvalidArgument("nondegeneracy_delta: size is not a full m^dim grid");
  }

  double scale = 0.0;
  for (double v : kernel_matrix) scale = std::max(scale, std::abs(v));
  for (std::size_t i = 0; i < M; ++i) {
    for (std::size_t j = i + 1; j < M; ++j) {
      const double a = kernel_matrix[i * M + j], b = kernel_matrix[j * M + i];
      if (std::abs(a - b) > 1e-10 * std::max(1.0, scale)) {
        std::ostringstream msg;
        msg << "nondegeneracy_delta: matrix not symmetric at (" << i << "," << j << ")";
        throw InvalidArgument(msg.str());
      }
    }
  }

  // Canonical position of each row.
  std::vector<std::size_t> pos(M);
  if (options.points.empty()) {
    for (std::size_t i = 0; i < M; ++i) pos[i] = i;
  } else {
    if (options.points.size() != M) throw InvalidArgument("nondegeneracy_delta: points size");
    std::vector<char> seen(M, 0);
    for (std::size_t i = 0; i < M; ++i) {
      const auto [x, y] = options.points[i];
      if (x < 0 || x >= m || y < 0 || (dim == 1 ? y != 0 : y >= m)) {
        throw InvalidArgument("nondegeneracy_delta: point outside grid");
      }
      pos[i] = dim == 1 ? x : static_cast<std::size_t>(y) * m + x;
      if (seen[pos[i]]++) throw InvalidArgument("nondegeneracy_delta: repeated point");
    }
  }

  std::vector<fft::Complex> a(M * M);
  for (std::size_t i = 0; i < M; ++i) {
    for (std::size_t j = 0; j < M; ++j) a[pos[i] * M + pos[j]] = kernel_matrix[i * M + j];
  }
  // Columns index z_j: transform each row with e^{+2 pi i l z_j}.
  for (std::size_t i = 0; i < M; ++i) fft::complex_inplace(dim, m, {a.data() + i * M, M}, +1);
  // Rows index z_i: transform each column with e^{-2 pi i k z_i}.
  std::vector<fft::Complex> col(M);
  for (std::size_t l = 0; l < M; ++l) {
    for (std::size_t i = 0; i < M; ++i) col[i] = a[i * M + l];
    fft::complex_inplace(dim, m, col, -1);
    for (std::size_t i = 0; i < M; ++i) a[i * M + l] = col[i];
  }

  auto component = [m](int j) { return j < m / 2 ? j : j - m; };
  std::vector<std::size_t> keep;
  std::vector<double> inv_sqrt_w;
  for (std::size_t idx = 0; idx < M; ++idx) {
    const int kx = component(static_cast<int>(idx % m));
    const int ky = dim == 1 ? 0 : component(static_cast<int>(idx / m));
    if (options.exclude_zero_mode && kx == 0 && ky == 0) continue;
    keep.push_back(idx);
    const double k2 = static_cast<double>(kx) * kx + static_cast<double>(ky) * ky;
    inv_sqrt_w.push_back(std::pow(1.0 + k2, 0.25 * dim));  // W^{-1/2}
  }
  if (keep.empty()) throw InvalidArgument("nondegeneracy_delta: empty test space");

  const double norm = 1.0 / (static_cast<double>(M) * M);
  const auto K = static_cast<Eigen::Index>(keep.size());
  Eigen::MatrixXcd H(K, K);
  for (Eigen::Index r = 0; r < K; ++r) {
    for (Eigen::Index c = 0; c < K; ++c) {
      H(r, c) = a[keep[r] * M + keep[c]] * (norm * inv_sqrt_w[r] * inv_sqrt_w[c]);
    }
  }
  const Eigen::MatrixXcd Hs = 0.5 * (H + H.adjoint());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(Hs, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw NumericalFailure("nondegeneracy_delta: eigen-solve failed");
  return solver.eigenvalues().minCoeff();
}

std::vector<double> kernel_matrix_from_symbol(const FieldSpec& spec, int m) {
  const int dim = spec.dim();
  if (m < 2) throw InvalidArgument("kernel_matrix_from_symbol: m must be >= 2");
  const std::size_t M = dim == 1 ? m : static_cast<std::size_t>(m) * m;
  // Kernel row C(z - 0) on the grid by brute-force mode sum (small m only).
  auto component = [m](int j) { return j < m / 2 ? j : j - m; };
  std::vector<double> sym(M);
  for (std::size_t idx = 0; idx < M; ++idx) {
    sym[idx] = spec.symbol({component(static_cast<int>(idx % m)),
                            dim == 1 ? 0 : component(static_cast<int>(idx / m))});
  }
  std::vector<double> row(M, 0.0);
  for (std::size_t p = 0; p < M; ++p) {
    const int px = static_cast<int>(p % m), py = dim == 1 ? 0 : static_cast<int>(p / m);
    double s = 0.0;
    for (std::size_t idx = 0; idx < M; ++idx) {
      if (sym[idx] == 0.0) continue;
      const int kx = component(static_cast<int>(idx % m));
      const int ky = dim == 1 ? 0 : component(static_cast<int>(idx / m));
      // Reduce the phase mod m so the angle is exact.
      const long ph = ((static_cast<long>(kx) * px + static_cast<long>(ky) * py) % m + m) % m;
      s += sym[idx] * std::cos(2.0 * std::numbers::pi * static_cast<double>(ph) / m);
    }
    row[p] = s;
  }
  std::vector<double> out(M * M);
  for (std::size_t i = 0; i < M; ++i) {
    const int ix = static_cast<int>(i % m), iy = dim == 1 ? 0 : static_cast<int>(i / m);
    for (std::size_t j = 0; j < M; ++j) {
      const int jx = static_cast<int>(j % m), jy = dim == 1 ? 0 : static_cast<int>(j / m);
      const int dx = ((ix - jx) % m + m) % m, dy = ((iy - jy) % m + m) % m;
      out[i * M + j] = row[dim == 1 ? dx : static_cast<std::size_t>(dy) * m + dx];
    }
  }
  return out;
}

DecomposedSample sample_decomposed(const FieldSpec& input, const DecompParams& params, int n,
                                   std::uint64_t seed) {
  params.validate();
  const FieldSpec rough = make_rough_spec(params, input.dim(), input.side_length());
  const double xi = params.xi;
  const int N = params.N, dim = input.dim();
  const FieldSpec smooth = FieldSpec::derived(
      input, [xi, N, dim](Wavevector k, double v) { return v - rough_symbol(xi, N, dim, k); },
      "smooth:" + input.id());
  const auto grid = smooth.grid_symbols(n);
  for (std::size_t idx = 0; idx < grid->size(); ++idx) {
    if ((*grid)[idx] < 0.0) {
      const Wavevector k = grid->mode(idx);
      std::ostringstream msg;
      msg << "sample_decomposed: negative remainder " << (*grid)[idx] << " at k=(" << k.x << ","
          << k.y << ")";
      throw PreconditionViolation(msg.str());
    }
  }
  return {sample_field(rough, n, mix64(seed, 0)), sample_field(smooth, n, mix64(seed, 1))};
}

}  // namespace tgmc
