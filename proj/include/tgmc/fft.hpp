#pragma once

#include <complex>
#include <span>

namespace tgmc::fft {

using Complex = std::complex<double>;

/// Number of complex coefficients in the half spectrum of a real n^dim grid
/// (last axis stores 0..n/2).
std::size_t half_size(int dim, int n);

/// Unnormalized inverse real transform:
///   out[j] = sum_k spectrum[k] exp(+2 pi i k.j / n),
/// with Hermitian symmetry implied by the half spectrum. `spectrum` is
/// destroyed.
void inverse_real(int dim, int n, std::span<Complex> spectrum, std::span<double> out);

/// Unnormalized forward real transform:
///   out[k] = sum_j in[j] exp(-2 pi i k.j / n)  on the half spectrum.
void forward_real(int dim, int n, std::span<const double> in, std::span<Complex> out);

/// Unnormalized complex transform over an n^dim grid, in place.
/// sign = -1 forward, +1 backward.
void complex_inplace(int dim, int n, std::span<Complex> data, int sign);

}  // namespace tgmc::fft
