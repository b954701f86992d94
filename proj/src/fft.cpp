#include "tgmc/fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <stdexcept>
#include <tuple>
#include <vector>

namespace tgmc::fft {

namespace {

enum class PlanKind { C2R, R2C, C2CForward, C2CBackward };

// FFTW planning is not thread-safe; execution of an existing plan on new
// arrays is. Plans live for the whole process.
class PlanCache {
public:
  static PlanCache& instance() {
    static PlanCache cache;
    return cache;
  }

  fftw_plan get(PlanKind kind, int dim, int n) {
    std::lock_guard lock(mutex_);
    const auto key = std::make_tuple(kind, dim, n);
    if (auto it = plans_.find(key); it != plans_.end()) return it->second;
    const int dims[2] = {n, n};
    const std::size_t real_size = dim == 1 ? n : static_cast<std::size_t>(n) * n;
    const std::size_t cplx_size = half_size(dim, n);
    const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    fftw_plan plan = nullptr;
    switch (kind) {
      case PlanKind::C2R: {
        std::vector<Complex> in(cplx_size);
        std::vector<double> out(real_size);
        plan = fftw_plan_dft_c2r(dim, dims, reinterpret_cast<fftw_complex*>(in.data()),
                                 out.data(), flags);
        break;
      }
      case PlanKind::R2C: {
        std::vector<double> in(real_size);
        std::vector<Complex> out(cplx_size);
        plan = fftw_plan_dft_r2c(dim, dims, in.data(),
                                 reinterpret_cast<fftw_complex*>(out.data()), flags);
        break;
      }
      case PlanKind::C2CForward:
      case PlanKind::C2CBackward: {
        std::vector<Complex> buf(real_size);
        auto* p = reinterpret_cast<fftw_complex*>(buf.data());
        plan = fftw_plan_dft(dim, dims, p, p,
                             kind == PlanKind::C2CForward ? FFTW_FORWARD : FFTW_BACKWARD, flags);
        break;
      }
    }
    if (plan == nullptr) throw std::runtime_error("fftw planning failed");
    plans_.emplace(key, plan);
    return plan;
  }

private:
  std::mutex mutex_;
  std::map<std::tuple<PlanKind, int, int>, fftw_plan> plans_;
};

void check_grid(int dim, int n) {
  if ((dim != 1 && dim != 2) || n < 2) throw std::invalid_argument("fft: bad grid");
}

}  // namespace

std::size_t half_size(int dim, int n) {
  return dim == 1 ? static_cast<std::size_t>(n / 2 + 1)
                  : static_cast<std::size_t>(n) * (n / 2 + 1);
}

void inverse_real(int dim, int n, std::span<Complex> spectrum, std::span<double> out) {
  check_grid(dim, n);
  fftw_plan plan = PlanCache::instance().get(PlanKind::C2R, dim, n);
  fftw_execute_dft_c2r(plan, reinterpret_cast<fftw_complex*>(spectrum.data()), out.data());
}

void forward_real(int dim, int n, std::span<const double> in, std::span<Complex> out) {
  check_grid(dim, n);
  fftw_plan plan = PlanCache::instance().get(PlanKind::R2C, dim, n);
  // r2c does not modify its input under FFTW_ESTIMATE for out-of-place plans.
  fftw_execute_dft_r2c(plan, const_cast<double*>(in.data()),
                       reinterpret_cast<fftw_complex*>(out.data()));
}

void complex_inplace(int dim, int n, std::span<Complex> data, int sign) {
  check_grid(dim, n);
  fftw_plan plan = PlanCache::instance().get(
      sign < 0 ? PlanKind::C2CForward : PlanKind::C2CBackward, dim, n);
  auto* p = reinterpret_cast<fftw_complex*>(data.data());
  fftw_execute_dft(plan, p, p);
}

}  // namespace tgmc::fft
