#pragma once

#include <array>
#include <cstdint>
#include <utility>

namespace tgmc {

/// SplitMix64 finalizer.
std::uint64_t splitmix64(std::uint64_t z);

/// Seed mixing for stream derivation:
///   mix64(a, b) = splitmix64(a ^ splitmix64(b)).
/// Stream i of a run uses mix64(master_seed, i); sample j of that stream
/// uses mix64(stream_seed, j).
std::uint64_t mix64(std::uint64_t a, std::uint64_t b);

/// Philox4x32-10 counter-based generator (Salmon et al. 2011).
class Philox4x32 {
public:
  using Counter = std::array<std::uint32_t, 4>;

  explicit Philox4x32(std::uint64_t key)
      : key_{static_cast<std::uint32_t>(key), static_cast<std::uint32_t>(key >> 32)} {}

  Counter operator()(Counter ctr) const;

private:
  std::array<std::uint32_t, 2> key_;
};

/// Two independent standard normals from one Philox block (Box-Muller).
/// The block is addressed by `ctr`, so any pair can be replayed directly.
std::pair<double, double> normal_pair(const Philox4x32& gen, const Philox4x32::Counter& ctr);

/// Uniform in (0, 1) built from two 32-bit words.
double uniform_open(std::uint32_t hi, std::uint32_t lo);

/// Sequential normal stream over a counter-based generator. Used where the
/// consumer does not need per-mode addressing (test generators, CLI demos).
class NormalStream {
public:
  explicit NormalStream(std::uint64_t seed) : gen_(seed) {}

  double next();
  double uniform();

private:
  Philox4x32 gen_;
  std::uint32_t block_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace tgmc
