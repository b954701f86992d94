#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <vector>

namespace tgmc {

/// Streaming, mergeable Monte Carlo state for nonnegative weights.
///
/// Sums are kept in the log domain as (max, sum of exp(log_w - max)), so
/// weights spanning hundreds of orders of magnitude accumulate without
/// overflow. merge() is commutative bit-for-bit and associative to rounding.
class McAccumulator {
public:
  struct LogSum {
    double max = -std::numeric_limits<double>::infinity();
    double scaled = 0.0;

    void add(double log_w);
    void merge(const LogSum& other);
    double log() const { return scaled > 0.0 ? max + std::log(scaled) : -std::numeric_limits<double>::infinity(); }
    friend bool operator==(const LogSum&, const LogSum&) = default;
  };

  struct Histogram {
    double lo = 0.0;
    double hi = 1.0;
    std::vector<std::uint64_t> counts;  // bins over log_w; values outside clamp to the end bins
    friend bool operator==(const Histogram&, const Histogram&) = default;
  };

  void push(double w);
  void push_log(double log_w);
  void merge(const McAccumulator& other);

  /// Histogram of log-weights; must be enabled before pushing.
  void enable_histogram(double lo, double hi, int bins);

  std::uint64_t count() const { return count_; }
  double log_sum() const { return sum_.log(); }
  double log_sum_sq() const { return sum_sq_.log(); }
  double mean() const;
  double log_mean() const;
  /// Standard error of mean(), from the unbiased sample variance.
  double stderr_mean() const;
  /// Standard error of log(mean()) by the delta method.
  double stderr_log_mean() const;
  /// (sum w)^2 / sum w^2.
  double ess() const;

  const LogSum& sum() const { return sum_; }
  const LogSum& sum_sq() const { return sum_sq_; }
  const std::optional<Histogram>& histogram() const { return histogram_; }

  static McAccumulator from_parts(std::uint64_t count, LogSum sum, LogSum sum_sq,
                                  std::optional<Histogram> histogram = std::nullopt);

  friend bool operator==(const McAccumulator&, const McAccumulator&) = default;

private:
  std::uint64_t count_ = 0;
  LogSum sum_;
  LogSum sum_sq_;
  std::optional<Histogram> histogram_;
};

/// Mean and variance of signed values (Chan et al. pairwise update).
class RunningStats {
public:
  void push(double v);
  void merge(const RunningStats& other);
  std::uint64_t count() const { return count_; }
  double mean() const { return mean_; }
  double variance() const { return count_ > 1 ? m2_ / (count_ - 1) : 0.0; }
  double stderr_mean() const { return count_ > 1 ? std::sqrt(variance() / count_) : 0.0; }

private:
  std::uint64_t count_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

/// Accumulator state plus the index of the next shard to process.
struct Checkpoint {
  std::uint64_t next_shard = 0;
  std::uint64_t master_seed = 0;
  McAccumulator acc;
};

/// Floats are written as hex literals so a reload is bit-exact.
/// Throws NumericalFailure on I/O errors.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& cp);
Checkpoint load_checkpoint(const std::filesystem::path& path);

McAccumulator checkpoint_roundtrip(const McAccumulator& acc, const std::filesystem::path& path);

}  // namespace tgmc
