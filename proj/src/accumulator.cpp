#include "tgmc/accumulator.hpp"

#include "tgmc/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>

namespace tgmc {

void McAccumulator::LogSum::add(double log_w) {
  if (log_w == -std::numeric_limits<double>::infinity()) return;
  if (log_w > max) {
    scaled = scaled * std::exp(max - log_w) + 1.0;
    max = log_w;
  } else {
    scaled += std::exp(log_w - max);
  }
}

void McAccumulator::LogSum::merge(const LogSum& other) {
  if (other.scaled == 0.0) return;
  if (scaled == 0.0) {
    *this = other;
    return;
  }
  const double m = std::max(max, other.max);
  scaled = scaled * std::exp(max - m) + other.scaled * std::exp(other.max - m);
  max = m;
}

void McAccumulator::push(double w) {
  if (!(w >= 0.0)) throw InvalidArgument("McAccumulator: weights must be >= 0");
  push_log(w > 0.0 ? std::log(w) : -std::numeric_limits<double>::infinity());
}

void McAccumulator::push_log(double log_w) {
  ++count_;
  sum_.add(log_w);
  sum_sq_.add(2.0 * log_w);
  if (histogram_ && log_w > -std::numeric_limits<double>::infinity()) {
    auto& h = *histogram_;
    const int bins = static_cast<int>(h.counts.size());
    int b = static_cast<int>(std::floor((log_w - h.lo) / (h.hi - h.lo) * bins));
    ++h.counts[std::clamp(b, 0, bins - 1)];
  }
}

void McAccumulator::merge(const McAccumulator& other) {
  count_ += other.count_;
  sum_.merge(other.sum_);
  sum_sq_.merge(other.sum_sq_);
  if (histogram_ && other.histogram_) {
    if (histogram_->counts.size() != other.histogram_->counts.size() ||
        histogram_->lo != other.histogram_->lo || histogram_->hi != other.histogram_->hi) {
      throw InvalidArgument("McAccumulator: histogram layouts differ");
    }
    for (std::size_t i = 0; i < histogram_->counts.size(); ++i) {
      histogram_->counts[i] += other.histogram_->counts[i];
    }
  } else if (other.histogram_) {
    histogram_ = other.histogram_;
  }
}

void McAccumulator::enable_histogram(double lo, double hi, int bins) {
  if (!(hi > lo) || bins < 1) throw InvalidArgument("McAccumulator: bad histogram layout");
  histogram_ = Histogram{lo, hi, std::vector<std::uint64_t>(bins, 0)};
}

double McAccumulator::log_mean() const {
  if (count_ == 0) return -std::numeric_limits<double>::infinity();
  return log_sum() - std::log(static_cast<double>(count_));
}

double McAccumulator::mean() const { return count_ == 0 ? 0.0 : std::exp(log_mean()); }

double McAccumulator::stderr_log_mean() const {
  if (count_ < 2 || sum_.scaled == 0.0) return 0.0;
  const double n = static_cast<double>(count_);
  // mean(w^2) / mean(w)^2, then the unbiased relative variance.
  const double ratio = std::exp(log_sum_sq() - 2.0 * log_sum() + std::log(n));
  const double rel_var = std::max(ratio - 1.0, 0.0) * n / (n - 1.0);
  return std::sqrt(rel_var / n);
}

double McAccumulator::stderr_mean() const { return mean() * stderr_log_mean(); }

double McAccumulator::ess() const {
  if (sum_.scaled == 0.0) return 0.0;
  return std::exp(2.0 * log_sum() - log_sum_sq());
}

McAccumulator McAccumulator::from_parts(std::uint64_t count, LogSum sum, LogSum sum_sq,
                                        std::optional<Histogram> histogram) {
  McAccumulator acc;
  acc.count_ = count;
  acc.sum_ = sum;
  acc.sum_sq_ = sum_sq;
  acc.histogram_ = std::move(histogram);
  return acc;
}

void RunningStats::push(double v) {
  ++count_;
  const double delta = v - mean_;
  mean_ += delta / count_;
  m2_ += delta * (v - mean_);
}

void RunningStats::merge(const RunningStats& other) {
  if (other.count_ == 0) return;
  if (count_ == 0) {
    *this = other;
    return;
  }
  const double na = count_, nb = other.count_;
  const double delta = other.mean_ - mean_;
  const double n = na + nb;
  mean_ += delta * nb / n;
  m2_ += other.m2_ + delta * delta * na * nb / n;
  count_ += other.count_;
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

std::string hex(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%a", v);
  return buf;
}

double unhex(const std::string& s) { return std::strtod(s.c_str(), nullptr); }

nlohmann::json logsum_json(const McAccumulator::LogSum& s) {
  return {{"max", hex(s.max)}, {"scaled", hex(s.scaled)}};
}

McAccumulator::LogSum logsum_from(const nlohmann::json& j) {
  return {unhex(j.at("max").get<std::string>()), unhex(j.at("scaled").get<std::string>())};
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& cp) {
  nlohmann::json j;
  j["schema"] = "tgmc.checkpoint/1";
  j["next_shard"] = cp.next_shard;
  j["master_seed"] = cp.master_seed;
  j["count"] = cp.acc.count();
  j["sum"] = logsum_json(cp.acc.sum());
  j["sum_sq"] = logsum_json(cp.acc.sum_sq());
  if (const auto& h = cp.acc.histogram()) {
    j["histogram"] = {{"lo", hex(h->lo)}, {"hi", hex(h->hi)}, {"counts", h->counts}};
  }
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw NumericalFailure("checkpoint: cannot write " + tmp);
    out << j.dump(2) << "\n";
    if (!out) throw NumericalFailure("checkpoint: write failed for " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw NumericalFailure("checkpoint: cannot move into place: " + ec.message());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw NumericalFailure("checkpoint: cannot read " + path.string());
  try {
    const auto j = nlohmann::json::parse(in);
    if (j.at("schema") != "tgmc.checkpoint/1") throw NumericalFailure("checkpoint: unknown schema");
    Checkpoint cp;
    cp.next_shard = j.at("next_shard").get<std::uint64_t>();
    cp.master_seed = j.at("master_seed").get<std::uint64_t>();
    std::optional<McAccumulator::Histogram> hist;
    if (j.contains("histogram")) {
      const auto& h = j["histogram"];
      hist = McAccumulator::Histogram{unhex(h.at("lo").get<std::string>()),
                                      unhex(h.at("hi").get<std::string>()),
                                      h.at("counts").get<std::vector<std::uint64_t>>()};
    }
    cp.acc = McAccumulator::from_parts(j.at("count").get<std::uint64_t>(), logsum_from(j.at("sum")),
                                       logsum_from(j.at("sum_sq")), std::move(hist));
    return cp;
  } catch (const nlohmann::json::exception& e) {
    throw NumericalFailure(std::string("checkpoint: malformed file: ") + e.what());
  }
}

McAccumulator checkpoint_roundtrip(const McAccumulator& acc, const std::filesystem::path& path) {
  save_checkpoint(path, Checkpoint{0, 0, acc});
  return load_checkpoint(path).acc;
}

}  // namespace tgmc
