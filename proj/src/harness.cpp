#include "tgmc/harness.hpp"

#include "tgmc/accumulator.hpp"
#include "tgmc/errors.hpp"
#include "tgmc/field_spec.hpp"
#include "tgmc/gmc.hpp"
#include "tgmc/kernel_decomp.hpp"
#include "tgmc/parallel.hpp"
#include "tgmc/small_dev.hpp"
#include "tgmc/sinh_gordon.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

namespace tgmc {

using nlohmann::json;

namespace {

std::string trim(const std::string& v) {
  const auto b = v.find_first_not_of(" \t\r\n");
  const auto e = v.find_last_not_of(" \t\r\n");
  return b == std::string::npos ? std::string() : v.substr(b, e - b + 1);
}

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

json num(double v) {
  if (std::isfinite(v)) return v;
  return fmt(v);
}

const std::map<std::string, std::string>& common_defaults() {
  static const std::map<std::string, std::string> d = {
      {"seed", "0"}, {"workers", "1"}, {"shard_size", "256"}};
  return d;
}

const std::map<std::string, std::string>& spec_defaults() {
  static const std::map<std::string, std::string> d = {
      {"kind", "gff"}, {"dim", "2"},      {"R", "1"},
      {"xi", "inf"},   {"t_low", "0"},    {"t_high", "inf"},
      {"spec_file", ""}};
  return d;
}

std::map<std::string, std::string> command_defaults(const std::string& command) {
  if (command == "field") return {{"n", "64"}, {"samples", "0"}};
  if (command == "gmc") {
    return {{"gamma", "1"},      {"convention", "self"}, {"n", "128"},       {"samples", "1000"},
            {"region", "full"},  {"checkpoint", ""},     {"max_shards", "0"}};
  }
  if (command == "smalldev") {
    return {{"gamma", "1"},     {"eps", ""},          {"eps_min", "0.05"}, {"eps_max", "0.2"},
            {"eps_count", "4"}, {"method", "is"},     {"R_tilt", ""},      {"samples", "10000"},
            {"n", "64"}};
  }
  if (command == "shg") {
    return {{"gamma", "1"}, {"mu", "1"}, {"R_list", "4,8,16"}, {"samples", "1000"}, {"n", "64"}};
  }
  if (command == "decomp") {
    return {{"xi_grid", "0.125,0.25,0.5,1"}, {"N_grid", "2,4,8,16,32,64"}, {"k_max", "256"}};
  }
  throw InvalidArgument("unknown command '" + command + "'");
}

bool uses_spec(const std::string& command) {
  return command == "field" || command == "gmc" || command == "smalldev" || command == "decomp";
}

}  // namespace

const std::vector<std::string>& known_commands() {
  static const std::vector<std::string> c = {"field", "gmc", "smalldev", "shg", "decomp"};
  return c;
}

std::map<std::string, std::string> default_config(const std::string& command) {
  auto d = command_defaults(command);
  for (const auto& [k, v] : common_defaults()) d.emplace(k, v);
  if (uses_spec(command)) {
    for (const auto& [k, v] : spec_defaults()) d.emplace(k, v);
  }
  return d;
}

std::vector<std::pair<std::string, std::string>> parse_config_text(const std::string& text) {
  std::vector<std::pair<std::string, std::string>> out;
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw InvalidArgument("config line " + std::to_string(lineno) + ": expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw InvalidArgument("config line " + std::to_string(lineno) + ": empty key");
    if (!seen.insert(key).second) throw InvalidArgument("config key '" + key + "' given twice");
    out.emplace_back(key, trim(line.substr(eq + 1)));
  }
  return out;
}

ExperimentConfig ExperimentConfig::resolve(
    const std::string& command, const std::string& file_text,
    const std::vector<std::pair<std::string, std::string>>& overrides,
    std::filesystem::path out_dir) {
  ExperimentConfig cfg;
  cfg.command_ = command;
  cfg.values_ = default_config(command);
  cfg.out_dir_ = std::move(out_dir);
  auto apply = [&](const std::string& key, const std::string& value) {
    auto it = cfg.values_.find(key);
    if (it == cfg.values_.end()) {
      throw InvalidArgument("unknown config key '" + key + "' for command " + command);
    }
    it->second = value;
  };
  for (const auto& [k, v] : parse_config_text(file_text)) apply(k, v);
  for (const auto& [k, v] : overrides) apply(k, v);
  return cfg;
}

std::string ExperimentConfig::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw InvalidArgument("config key '" + key + "' is not defined");
  return it->second;
}

double ExperimentConfig::get_double(const std::string& key) const {
  const std::string v = get(key);
  try {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing characters");
    return d;
  } catch (const std::exception&) {
    throw InvalidArgument("config key '" + key + "': '" + v + "' is not a number");
  }
}

long ExperimentConfig::get_int(const std::string& key) const {
  const std::string v = get(key);
  try {
    std::size_t pos = 0;
    const long d = std::stol(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing characters");
    return d;
  } catch (const std::exception&) {
    throw InvalidArgument("config key '" + key + "': '" + v + "' is not an integer");
  }
}

std::uint64_t ExperimentConfig::get_u64(const std::string& key) const {
  const std::string v = get(key);
  try {
    std::size_t pos = 0;
    if (!v.empty() && v[0] == '-') throw std::invalid_argument("negative");
    const auto d = std::stoull(v, &pos, 0);
    if (pos != v.size()) throw std::invalid_argument("trailing characters");
    return d;
  } catch (const std::exception&) {
    throw InvalidArgument("config key '" + key + "': '" + v + "' is not an unsigned integer");
  }
}

std::vector<double> ExperimentConfig::get_list(const std::string& key) const {
  const std::string v = get(key);
  std::vector<double> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    try {
      std::size_t pos = 0;
      out.push_back(std::stod(item, &pos));
      if (pos != item.size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw InvalidArgument("config key '" + key + "': '" + item + "' is not a number");
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Output helpers

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + "\"";
}

class Csv {
public:
  Csv(const std::filesystem::path& path, bool append) {
    out_.open(path, append ? std::ios::app : std::ios::trunc);
    if (!out_) throw NumericalFailure("cannot open " + path.string() + " for writing");
  }
  void comment(const std::string& key, const std::string& value) {
    out_ << "# " << key << " = " << value << "\n";
  }
  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << csv_field(cells[i]);
    out_ << "\n";
  }
  void flush() {
    out_.flush();
    if (!out_) throw NumericalFailure("CSV write failed");
  }

private:
  std::ofstream out_;
};

struct Context {
  const ExperimentConfig& cfg;
  json results = json::object();
  json extra = json::object();
  std::optional<FieldSpec> spec;
};

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot read file '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

FieldSpec build_spec(const ExperimentConfig& cfg, int n_hint) {
  const std::string file = cfg.get("spec_file");
  if (!file.empty()) return parse_spec_block(read_file(file)).spec;
  const std::string kind = cfg.get("kind");
  const long dim = cfg.get_int("dim");
  const double R = cfg.get_double("R");
  if (kind == "gff") return make_gff_spec(static_cast<int>(dim), R);
  if (kind == "star") {
    if (dim != 1 && dim != 2) throw InvalidArgument("config key 'dim': must be 1 or 2");
    return make_star_spec(SeedCovariance::bump_autocorrelation(static_cast<int>(dim)),
                          cfg.get_double("xi"), cfg.get_double("t_low"), cfg.get_double("t_high"),
                          static_cast<int>(dim), R, std::max(n_hint, 64));
  }
  throw InvalidArgument("config key 'kind': expected gff or star, got '" + kind + "'");
}

void write_header(Csv& csv, const ExperimentConfig& cfg, const std::optional<FieldSpec>& spec) {
  csv.comment("command", cfg.command());
  for (const auto& [k, v] : cfg.values()) csv.comment(k, v);
  if (spec) {
    for (const auto& [k, v] : spec->provenance()) csv.comment("spec." + k, v);
  }
}

int checked_n(const ExperimentConfig& cfg) {
  const long n = cfg.get_int("n");
  if (n < 4 || !is_power_of_two(n)) throw InvalidArgument("config key 'n': must be a power of two >= 4");
  return static_cast<int>(n);
}

int checked_workers(const ExperimentConfig& cfg) {
  const long w = cfg.get_int("workers");
  if (w < 1 || w > 1024) throw InvalidArgument("config key 'workers': must be in [1, 1024]");
  return static_cast<int>(w);
}

StreamPlan make_plan(const ExperimentConfig& cfg, const std::string& samples_key = "samples") {
  const long samples = cfg.get_int(samples_key);
  if (samples < 0) throw InvalidArgument("config key '" + samples_key + "': must be >= 0");
  const long shard = cfg.get_int("shard_size");
  if (shard < 1) throw InvalidArgument("config key 'shard_size': must be >= 1");
  return StreamPlan{cfg.get_u64("seed"), static_cast<std::size_t>(samples),
                    static_cast<std::size_t>(shard)};
}

json plan_json(const StreamPlan& plan) {
  return {{"master_seed", plan.master_seed},
          {"samples", plan.samples},
          {"shard_size", plan.shard_size},
          {"streams", plan.shard_count()},
          {"stream_seed", "mix64(master_seed, shard)"},
          {"sample_seed", "mix64(stream_seed, index_in_shard)"}};
}

// ---------------------------------------------------------------------------
// Commands

void run_field(Context& ctx) {
  const auto& cfg = ctx.cfg;
  const int n = checked_n(cfg);
  ctx.spec = build_spec(cfg, n);
  const FieldSpec& spec = *ctx.spec;
  const std::uint64_t seed = cfg.get_u64("seed");
  const GridField f = sample_field(spec, n, seed);

  Csv csv(cfg.out_dir() / "field.csv", false);
  write_header(csv, cfg, ctx.spec);
  csv.row({"ix", "iy", "x", "y", "value"});
  const double h = spec.side_length() / n;
  for (std::size_t idx = 0; idx < f.size(); ++idx) {
    const std::size_t ix = idx % n, iy = f.dim == 1 ? 0 : idx / n;
    csv.row({std::to_string(ix), std::to_string(iy), fmt(ix * h), fmt(iy * h), fmt(f.values[idx])});
  }
  csv.flush();

  double mean = 0.0;
  for (double v : f.values) mean += v;
  mean /= static_cast<double>(f.size());
  const double total = spec.grid_symbols(n)->total();
  ctx.results = {{"rms", num(f.rms())}, {"mean", num(mean)}, {"symbol_total", num(total)}};

  const StreamPlan plan = make_plan(cfg);
  if (plan.samples > 0) {
    const auto v0 = parallel_map<double>(plan, checked_workers(cfg), [&](std::size_t, std::uint64_t s) {
      return sample_field(spec, n, s).values[0];
    });
    RunningStats st;
    for (double v : v0) st.push(v);
    ctx.results["variance_at_origin"] = num(st.variance());
    ctx.results["variance_samples"] = plan.samples;
    ctx.extra["stream_plan"] = plan_json(plan);
  }
}

void run_gmc(Context& ctx) {
  const auto& cfg = ctx.cfg;
  const int n = checked_n(cfg);
  const int workers = checked_workers(cfg);
  ctx.spec = build_spec(cfg, n);
  const FieldSpec& spec = *ctx.spec;
  const double gamma = cfg.get_double("gamma");
  const Convention conv = parse_convention(cfg.get("convention"));

  std::optional<Mask> region;
  const std::string region_text = cfg.get("region");
  if (region_text != "full") {
    // box:x0,x1,y0,y1 in grid cells
    if (region_text.rfind("box:", 0) != 0) {
      throw InvalidArgument("config key 'region': expected 'full' or 'box:x0,x1,y0,y1'");
    }
    std::vector<int> b;
    std::stringstream ss(region_text.substr(4));
    std::string item;
    while (std::getline(ss, item, ',')) {
      try {
        b.push_back(std::stoi(item));
      } catch (const std::exception&) {
        throw InvalidArgument("config key 'region': bad number '" + item + "'");
      }
    }
    if (b.size() != (spec.dim() == 1 ? 2u : 4u)) throw InvalidArgument("config key 'region': wrong arity");
    region = spec.dim() == 1 ? Mask::box(1, n, b[0], b[1]) : Mask::box(2, n, b[0], b[1], b[2], b[3]);
    if (region->count() == 0) throw InvalidArgument("config key 'region': selects no cells");
  }
  const GmcConfig gcfg(gamma, conv, spec.dim(), region);
  const Mask demean_mask = region ? *region : Mask::full(spec.dim(), n);

  const StreamPlan plan = make_plan(cfg);
  const std::string cp_path = cfg.get("checkpoint");
  const long max_shards = cfg.get_int("max_shards");
  if (max_shards < 0) throw InvalidArgument("config key 'max_shards': must be >= 0");

  McAccumulator acc;
  std::size_t start = 0;
  if (!cp_path.empty() && std::filesystem::exists(cp_path)) {
    Checkpoint cp = load_checkpoint(cp_path);
    if (cp.master_seed != plan.master_seed) {
      throw InvalidArgument("config key 'checkpoint': checkpoint was written for another seed");
    }
    start = cp.next_shard;
    acc = cp.acc;
  }
  const std::size_t total_shards = plan.shard_count();
  const std::size_t end =
      max_shards > 0 ? std::min(total_shards, start + static_cast<std::size_t>(max_shards)) : total_shards;

  const auto csv_path = cfg.out_dir() / "gmc.csv";
  const bool append = start > 0 && std::filesystem::exists(csv_path);
  Csv csv(csv_path, append);
  if (!append) {
    write_header(csv, cfg, ctx.spec);
    csv.row({"seed", "n", "gamma", "convention", "mass"});
  }

  auto one = [&](std::uint64_t seed) {
    GridField f = sample_field(spec, n, seed);
    if (conv == Convention::TildeNormalized) f = remove_mean(f, demean_mask);
    return gmc_mass(f, spec, gcfg).mass;
  };

  // Shards are computed in parallel batches and folded strictly in order.
  const std::size_t batch = static_cast<std::size_t>(workers) * 4;
  for (std::size_t first = start; first < end; first += batch) {
    const std::size_t last = std::min(end, first + batch);
    std::vector<std::vector<double>> masses(last - first);
    for_each_shard(first, last, workers, [&](std::size_t shard) {
      auto& out = masses[shard - first];
      for (std::size_t g = plan.shard_begin(shard); g < plan.shard_end(shard); ++g) {
        out.push_back(one(plan.sample_seed(g)));
      }
    });
    for (std::size_t s = first; s < last; ++s) {
      McAccumulator shard_acc;
      const auto& ms = masses[s - first];
      for (std::size_t j = 0; j < ms.size(); ++j) {
        shard_acc.push(ms[j]);
        csv.row({std::to_string(plan.sample_seed(plan.shard_begin(s) + j)), std::to_string(n),
                 fmt(gamma), to_string(conv), fmt(ms[j])});
      }
      acc.merge(shard_acc);
    }
    csv.flush();
    if (!cp_path.empty()) save_checkpoint(cp_path, Checkpoint{last, plan.master_seed, acc});
  }

  const double cell = std::pow(spec.side_length() / n, spec.dim());
  const double region_cells = static_cast<double>(region ? region->count() : demean_mask.size());
  ctx.results = {{"count", acc.count()},
                 {"mean", num(acc.mean())},
                 {"stderr", num(acc.stderr_mean())},
                 {"log_mean", num(acc.log_mean())},
                 {"region_volume", num(region_cells * cell)},
                 {"near_critical", gcfg.near_critical()},
                 {"completed", end == total_shards},
                 {"next_shard", end}};
  if (conv == Convention::SelfNormalized) {
    ctx.results["expected_mean"] =
        num(region_cells * cell * std::pow(spec.side_length(), 0.5 * gamma * gamma));
  }
  ctx.extra["stream_plan"] = plan_json(plan);
}

std::vector<double> eps_grid(const ExperimentConfig& cfg) {
  std::vector<double> eps = cfg.get_list("eps");
  if (eps.empty()) {
    const double lo = cfg.get_double("eps_min"), hi = cfg.get_double("eps_max");
    const long count = cfg.get_int("eps_count");
    if (!(lo > 0.0) || !(hi >= lo) || count < 1) {
      throw InvalidArgument("config keys 'eps_min', 'eps_max', 'eps_count' describe an empty grid");
    }
    for (long i = 0; i < count; ++i) {
      eps.push_back(count == 1 ? lo : lo * std::pow(hi / lo, static_cast<double>(i) / (count - 1)));
    }
  }
  for (double e : eps) {
    if (!(e > 0.0)) throw InvalidArgument("config key 'eps': values must be > 0");
  }
  return eps;
}

void run_smalldev(Context& ctx) {
  const auto& cfg = ctx.cfg;
  const int n = checked_n(cfg);
  const int workers = checked_workers(cfg);
  ctx.spec = build_spec(cfg, n);
  const FieldSpec& spec = *ctx.spec;
  const double gamma = cfg.get_double("gamma");
  const std::string method = cfg.get("method");
  if (method != "naive" && method != "is") throw InvalidArgument("config key 'method': expected naive or is");
  const std::string rt = cfg.get("R_tilt");
  std::optional<double> R_override;
  if (!rt.empty()) R_override = cfg.get_double("R_tilt");
  const StreamPlan plan = make_plan(cfg);
  const auto eps = eps_grid(cfg);

  Csv csv(cfg.out_dir() / "smalldev.csv", false);
  write_header(csv, cfg, ctx.spec);
  csv.row({"eps", "p_hat", "stderr", "ess", "hits", "samples", "R_tilt", "low_ess", "upper_95"});

  std::vector<ProbabilityEstimate> rows;
  std::vector<TiltedMass> naive_draws;
  if (method == "naive") naive_draws = tilted_masses(spec, gamma, std::nullopt, n, plan, workers);
  for (double e : eps) {
    ProbabilityEstimate est;
    if (method == "naive") {
      est = estimate_probability(naive_draws, e);
      const double N = static_cast<double>(est.samples);
      est.stderr_p = N > 0 ? std::sqrt(est.p_hat * (1.0 - est.p_hat) / N) : 0.0;
      est.low_ess = false;
    } else {
      est = small_dev_is(spec, gamma, e, R_override, n, plan, workers);
    }
    rows.push_back(est);
    csv.row({fmt(e), fmt(est.p_hat), fmt(est.stderr_p), fmt(est.ess), std::to_string(est.hits),
             std::to_string(est.samples), fmt(est.R_tilt), est.low_ess ? "1" : "0", fmt(est.upper_95)});
  }
  csv.flush();

  std::vector<FitPoint> pts;
  json excluded = json::array();
  for (const auto& r : rows) {
    if (r.p_hat > 0.0 && r.p_hat < 1.0) {
      pts.push_back({r.eps, r.p_hat, r.stderr_p});
    } else {
      excluded.push_back({{"eps", num(r.eps)}, {"p_hat", num(r.p_hat)}, {"upper_95", num(r.upper_95)}});
    }
  }
  json fit = {{"target_slope", num(2.0 * spec.dim() / (gamma * gamma))}, {"excluded", excluded}};
  if (pts.size() >= 3) {
    const auto f = exponent_fit(pts);
    fit["slope"] = num(f.slope);
    fit["intercept"] = num(f.intercept);
    fit["slope_se"] = num(f.slope_se);
    fit["ci95"] = {num(f.ci_low), num(f.ci_high)};
    fit["points"] = f.points;
    fit["weighted"] = f.weighted;
  } else {
    fit["slope"] = nullptr;
    fit["note"] = "fewer than 3 points with p_hat in (0, 1)";
  }
  json est = json::array();
  for (const auto& r : rows) {
    est.push_back({{"eps", num(r.eps)},
                   {"p_hat", num(r.p_hat)},
                   {"stderr", num(r.stderr_p)},
                   {"ess", num(r.ess)},
                   {"low_ess", r.low_ess}});
  }
  ctx.results = {{"estimates", est}, {"fit", fit}, {"method", method}};
  ctx.extra["stream_plan"] = plan_json(plan);
}

void run_shg(Context& ctx) {
  const auto& cfg = ctx.cfg;
  const int n = checked_n(cfg);
  const int workers = checked_workers(cfg);
  const double gamma = cfg.get_double("gamma");
  const double mu = cfg.get_double("mu");
  const auto Rs = cfg.get_list("R_list");
  if (Rs.empty()) throw InvalidArgument("config key 'R_list': empty");
  for (double R : Rs) ShgParams(gamma, mu, R);  // validates
  const StreamPlan plan = make_plan(cfg);
  const auto samples = paired_masses(gamma, n, plan, workers);

  Csv csv(cfg.out_dir() / "shg.csv", false);
  write_header(csv, cfg, std::nullopt);
  csv.row({"R", "log_Z", "stderr", "free_energy", "free_energy_stderr"});
  json rows = json::array();
  double worst = 0.0;
  for (double R : Rs) {
    const ShgParams p(gamma, mu, R);
    const auto z = partition_estimate(p, samples);
    const auto fe = free_energy(p, samples);
    const ShgParams collapsed(gamma, 1.0, std::pow(mu, 1.0 / p.gamma_Q()) * R);
    const auto zc = partition_estimate(collapsed, samples);
    worst = std::max(worst, std::abs(z.value - zc.value) / std::max(std::abs(z.value), 1e-300));
    csv.row({fmt(R), fmt(z.value), fmt(z.stderr_value), fmt(fe.value), fmt(fe.stderr_value)});
    rows.push_back({{"R", num(R)},
                    {"log_Z", num(z.value)},
                    {"stderr", num(z.stderr_value)},
                    {"free_energy", num(fe.value)},
                    {"free_energy_stderr", num(fe.stderr_value)}});
  }
  csv.flush();
  const ShgParams p0(gamma, mu, Rs.front());
  ctx.results = {{"rows", rows},
                 {"Q", num(p0.Q())},
                 {"normalizer_exponent", num(2.0 / p0.gamma_Q())},
                 {"collapse_residual", num(worst)}};
  ctx.extra["stream_plan"] = plan_json(plan);
}

void run_decomp(Context& ctx) {
  const auto& cfg = ctx.cfg;
  const long k_max = cfg.get_int("k_max");
  if (k_max < 4 || k_max > 4096) throw InvalidArgument("config key 'k_max': must be in [4, 4096]");
  ctx.spec = build_spec(cfg, static_cast<int>(std::max(64L, 2 * k_max)));
  const auto xi = cfg.get_list("xi_grid");
  std::vector<int> Ns;
  for (double v : cfg.get_list("N_grid")) {
    if (v != std::round(v) || v < 1) throw InvalidArgument("config key 'N_grid': entries must be integers >= 1");
    Ns.push_back(static_cast<int>(v));
  }
  const auto res = search_params(*ctx.spec, xi, Ns, static_cast<int>(k_max));

  Csv csv(cfg.out_dir() / "decomp.csv", false);
  write_header(csv, cfg, ctx.spec);
  csv.row({"N", "xi", "min_remainder", "min_kx", "min_ky", "sobolev_proxy"});
  for (const auto& r : res.table) {
    csv.row({std::to_string(r.N), fmt(r.xi), fmt(r.min_remainder), std::to_string(r.min_location.x),
             std::to_string(r.min_location.y), fmt(r.sobolev_full)});
  }
  csv.flush();
  ctx.results = {{"found", res.found},
                 {res.found ? "params" : "best_candidate",
                  {{"N", res.params.N}, {"xi", num(res.params.xi)}}},
                 {"min_remainder", num(res.min_remainder)},
                 {"min_location", {res.min_location.x, res.min_location.y}},
                 {"k_max", k_max}};
}

void write_summary(const Context& ctx, double seconds, int exit_code) {
  json j;
  j["schema"] = "tgmc.summary/1";
  j["command"] = ctx.cfg.command();
  j["config"] = ctx.cfg.values();
  if (ctx.spec) {
    json prov = json::object();
    for (const auto& [k, v] : ctx.spec->provenance()) prov[k] = v;
    j["spec"] = prov;
  }
  j["results"] = ctx.results;
  for (const auto& [k, v] : ctx.extra.items()) j[k] = v;
  j["runtime_seconds"] = seconds;
  j["exit_code"] = exit_code;
  std::ofstream out(ctx.cfg.out_dir() / "summary.json");
  if (!out) throw NumericalFailure("cannot write summary.json");
  out << j.dump(2) << "\n";
}

}  // namespace

int run(const ExperimentConfig& config, std::ostream& err) {
  const auto t0 = std::chrono::steady_clock::now();
  try {
    std::error_code ec;
    std::filesystem::create_directories(config.out_dir(), ec);
    if (ec) throw NumericalFailure("cannot create output directory: " + ec.message());
    Context ctx{config, json::object(), json::object(), std::nullopt};
    const std::string& c = config.command();
    if (c == "field") run_field(ctx);
    else if (c == "gmc") run_gmc(ctx);
    else if (c == "smalldev") run_smalldev(ctx);
    else if (c == "shg") run_shg(ctx);
    else if (c == "decomp") run_decomp(ctx);
    else throw InvalidArgument("unknown command '" + c + "'");
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_summary(ctx, secs, kExitOk);
    return kExitOk;
  } catch (const PositivityViolation& e) {
    err << "numerical failure: " << e.what() << " (mode k=(" << e.kx() << "," << e.ky() << "))\n";
    return kExitNumerical;
  } catch (const NumericalFailure& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const InvalidArgument& e) {
    err << "invalid argument: " << e.what() << "\n";
    return kExitValidation;
  } catch (const PreconditionViolation& e) {
    err << "precondition violated: " << e.what() << "\n";
    return kExitValidation;
  }
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Log-correlated fields, GMC and Sinh-Gordon estimators on the torus", "tgmc"};
  app.allow_extras();
  std::string command, config_file, out_dir;
  app.add_option("command", command, "field | gmc | smalldev | shg | decomp")->required();
  app.add_option("--config", config_file, "flat 'key = value' file");
  app.add_option("--out", out_dir, "output directory")->required();
  app.footer("Any other --key value pair overrides a config entry.");
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitValidation;
  }

  std::vector<std::pair<std::string, std::string>> overrides;
  const auto extras = app.remaining();
  for (std::size_t i = 0; i < extras.size(); ++i) {
    const std::string& a = extras[i];
    if (a.rfind("--", 0) != 0 || a.size() < 3) {
      err << "usage error: unexpected argument '" << a << "'\n";
      return kExitValidation;
    }
    std::string key = a.substr(2), value;
    if (const auto eq = key.find('='); eq != std::string::npos) {
      value = key.substr(eq + 1);
      key.erase(eq);
    } else if (i + 1 < extras.size()) {
      value = extras[++i];
    } else {
      err << "usage error: missing value for '" << a << "'\n";
      return kExitValidation;
    }
    overrides.emplace_back(key, value);
  }

  try {
    const std::string text = config_file.empty() ? std::string() : read_file(config_file);
    const auto cfg = ExperimentConfig::resolve(command, text, overrides, out_dir);
    return run(cfg, err);
  } catch (const InvalidArgument& e) {
    err << "invalid argument: " << e.what() << "\n";
    return kExitValidation;
  }
}

}  // namespace tgmc
