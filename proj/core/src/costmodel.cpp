// Copyright 2026 The hotswitch Authors
// SPDX-License-Identifier: Apache-2.0

#include "hotswitch/costmodel.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <json.hpp>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace hotswitch {

namespace {

using ojson = nlohmann::ordered_json;

std::uint64_t next_version() {
  static std::atomic<std::uint64_t> counter{1};
  return counter.fetch_add(1);
}

double comm_time(Strategy strategy, OpKind op, const ModelConfig& cfg, std::int64_t s,
                 const GridParams& g) {
  double t = 0.0;
  for (const auto& step : comm_schedule(strategy, op, cfg, s, g.p, g.bytes_per_elem)) {
    t += g.alpha_s + static_cast<double>(step.bytes) / g.bytes_per_s_link;
  }
  return t;
}

double transient_elements(Strategy strategy, const ModelConfig& cfg, std::int64_t s, int p) {
  const auto mha = executor_peak(strategy, OpKind::MHA, cfg, s, p);
  const auto ffn = executor_peak(strategy, OpKind::FFN, cfg, s, p);
  return static_cast<double>(
      std::max(mha.activation + mha.parameter, ffn.activation + ffn.parameter));
}

ModelConfig with_batch(ModelConfig cfg, std::int64_t b) {
  cfg.b = b;
  return cfg;
}

}  // namespace

// ------------------------------------------------------------- analytic

double layer_forward_flops(const ModelConfig& config, std::int64_t b, std::int64_t s) {
  const double bd = static_cast<double>(b), sd = static_cast<double>(s);
  const double h = static_cast<double>(config.h);
  return 24.0 * bd * sd * h * h + 4.0 * bd * sd * sd * h;
}

double saved_activation_elements(Strategy strategy, const ModelConfig& config, std::int64_t b,
                                 std::int64_t s, int p) {
  const double S = static_cast<double>(s) / p;
  const double bsh = static_cast<double>(b) * S * static_cast<double>(config.h);
  switch (strategy) {
    case Strategy::METP: return 2.0 * bsh;
    case Strategy::ColossalZ:
      return 10.0 * bsh + static_cast<double>(b) * static_cast<double>(config.n) * S *
                              static_cast<double>(s);
    default: return 10.0 * bsh;
  }
}

AnalyticBreakdown analytic_breakdown(const ModelConfig& config, Strategy strategy,
                                     std::int64_t b, std::int64_t s, const GridParams& grid) {
  const ModelConfig cfg = with_batch(config, b);
  check_preconditions(strategy, cfg, s, grid.p);
  const double L = static_cast<double>(cfg.L);
  const double E = grid.bytes_per_elem;
  const double h = static_cast<double>(cfg.h);
  AnalyticBreakdown out;
  out.compute_s = L * 3.0 * layer_forward_flops(cfg, b, s) / (grid.flops_per_s * grid.p);
  out.comm_s = L * (comm_time(strategy, OpKind::MHA, cfg, s, grid) +
                    comm_time(strategy, OpKind::FFN, cfg, s, grid));
  out.param_bytes = E * 12.0 * h * h * L / grid.p;
  out.saved_bytes = E * L * saved_activation_elements(strategy, cfg, b, s, grid.p);
  out.transient_bytes = E * transient_elements(strategy, cfg, s, grid.p);
  return out;
}

ProfileRecord analytic_profile(const ModelConfig& config, Strategy strategy, std::int64_t b,
                               std::int64_t s, const GridParams& grid) {
  const auto br = analytic_breakdown(config, strategy, b, s, grid);
  ProfileRecord r;
  r.config = with_batch(config, b);
  r.strategy = strategy;
  r.b = b;
  r.s = s;
  r.time_s = br.time_s();
  r.mem_bytes = br.mem_bytes();
  return r;
}

PlanCost analytic_plan_cost(std::span<const Strategy> plan, const ModelConfig& config,
                            std::int64_t b, std::int64_t s, const GridParams& grid) {
  if (static_cast<std::int64_t>(plan.size()) != config.L) {
    throw std::invalid_argument("plan length " + std::to_string(plan.size()) +
                                " does not match L=" + std::to_string(config.L));
  }
  const double L = static_cast<double>(config.L);
  PlanCost out;
  double saved = 0.0, transient = 0.0, params = 0.0;
  for (Strategy st : plan) {
    const auto br = analytic_breakdown(config, st, b, s, grid);
    out.time_s += br.time_s() / L;
    saved += br.saved_bytes / L;
    transient = std::max(transient, br.transient_bytes);
    params = br.param_bytes;
  }
  out.mem_bytes = params + saved + transient;
  return out;
}

std::vector<std::int64_t> default_profile_lengths() {
  std::vector<std::int64_t> out;
  for (std::int64_t base = 1024; base < 1024 * 1024; base *= 2) {
    for (std::int64_t q = 8; q < 16; ++q) out.push_back(base * q / 8);
  }
  out.push_back(1024 * 1024);
  return out;
}

std::vector<ProfileRecord> profile_sweep(const ModelConfig& config,
                                         std::span<const Strategy> strategies, std::int64_t b,
                                         std::span<const std::int64_t> lengths,
                                         const GridParams& grid, bool stop_at_oom) {
  std::vector<ProfileRecord> out;
  for (Strategy st : strategies) {
    for (std::int64_t s : lengths) {
      ProfileRecord r;
      try {
        r = analytic_profile(config, st, b, s, grid);
      } catch (const std::invalid_argument&) {
        continue;
      }
      if (stop_at_oom && r.mem_bytes > static_cast<double>(grid.capacity_bytes)) break;
      out.push_back(r);
    }
  }
  return out;
}

// ------------------------------------------------------------ CSV I/O

namespace {

[[noreturn]] void csv_error(std::string_view source, std::size_t line, const std::string& what) {
  throw std::runtime_error(std::string(source) + ":" + std::to_string(line) + ": " + what);
}

std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(line.substr(start, comma == std::string_view::npos ? line.npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::string_view trim(std::string_view v) {
  while (!v.empty() && (v.front() == ' ' || v.front() == '\t')) v.remove_prefix(1);
  while (!v.empty() && (v.back() == ' ' || v.back() == '\t' || v.back() == '\r')) {
    v.remove_suffix(1);
  }
  return v;
}

template <typename T>
T parse_field(std::string_view field, std::string_view name, std::string_view source,
              std::size_t line) {
  field = trim(field);
  T value{};
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size() || field.empty()) {
    csv_error(source, line, "invalid " + std::string(name) + " '" + std::string(field) + "'");
  }
  return value;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::vector<ProfileRecord> read_profiles(std::istream& in, std::string_view source) {
  std::vector<ProfileRecord> out;
  std::string raw;
  std::size_t line = 0;
  bool header_seen = false;
  while (std::getline(in, raw)) {
    ++line;
    const std::string_view text = trim(raw);
    if (text.empty()) continue;
    if (!header_seen) {
      if (text != kProfileCsvHeader) {
        csv_error(source, line, "expected header '" + std::string(kProfileCsvHeader) + "'");
      }
      header_seen = true;
      continue;
    }
    const auto f = split_csv(text);
    if (f.size() != 8) {
      csv_error(source, line, "expected 8 fields, got " + std::to_string(f.size()));
    }
    ProfileRecord r;
    const auto strategy = parse_strategy(trim(f[0]));
    if (!strategy) csv_error(source, line, "unknown strategy '" + std::string(trim(f[0])) + "'");
    r.strategy = *strategy;
    r.config.h = parse_field<std::int64_t>(f[1], "h", source, line);
    r.config.n = parse_field<std::int64_t>(f[2], "n", source, line);
    r.config.L = parse_field<std::int64_t>(f[3], "L", source, line);
    r.b = parse_field<std::int64_t>(f[4], "b", source, line);
    r.config.b = r.b;
    r.s = parse_field<std::int64_t>(f[5], "s", source, line);
    r.time_s = parse_field<double>(f[6], "time_s", source, line);
    r.mem_bytes = parse_field<double>(f[7], "mem_bytes", source, line);
    try {
      r.config.validate();
    } catch (const std::invalid_argument& e) {
      csv_error(source, line, e.what());
    }
    if (r.s < 1) csv_error(source, line, "s must be >= 1");
    if (!(r.time_s > 0)) csv_error(source, line, "time_s must be > 0");
    if (!(r.mem_bytes > 0)) csv_error(source, line, "mem_bytes must be > 0");
    out.push_back(r);
  }
  return out;
}

std::vector<ProfileRecord> ingest_profiles(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(path + ": cannot open profile file");
  return read_profiles(in, path);
}

void write_profiles(std::ostream& out, std::span<const ProfileRecord> records) {
  out << kProfileCsvHeader << '\n';
  for (const auto& r : records) {
    out << strategy_name(r.strategy) << ',' << r.config.h << ',' << r.config.n << ','
        << r.config.L << ',' << r.b << ',' << r.s << ',' << format_double(r.time_s) << ','
        << format_double(r.mem_bytes) << '\n';
  }
}

void export_profiles(const std::string& path, std::span<const ProfileRecord> records) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  write_profiles(out, records);
  if (!out) throw std::runtime_error(path + ": write failed");
}

// --------------------------------------------------------- analytic provider

AnalyticCostProvider::AnalyticCostProvider(ModelConfig config, GridParams grid,
                                           std::vector<Strategy> strategies)
    : config_(config), grid_(grid), strategies_(std::move(strategies)) {
  config_.validate();
  if (strategies_.empty()) throw std::invalid_argument("analytic provider needs strategies");
}

LayerCost AnalyticCostProvider::layer_cost(Strategy strategy, std::int64_t b,
                                           std::int64_t s) const {
  const auto r = analytic_profile(config_, strategy, b, s, grid_);
  const double L = static_cast<double>(config_.L);
  return {r.time_s / L, r.mem_bytes / L};
}

// ------------------------------------------------------------ encoder

std::string_view branch_name(Branch b) { return b == Branch::Forest ? "forest" : "poly"; }

FeatureEncoder FeatureEncoder::fit(std::span<const ProfileRecord> records) {
  if (records.empty()) throw std::invalid_argument("feature encoder needs records");
  FeatureEncoder e;
  std::set<Strategy> present;
  e.lo_.fill(std::numeric_limits<double>::infinity());
  e.hi_.fill(-std::numeric_limits<double>::infinity());
  for (const auto& r : records) {
    present.insert(r.strategy);
    const std::array<double, 4> v{static_cast<double>(r.config.h),
                                  static_cast<double>(r.config.n),
                                  static_cast<double>(r.config.L), static_cast<double>(r.s)};
    for (std::size_t i = 0; i < 4; ++i) {
      e.lo_[i] = std::min(e.lo_[i], v[i]);
      e.hi_[i] = std::max(e.hi_[i], v[i]);
    }
  }
  for (Strategy s : kAllStrategies) {
    if (present.count(s)) e.strategies_.push_back(s);
  }
  return e;
}

std::vector<double> FeatureEncoder::encode(const ModelConfig& config, Strategy strategy,
                                           double s) const {
  std::vector<double> out(width(), 0.0);
  const auto it = std::find(strategies_.begin(), strategies_.end(), strategy);
  if (it == strategies_.end()) {
    throw std::invalid_argument("strategy " + std::string(strategy_name(strategy)) +
                                " is not in the feature encoding");
  }
  out[static_cast<std::size_t>(it - strategies_.begin())] = 1.0;
  const std::array<double, 4> v{static_cast<double>(config.h), static_cast<double>(config.n),
                                static_cast<double>(config.L), s};
  for (std::size_t i = 0; i < 4; ++i) {
    const double span = hi_[i] - lo_[i];
    out[strategies_.size() + i] = span > 0 ? (v[i] - lo_[i]) / span : 0.0;
  }
  return out;
}

std::string FeatureEncoder::to_json() const {
  ojson j;
  j["strategies"] = ojson::array();
  for (Strategy s : strategies_) j["strategies"].push_back(std::string(strategy_name(s)));
  j["min"] = lo_;
  j["max"] = hi_;
  return j.dump();
}

FeatureEncoder FeatureEncoder::from_json(std::string_view text) {
  const auto j = nlohmann::json::parse(text);
  FeatureEncoder e;
  for (const auto& name : j.at("strategies")) {
    const auto s = parse_strategy(name.get<std::string>());
    if (!s) throw std::invalid_argument("unknown strategy in encoder: " + name.dump());
    e.strategies_.push_back(*s);
  }
  e.lo_ = j.at("min").get<std::array<double, 4>>();
  e.hi_ = j.at("max").get<std::array<double, 4>>();
  return e;
}

// ------------------------------------------------------------ hybrid model

HybridCostModel::HybridCostModel(Strategy strategy, ModelConfig config,
                                 std::shared_ptr<const SharedForests> forests,
                                 PolyModel poly_time, PolyModel poly_mem,
                                 std::int64_t s_profile_max, double oom_threshold)
    : strategy_(strategy),
      config_(config),
      forests_(std::move(forests)),
      poly_time_(std::move(poly_time)),
      poly_mem_(std::move(poly_mem)),
      s_profile_max_(s_profile_max),
      oom_threshold_(oom_threshold) {}

Branch HybridCostModel::branch_for(std::int64_t s) const {
  return s <= s_profile_max_ ? Branch::Forest : Branch::Poly;
}

double HybridCostModel::predict(std::int64_t s, Target target, Branch* branch,
                                bool force_poly) const {
  if (!fitted()) throw std::logic_error("predict on an unfitted hybrid cost model");
  if (s < 1) throw std::invalid_argument("sequence length must be >= 1");
  const Branch taken = force_poly ? Branch::Poly : branch_for(s);
  if (branch) *branch = taken;
  if (taken == Branch::Poly) return poly(target).predict(static_cast<double>(s));
  const auto x = forests_->encoder.encode(config_, strategy_, static_cast<double>(s));
  const auto& forest = target == Target::Time ? forests_->time : forests_->mem;
  return std::exp(forest.predict(x));
}

bool HybridCostModel::predicts_oom(std::int64_t s, bool force_poly) const {
  return predict(s, Target::Memory, nullptr, force_poly) > oom_threshold_;
}

// ------------------------------------------------------------ bundle

CostModelBundle CostModelBundle::fit(std::span<const ProfileRecord> records,
                                     const ModelConfig& config, double oom_threshold,
                                     const ForestParams& params) {
  if (records.empty()) throw std::invalid_argument("cannot fit cost models on zero records");
  config.validate();
  auto forests = std::make_shared<SharedForests>();
  forests->encoder = FeatureEncoder::fit(records);
  std::vector<std::vector<double>> x;
  std::vector<double> log_time, log_mem;
  for (const auto& r : records) {
    x.push_back(forests->encoder.encode(r.config, r.strategy, static_cast<double>(r.s)));
    log_time.push_back(std::log(r.time_s));
    log_mem.push_back(std::log(r.mem_bytes));
  }
  forests->time = ForestModel::fit(x, log_time, params);
  forests->mem = ForestModel::fit(x, log_mem, params);

  CostModelBundle bundle;
  bundle.config_ = config;
  bundle.forests_ = forests;
  std::optional<std::int64_t> batch;
  std::map<Strategy, std::vector<const ProfileRecord*>> by_strategy;
  for (const auto& r : records) {
    if (r.config.h != config.h || r.config.n != config.n || r.config.L != config.L) continue;
    if (batch && *batch != r.b) {
      throw std::invalid_argument("profiles for one config must share a batch size");
    }
    batch = r.b;
    by_strategy[r.strategy].push_back(&r);
  }
  if (by_strategy.empty()) {
    throw std::invalid_argument("no profile records for config h=" + std::to_string(config.h) +
                                " n=" + std::to_string(config.n) +
                                " L=" + std::to_string(config.L));
  }
  bundle.b_ = *batch;
  bundle.config_.b = *batch;
  for (const auto& [strategy, rs] : by_strategy) {
    std::vector<double> s, t, m;
    std::int64_t s_max = 0;
    for (const auto* r : rs) {
      s.push_back(static_cast<double>(r->s));
      t.push_back(r->time_s);
      m.push_back(r->mem_bytes);
      s_max = std::max(s_max, r->s);
    }
    PolyModel pt, pm;
    try {
      pt = fit_poly(s, t);
      pm = fit_poly(s, m);
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument(std::string(strategy_name(strategy)) + ": " + e.what());
    }
    bundle.models_.emplace(strategy, HybridCostModel(strategy, bundle.config_, forests,
                                                     std::move(pt), std::move(pm), s_max,
                                                     oom_threshold));
  }
  bundle.version_ = next_version();
  return bundle;
}

std::vector<Strategy> CostModelBundle::strategies() const {
  std::vector<Strategy> out;
  for (const auto& [s, m] : models_) out.push_back(s);
  return out;
}

const HybridCostModel& CostModelBundle::model(Strategy s) const {
  const auto it = models_.find(s);
  if (it == models_.end()) {
    throw std::out_of_range("no cost model for strategy " + std::string(strategy_name(s)));
  }
  return it->second;
}

HybridCostModel& CostModelBundle::model(Strategy s) {
  version_ = next_version();
  return const_cast<HybridCostModel&>(std::as_const(*this).model(s));
}

LayerCost CostModelBundle::layer_cost(Strategy strategy, std::int64_t b, std::int64_t s) const {
  if (b != b_) {
    throw std::invalid_argument("cost models were profiled at b=" + std::to_string(b_) +
                                ", asked for b=" + std::to_string(b));
  }
  const auto& m = model(strategy);
  const double L = static_cast<double>(config_.L);
  return {m.predict(s, Target::Time, nullptr, poly_only_) / L,
          m.predict(s, Target::Memory, nullptr, poly_only_) / L};
}

void CostModelBundle::set_poly_only(bool on) {
  if (on != poly_only_) {
    poly_only_ = on;
    version_ = next_version();
  }
}

CostModelBundle CostModelBundle::restricted(std::span<const Strategy> keep) const {
  CostModelBundle out = *this;
  out.models_.clear();
  for (Strategy s : keep) {
    out.models_.emplace(s, model(s));
  }
  if (out.models_.empty()) throw std::invalid_argument("restricted bundle has no strategies");
  out.version_ = next_version();
  return out;
}

std::string CostModelBundle::to_json() const {
  ojson j;
  j["config"] = {{"h", config_.h}, {"n", config_.n}, {"L", config_.L}, {"b", b_}};
  j["poly_only"] = poly_only_;
  j["encoder"] = ojson::parse(forests_->encoder.to_json());
  j["forest"] = {{"time", ojson::parse(forests_->time.to_json())},
                 {"mem", ojson::parse(forests_->mem.to_json())}};
  j["strategies"] = ojson::object();
  for (const auto& [s, m] : models_) {
    ojson e;
    e["forest"] = "shared";
    e["poly"] = {{"time", ojson::parse(m.poly(Target::Time).to_json())},
                 {"mem", ojson::parse(m.poly(Target::Memory).to_json())}};
    e["s_profile_max"] = m.s_profile_max();
    e["oom_threshold"] = m.oom_threshold();
    j["strategies"][std::string(strategy_name(s))] = std::move(e);
  }
  return j.dump(1);
}

CostModelBundle CostModelBundle::from_json(std::string_view text) {
  const auto j = nlohmann::json::parse(text);
  CostModelBundle b;
  const auto& c = j.at("config");
  b.config_ = ModelConfig{c.at("h").get<std::int64_t>(), c.at("n").get<std::int64_t>(),
                          c.at("L").get<std::int64_t>(), c.at("b").get<std::int64_t>()};
  b.config_.validate();
  b.b_ = b.config_.b;
  b.poly_only_ = j.value("poly_only", false);
  auto forests = std::make_shared<SharedForests>();
  forests->encoder = FeatureEncoder::from_json(j.at("encoder").dump());
  forests->time = ForestModel::from_json(j.at("forest").at("time").dump());
  forests->mem = ForestModel::from_json(j.at("forest").at("mem").dump());
  b.forests_ = forests;
  for (const auto& [name, e] : j.at("strategies").items()) {
    const auto s = parse_strategy(name);
    if (!s) throw std::invalid_argument("unknown strategy in bundle: " + name);
    b.models_.emplace(*s, HybridCostModel(*s, b.config_, forests,
                                          PolyModel::from_json(e.at("poly").at("time").dump()),
                                          PolyModel::from_json(e.at("poly").at("mem").dump()),
                                          e.at("s_profile_max").get<std::int64_t>(),
                                          e.at("oom_threshold").get<double>()));
  }
  if (b.models_.empty()) throw std::invalid_argument("bundle has no strategies");
  b.version_ = next_version();
  return b;
}

void CostModelBundle::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  out << to_json() << '\n';
  if (!out) throw std::runtime_error(path + ": write failed");
}

CostModelBundle CostModelBundle::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(path + ": cannot open model bundle");
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return from_json(ss.str());
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
}

}  // namespace hotswitch
