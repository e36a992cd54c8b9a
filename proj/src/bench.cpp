#include "zodmc/bench.hpp"

#include <algorithm>
#include <cmath>
#include <initializer_list>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

#include "json.hpp"
#include "zodmc/io.hpp"
#include "zodmc/ou.hpp"

namespace zodmc {

using nlohmann::json;

namespace {

constexpr std::uint64_t kTagGroundTruth = 0x6707;
constexpr std::uint64_t kTagMetrics = 0x3e7;

void allow_keys(const json& j, std::initializer_list<const char*> keys, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  const std::set<std::string> allowed(keys.begin(), keys.end());
  for (const auto& [k, _] : j.items())
    if (!allowed.count(k)) throw ConfigError(where + ": unknown key '" + k + "'");
}

template <typename T>
T get_or(const json& j, const char* key, T fallback, const std::string& where) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

json parse_json(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
}

Vector to_vector(const json& j, const std::string& where) {
  if (!j.is_array()) throw ConfigError(where + ": expected an array");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw ConfigError(where + ": expected numbers");
    v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  }
  return v;
}

Matrix to_matrix(const json& j, const std::string& where) {
  if (!j.is_array() || j.empty()) throw ConfigError(where + ": expected a nonempty array of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  Matrix m(rows, static_cast<Eigen::Index>(j[0].size()));
  for (Eigen::Index i = 0; i < rows; ++i) {
    const Vector r = to_vector(j[static_cast<std::size_t>(i)], where);
    if (r.size() != m.cols()) throw ConfigError(where + ": ragged matrix");
    m.row(i) = r.transpose();
  }
  return m;
}

json from_vector(const Vector& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

json from_matrix(const Matrix& m) {
  json a = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) a.push_back(from_vector(m.row(i).transpose()));
  return a;
}

TargetSpec parse_target(const json& j) {
  const std::string where = "target";
  allow_keys(j, {"kind", "preset", "weights", "means", "covariances", "radius", "inner", "outer", "height", "beta",
                 "standard_form", "dim", "modes", "seed"},
             where);
  TargetSpec t;
  t.kind = get_or<std::string>(j, "kind", t.kind, where);
  static const std::set<std::string> kinds{"gmm", "gmm+annulus", "mueller-brown", "randomized-gmm", "gaussian"};
  if (!kinds.count(t.kind)) throw ConfigError("target: unknown kind '" + t.kind + "'");
  t.preset = get_or<std::string>(j, "preset", t.preset, where);
  if (j.contains("weights") || j.contains("means") || j.contains("covariances")) {
    if (!(j.contains("weights") && j.contains("means") && j.contains("covariances")))
      throw ConfigError("target: an explicit mixture needs weights, means and covariances");
    GmmSpec g;
    g.weights = get_or<std::vector<double>>(j, "weights", {}, where);
    for (const auto& m : j.at("means")) g.means.push_back(to_vector(m, "target.means"));
    for (const auto& c : j.at("covariances")) g.covariances.push_back(to_matrix(c, "target.covariances"));
    g.validate();
    t.mixture = g;
  }
  if (j.contains("radius")) t.radius = get_or<double>(j, "radius", 0.0, where);
  t.inner = get_or<double>(j, "inner", t.inner, where);
  t.outer = get_or<double>(j, "outer", t.outer, where);
  t.height = get_or<double>(j, "height", t.height, where);
  t.beta = get_or<double>(j, "beta", t.beta, where);
  t.standard_form = get_or<bool>(j, "standard_form", t.standard_form, where);
  t.dim = get_or<int>(j, "dim", t.dim, where);
  t.modes = get_or<int>(j, "modes", t.modes, where);
  t.seed = get_or<std::uint64_t>(j, "seed", t.seed, where);
  build_target(t);
  return t;
}

ScheduleSpec parse_schedule(const json& j) {
  const std::string where = "schedule";
  allow_keys(j, {"kind", "T", "N", "delta"}, where);
  ScheduleSpec s;
  s.kind = parse_schedule_kind(get_or<std::string>(j, "kind", "exp_decay", where));
  s.horizon = get_or<double>(j, "T", s.horizon, where);
  s.steps = get_or<int>(j, "N", s.steps, where);
  s.early_stop = get_or<double>(j, "delta", s.early_stop, where);
  s.build();
  return s;
}

StarvedAction parse_starved(const std::string& s) {
  if (s == "abort") return StarvedAction::abort;
  if (s == "importance") return StarvedAction::importance;
  throw ConfigError("unknown on_starved action '" + s + "'");
}

AlgorithmSpec parse_algorithm(const json& j) {
  const std::string where = "algorithm";
  allow_keys(j, {"name", "schedule", "policy", "c", "eps", "n_min", "n_max", "on_starved", "rgo_batch", "step",
                 "init", "fd_step"},
             where);
  AlgorithmSpec a;
  a.name = get_or<std::string>(j, "name", "", where);
  if (a.name != "zodmc" && a.name != "ula") throw ConfigError("algorithm: unknown name '" + a.name + "'");
  if (j.contains("schedule")) a.schedule = parse_schedule(j.at("schedule"));
  a.policy = parse_policy_kind(get_or<std::string>(j, "policy", "budget", where));
  a.c = get_or<double>(j, "c", a.c, where);
  a.eps = get_or<double>(j, "eps", a.eps, where);
  a.n_min = get_or<std::size_t>(j, "n_min", a.n_min, where);
  a.n_max = get_or<std::size_t>(j, "n_max", a.n_max, where);
  a.on_starved = parse_starved(get_or<std::string>(j, "on_starved", "importance", where));
  a.rgo_batch = get_or<std::size_t>(j, "rgo_batch", a.rgo_batch, where);
  a.ula_step = get_or<double>(j, "step", a.ula_step, where);
  a.ula_init = parse_ula_init(get_or<std::string>(j, "init", "origin", where));
  a.fd_step = get_or<double>(j, "fd_step", a.fd_step, where);
  return a;
}

SampleCountPolicy make_policy(const AlgorithmSpec& a, std::uint64_t budget) {
  SampleCountPolicy p;
  switch (a.policy) {
    case SampleCountPolicy::Kind::budget: p = SampleCountPolicy::budget(budget); break;
    case SampleCountPolicy::Kind::fixed: p = SampleCountPolicy::fixed(budget); break;
    case SampleCountPolicy::Kind::theory: p = SampleCountPolicy::theory(a.c, a.eps, a.n_min, a.n_max); break;
  }
  p.validate();
  return p;
}

SampleCountPolicy parse_policy(const json& j) {
  const std::string where = "policy";
  allow_keys(j, {"kind", "n", "c", "eps", "n_min", "n_max"}, where);
  const auto kind = parse_policy_kind(get_or<std::string>(j, "kind", "fixed", where));
  SampleCountPolicy p;
  if (kind == SampleCountPolicy::Kind::theory)
    p = SampleCountPolicy::theory(get_or<double>(j, "c", 1.0, where), get_or<double>(j, "eps", 0.5, where),
                                  get_or<std::size_t>(j, "n_min", 1, where),
                                  get_or<std::size_t>(j, "n_max", 100000, where));
  else if (kind == SampleCountPolicy::Kind::fixed)
    p = SampleCountPolicy::fixed(get_or<std::size_t>(j, "n", 100, where));
  else
    p = SampleCountPolicy::budget(get_or<std::size_t>(j, "n", 2200, where));
  p.validate();
  return p;
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string hex(std::uint64_t v) {
  std::ostringstream ss;
  ss << std::hex << v;
  return ss.str();
}

json ledger_json(const LedgerTotals& l) {
  json j;
  for (std::size_t p = 0; p < kPhaseCount; ++p) j[std::string(phase_name(static_cast<Phase>(p)))] = l.by_phase[p];
  j["total"] = l.total();
  return j;
}

json schedule_json(const Schedule& s) {
  json j;
  j["kind"] = std::string(schedule_kind_name(s.kind));
  j["T"] = s.horizon;
  j["N"] = s.steps;
  j["delta"] = s.early_stop;
  j["grid"] = s.grid;
  if (s.kappa) j["kappa"] = *s.kappa;
  return j;
}

json metrics_json(const MetricsReport& m) {
  json j;
  j["mmd"] = m.mmd;
  j["w2"] = m.w2;
  j["mode_weights"] = m.mode_weights;
  j["mode_tv"] = m.mode_tv;
  j["mean_error"] = m.mean_error;
  j["cov_error"] = m.cov_error;
  j["n_x"] = m.n_x;
  j["n_y"] = m.n_y;
  j["bandwidth"] = m.bandwidth;
  return j;
}

std::optional<GmmSpec> reference_mixture(const TargetSpec& spec, const Target& target) {
  if (target.mixture) return target.mixture;
  if (spec.kind == "gmm+annulus") {
    TargetSpec base = spec;
    base.kind = "gmm";
    return build_target(base).mixture;
  }
  return std::nullopt;
}

std::string num(double v) { return std::isfinite(v) ? format_double(v) : std::string(); }

}  // namespace

std::string TargetSpec::canonical() const {
  json j;
  j["kind"] = kind;
  if (kind == "gmm" || kind == "gmm+annulus") {
    if (mixture) {
      j["weights"] = mixture->weights;
      json means = json::array(), covs = json::array();
      for (const auto& m : mixture->means) means.push_back(from_vector(m));
      for (const auto& c : mixture->covariances) covs.push_back(from_matrix(c));
      j["means"] = means;
      j["covariances"] = covs;
    } else {
      j["preset"] = preset;
    }
    if (radius) j["radius"] = *radius;
  }
  if (kind == "gmm+annulus") {
    j["inner"] = inner;
    j["outer"] = outer;
    j["height"] = height;
  }
  if (kind == "mueller-brown") {
    j["beta"] = beta;
    j["standard_form"] = standard_form;
  }
  if (kind == "randomized-gmm") {
    j["dim"] = dim;
    j["modes"] = modes;
    j["seed"] = seed;
  }
  if (kind == "gaussian") j["dim"] = dim;
  return j.dump();
}

Target build_target(const TargetSpec& spec) {
  auto mixture = [&]() -> GmmSpec {
    if (spec.mixture) return *spec.mixture;
    if (spec.preset == "d1") return spec.radius ? benchmark_gmm_2d_radius(*spec.radius) : benchmark_gmm_2d();
    if (spec.preset == "d4") return benchmark_gmm_5d();
    throw ConfigError("target: unknown preset '" + spec.preset + "'");
  };
  if (spec.kind == "gmm") return make_gmm(mixture(), "gmm");
  if (spec.kind == "gmm+annulus")
    return apply_annulus_penalty(make_gmm(mixture(), "gmm"), spec.inner, spec.outer, spec.height);
  if (spec.kind == "mueller-brown") {
    MuellerBrownOptions o;
    o.beta = spec.beta;
    o.standard_form = spec.standard_form;
    return make_mueller_brown(o);
  }
  if (spec.kind == "randomized-gmm") {
    if (spec.dim < 1 || spec.modes < 1) throw ConfigError("randomized-gmm: dim and modes must be positive");
    return make_gmm(randomized_gmm(spec.dim, spec.seed, spec.modes), "randomized-gmm");
  }
  if (spec.kind == "gaussian") return make_standard_gaussian(spec.dim);
  throw ConfigError("target: unknown kind '" + spec.kind + "'");
}

TargetSpec apply_sweep(TargetSpec spec, const std::string& param, double value) {
  if (param == "radius") {
    if (spec.mixture || spec.preset != "d1") throw ConfigError("radius sweep needs the d1 preset");
    spec.radius = value;
  } else if (param == "dim") {
    if (value < 1 || value != std::floor(value)) throw ConfigError("dim sweep values must be positive integers");
    spec.dim = static_cast<int>(value);
  } else {
    throw ConfigError("unknown sweep parameter '" + param + "'");
  }
  build_target(spec);
  return spec;
}

std::string config_type(const std::string& json_text) {
  const json j = parse_json(json_text);
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  return get_or<std::string>(j, "type", "experiment", "config");
}

ExperimentConfig parse_experiment_config(const std::string& json_text) {
  const json j = parse_json(json_text);
  const std::string where = "experiment";
  allow_keys(j, {"type", "name", "target", "sweep", "algorithms", "oracle_budget", "n_output_samples", "ground_truth",
                 "metrics", "w2_points", "seed", "output_dir", "workers"},
             where);
  if (get_or<std::string>(j, "type", "experiment", where) != "experiment")
    throw ConfigError("not an experiment config");
  ExperimentConfig c;
  c.name = get_or<std::string>(j, "name", c.name, where);
  if (!j.contains("target")) throw ConfigError("experiment: missing target");
  c.target = parse_target(j.at("target"));
  if (j.contains("sweep")) {
    const json& s = j.at("sweep");
    allow_keys(s, {"param", "values"}, "sweep");
    c.sweep_param = get_or<std::string>(s, "param", "", "sweep");
    c.sweep_values = get_or<std::vector<double>>(s, "values", {}, "sweep");
    if (c.sweep_values.empty()) throw ConfigError("sweep: values must be nonempty");
    for (double v : c.sweep_values) apply_sweep(c.target, c.sweep_param, v);
  }
  if (!j.contains("algorithms") || !j.at("algorithms").is_array() || j.at("algorithms").empty())
    throw ConfigError("experiment: algorithms must be a nonempty list");
  for (const auto& a : j.at("algorithms")) c.algorithms.push_back(parse_algorithm(a));
  if (!j.contains("oracle_budget")) throw ConfigError("experiment: missing oracle_budget");
  const json& b = j.at("oracle_budget");
  if (b.is_array()) c.oracle_budgets = get_or<std::vector<std::uint64_t>>(j, "oracle_budget", {}, where);
  else c.oracle_budgets = {get_or<std::uint64_t>(j, "oracle_budget", 0, where)};
  if (c.oracle_budgets.empty()) throw ConfigError("experiment: oracle_budget must be nonempty");
  for (auto v : c.oracle_budgets)
    if (v == 0) throw ConfigError("experiment: budgets must be positive");
  c.n_output_samples = get_or<std::size_t>(j, "n_output_samples", c.n_output_samples, where);
  if (c.n_output_samples < 2) throw ConfigError("experiment: n_output_samples must be at least 2");
  if (j.contains("ground_truth")) {
    const json& g = j.at("ground_truth");
    allow_keys(g, {"n", "inflation"}, "ground_truth");
    c.ground_truth_n = get_or<std::size_t>(g, "n", c.ground_truth_n, "ground_truth");
    c.ground_truth_inflation = get_or<double>(g, "inflation", c.ground_truth_inflation, "ground_truth");
  }
  c.w2_points = get_or<std::size_t>(j, "w2_points", c.w2_points, where);
  c.seed = get_or<std::uint64_t>(j, "seed", c.seed, where);
  c.output_dir = get_or<std::string>(j, "output_dir", c.output_dir, where);
  c.workers = get_or<int>(j, "workers", c.workers, where);
  return c;
}

ScoreErrorConfig parse_score_error_config(const std::string& json_text) {
  const json j = parse_json(json_text);
  const std::string where = "score-error";
  allow_keys(j, {"type", "name", "target", "schedule", "policy", "n_eval_points", "seed", "output_dir", "workers"},
             where);
  if (get_or<std::string>(j, "type", "", where) != "score-error") throw ConfigError("not a score-error config");
  ScoreErrorConfig c;
  c.name = get_or<std::string>(j, "name", c.name, where);
  if (!j.contains("target")) throw ConfigError("score-error: missing target");
  c.target = parse_target(j.at("target"));
  if (j.contains("schedule")) c.schedule = parse_schedule(j.at("schedule"));
  if (j.contains("policy")) c.policy = parse_policy(j.at("policy"));
  c.n_eval_points = get_or<std::size_t>(j, "n_eval_points", c.n_eval_points, where);
  c.seed = get_or<std::uint64_t>(j, "seed", c.seed, where);
  c.output_dir = get_or<std::string>(j, "output_dir", c.output_dir, where);
  c.workers = get_or<int>(j, "workers", c.workers, where);
  const Target t = build_target(c.target);
  if (!t.has_analytic_score() || !t.mixture)
    throw ConfigError("score-error: target kind '" + c.target.kind + "' has no analytic score");
  return c;
}

AcceptanceConfig parse_acceptance_config(const std::string& json_text) {
  const json j = parse_json(json_text);
  const std::string where = "acceptance";
  allow_keys(j, {"type", "name", "target", "schedule", "trajectories", "proposals", "pilot", "seed", "output_dir",
                 "workers"},
             where);
  if (get_or<std::string>(j, "type", "", where) != "acceptance") throw ConfigError("not an acceptance config");
  AcceptanceConfig c;
  c.name = get_or<std::string>(j, "name", c.name, where);
  if (!j.contains("target")) throw ConfigError("acceptance: missing target");
  c.target = parse_target(j.at("target"));
  if (j.contains("schedule")) c.schedule = parse_schedule(j.at("schedule"));
  c.trajectories = get_or<std::size_t>(j, "trajectories", c.trajectories, where);
  c.proposals = get_or<std::size_t>(j, "proposals", c.proposals, where);
  if (c.trajectories < 2 || c.proposals < 1) throw ConfigError("acceptance: need trajectories >= 2, proposals >= 1");
  c.pilot = get_or<bool>(j, "pilot", c.pilot, where);
  c.seed = get_or<std::uint64_t>(j, "seed", c.seed, where);
  c.output_dir = get_or<std::string>(j, "output_dir", c.output_dir, where);
  c.workers = get_or<int>(j, "workers", c.workers, where);
  return c;
}

std::string validate_config(const std::string& json_text) {
  const std::string type = config_type(json_text);
  std::ostringstream out;
  if (type == "experiment") {
    const auto c = parse_experiment_config(json_text);
    out << "experiment '" << c.name << "': target " << c.target.kind << ", " << c.algorithms.size()
        << " algorithm(s), " << c.oracle_budgets.size() << " budget(s)";
    if (!c.sweep_param.empty()) out << ", " << c.sweep_values.size() << " " << c.sweep_param << " value(s)";
  } else if (type == "score-error") {
    const auto c = parse_score_error_config(json_text);
    out << "score-error '" << c.name << "': target " << c.target.kind << ", " << c.schedule.steps << " grid times";
  } else if (type == "acceptance") {
    const auto c = parse_acceptance_config(json_text);
    out << "acceptance '" << c.name << "': target " << c.target.kind << ", " << c.trajectories << " trajectories";
  } else {
    throw ConfigError("unknown config type '" + type + "'");
  }
  return out.str();
}

std::vector<double> region_masses(const Matrix& points, double inner, double outer) {
  std::vector<double> m(3, 0.0);
  if (points.rows() == 0) return m;
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    const double r = points.row(i).norm();
    m[r <= inner ? 0 : (r < outer ? 1 : 2)] += 1.0;
  }
  for (double& v : m) v /= static_cast<double>(points.rows());
  return m;
}

Matrix ground_truth_batch(const TargetSpec& spec, std::size_t n, double inflation, std::uint64_t seed,
                          const std::filesystem::path& cache_dir) {
  const std::string key = spec.canonical() + "|" + std::to_string(seed) + "|" + std::to_string(n) + "|" +
                          format_double(inflation);
  const auto path = cache_dir / ("ground_truth_" + hex(fnv1a(key)) + ".csv");
  if (std::filesystem::exists(path)) {
    Matrix cached = read_samples_csv(path);
    if (static_cast<std::size_t>(cached.rows()) == n) return cached;
  }
  const Target target = build_target(spec);
  Envelope envelope;
  if (spec.kind == "gmm+annulus") {
    TargetSpec base = spec;
    base.kind = "gmm";
    envelope = Envelope::gmm(*build_target(base).mixture, 0.0);
  } else if (spec.kind == "gaussian") {
    envelope = Envelope::gaussian(Vector::Zero(spec.dim), Matrix::Identity(spec.dim, spec.dim),
                                  0.5 * spec.dim * std::log(2.0 * std::numbers::pi));
  } else if (target.mixture) {
    envelope = Envelope::inflated_gmm(*target.mixture, inflation);
  } else {
    throw ConfigError("no ground-truth proposal is available for target kind '" + spec.kind + "'");
  }
  QueryLedger ledger;
  Rng rng = make_stream(seed, 0, kTagGroundTruth);
  Matrix points = ground_truth_rejection(target, envelope, n, ledger, rng).points;
  write_samples_csv(path, points);
  return points;
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
  ExperimentResult result;
  result.output_dir = config.output_dir;
  const std::filesystem::path out = config.output_dir;
  std::filesystem::create_directories(out);

  json manifest;
  manifest["name"] = config.name;
  manifest["version"] = ZODMC_VERSION;
  manifest["seed"] = config.seed;
  manifest["target"] = json::parse(config.target.canonical());
  manifest["n_output_samples"] = config.n_output_samples;
  manifest["ground_truth"] = {{"n", config.ground_truth_n}, {"inflation", config.ground_truth_inflation}};
  manifest["ula_gradient"] = "central finite differences, 2d queries per step";
  json cells_json = json::array();

  std::ostringstream curves;
  curves << "sweep_param,sweep_value,algorithm,budget,status,total_queries,planned_queries,slack,mmd,w2,mode_tv,"
            "mean_error,cov_error,unassigned,region_inner,region_annulus,region_outer,fallbacks,envelope_violations\n";

  std::vector<std::optional<double>> sweep;
  if (config.sweep_param.empty()) sweep.push_back(std::nullopt);
  else for (double v : config.sweep_values) sweep.push_back(v);

  for (const auto& sv : sweep) {
    const TargetSpec tspec = sv ? apply_sweep(config.target, config.sweep_param, *sv) : config.target;
    const Target target = build_target(tspec);
    const auto mixture = reference_mixture(tspec, target);
    const bool annulus = tspec.kind == "gmm+annulus";

    std::optional<Matrix> truth;
    std::string truth_error;
    try {
      truth = ground_truth_batch(tspec, config.ground_truth_n, config.ground_truth_inflation, config.seed, out / "cache");
    } catch (const std::exception& e) {
      truth_error = e.what();
    }

    for (std::uint64_t budget : config.oracle_budgets) {
      std::optional<std::uint64_t> zodmc_total;
      for (const AlgorithmSpec& alg : config.algorithms) {
        CellResult cell;
        cell.algorithm = alg.name;
        cell.sweep_value = sv;
        cell.budget = budget;
        std::string tag = alg.name;
        if (sv) tag += "_" + config.sweep_param + format_double(*sv);
        tag += "_b" + std::to_string(budget);
        json cj;
        try {
          SampleBatch batch;
          if (alg.name == "zodmc") {
            ZodmcConfig zc;
            zc.schedule = alg.schedule.build();
            zc.policy = make_policy(alg, budget);
            zc.batch_size = config.n_output_samples;
            zc.seed = config.seed;
            zc.workers = config.workers;
            zc.score.rgo.batch_size = alg.rgo_batch;
            zc.score.on_starved = alg.on_starved;
            QueryLedger ledger;
            batch = run_zodmc(target, zc, ledger);
            cell.planned_queries = budget * static_cast<std::uint64_t>(zc.schedule.steps) * config.n_output_samples +
                                   batch.ledger[Phase::optimization];
            zodmc_total = batch.ledger.total();
            cj["schedule"] = schedule_json(zc.schedule);
            cj["per_step_acceptance"] = batch.per_step_acceptance;
          } else {
            UlaConfig uc;
            uc.step = alg.ula_step;
            uc.init = alg.ula_init;
            uc.fd_step = alg.fd_step;
            uc.n_chains = config.n_output_samples;
            uc.seed = config.seed;
            uc.workers = config.workers;
            const std::uint64_t matched =
                zodmc_total.value_or(budget * static_cast<std::uint64_t>(alg.schedule.steps) * config.n_output_samples);
            uc.n_steps = ula_steps_for_budget(matched / uc.n_chains, target.dim());
            cell.planned_queries = matched;
            QueryLedger ledger;
            batch = run_ula(target, uc, ledger);
            cj["ula_steps"] = uc.n_steps;
            cj["diverged"] = batch.diverged;
          }
          cell.total_queries = batch.ledger.total();
          cell.fallbacks = batch.fallbacks;
          cell.envelope_violations = batch.envelope_violations;
          cell.samples_file = "samples_" + tag + ".csv";
          write_samples_csv(out / cell.samples_file, batch.points);
          if (annulus) cell.region_mass = region_masses(batch.points, tspec.inner, tspec.outer);
          if (mixture) {
            const auto mw = mode_weights(batch.points, mixture->means, annulus ? std::nullopt : std::optional<double>{});
            cell.unassigned = mw.unassigned_fraction;
          }
          if (truth && batch.points.rows() >= 2) {
            Rng rng = make_stream(config.seed, 0, kTagMetrics);
            cell.metrics = compare_batches(batch.points, *truth, mixture ? mixture->means : std::vector<Vector>{}, rng,
                                           config.w2_points);
            cell.has_metrics = true;
          }
          cj["ledger"] = ledger_json(batch.ledger);
          cell.ok = true;
        } catch (const std::exception& e) {
          cell.error = e.what();
          ++result.failed;
        }

        cj["algorithm"] = cell.algorithm;
        if (sv) cj["sweep_value"] = *sv;
        cj["budget"] = budget;
        cj["status"] = cell.ok ? "ok" : "failed";
        if (!cell.ok) cj["error"] = cell.error;
        cj["total_queries"] = cell.total_queries;
        cj["planned_queries"] = cell.planned_queries;
        cj["fallbacks"] = cell.fallbacks;
        cj["envelope_violations"] = cell.envelope_violations;
        if (!cell.samples_file.empty()) cj["samples"] = cell.samples_file;
        if (cell.has_metrics) cj["metrics"] = metrics_json(cell.metrics);
        else if (!truth_error.empty()) cj["metrics_unavailable"] = truth_error;
        if (!cell.region_mass.empty()) cj["region_mass"] = cell.region_mass;
        if (cell.ok) write_text(out / ("metrics_" + tag + ".json"), cj.dump(2) + "\n");
        cells_json.push_back(cj);

        const double nan = std::nan("");
        const auto& m = cell.metrics;
        const auto slack = static_cast<double>(cell.total_queries) - static_cast<double>(cell.planned_queries);
        const auto rm = [&](std::size_t i) { return cell.region_mass.empty() ? nan : cell.region_mass[i]; };
        curves << config.sweep_param << ',' << (sv ? num(*sv) : "") << ',' << cell.algorithm << ',' << budget << ','
               << (cell.ok ? "ok" : "failed") << ',' << cell.total_queries << ',' << cell.planned_queries << ','
               << num(cell.ok ? slack : nan) << ',' << num(cell.has_metrics ? m.mmd : nan) << ','
               << num(cell.has_metrics ? m.w2 : nan) << ','
               << num(cell.has_metrics && !m.mode_weights.empty() ? m.mode_tv : nan) << ','
               << num(cell.has_metrics ? m.mean_error : nan) << ',' << num(cell.has_metrics ? m.cov_error : nan) << ','
               << num(cell.ok ? cell.unassigned : nan) << ',' << num(rm(0)) << ',' << num(rm(1)) << ','
               << num(rm(2)) << ',' << cell.fallbacks << ',' << cell.envelope_violations << '\n';
        result.cells.push_back(std::move(cell));
      }
    }
  }
  manifest["cells"] = cells_json;
  write_text(out / "curves.csv", curves.str());
  write_text(out / "manifest.json", manifest.dump(2) + "\n");
  return result;
}

std::vector<ScoreErrorRow> run_score_error_study(const ScoreErrorConfig& config) {
  const Target target = build_target(config.target);
  if (!target.has_analytic_score() || !target.mixture)
    throw ConfigError("score-error: target kind '" + config.target.kind + "' has no analytic score");
  const Schedule sched = config.schedule.build();
  QueryLedger ledger;
  const MinTracker tracker = locate_minimum(target, default_opt_starts(target.dim(), config.seed), ledger);

  std::vector<ScoreErrorRow> rows;
  std::ostringstream csv;
  csv << "t,mean,std,n_points\n";
  for (int k = 0; k < sched.steps; ++k) {
    const double t = sched.score_time(k);
    const auto s = score_l2_error(target, t, config.policy, tracker, config.n_eval_points,
                                  config.seed + static_cast<std::uint64_t>(k), config.workers);
    rows.push_back({t, s.mean, s.std, s.n_points});
    csv << format_double(t) << ',' << format_double(s.mean) << ',' << format_double(s.std) << ',' << s.n_points
        << '\n';
  }
  write_text(std::filesystem::path(config.output_dir) / "score_error.csv", csv.str());
  return rows;
}

std::vector<AcceptanceRow> run_acceptance_study(const AcceptanceConfig& config) {
  const Target target = build_target(config.target);
  ZodmcConfig zc;
  zc.schedule = config.schedule.build();
  zc.policy = SampleCountPolicy::budget(config.proposals);
  zc.batch_size = config.trajectories;
  zc.seed = config.seed;
  zc.workers = config.workers;
  zc.score.on_starved = StarvedAction::importance;
  zc.opt_starts = default_opt_starts(target.dim(), config.seed);
  if (config.pilot) {
    QueryLedger scratch;
    zc.opt_starts.push_back(run_zodmc(target, zc, scratch).vstar_point);
  }
  zc.record_trace = target.smoothness_hint.has_value();
  QueryLedger ledger;
  const SampleBatch batch = run_zodmc(target, zc, ledger);

  std::optional<Vector> xstar;
  if (target.smoothness_hint) {
    QueryLedger scratch;
    xstar = locate_minimum(target, zc.opt_starts, scratch).best_point;
  }

  std::vector<AcceptanceRow> rows;
  std::ostringstream csv;
  csv << "t,mean_accepted,std_error,predicted,predicted_std_error\n";
  const auto n = static_cast<double>(config.trajectories);
  const auto m = static_cast<double>(config.proposals);
  for (std::size_t k = 0; k < batch.steps.size(); ++k) {
    const StepStats& st = batch.steps[k];
    AcceptanceRow row;
    row.t = st.t;
    row.mean_accepted = static_cast<double>(st.accepted) / n;
    const double var = (st.accepted_sq - n * row.mean_accepted * row.mean_accepted) / (n - 1.0);
    row.std_error = std::sqrt(std::max(0.0, var) / n);
    if (xstar && k < batch.trace.size()) {
      const Matrix& states = batch.trace[k];
      double pred = 0.0, binom = 0.0;
      for (Eigen::Index i = 0; i < states.rows(); ++i) {
        const double p =
            1.0 / expected_proposals(*target.smoothness_hint, st.t, states.row(i).transpose(), *xstar, 1);
        pred += m * p;
        binom += m * p * (1.0 - p);
      }
      row.predicted = pred / n;
      row.predicted_std_error = std::sqrt(binom) / n;
    }
    rows.push_back(row);
    csv << format_double(row.t) << ',' << format_double(row.mean_accepted) << ',' << format_double(row.std_error)
        << ',' << (row.predicted ? format_double(*row.predicted) : "") << ','
        << (row.predicted_std_error ? format_double(*row.predicted_std_error) : "") << '\n';
  }
  write_text(std::filesystem::path(config.output_dir) / "acceptance.csv", csv.str());
  return rows;
}

}  // namespace zodmc
