#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "zodmc/baselines.hpp"
#include "zodmc/bench.hpp"
#include "zodmc/diffuser.hpp"
#include "zodmc/io.hpp"
#include "zodmc/metrics.hpp"
#include "zodmc/ou.hpp"
#include "zodmc/rgo.hpp"
#include "zodmc/schedule.hpp"
#include "zodmc/score.hpp"
#include "zodmc/target.hpp"

namespace py = pybind11;
using namespace zodmc;

namespace {

GmmSpec to_spec(const std::vector<double>& weights, const std::vector<Vector>& means,
                const std::vector<Matrix>& covariances) {
  GmmSpec spec{weights, means, covariances};
  spec.validate();
  return spec;
}

py::dict ledger_dict(const LedgerTotals& l) {
  py::dict d;
  for (std::size_t p = 0; p < kPhaseCount; ++p)
    d[py::str(std::string(phase_name(static_cast<Phase>(p))))] = l.by_phase[p];
  d["total"] = l.total();
  return d;
}

py::dict batch_dict(const SampleBatch& b) {
  py::dict d;
  d["algorithm"] = b.algorithm;
  d["points"] = b.points;
  d["ledger"] = ledger_dict(b.ledger);
  d["per_step_acceptance"] = b.per_step_acceptance;
  d["truncated"] = b.truncated;
  d["diverged"] = b.diverged;
  d["fallbacks"] = b.fallbacks;
  d["envelope_violations"] = b.envelope_violations;
  return d;
}

Phase parse_phase(const std::string& name) {
  for (std::size_t p = 0; p < kPhaseCount; ++p)
    if (phase_name(static_cast<Phase>(p)) == name) return static_cast<Phase>(p);
  throw ArgumentError("unknown phase '" + name + "'");
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Zeroth-order diffusion Monte Carlo: samplers, oracles and metrics";
  m.attr("__version__") = ZODMC_VERSION;

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<RgoStarved>(m, "RgoStarved", PyExc_RuntimeError);

  py::class_<QueryLedger>(m, "QueryLedger")
      .def(py::init<>())
      .def("count", [](const QueryLedger& l, const std::string& phase) { return l.count(parse_phase(phase)); })
      .def_property_readonly("total", &QueryLedger::zeroth_order_count)
      .def("snapshot", [](const QueryLedger& l) { return ledger_dict(l.snapshot()); });

  py::class_<Target>(m, "Target")
      .def_property_readonly("name", &Target::name)
      .def_property_readonly("dim", &Target::dim)
      .def("potential",
           [](const Target& t, const Vector& x, QueryLedger* ledger) {
             QueryLedger scratch;
             return eval_potential(t, x, ledger ? *ledger : scratch, Phase::baseline);
           },
           py::arg("x"), py::arg("ledger") = nullptr)
      .def("log_density", &Target::analytic_log_density, py::arg("x"))
      .def("score_at_time", &Target::analytic_score_at_time, py::arg("t"), py::arg("x"))
      .def_property_readonly("second_moment_hint", [](const Target& t) { return t.second_moment_hint; })
      .def_property_readonly("smoothness_hint", [](const Target& t) { return t.smoothness_hint; });

  m.def("gmm_target",
        [](const std::vector<double>& w, const std::vector<Vector>& mu, const std::vector<Matrix>& cov) {
          return make_gmm(to_spec(w, mu, cov));
        },
        py::arg("weights"), py::arg("means"), py::arg("covariances"));
  m.def("benchmark_gmm_2d", [](std::optional<double> radius) {
        return make_gmm(radius ? benchmark_gmm_2d_radius(*radius) : benchmark_gmm_2d());
      }, py::arg("radius") = py::none());
  m.def("benchmark_gmm_5d", [] { return make_gmm(benchmark_gmm_5d()); });
  m.def("benchmark_gmm_2d_means", [](std::optional<double> radius) {
        return (radius ? benchmark_gmm_2d_radius(*radius) : benchmark_gmm_2d()).means;
      }, py::arg("radius") = py::none());
  m.def("gaussian_target", &make_standard_gaussian, py::arg("dim"));
  m.def("mueller_brown_target",
        [](double beta, bool standard_form) {
          MuellerBrownOptions o;
          o.beta = beta;
          o.standard_form = standard_form;
          return make_mueller_brown(o);
        },
        py::arg("beta") = 0.1, py::arg("standard_form") = false);
  m.def("with_annulus", &apply_annulus_penalty, py::arg("target"), py::arg("inner") = 5.0, py::arg("outer") = 11.0,
        py::arg("height") = 8.0);

  py::class_<Schedule>(m, "Schedule")
      .def_property_readonly("kind", [](const Schedule& s) { return std::string(schedule_kind_name(s.kind)); })
      .def_readonly("horizon", &Schedule::horizon)
      .def_readonly("early_stop", &Schedule::early_stop)
      .def_readonly("steps", &Schedule::steps)
      .def_readonly("grid", &Schedule::grid)
      .def_readonly("gammas", &Schedule::gammas)
      .def_readonly("kappa", &Schedule::kappa)
      .def("validate", &validate_schedule);
  m.def("build_schedule",
        [](const std::string& kind, double T, int N, double delta) {
          return build_schedule(parse_schedule_kind(kind), T, N, delta);
        },
        py::arg("kind") = "exp_decay", py::arg("T") = 2.0, py::arg("N") = 25, py::arg("delta") = 5e-3);

  m.def("ei_step", [](const Vector& x, const Vector& s, double gamma, const Vector& xi) {
    return ei_step(x, s, gamma, xi);
  }, py::arg("x"), py::arg("s"), py::arg("gamma"), py::arg("xi"));
  m.def("expected_proposals",
        [](double L, double t, const Vector& x, const Vector& xstar, std::size_t n) {
          return expected_proposals(L, t, x, xstar, n);
        },
        py::arg("L"), py::arg("t"), py::arg("x"), py::arg("xstar"), py::arg("n") = 1);
  m.def("ou_w2_bound", &ou_w2_bound, py::arg("t"), py::arg("m2sq"), py::arg("d"));
  m.def("ou_kl_bound", &ou_kl_bound, py::arg("t"), py::arg("m2sq"), py::arg("d"));
  m.def("gmm_score_at_time",
        [](const std::vector<double>& w, const std::vector<Vector>& mu, const std::vector<Matrix>& cov, double t,
           const Vector& x) { return gmm_score_at_time(to_spec(w, mu, cov), t, x); },
        py::arg("weights"), py::arg("means"), py::arg("covariances"), py::arg("t"), py::arg("x"));

  m.def("rgo_sample",
        [](const Target& target, double t, const Vector& x, std::size_t n, std::uint64_t seed,
           std::uint64_t max_proposals) {
          QueryLedger ledger;
          MinTracker tracker = locate_minimum(target, default_opt_starts(target.dim(), seed), ledger);
          Rng rng = make_stream(seed, 0, 0x960);
          RgoRequest req{t, x, n, max_proposals};
          RgoResult r;
          {
            py::gil_scoped_release release;
            r = rgo_sample(target, tracker, req, ledger, rng);
          }
          py::dict d;
          d["samples"] = r.samples;
          d["proposals_used"] = r.proposals_used;
          d["acceptance_rate"] = r.acceptance_rate;
          d["envelope_violations"] = r.envelope_violations;
          d["complete"] = r.complete;
          d["vstar"] = tracker.best_value;
          return d;
        },
        py::arg("target"), py::arg("t"), py::arg("x"), py::arg("n") = 1, py::arg("seed") = 0,
        py::arg("max_proposals") = 1'000'000);

  m.def("run_zodmc",
        [](const Target& target, const Schedule& schedule, std::size_t budget, std::size_t n, std::uint64_t seed,
           const std::string& policy, const std::string& on_starved, int workers, QueryLedger* ledger) {
          ZodmcConfig c;
          c.schedule = schedule;
          const auto kind = parse_policy_kind(policy);
          c.policy = kind == SampleCountPolicy::Kind::fixed ? SampleCountPolicy::fixed(budget)
                                                            : SampleCountPolicy::budget(budget);
          if (kind == SampleCountPolicy::Kind::theory) throw ConfigError("theory policy is not exposed here");
          c.batch_size = n;
          c.seed = seed;
          c.workers = workers;
          if (on_starved == "importance") c.score.on_starved = StarvedAction::importance;
          else if (on_starved != "abort") throw ConfigError("on_starved must be 'abort' or 'importance'");
          QueryLedger scratch;
          SampleBatch b;
          {
            py::gil_scoped_release release;
            b = run_zodmc(target, c, ledger ? *ledger : scratch);
          }
          return batch_dict(b);
        },
        py::arg("target"), py::arg("schedule"), py::arg("budget") = 2200, py::arg("n") = 1000, py::arg("seed") = 0,
        py::arg("policy") = "budget", py::arg("on_starved") = "abort", py::arg("workers") = 0,
        py::arg("ledger") = nullptr);

  m.def("run_ula",
        [](const Target& target, double step, std::size_t n_steps, std::size_t n_chains, const std::string& init,
           std::uint64_t seed, int workers) {
          UlaConfig c;
          c.step = step;
          c.n_steps = n_steps;
          c.n_chains = n_chains;
          c.init = parse_ula_init(init);
          c.seed = seed;
          c.workers = workers;
          QueryLedger ledger;
          SampleBatch b;
          {
            py::gil_scoped_release release;
            b = run_ula(target, c, ledger);
          }
          return batch_dict(b);
        },
        py::arg("target"), py::arg("step") = 0.01, py::arg("n_steps") = 1000, py::arg("n_chains") = 1024,
        py::arg("init") = "origin", py::arg("seed") = 0, py::arg("workers") = 0);

  m.def("ground_truth",
        [](const std::vector<double>& w, const std::vector<Vector>& mu, const std::vector<Matrix>& cov, std::size_t n,
           double inflation, std::uint64_t seed) {
          const GmmSpec spec = to_spec(w, mu, cov);
          const Target target = make_gmm(spec);
          QueryLedger ledger;
          Rng rng = make_stream(seed, 0, 0x6707);
          py::gil_scoped_release release;
          return ground_truth_rejection(target, Envelope::inflated_gmm(spec, inflation), n, ledger, rng).points;
        },
        py::arg("weights"), py::arg("means"), py::arg("covariances"), py::arg("n"), py::arg("inflation") = 3.0,
        py::arg("seed") = 0);

  m.def("mmd", [](const Matrix& X, const Matrix& Y, std::optional<double> h) { return mmd(X, Y, h); },
        py::arg("X"), py::arg("Y"), py::arg("bandwidth") = py::none());
  m.def("w2_empirical",
        [](const Matrix& X, const Matrix& Y, std::optional<std::uint64_t> subsample_seed) {
          if (!subsample_seed) return w2_empirical(X, Y);
          Rng rng = make_stream(*subsample_seed, 0, 0x2);
          return w2_empirical(X, Y, &rng);
        },
        py::arg("X"), py::arg("Y"), py::arg("subsample_seed") = py::none());
  m.def("mode_weights",
        [](const Matrix& X, const std::vector<Vector>& means, std::optional<double> radius) {
          const ModeWeights w = mode_weights(X, means, radius);
          return py::make_tuple(w.weights, w.unassigned_fraction);
        },
        py::arg("X"), py::arg("means"), py::arg("radius") = py::none());

  m.def("validate_config", [](const std::string& path) { return validate_config(read_text(path)); },
        py::arg("path"));
  m.def("run_experiment",
        [](const std::string& path, std::optional<std::string> out) {
          auto c = parse_experiment_config(read_text(path));
          if (out) c.output_dir = *out;
          ExperimentResult r;
          {
            py::gil_scoped_release release;
            r = run_experiment(c);
          }
          py::list cells;
          for (const auto& cell : r.cells) {
            py::dict d;
            d["algorithm"] = cell.algorithm;
            d["budget"] = cell.budget;
            d["sweep_value"] = cell.sweep_value;
            d["ok"] = cell.ok;
            d["error"] = cell.error;
            d["total_queries"] = cell.total_queries;
            if (cell.has_metrics) {
              d["mmd"] = cell.metrics.mmd;
              d["w2"] = cell.metrics.w2;
              d["mode_tv"] = cell.metrics.mode_tv;
            }
            cells.append(d);
          }
          return cells;
        },
        py::arg("path"), py::arg("out") = py::none());
  m.def("score_error_study",
        [](const std::string& path, std::optional<std::string> out) {
          auto c = parse_score_error_config(read_text(path));
          if (out) c.output_dir = *out;
          py::gil_scoped_release release;
          std::vector<std::tuple<double, double, double>> rows;
          for (const auto& r : run_score_error_study(c)) rows.emplace_back(r.t, r.mean, r.std);
          return rows;
        },
        py::arg("path"), py::arg("out") = py::none());
  m.def("acceptance_study",
        [](const std::string& path, std::optional<std::string> out) {
          auto c = parse_acceptance_config(read_text(path));
          if (out) c.output_dir = *out;
          py::gil_scoped_release release;
          std::vector<std::tuple<double, double, double>> rows;
          for (const auto& r : run_acceptance_study(c)) rows.emplace_back(r.t, r.mean_accepted, r.std_error);
          return rows;
        },
        py::arg("path"), py::arg("out") = py::none());
}
