#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "mstgd/experiments.hpp"
#include "mstgd/suites.hpp"

namespace py = pybind11;
using namespace mstgd;

namespace {

CoefficientMode coeff_from(const std::string& name) {
  if (name == "general") return CoefficientMode::general;
  if (name == "equal-mean" || name == "equal_mean") return CoefficientMode::equal_mean;
  throw std::invalid_argument("unknown coefficient mode: " + name);
}

py::dict blend_to_dict(const BlendCoefficients& bc) {
  py::dict d;
  d["p"] = bc.p;
  d["q"] = bc.q;
  d["degenerate"] = bc.degenerate;
  d["clamped"] = bc.clamped;
  d["full_memory"] = bc.full_memory;
  return d;
}

py::dict mc_to_dict(const McMoments& mc) {
  py::dict d;
  d["mean"] = mc.mean;
  d["mean_se"] = mc.mean_se;
  d["variance"] = mc.variance;
  d["variance_se"] = mc.variance_se;
  return d;
}

ScriptedProtocol protocol_from(
    const std::vector<std::vector<std::pair<double, double>>>& moments,
    const std::string& kind, bool mean_zeroing) {
  ScriptedProtocol p;
  for (const auto& step : moments) {
    std::vector<ScalarMoments> row;
    for (const auto& [mean, var] : step) row.push_back({mean, var});
    p.moments.push_back(std::move(row));
  }
  if (p.moments.empty()) throw std::invalid_argument("empty protocol");
  p.weights = StratifiedWeights::uniform(static_cast<int>(p.moments[0].size()));
  if (kind == "general") p.kind = EstimatorKind::memory_general;
  else if (kind == "equal-mean") p.kind = EstimatorKind::memory_equal_mean;
  else if (kind == "memoryless") p.kind = EstimatorKind::memoryless;
  else throw std::invalid_argument("unknown estimator kind: " + kind);
  p.mean_zeroing = mean_zeroing;
  return p;
}

py::dict trace_to_dict(const RunTrace& trace) {
  std::vector<long> iteration, grad_evals;
  std::vector<double> loss, grad_norm;
  std::vector<py::object> gap, train_acc, test_acc;
  for (const auto& row : trace.rows) {
    iteration.push_back(row.iteration);
    grad_evals.push_back(row.gradient_evals);
    loss.push_back(row.loss);
    grad_norm.push_back(row.gradient_norm);
    auto opt = [](const std::optional<double>& v) {
      return v ? py::cast(*v) : py::object(py::none());
    };
    gap.push_back(opt(row.optimality_gap));
    train_acc.push_back(opt(row.train_accuracy));
    test_acc.push_back(opt(row.test_accuracy));
  }
  py::dict d;
  d["iteration"] = iteration;
  d["gradient_evals"] = grad_evals;
  d["loss"] = loss;
  d["gradient_norm"] = grad_norm;
  d["optimality_gap"] = gap;
  d["train_accuracy"] = train_acc;
  d["test_accuracy"] = test_acc;
  d["aborted_nonfinite"] = trace.aborted_nonfinite;
  return d;
}

}  // namespace

PYBIND11_MODULE(_mstgd, m) {
  m.doc() = "memory stochastic stratified gradient estimator and optimizer";

  m.def(
      "blend_general",
      [](double e_prev, double e_cur, double v_prev, double v_cur) {
        return blend_to_dict(compute_blend_general(e_prev, e_cur, v_prev, v_cur));
      },
      py::arg("e_prev"), py::arg("e_cur"), py::arg("v_prev"), py::arg("v_cur"),
      "General blend coefficients from consecutive moments.");

  m.def(
      "blend_equal_mean",
      [](double v_prev, double v_cur) {
        return blend_to_dict(compute_blend_equal_mean(v_prev, v_cur));
      },
      py::arg("v_prev"), py::arg("v_cur"),
      "Equal-mean blend coefficients (p + q = 1 exactly).");

  m.def(
      "stationary_variance",
      [](const std::vector<std::pair<double, double>>& prev,
         const std::vector<std::pair<double, double>>& cur,
         const std::vector<double>& weights) {
        if (prev.size() != cur.size() || prev.size() != weights.size())
          throw std::invalid_argument("category count mismatch");
        std::vector<CategoryMoments> p, c;
        for (std::size_t j = 0; j < prev.size(); ++j) {
          p.push_back({Eigen::VectorXd::Constant(1, prev[j].first),
                       Eigen::VectorXd::Constant(1, prev[j].second), 1});
          c.push_back({Eigen::VectorXd::Constant(1, cur[j].first),
                       Eigen::VectorXd::Constant(1, cur[j].second), 1});
        }
        StratifiedWeights w;
        w.w = weights;
        w.validate();
        const auto v = variance_sp(p, c, w);
        return py::make_tuple(v.value[0], v.degenerate_count);
      },
      py::arg("prev"), py::arg("cur"), py::arg("weights"),
      "Stationary-point variance of the blended statistic for scalar "
      "categories; returns (value, degenerate_count).");

  m.def(
      "scripted_moments",
      [](const std::vector<std::vector<std::pair<double, double>>>& moments,
         const std::string& kind, bool mean_zeroing, long replications,
         std::uint64_t seed) {
        const auto protocol = protocol_from(moments, kind, mean_zeroing);
        py::dict d = mc_to_dict(mc_estimator_moments(protocol, replications, seed));
        const auto oracle = exact_estimator_recursion(protocol);
        d["recursion_mean"] = oracle.mean;
        d["recursion_variance"] = oracle.variance;
        return d;
      },
      py::arg("moments"), py::arg("kind") = "equal-mean",
      py::arg("mean_zeroing") = false, py::arg("replications") = 10000,
      py::arg("seed") = 0,
      "Monte-Carlo and exact recursion moments of the scripted estimator; "
      "moments is [step][category] -> (mean, variance).");

  m.def(
      "dominance_threshold",
      [](double eta, double gamma, long k0, long kmax) -> py::object {
        const auto r = geometric_dominance_threshold(eta, gamma, k0, kmax);
        if (!r.threshold) return py::none();
        return py::cast(*r.threshold);
      },
      py::arg("eta"), py::arg("gamma"), py::arg("k0") = 0, py::arg("kmax") = 10000,
      "Smallest k from which the geometric envelope dominates, or None.");

  m.def(
      "estimator_accuracy",
      [](const std::string& kind, int repetitions, std::uint64_t seed,
         const std::string& coeff) {
        EstimatorAccuracySpec spec;
        spec.kind = dataset_from_string(kind);
        spec.repetitions = repetitions;
        spec.seed = seed;
        spec.coeff = coeff_from(coeff);
        const auto summary = estimator_accuracy(spec);
        py::dict methods;
        for (const auto& [name, stats] : summary.methods) {
          py::dict s;
          s["mean_sq_dev"] = stats.mean_sq_dev;
          s["std_sq_dev"] = stats.std_sq_dev;
          methods[name.c_str()] = s;
        }
        py::dict d;
        d["methods"] = methods;
        d["rank1_count"] = summary.rank1_count;
        d["repetitions"] = summary.repetitions;
        return d;
      },
      py::arg("kind"), py::arg("repetitions") = 100, py::arg("seed") = 0,
      py::arg("coeff") = "equal-mean",
      "Four-estimator accuracy summary on a synthetic population kind.");

  m.def(
      "population_rounds",
      [](const std::string& kind, std::uint64_t seed) {
        const auto pop = make_population(dataset_from_string(kind), seed);
        return pop.rounds;
      },
      py::arg("kind"), py::arg("seed") = 0,
      "Raw rounds of a synthetic population (values sorted within a round).");

  m.def(
      "train_quadratic",
      [](const std::string& optimizer, double h, int batch, long iters,
         std::uint64_t seed, long record_every) {
        const auto problem = make_stratified_least_squares(400, 4, 10, 0.1, 1234);
        rng::Engine weng(rng::derive(seed, 0xcf));
        Eigen::VectorXd w0(problem.model->dim());
        for (int i = 0; i < w0.size(); ++i) w0[i] = weng.normal(0.0, 1.0);
        OptimizerConfig cfg;
        cfg.step_size = h;
        cfg.batch_size = batch;
        cfg.max_iter = iters;
        cfg.seed = seed;
        cfg.record_every = record_every;
        const auto trace = run(*problem.model, &problem.strat,
                               optimizer_from_string(optimizer), w0, cfg);
        return trace_to_dict(trace);
      },
      py::arg("optimizer") = "mstgd", py::arg("h") = 0.5, py::arg("batch") = 8,
      py::arg("iters") = 100, py::arg("seed") = 1, py::arg("record_every") = 1,
      "Single run on the built-in stratified least-squares problem.");

  m.def(
      "train_digits",
      [](const std::string& optimizer, long iters, int batch, double h,
         std::uint64_t seed, long subset, long record_every) {
        const auto splits = synthetic_digit_splits(subset, 500, seed);
        const auto model = std::make_shared<MlpModel>(
            std::vector<int>{784, 64, 32, 10}, Activation::sigmoid, 0.001,
            splits.train);
        const auto strat = Stratification::from_dataset(*splits.train);
        EvalHooks hooks;
        hooks.test_accuracy = [model, splits](const Eigen::VectorXd& w) {
          return model->accuracy_on(w, *splits.test);
        };
        OptimizerConfig cfg;
        cfg.step_size = h;
        cfg.batch_size = batch;
        cfg.max_iter = iters;
        cfg.seed = seed;
        cfg.record_every = record_every;
        const Eigen::VectorXd w0 = model->init_weights(rng::derive(seed, 0xcf));
        const auto trace =
            run(*model, &strat, optimizer_from_string(optimizer), w0, cfg, &hooks);
        return trace_to_dict(trace);
      },
      py::arg("optimizer") = "mstgd", py::arg("iters") = 100, py::arg("batch") = 20,
      py::arg("h") = 0.2, py::arg("seed") = 1, py::arg("subset") = 1000,
      py::arg("record_every") = 25,
      "Train the digit classifier on the synthetic image set.");

  m.def(
      "verify_suite",
      [](const std::string& name, std::uint64_t seed) {
        SuiteResult result;
        if (name == "unbias") result = suite_unbias(seed);
        else if (name == "variance") result = suite_variance(seed);
        else if (name == "design-effect") result = suite_design_effect(seed);
        else if (name == "lemma2") result = suite_threshold(seed);
        else if (name == "decay") result = suite_decay(seed);
        else if (name == "cvi") result = suite_cvi(seed);
        else if (name == "linear") result = suite_linear(seed);
        else throw std::invalid_argument("unknown suite: " + name);
        py::dict d;
        d["name"] = result.name;
        d["passed"] = result.passed;
        d["notes"] = result.notes;
        return d;
      },
      py::arg("name"), py::arg("seed") = 1,
      "Run one verification suite and return its outcome.");

  m.attr("dataset_kinds") =
      std::vector<std::string>{"dec_udata",  "inc_udata",  "random_ndata",
                               "meand_ndata", "meani_ndata", "vard_ndata",
                               "vari_ndata"};
}
