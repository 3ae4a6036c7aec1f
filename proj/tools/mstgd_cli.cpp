#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <iostream>
#include <string>

#include "mstgd/experiments.hpp"
#include "mstgd/io.hpp"
#include "mstgd/suites.hpp"

namespace {

using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitCheckFailed = 1;
constexpr int kExitUsage = 2;

void echo_spec(const json& spec) { std::cout << spec.dump(2) << "\n"; }

int cmd_estimate(const std::string& data, int reps, std::uint64_t seed,
                 const std::string& out, const std::string& coeff) {
  mstgd::EstimatorAccuracySpec spec;
  spec.kind = mstgd::dataset_from_string(data);
  spec.repetitions = reps;
  spec.seed = seed;
  spec.coeff = coeff == "general" ? mstgd::CoefficientMode::general
                                  : mstgd::CoefficientMode::equal_mean;
  echo_spec(json{{"command", "estimate"},
                 {"data", data},
                 {"reps", reps},
                 {"seed", seed},
                 {"coeff", coeff},
                 {"out", out}});

  const auto summary = mstgd::estimator_accuracy(spec);
  std::printf("%-8s %16s %16s\n", "method", "mean_sq_dev", "std_sq_dev");
  for (const auto& [name, stats] : summary.methods)
    std::printf("%-8s %16.8g %16.8g\n", name.c_str(), stats.mean_sq_dev,
                stats.std_sq_dev);
  std::printf("mst smallest mean sq dev in %d/%d repetitions\n",
              summary.rank1_count, summary.repetitions);
  if (!out.empty()) mstgd::emit_csv(summary.per_round, out);
  return kExitOk;
}

int cmd_train(const std::string& model_name, const std::string& opt, double h,
              int batch, long iters, std::uint64_t seed, bool synthetic,
              const std::string& images, const std::string& labels,
              const std::string& test_images, const std::string& test_labels,
              long subset, long record_every, const std::string& coeff,
              const std::string& out) {
  const auto kind = mstgd::optimizer_from_string(opt);
  echo_spec(json{{"command", "train"},
                 {"model", model_name},
                 {"opt", opt},
                 {"h", h},
                 {"batch", batch},
                 {"iters", iters},
                 {"seed", seed},
                 {"synthetic", synthetic},
                 {"mnist_images", images},
                 {"mnist_labels", labels},
                 {"mnist_test_images", test_images},
                 {"mnist_test_labels", test_labels},
                 {"subset", subset},
                 {"record_every", record_every},
                 {"coeff", coeff},
                 {"out", out}});

  mstgd::OptimizerConfig cfg;
  cfg.step_size = h;
  cfg.batch_size = batch;
  cfg.max_iter = iters;
  cfg.seed = seed;
  cfg.record_every = record_every > 0 ? record_every : std::max<long>(1, iters / 50);
  cfg.coeff_mode = coeff == "general" ? mstgd::CoefficientMode::general
                                      : mstgd::CoefficientMode::equal_mean;

  mstgd::RunTrace trace;
  if (model_name == "quadratic") {
    const auto problem = mstgd::make_stratified_least_squares(400, 4, 10, 0.1, 1234);
    mstgd::rng::Engine weng(mstgd::rng::derive(seed, 0xcf));
    Eigen::VectorXd w0(problem.model->dim());
    for (int i = 0; i < w0.size(); ++i) w0[i] = weng.normal(0.0, 1.0);
    trace = mstgd::run(*problem.model, &problem.strat, kind, w0, cfg);
  } else {
    std::shared_ptr<const mstgd::LabeledDataset> train, test;
    if (synthetic) {
      const auto splits = mstgd::synthetic_digit_splits(subset, 1000, seed);
      train = splits.train;
      test = splits.test;
    } else if (!images.empty() && !labels.empty()) {
      const auto set = mstgd::load_idx(images, labels);
      train = std::make_shared<mstgd::LabeledDataset>(mstgd::to_dataset(set, subset));
      if (!test_images.empty() && !test_labels.empty()) {
        const auto test_set = mstgd::load_idx(test_images, test_labels);
        test = std::make_shared<mstgd::LabeledDataset>(mstgd::to_dataset(test_set));
      }
    } else {
      std::cerr << "train --model mlp needs --mnist-images/--mnist-labels or "
                   "--synthetic\n";
      return kExitUsage;
    }
    const auto mlp = std::make_shared<mstgd::MlpModel>(
        std::vector<int>{784, 64, 32, 10}, mstgd::Activation::sigmoid, 0.001,
        train);
    const auto strat = mstgd::Stratification::from_dataset(*train);
    mstgd::EvalHooks hooks;
    hooks.train_accuracy = [&](const Eigen::VectorXd& w) {
      return mlp->accuracy_on(w, *train);
    };
    if (test)
      hooks.test_accuracy = [&](const Eigen::VectorXd& w) {
        return mlp->accuracy_on(w, *test);
      };
    const Eigen::VectorXd w0 = mlp->init_weights(mstgd::rng::derive(seed, 0xcf));
    trace = mstgd::run(*mlp, &strat, kind, w0, cfg, &hooks);
  }

  const auto table = mstgd::trace_to_table(trace);
  if (!out.empty()) mstgd::emit_csv(table, out);
  std::printf("rows recorded: %zu%s\n", trace.rows.size(),
              trace.aborted_nonfinite ? " (aborted: non-finite loss)" : "");
  if (!trace.rows.empty())
    std::printf("final loss: %.17g\n", trace.rows.back().loss);
  return kExitOk;
}

int cmd_verify(const std::string& suite, std::uint64_t seed, const std::string& out) {
  echo_spec(json{{"command", "verify"}, {"suite", suite}, {"seed", seed}, {"out", out}});
  std::vector<mstgd::SuiteResult> results;
  auto want = [&](const char* name) { return suite == name || suite == "all"; };
  if (want("unbias")) results.push_back(mstgd::suite_unbias(seed));
  if (want("variance")) results.push_back(mstgd::suite_variance(seed));
  if (want("design-effect")) results.push_back(mstgd::suite_design_effect(seed));
  if (want("lemma2")) results.push_back(mstgd::suite_threshold(seed));
  if (want("cvi")) results.push_back(mstgd::suite_cvi(seed));
  if (want("linear")) results.push_back(mstgd::suite_linear(seed));
  if (results.empty()) {
    std::cerr << "unknown suite: " << suite << "\n";
    return kExitUsage;
  }
  bool all_passed = true;
  for (const auto& r : results) {
    std::printf("%-16s %s\n", r.name.c_str(), r.passed ? "PASS" : "FAIL");
    for (const auto& note : r.notes) std::printf("  %s\n", note.c_str());
    all_passed = all_passed && r.passed;
  }
  if (!out.empty()) mstgd::io::write_file_atomic(out, mstgd::suites_to_json(results));
  return all_passed ? kExitOk : kExitCheckFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"memory stochastic stratified gradient toolkit"};
  app.set_help_flag("--help", "print usage");  // frees -h for the step size
  app.require_subcommand(1);

  std::string data = "dec_udata", coeff = "equal-mean", out;
  int reps = 100;
  std::uint64_t seed = 1;
  auto* estimate = app.add_subcommand("estimate", "estimator accuracy experiment");
  estimate->add_option("--data", data, "dataset kind");
  estimate->add_option("--reps", reps, "repetitions");
  estimate->add_option("--seed", seed, "rng seed");
  estimate->add_option("--out", out, "csv output path");
  estimate->add_option("--coeff", coeff)
      ->check(CLI::IsMember({"general", "equal-mean"}));

  std::string model_name = "quadratic", opt = "mstgd";
  std::string images, labels, test_images, test_labels;
  double h = 0.2;
  int batch = 20;
  long iters = 1000, subset = 6000, record_every = 0;
  bool synthetic = false;
  auto* train = app.add_subcommand("train", "single optimizer training run");
  train->set_help_flag("--help", "print usage");
  train->add_option("--model", model_name)->check(CLI::IsMember({"quadratic", "mlp"}));
  train->add_option("--opt", opt)
      ->check(CLI::IsMember({"mstgd", "sgd", "batch", "fgd", "gst"}));
  train->add_option("--h", h, "constant step size");
  train->add_option("--batch", batch, "batch size");
  train->add_option("--iters", iters, "iterations");
  train->add_option("--seed", seed, "rng seed");
  train->add_flag("--synthetic", synthetic, "use the synthetic digit set");
  train->add_option("--mnist-images", images, "idx image file");
  train->add_option("--mnist-labels", labels, "idx label file");
  train->add_option("--mnist-test-images", test_images, "idx test image file");
  train->add_option("--mnist-test-labels", test_labels, "idx test label file");
  train->add_option("--subset", subset, "training subset size");
  train->add_option("--record-every", record_every, "checkpoint cadence");
  train->add_option("--coeff", coeff)
      ->check(CLI::IsMember({"general", "equal-mean"}));
  train->add_option("--out", out, "csv output path");

  std::string suite = "all";
  auto* verify = app.add_subcommand("verify", "numeric verification suites");
  verify->add_option("--suite", suite, "suite name");
  verify->add_option("--seed", seed, "rng seed");
  verify->add_option("--out", out, "json report path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (estimate->parsed()) return cmd_estimate(data, reps, seed, out, coeff);
    if (train->parsed())
      return cmd_train(model_name, opt, h, batch, iters, seed, synthetic, images,
                       labels, test_images, test_labels, subset, record_every,
                       coeff, out);
    if (verify->parsed()) return cmd_verify(suite, seed, out);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitCheckFailed;
  }
  return kExitUsage;
}
