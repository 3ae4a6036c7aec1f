#pragma once

#include <functional>
#include <optional>

#include "mstgd/estimator.hpp"
#include "mstgd/models.hpp"
#include "mstgd/rng.hpp"

// The MSTGD loop and its gradient-descent baselines under one stepper
// interface.

namespace mstgd {

// Category structure of a training set: index lists plus proportional
// weights.
struct Stratification {
  std::vector<std::vector<long>> category_indices;
  StratifiedWeights weights;

  int categories() const { return static_cast<int>(category_indices.size()); }
  long size() const;
  static Stratification from_labels(const std::vector<int>& labels);
  static Stratification from_dataset(const LabeledDataset& data);
  static Stratification single(long n);  // one category holding everything
};

enum class CoefficientMode { general, equal_mean };
enum class OptimizerKind { mstgd, sgd, batch, fgd, gst };

OptimizerKind optimizer_from_string(const std::string& name);
std::string to_string(OptimizerKind kind);

struct OptimizerConfig {
  double step_size = 0.2;
  int batch_size = 20;
  long max_iter = 1000;
  std::uint64_t seed = 0;
  CoefficientMode coeff_mode = CoefficientMode::equal_mean;
  bool mean_zeroing = true;
  long record_every = 1;
  // Forcing both coefficients pins every category/component to (p,q) and,
  // with mean-zeroing off, skips the moment batch so the draw stream matches
  // g_st_step exactly.
  std::optional<double> force_p, force_q;
};

struct StepReport {
  long iteration = 0;
  Eigen::VectorXd estimate;        // update direction used
  std::vector<double> p_mean, q_mean;  // per category, averaged over components
  long degenerate_fallbacks = 0;
  long clamps = 0;
  long full_memory_events = 0;
  long gradient_evals = 0;
};

// One MSTGD iteration: per category, estimate moments from a fresh batch of
// ceil(B/C) samples (clamped to leave room for the independent draw), blend
// the memory with the independent draw, then step along the class-weighted
// memory mean.
std::pair<Eigen::VectorXd, StepReport> mstgd_step(
    const DifferentiableModel& model, const Stratification& strat,
    const Eigen::VectorXd& w, MemoryState& state, const OptimizerConfig& cfg,
    rng::Engine& eng);

Eigen::VectorXd sgd_step(const DifferentiableModel& model, const Eigen::VectorXd& w,
                         double step_size, rng::Engine& eng);

Eigen::VectorXd batch_step(const DifferentiableModel& model, const Eigen::VectorXd& w,
                           double step_size, int batch_size, rng::Engine& eng);

Eigen::VectorXd fgd_step(const DifferentiableModel& model, const Eigen::VectorXd& w,
                         double step_size);

Eigen::VectorXd g_st_step(const DifferentiableModel& model,
                          const Stratification& strat, const Eigen::VectorXd& w,
                          double step_size, rng::Engine& eng);

struct TraceRow {
  long iteration = 0;
  long gradient_evals = 0;
  double loss = 0.0;
  std::optional<double> optimality_gap;
  double gradient_norm = 0.0;
  std::optional<double> train_accuracy;
  std::optional<double> test_accuracy;
  std::optional<double> estimator_sq_dev;  // ||estimate - full gradient||^2
};

struct RunTrace {
  std::vector<TraceRow> rows;
  bool aborted_nonfinite = false;
  Eigen::VectorXd final_w;
};

// Optional per-checkpoint metrics beyond loss/gap/gradient norm.
struct EvalHooks {
  std::function<double(const Eigen::VectorXd&)> train_accuracy;
  std::function<double(const Eigen::VectorXd&)> test_accuracy;
  bool record_estimator_deviation = false;
};

// Runs `max_iter` steps of the chosen optimizer from w0, recording a row
// every record_every iterations (plus iteration 0 and the final iterate).
// A non-finite loss aborts with the diagnostic row kept.
RunTrace run(const DifferentiableModel& model, const Stratification* strat,
             OptimizerKind kind, const Eigen::VectorXd& w0,
             const OptimizerConfig& cfg, const EvalHooks* hooks = nullptr);

// Per-iteration gradient evaluations consumed by one step of `kind`.
long gradient_evals_per_step(OptimizerKind kind, const DifferentiableModel& model,
                             const Stratification* strat, const OptimizerConfig& cfg);

}  // namespace mstgd
