#include "mstgd/optimizers.hpp"

#include <cmath>
#include <stdexcept>

#include "mstgd/data.hpp"

namespace mstgd {

long Stratification::size() const {
  long n = 0;
  for (const auto& c : category_indices) n += static_cast<long>(c.size());
  return n;
}

Stratification Stratification::from_labels(const std::vector<int>& labels) {
  int max_label = -1;
  for (int l : labels) {
    if (l < 0) throw std::invalid_argument("Stratification: negative label");
    max_label = std::max(max_label, l);
  }
  if (max_label < 0) throw std::invalid_argument("Stratification: no labels");
  Stratification s;
  s.category_indices.assign(static_cast<std::size_t>(max_label) + 1, {});
  for (long i = 0; i < static_cast<long>(labels.size()); ++i)
    s.category_indices[static_cast<std::size_t>(labels[static_cast<std::size_t>(i)])]
        .push_back(i);
  std::vector<long> sizes;
  for (const auto& c : s.category_indices) {
    if (c.empty()) throw std::invalid_argument("Stratification: empty category");
    sizes.push_back(static_cast<long>(c.size()));
  }
  s.weights = StratifiedWeights::proportional(sizes);
  return s;
}

Stratification Stratification::from_dataset(const LabeledDataset& data) {
  return from_labels(data.labels);
}

Stratification Stratification::single(long n) {
  if (n <= 0) throw std::invalid_argument("Stratification: empty population");
  Stratification s;
  s.category_indices.resize(1);
  s.category_indices[0].resize(static_cast<std::size_t>(n));
  for (long i = 0; i < n; ++i) s.category_indices[0][static_cast<std::size_t>(i)] = i;
  s.weights = StratifiedWeights::uniform(1);
  return s;
}

OptimizerKind optimizer_from_string(const std::string& name) {
  if (name == "mstgd") return OptimizerKind::mstgd;
  if (name == "sgd") return OptimizerKind::sgd;
  if (name == "batch") return OptimizerKind::batch;
  if (name == "fgd") return OptimizerKind::fgd;
  if (name == "gst") return OptimizerKind::gst;
  throw std::invalid_argument("unknown optimizer: " + name);
}

std::string to_string(OptimizerKind kind) {
  switch (kind) {
    case OptimizerKind::mstgd: return "mstgd";
    case OptimizerKind::sgd: return "sgd";
    case OptimizerKind::batch: return "batch";
    case OptimizerKind::fgd: return "fgd";
    case OptimizerKind::gst: return "gst";
  }
  return "?";
}

namespace {

long moment_batch_size(const OptimizerConfig& cfg, int categories,
                       long category_size) {
  if (cfg.batch_size < categories)
    throw std::invalid_argument("mstgd_step: batch size below category count");
  if (category_size < 2)
    throw std::invalid_argument("mstgd_step: category exhausted");
  const long ceil_bc = (cfg.batch_size + categories - 1) / categories;
  // keep one sample available for the independent draw
  return std::min(ceil_bc, category_size - 1);
}

}  // namespace

std::pair<Eigen::VectorXd, StepReport> mstgd_step(
    const DifferentiableModel& model, const Stratification& strat,
    const Eigen::VectorXd& w, MemoryState& state, const OptimizerConfig& cfg,
    rng::Engine& eng) {
  const int C = strat.categories();
  const int dim = model.dim();
  if (state.categories() != C || state.dim() != dim)
    throw std::invalid_argument("mstgd_step: memory state shape mismatch");

  const bool forced = cfg.force_p.has_value() && cfg.force_q.has_value();
  const bool skip_moments = forced && !cfg.mean_zeroing;

  StepReport report;
  report.iteration = state.iteration;
  report.p_mean.resize(static_cast<std::size_t>(C));
  report.q_mean.resize(static_cast<std::size_t>(C));

  for (int j = 0; j < C; ++j) {
    const auto ju = static_cast<std::size_t>(j);
    const auto& cat = strat.category_indices[ju];
    const long cat_size = static_cast<long>(cat.size());

    Eigen::VectorXd mean = Eigen::VectorXd::Zero(dim);
    Eigen::VectorXd var = Eigen::VectorXd::Zero(dim);
    long fresh_index;

    if (skip_moments) {
      fresh_index = cat[static_cast<std::size_t>(
          eng.next_below(static_cast<std::uint64_t>(cat_size)))];
    } else {
      const long n_j = moment_batch_size(cfg, C, cat_size);
      auto picks = rng::sample_without_replacement(cat_size, n_j + 1, eng);
      fresh_index = cat[static_cast<std::size_t>(picks.back())];
      picks.pop_back();

      std::vector<Eigen::VectorXd> grads;
      grads.reserve(picks.size());
      for (long local : picks) {
        grads.push_back(model.sample_gradient(w, cat[static_cast<std::size_t>(local)]));
        mean += grads.back();
      }
      mean /= static_cast<double>(n_j);
      if (n_j >= 2) {
        for (const auto& g : grads)
          var += (g - mean).cwiseAbs2();
        var /= static_cast<double>(n_j - 1);
      }
      report.gradient_evals += n_j;
    }

    const Eigen::VectorXd fresh = model.sample_gradient(w, fresh_index);
    report.gradient_evals += 1;

    Eigen::ArrayXd p(dim), q(dim);
    double p_sum = 0.0, q_sum = 0.0;
    for (int i = 0; i < dim; ++i) {
      BlendCoefficients bc;
      if (forced) {
        bc.p = *cfg.force_p;
        bc.q = *cfg.force_q;
      } else if (cfg.coeff_mode == CoefficientMode::general) {
        bc = compute_blend_general(state.stored_means[ju][i], mean[i],
                                   state.stored_vars[ju][i], var[i]);
      } else {
        bc = compute_blend_equal_mean(state.stored_vars[ju][i], var[i]);
      }
      p[i] = bc.p;
      q[i] = bc.q;
      p_sum += bc.p;
      q_sum += bc.q;
      report.degenerate_fallbacks += bc.degenerate;
      report.clamps += bc.clamped;
      report.full_memory_events += bc.full_memory;
    }
    report.p_mean[ju] = p_sum / dim;
    report.q_mean[ju] = q_sum / dim;

    if (cfg.mean_zeroing)
      state.components[ju] =
          update_component_zero_mean(state.components[ju], p, q, fresh, mean);
    else
      state.components[ju] = update_component(state.components[ju], p, q, fresh);
    state.stored_means[ju] = mean;
    state.stored_vars[ju] = var;
  }

  state.iteration += 1;
  state.has_moments = !skip_moments;

  report.estimate = stratified_mean(strat.weights, state, cfg.mean_zeroing);
  Eigen::VectorXd next = w - cfg.step_size * report.estimate;
  return {std::move(next), std::move(report)};
}

Eigen::VectorXd sgd_step(const DifferentiableModel& model, const Eigen::VectorXd& w,
                         double step_size, rng::Engine& eng) {
  const long i = static_cast<long>(
      eng.next_below(static_cast<std::uint64_t>(model.sample_count())));
  return w - step_size * model.sample_gradient(w, i);
}

Eigen::VectorXd batch_step(const DifferentiableModel& model, const Eigen::VectorXd& w,
                           double step_size, int batch_size, rng::Engine& eng) {
  if (batch_size > model.sample_count())
    throw std::invalid_argument("batch_step: batch size exceeds population");
  const auto picks = draw_uniform(model.sample_count(), batch_size, eng);
  Eigen::VectorXd g = Eigen::VectorXd::Zero(model.dim());
  for (long i : picks) g += model.sample_gradient(w, i);
  return w - (step_size / static_cast<double>(batch_size)) * g;
}

Eigen::VectorXd fgd_step(const DifferentiableModel& model, const Eigen::VectorXd& w,
                         double step_size) {
  return w - step_size * model.full_gradient(w);
}

Eigen::VectorXd g_st_step(const DifferentiableModel& model,
                          const Stratification& strat, const Eigen::VectorXd& w,
                          double step_size, rng::Engine& eng) {
  Eigen::VectorXd g = Eigen::VectorXd::Zero(model.dim());
  for (int j = 0; j < strat.categories(); ++j) {
    const auto& cat = strat.category_indices[static_cast<std::size_t>(j)];
    if (cat.empty()) throw std::invalid_argument("g_st_step: empty category");
    const long pick = cat[static_cast<std::size_t>(
        eng.next_below(static_cast<std::uint64_t>(cat.size())))];
    g += strat.weights.w[static_cast<std::size_t>(j)] * model.sample_gradient(w, pick);
  }
  return w - step_size * g;
}

long gradient_evals_per_step(OptimizerKind kind, const DifferentiableModel& model,
                             const Stratification* strat,
                             const OptimizerConfig& cfg) {
  switch (kind) {
    case OptimizerKind::sgd: return 1;
    case OptimizerKind::batch: return cfg.batch_size;
    case OptimizerKind::fgd: return model.sample_count();
    case OptimizerKind::gst:
      return strat ? strat->categories() : 1;
    case OptimizerKind::mstgd: {
      if (!strat) return 0;
      const bool skip = cfg.force_p && cfg.force_q && !cfg.mean_zeroing;
      if (skip) return strat->categories();
      long total = 0;
      for (const auto& cat : strat->category_indices)
        total += moment_batch_size(cfg, strat->categories(),
                                   static_cast<long>(cat.size())) + 1;
      return total;
    }
  }
  return 0;
}

RunTrace run(const DifferentiableModel& model, const Stratification* strat,
             OptimizerKind kind, const Eigen::VectorXd& w0,
             const OptimizerConfig& cfg, const EvalHooks* hooks) {
  if ((kind == OptimizerKind::mstgd || kind == OptimizerKind::gst) && !strat)
    throw std::invalid_argument("run: stratified optimizer needs a stratification");

  RunTrace trace;
  Eigen::VectorXd w = w0;
  rng::Engine eng(rng::derive(cfg.seed, 0x0907, static_cast<std::uint64_t>(kind)));
  MemoryState state =
      kind == OptimizerKind::mstgd
          ? MemoryState::zero(strat->categories(), model.dim())
          : MemoryState{};

  const ModelConstants* constants = model.constants();
  long grad_evals = 0;

  auto record = [&](long iter, const Eigen::VectorXd* estimate) {
    TraceRow row;
    row.iteration = iter;
    row.gradient_evals = grad_evals;
    row.loss = model.loss(w);
    const Eigen::VectorXd full = model.full_gradient(w);
    row.gradient_norm = full.norm();
    if (constants)
      row.optimality_gap = row.loss - constants->optimal_value;
    if (hooks) {
      if (hooks->train_accuracy) row.train_accuracy = hooks->train_accuracy(w);
      if (hooks->test_accuracy) row.test_accuracy = hooks->test_accuracy(w);
      if (hooks->record_estimator_deviation && estimate)
        row.estimator_sq_dev = (*estimate - full).squaredNorm();
    }
    trace.rows.push_back(std::move(row));
    return std::isfinite(trace.rows.back().loss);
  };

  if (!record(0, nullptr)) {
    trace.aborted_nonfinite = true;
    trace.final_w = w;
    return trace;
  }

  for (long k = 1; k <= cfg.max_iter; ++k) {
    Eigen::VectorXd estimate;
    switch (kind) {
      case OptimizerKind::mstgd: {
        auto [next, report] = mstgd_step(model, *strat, w, state, cfg, eng);
        grad_evals += report.gradient_evals;
        estimate = std::move(report.estimate);
        w = std::move(next);
        break;
      }
      case OptimizerKind::sgd:
        w = sgd_step(model, w, cfg.step_size, eng);
        grad_evals += 1;
        break;
      case OptimizerKind::batch:
        w = batch_step(model, w, cfg.step_size, cfg.batch_size, eng);
        grad_evals += cfg.batch_size;
        break;
      case OptimizerKind::fgd:
        w = fgd_step(model, w, cfg.step_size);
        grad_evals += model.sample_count();
        break;
      case OptimizerKind::gst:
        w = g_st_step(model, *strat, w, cfg.step_size, eng);
        grad_evals += strat->categories();
        break;
    }
    const bool checkpoint = (k % std::max<long>(1, cfg.record_every) == 0) ||
                            k == cfg.max_iter;
    if (checkpoint) {
      if (!record(k, estimate.size() > 0 ? &estimate : nullptr)) {
        trace.aborted_nonfinite = true;
        break;
      }
    }
  }
  trace.final_w = w;
  return trace;
}

}  // namespace mstgd
