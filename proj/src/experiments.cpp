#include "mstgd/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "mstgd/io.hpp"

namespace mstgd {

void Table::add_row(std::vector<std::string> row) {
  if (row.size() != header.size())
    throw std::invalid_argument("Table: row width mismatch");
  rows.push_back(std::move(row));
}

std::string Table::render() const {
  std::ostringstream out;
  for (std::size_t i = 0; i < header.size(); ++i)
    out << header[i] << (i + 1 < header.size() ? "," : "");
  out << '\n';
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i)
      out << row[i] << (i + 1 < row.size() ? "," : "");
    out << '\n';
  }
  return out.str();
}

void emit_csv(const Table& table, const std::string& path) {
  io::write_file_atomic(path, table.render());
}

// --- estimator accuracy -------------------------------------------------------

DatasetKind dataset_from_string(const std::string& name) {
  if (name == "dec_udata") return DatasetKind::dec_udata;
  if (name == "inc_udata") return DatasetKind::inc_udata;
  if (name == "random_ndata") return DatasetKind::random_ndata;
  if (name == "meand_ndata") return DatasetKind::meand_ndata;
  if (name == "meani_ndata") return DatasetKind::meani_ndata;
  if (name == "vard_ndata") return DatasetKind::vard_ndata;
  if (name == "vari_ndata") return DatasetKind::vari_ndata;
  throw std::invalid_argument("unknown dataset kind: " + name);
}

std::string to_string(DatasetKind kind) {
  switch (kind) {
    case DatasetKind::dec_udata: return "dec_udata";
    case DatasetKind::inc_udata: return "inc_udata";
    case DatasetKind::random_ndata: return "random_ndata";
    case DatasetKind::meand_ndata: return "meand_ndata";
    case DatasetKind::meani_ndata: return "meani_ndata";
    case DatasetKind::vard_ndata: return "vard_ndata";
    case DatasetKind::vari_ndata: return "vari_ndata";
  }
  return "?";
}

const std::vector<DatasetKind>& all_dataset_kinds() {
  static const std::vector<DatasetKind> kinds = {
      DatasetKind::dec_udata,   DatasetKind::inc_udata, DatasetKind::random_ndata,
      DatasetKind::meand_ndata, DatasetKind::meani_ndata, DatasetKind::vard_ndata,
      DatasetKind::vari_ndata};
  return kinds;
}

StratifiedPopulation make_population(DatasetKind kind, std::uint64_t seed) {
  switch (kind) {
    case DatasetKind::dec_udata:
      return gen_uniform_population(decreasing_mean_intervals(), 40, 4, seed);
    case DatasetKind::inc_udata:
      return gen_uniform_population(increasing_mean_intervals(), 40, 4, seed);
    case DatasetKind::random_ndata:
      return gen_normal_population(NormalKind::random_params, 40, 10, 4, seed);
    case DatasetKind::meand_ndata:
      return gen_normal_population(NormalKind::mean_decreasing, 40, 10, 4, seed);
    case DatasetKind::meani_ndata:
      return gen_normal_population(NormalKind::mean_increasing, 40, 10, 4, seed);
    case DatasetKind::vard_ndata:
      return gen_normal_population(NormalKind::var_decreasing, 40, 10, 4, seed);
    case DatasetKind::vari_ndata:
      return gen_normal_population(NormalKind::var_increasing, 40, 10, 4, seed);
  }
  throw std::invalid_argument("bad dataset kind");
}

namespace {

struct AccuracyAccumulator {
  std::map<std::string, std::vector<double>> sq_devs;  // pooled
  std::map<std::string, double> rep_sums;             // per repetition

  void record(const std::string& method, double sq_dev) {
    sq_devs[method].push_back(sq_dev);
    rep_sums[method] += sq_dev;
  }
};

MethodStats stats_of(const std::vector<double>& xs) {
  MethodStats s;
  if (xs.empty()) return s;
  double sum = 0.0;
  for (double x : xs) sum += x;
  s.mean_sq_dev = sum / static_cast<double>(xs.size());
  double acc = 0.0;
  for (double x : xs) acc += (x - s.mean_sq_dev) * (x - s.mean_sq_dev);
  s.std_sq_dev = std::sqrt(acc / static_cast<double>(xs.size()));
  return s;
}

const char* kMethods[] = {"mst", "st", "batch", "sgd"};

// One repetition of the four-estimator protocol on a scalar stratified
// population with true per-round moments.
void run_accuracy_rep(
    const StratifiedPopulation& pop, CoefficientMode coeff, std::uint64_t seed,
    DatasetKind kind, int rep, Table* per_round, AccuracyAccumulator* acc) {
  const int C = pop.num_categories;
  const int rounds = pop.num_rounds();
  const long cat_size = pop.category_size();
  const long n_rows = pop.rows_per_round();
  const bool zeroed = coeff == CoefficientMode::equal_mean;

  MemoryState state = MemoryState::zero(C, 1);
  rng::Engine strat_eng(rng::derive(seed, 1));
  rng::Engine batch_eng(rng::derive(seed, 2));
  rng::Engine sgd_eng(rng::derive(seed, 3));

  for (int k = 0; k < rounds; ++k) {
    const auto ku = static_cast<std::size_t>(k);
    const double truth = pop.round_means[ku];
    double st_value = 0.0;
    for (int j = 0; j < C; ++j) {
      const auto ju = static_cast<std::size_t>(j);
      const long offset =
          static_cast<long>(strat_eng.next_below(static_cast<std::uint64_t>(cat_size)));
      const double draw = pop.value(k, j, offset);
      st_value += pop.weights.w[ju] * draw;

      const auto& cur = pop.category_moments[ku][ju];
      BlendCoefficients bc;
      if (coeff == CoefficientMode::general)
        bc = compute_blend_general(state.stored_means[ju][0], cur.mean,
                                   state.stored_vars[ju][0], cur.variance);
      else
        bc = compute_blend_equal_mean(state.stored_vars[ju][0], cur.variance);
      const Eigen::VectorXd fresh = Eigen::VectorXd::Constant(1, draw);
      const Eigen::VectorXd mean = Eigen::VectorXd::Constant(1, cur.mean);
      state.components[ju] =
          zeroed ? update_component_zero_mean(state.components[ju], bc.p, bc.q,
                                              fresh, mean)
                 : update_component(state.components[ju], bc.p, bc.q, fresh);
      state.stored_means[ju] = mean;
      state.stored_vars[ju] = Eigen::VectorXd::Constant(1, cur.variance);
    }
    state.iteration += 1;
    state.has_moments = true;
    const double mst_value = stratified_mean(pop.weights, state, zeroed)[0];

    double batch_value = 0.0;
    for (long idx : draw_uniform(n_rows, C, batch_eng))
      batch_value += pop.rounds[ku][static_cast<std::size_t>(idx)];
    batch_value /= static_cast<double>(C);

    const double sgd_value = pop.rounds[ku][static_cast<std::size_t>(
        sgd_eng.next_below(static_cast<std::uint64_t>(n_rows)))];

    const double values[] = {mst_value, st_value, batch_value, sgd_value};
    for (int m = 0; m < 4; ++m) {
      const double dev = (values[m] - truth) * (values[m] - truth);
      acc->record(kMethods[m], dev);
      if (per_round)
        per_round->add_row({to_string(kind), std::to_string(rep),
                            std::to_string(k), kMethods[m],
                            io::format_double(values[m]),
                            io::format_double(truth), io::format_double(dev)});
    }
  }
}

}  // namespace

EstimatorAccuracySummary estimator_accuracy(const EstimatorAccuracySpec& spec) {
  if (spec.repetitions < 1)
    throw std::invalid_argument("estimator_accuracy: repetitions must be >= 1");
  EstimatorAccuracySummary out;
  out.repetitions = spec.repetitions;
  out.per_round.header = {"kind", "rep", "round", "method",
                          "estimate", "truth", "sq_dev"};
  AccuracyAccumulator pooled;
  const auto kind_id = static_cast<std::uint64_t>(spec.kind);

  for (int rep = 0; rep < spec.repetitions; ++rep) {
    const auto pop_seed = rng::derive(spec.seed, 0xacc, kind_id,
                                      static_cast<std::uint64_t>(rep));
    const auto pop = make_population(spec.kind, pop_seed);
    AccuracyAccumulator rep_acc;
    run_accuracy_rep(pop, spec.coeff,
                     rng::derive(spec.seed, 0xd1a, kind_id,
                                 static_cast<std::uint64_t>(rep)),
                     spec.kind, rep, &out.per_round, &rep_acc);
    for (const auto& [method, devs] : rep_acc.sq_devs)
      for (double d : devs) pooled.record(method, d);
    const double mst = rep_acc.rep_sums["mst"];
    bool smallest = true;
    for (const char* m : {"st", "batch", "sgd"})
      smallest = smallest && mst < rep_acc.rep_sums[m];
    out.rank1_count += smallest;
  }

  for (const char* m : kMethods)
    out.methods.emplace_back(m, stats_of(pooled.sq_devs[m]));
  return out;
}

// --- gradient tracking ----------------------------------------------------------

GradientTrackingSummary gradient_tracking(const Eigen::MatrixXd& gradients,
                                          const std::vector<int>& labels,
                                          const GradientTrackingSpec& spec) {
  if (gradients.rows() != static_cast<Eigen::Index>(labels.size()))
    throw std::invalid_argument("gradient_tracking: row/label count mismatch");
  const auto strat = Stratification::from_labels(labels);
  const int C = strat.categories();
  const int cols = static_cast<int>(gradients.cols());
  const long n_rows = gradients.rows();
  const bool zeroed = spec.coeff == CoefficientMode::equal_mean;

  GradientTrackingSummary out;
  out.repetitions = spec.repetitions;
  out.per_column.header = {"rep", "column", "method", "estimate", "truth", "sq_dev"};
  AccuracyAccumulator pooled;

  // True per-column per-category moments.
  std::vector<std::vector<ScalarMoments>> moments(
      static_cast<std::size_t>(cols),
      std::vector<ScalarMoments>(static_cast<std::size_t>(C)));
  std::vector<double> truth(static_cast<std::size_t>(cols), 0.0);
  for (int k = 0; k < cols; ++k) {
    truth[static_cast<std::size_t>(k)] = gradients.col(k).mean();
    for (int j = 0; j < C; ++j) {
      const auto& idx = strat.category_indices[static_cast<std::size_t>(j)];
      double s = 0.0;
      for (long i : idx) s += gradients(i, k);
      const double mean = s / static_cast<double>(idx.size());
      double s2 = 0.0;
      for (long i : idx) s2 += (gradients(i, k) - mean) * (gradients(i, k) - mean);
      moments[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)] = {
          mean, s2 / static_cast<double>(idx.size())};
    }
  }

  for (int rep = 0; rep < spec.repetitions; ++rep) {
    MemoryState state = MemoryState::zero(C, 1);
    rng::Engine strat_eng(rng::derive(spec.seed, 0x91d, static_cast<std::uint64_t>(rep), 1));
    rng::Engine batch_eng(rng::derive(spec.seed, 0x91d, static_cast<std::uint64_t>(rep), 2));
    rng::Engine sgd_eng(rng::derive(spec.seed, 0x91d, static_cast<std::uint64_t>(rep), 3));
    AccuracyAccumulator rep_acc;

    for (int k = 0; k < cols; ++k) {
      double st_value = 0.0;
      for (int j = 0; j < C; ++j) {
        const auto ju = static_cast<std::size_t>(j);
        const auto& idx = strat.category_indices[ju];
        const long pick = idx[static_cast<std::size_t>(
            strat_eng.next_below(static_cast<std::uint64_t>(idx.size())))];
        const double draw = gradients(pick, k);
        st_value += strat.weights.w[ju] * draw;

        const auto& cur = moments[static_cast<std::size_t>(k)][ju];
        BlendCoefficients bc;
        if (spec.coeff == CoefficientMode::general)
          bc = compute_blend_general(state.stored_means[ju][0], cur.mean,
                                     state.stored_vars[ju][0], cur.variance);
        else
          bc = compute_blend_equal_mean(state.stored_vars[ju][0], cur.variance);
        const Eigen::VectorXd fresh = Eigen::VectorXd::Constant(1, draw);
        const Eigen::VectorXd mean = Eigen::VectorXd::Constant(1, cur.mean);
        state.components[ju] =
            zeroed ? update_component_zero_mean(state.components[ju], bc.p, bc.q,
                                                fresh, mean)
                   : update_component(state.components[ju], bc.p, bc.q, fresh);
        state.stored_means[ju] = mean;
        state.stored_vars[ju] = Eigen::VectorXd::Constant(1, cur.variance);
      }
      state.iteration += 1;
      const double mst_value = stratified_mean(strat.weights, state, zeroed)[0];

      double batch_value = 0.0;
      for (long idx : draw_uniform(n_rows, C, batch_eng))
        batch_value += gradients(idx, k);
      batch_value /= static_cast<double>(C);

      const double sgd_value = gradients(
          static_cast<long>(sgd_eng.next_below(static_cast<std::uint64_t>(n_rows))), k);

      const double tk = truth[static_cast<std::size_t>(k)];
      const double values[] = {mst_value, st_value, batch_value, sgd_value};
      for (int m = 0; m < 4; ++m) {
        const double dev = (values[m] - tk) * (values[m] - tk);
        rep_acc.record(kMethods[m], dev);
        pooled.record(kMethods[m], dev);
        out.per_column.add_row({std::to_string(rep), std::to_string(k), kMethods[m],
                                io::format_double(values[m]), io::format_double(tk),
                                io::format_double(dev)});
      }
    }
    const double mst = rep_acc.rep_sums["mst"];
    bool smallest = true;
    for (const char* m : {"st", "batch", "sgd"})
      smallest = smallest && mst < rep_acc.rep_sums[m];
    out.rank1_count += smallest;
  }

  for (const char* m : kMethods)
    out.methods.emplace_back(m, stats_of(pooled.sq_devs[m]));
  return out;
}

Eigen::MatrixXd record_gradient_matrix(const MlpModel& model,
                                       const Eigen::VectorXd& w0,
                                       long coordinate, int iterations,
                                       double step_size) {
  if (coordinate < 0 || coordinate >= model.dim())
    throw std::out_of_range("record_gradient_matrix: coordinate out of range");
  const long n = model.sample_count();
  Eigen::MatrixXd out(n, iterations);
  Eigen::VectorXd w = w0;
  for (int k = 0; k < iterations; ++k) {
    Eigen::VectorXd full = Eigen::VectorXd::Zero(model.dim());
    for (long i = 0; i < n; ++i) {
      const Eigen::VectorXd g = model.sample_gradient(w, i);
      out(i, k) = g[coordinate];
      full += g;
    }
    w -= step_size * (full / static_cast<double>(n));
  }
  return out;
}

// --- training comparison ----------------------------------------------------------

TrainingResult training_comparison(const TrainingSpec& spec) {
  if (!spec.train || !spec.test)
    throw std::invalid_argument("training_comparison: missing data splits");
  TrainingResult out;
  out.trace_table.header = {"optimizer", "seed", "iteration", "grad_evals",
                            "loss", "train_acc", "test_acc"};

  const auto model = std::make_shared<MlpModel>(
      spec.layer_sizes, spec.activation, spec.weight_decay, spec.train);
  const auto strat = Stratification::from_dataset(*spec.train);

  EvalHooks hooks;
  hooks.train_accuracy = [&](const Eigen::VectorXd& w) {
    return model->accuracy_on(w, *spec.train);
  };
  hooks.test_accuracy = [&](const Eigen::VectorXd& w) {
    return model->accuracy_on(w, *spec.test);
  };

  std::map<std::string, std::pair<double, int>> final_acc;

  for (int s = 0; s < spec.seeds; ++s) {
    const Eigen::VectorXd w0 =
        model->init_weights(rng::derive(spec.seed, 0x171, static_cast<std::uint64_t>(s)));
    for (OptimizerKind kind : spec.optimizers) {
      OptimizerConfig cfg;
      cfg.step_size = spec.step_size;
      cfg.batch_size = spec.batch_size;
      cfg.seed = rng::derive(spec.seed, 0x172, static_cast<std::uint64_t>(s));
      // SGD gets iters*B single-sample steps, checkpointed at the same grid.
      const long scale = kind == OptimizerKind::sgd ? spec.batch_size : 1;
      cfg.max_iter = spec.iters * scale;
      cfg.record_every = spec.record_every * scale;

      TrainingEntry entry;
      entry.kind = kind;
      entry.seed_index = s;
      entry.trace = run(*model, &strat, kind, w0, cfg, &hooks);
      entry.diverged = entry.trace.aborted_nonfinite;
      if (!entry.trace.rows.empty()) {
        const auto& last = entry.trace.rows.back();
        entry.final_test_accuracy = last.test_accuracy.value_or(0.0);
        entry.final_train_accuracy = last.train_accuracy.value_or(0.0);
      }
      for (const auto& row : entry.trace.rows)
        out.trace_table.add_row(
            {to_string(kind), std::to_string(s), std::to_string(row.iteration),
             std::to_string(row.gradient_evals), io::format_double(row.loss),
             io::format_double(row.train_accuracy.value_or(-1.0)),
             io::format_double(row.test_accuracy.value_or(-1.0))});
      if (!entry.diverged) {
        auto& slot = final_acc[to_string(kind)];
        slot.first += entry.final_test_accuracy;
        slot.second += 1;
      }
      out.entries.push_back(std::move(entry));
    }
  }
  for (const auto& [name, slot] : final_acc)
    if (slot.second > 0)
      out.mean_final_test_accuracy[name] = slot.first / slot.second;
  return out;
}

// --- variance decay ------------------------------------------------------------

VarianceDecayOutcome variance_decay_experiment(const ScriptedProtocol& protocol,
                                               long replications, std::uint64_t seed,
                                               long fit_lo, long fit_hi) {
  VarianceDecayOutcome out;
  out.mc = mc_estimator_moments(protocol, replications, seed);
  out.oracle = exact_estimator_recursion(protocol);
  out.mc_fit = check_variance_decay(out.mc.variance, fit_lo, fit_hi);
  out.oracle_fit = check_variance_decay(out.oracle.variance, fit_lo, fit_hi);
  out.table.header = {"iteration", "empirical_variance", "variance_se",
                      "recursion_variance"};
  for (std::size_t k = 0; k < out.mc.variance.size(); ++k)
    out.table.add_row({std::to_string(k), io::format_double(out.mc.variance[k]),
                       io::format_double(out.mc.variance_se[k]),
                       io::format_double(out.oracle.variance[k])});
  return out;
}

// --- shared problem builders -----------------------------------------------------

StratifiedLsProblem make_stratified_least_squares(long n, int categories, int dim,
                                                  double weight_decay,
                                                  std::uint64_t seed) {
  if (n % categories != 0)
    throw std::invalid_argument("make_stratified_least_squares: n % C != 0");
  const long per = n / categories;
  rng::Engine eng(rng::derive(seed, 0x15f));
  Eigen::MatrixXd rows(n, dim);
  Eigen::VectorXd targets(n);
  std::vector<int> labels(static_cast<std::size_t>(n));
  for (int j = 0; j < categories; ++j) {
    Eigen::VectorXd a(dim);
    for (int i = 0; i < dim; ++i) a[i] = eng.normal(0.0, 1.0);
    a /= a.norm();  // unit rows keep every per-sample curvature at 1+lambda
    const double y = eng.normal(0.0, 2.0);
    for (long r = 0; r < per; ++r) {
      const long row = static_cast<long>(j) * per + r;
      rows.row(row) = a.transpose();
      targets[row] = y;
      labels[static_cast<std::size_t>(row)] = j;
    }
  }
  StratifiedLsProblem out;
  out.max_sample_curvature = 1.0 + weight_decay;
  out.model = std::make_shared<QuadraticModel>(std::move(rows), std::move(targets),
                                               weight_decay);
  out.strat = Stratification::from_labels(labels);
  return out;
}

DigitSplits synthetic_digit_splits(long train_count, long test_count,
                                   std::uint64_t seed) {
  const auto train_set = make_synthetic_digits(train_count, rng::derive(seed, 1));
  const auto test_set = make_synthetic_digits(test_count, rng::derive(seed, 2));
  DigitSplits out;
  out.train = std::make_shared<LabeledDataset>(to_dataset(train_set));
  out.test = std::make_shared<LabeledDataset>(to_dataset(test_set));
  return out;
}

Table trace_to_table(const RunTrace& trace) {
  Table t;
  t.header = {"iteration", "gradient_evals", "loss", "optimality_gap",
              "gradient_norm", "train_accuracy", "test_accuracy",
              "estimator_sq_dev"};
  auto opt = [](const std::optional<double>& v) {
    return v ? io::format_double(*v) : std::string();
  };
  for (const auto& row : trace.rows)
    t.add_row({std::to_string(row.iteration), std::to_string(row.gradient_evals),
               io::format_double(row.loss), opt(row.optimality_gap),
               io::format_double(row.gradient_norm), opt(row.train_accuracy),
               opt(row.test_accuracy), opt(row.estimator_sq_dev)});
  return t;
}

}  // namespace mstgd
