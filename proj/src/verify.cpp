#include "mstgd/verify.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "mstgd/io.hpp"

namespace mstgd {

bool BoundReport::passed() const {
  for (const auto& r : records)
    if (r.violated) return false;
  return true;
}

long BoundReport::first_violation() const {
  for (const auto& r : records)
    if (r.violated) return r.k;
  return -1;
}

std::string BoundReport::to_json() const {
  nlohmann::json j;
  j["check"] = check;
  j["passed"] = passed();
  for (const auto& [key, value] : stats) j["stats"][key] = value;
  j["records"] = nlohmann::json::array();
  for (const auto& r : records) {
    j["records"].push_back({{"check", check},
                            {"k", r.k},
                            {"lhs", r.lhs},
                            {"rhs", r.rhs},
                            {"margin", r.margin},
                            {"violated", r.violated}});
  }
  return j.dump(2);
}

DiagOrder check_diag_order(const std::vector<double>& a,
                           const std::vector<double>& b) {
  if (a.size() != b.size())
    throw std::invalid_argument("check_diag_order: length mismatch");
  bool any_strict = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] > b[i]) return DiagOrder::incomparable;
    if (a[i] < b[i]) any_strict = true;
  }
  return any_strict ? DiagOrder::lt : DiagOrder::leq;
}

// --- scripted protocols ------------------------------------------------------

double ScriptedProtocol::target_mean(int k) const {
  double m = 0.0;
  for (int j = 0; j < categories(); ++j)
    m += weights.w[static_cast<std::size_t>(j)] *
         moments[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)].mean;
  return m;
}

double ScriptedProtocol::memoryless_variance(int k) const {
  double v = 0.0;
  for (int j = 0; j < categories(); ++j) {
    const double w = weights.w[static_cast<std::size_t>(j)];
    v += w * w *
         moments[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)].variance;
  }
  return v;
}

BlendCoefficients ScriptedProtocol::coefficients(int k, int j) const {
  if (force_p && force_q) {
    BlendCoefficients bc;
    bc.p = *force_p;
    bc.q = *force_q;
    return bc;
  }
  const auto& prev = moments[static_cast<std::size_t>(k - 1)][static_cast<std::size_t>(j)];
  const auto& cur = moments[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)];
  switch (kind) {
    case EstimatorKind::memory_general:
      return compute_blend_general(prev.mean, cur.mean, prev.variance, cur.variance);
    case EstimatorKind::memory_equal_mean:
      return compute_blend_equal_mean(prev.variance, cur.variance);
    case EstimatorKind::memoryless:
      return {};
  }
  return {};
}

ScriptedProtocol ScriptedProtocol::constant(double mean, double variance,
                                            int categories, int steps) {
  ScriptedProtocol p;
  p.moments.assign(static_cast<std::size_t>(steps),
                   std::vector<ScalarMoments>(static_cast<std::size_t>(categories),
                                              {mean, variance}));
  p.weights = StratifiedWeights::uniform(categories);
  return p;
}

ScriptedProtocol ScriptedProtocol::matched_halving(double mean, double v0,
                                                   int categories, int steps) {
  ScriptedProtocol p;
  p.moments.reserve(static_cast<std::size_t>(steps));
  // Fresh variance at step k equals the estimator's memory variance after
  // step k-1, which halves every step under forced (1/2, 1/2).
  double v = v0;
  for (int k = 0; k < steps; ++k) {
    p.moments.emplace_back(static_cast<std::size_t>(categories),
                           ScalarMoments{mean, v});
    if (k >= 1) v *= 0.5;
  }
  p.weights = StratifiedWeights::uniform(categories);
  p.mean_zeroing = true;
  p.force_p = 0.5;
  p.force_q = 0.5;
  return p;
}

McMoments mc_estimator_moments(const ScriptedProtocol& protocol, long replications,
                               std::uint64_t seed) {
  const int K = protocol.steps();
  const int C = protocol.categories();
  if (K == 0 || C == 0)
    throw std::invalid_argument("mc_estimator_moments: empty protocol");
  protocol.weights.validate();

  std::vector<double> sum(static_cast<std::size_t>(K), 0.0);
  std::vector<double> sum_sq(static_cast<std::size_t>(K), 0.0);
  std::vector<double> g(static_cast<std::size_t>(C));

  for (long rep = 0; rep < replications; ++rep) {
    rng::Engine eng(rng::derive(seed, 0x3c0, static_cast<std::uint64_t>(rep)));
    for (int k = 0; k < K; ++k) {
      double value = 0.0;
      for (int j = 0; j < C; ++j) {
        const auto& m =
            protocol.moments[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)];
        const double draw = eng.normal(m.mean, std::sqrt(m.variance));
        const double centered = protocol.mean_zeroing ? draw - m.mean : draw;
        auto& slot = g[static_cast<std::size_t>(j)];
        if (k == 0) {
          slot = centered;  // first draw fills the memory
        } else {
          const auto bc = protocol.coefficients(k, j);
          slot = bc.p * slot + bc.q * centered;
        }
        value += protocol.weights.w[static_cast<std::size_t>(j)] *
                 (slot + (protocol.mean_zeroing ? m.mean : 0.0));
      }
      sum[static_cast<std::size_t>(k)] += value;
      sum_sq[static_cast<std::size_t>(k)] += value * value;
    }
  }

  McMoments out;
  out.replications = replications;
  const double n = static_cast<double>(replications);
  for (int k = 0; k < K; ++k) {
    const auto ku = static_cast<std::size_t>(k);
    const double mean = sum[ku] / n;
    const double var = std::max(0.0, sum_sq[ku] / n - mean * mean);
    out.mean.push_back(mean);
    out.mean_se.push_back(std::sqrt(var / n));
    const double var_unbiased = var * n / (n - 1.0);
    out.variance.push_back(var_unbiased);
    // Scripted estimator values are linear in normal draws, so the sample
    // variance has the exact normal-theory standard error.
    out.variance_se.push_back(var_unbiased * std::sqrt(2.0 / (n - 1.0)));
  }
  return out;
}

RecursionMoments exact_estimator_recursion(const ScriptedProtocol& protocol) {
  const int K = protocol.steps();
  const int C = protocol.categories();
  RecursionMoments out;
  std::vector<double> m(static_cast<std::size_t>(C), 0.0);
  std::vector<double> v(static_cast<std::size_t>(C), 0.0);
  for (int k = 0; k < K; ++k) {
    double est_mean = 0.0, est_var = 0.0;
    for (int j = 0; j < C; ++j) {
      const auto ju = static_cast<std::size_t>(j);
      const auto& mom =
          protocol.moments[static_cast<std::size_t>(k)][ju];
      const double fresh_mean = protocol.mean_zeroing ? 0.0 : mom.mean;
      if (k == 0) {
        m[ju] = fresh_mean;
        v[ju] = mom.variance;
      } else {
        const auto bc = protocol.coefficients(k, j);
        m[ju] = bc.p * m[ju] + bc.q * fresh_mean;
        v[ju] = bc.p * bc.p * v[ju] + bc.q * bc.q * mom.variance;
      }
      const double w = protocol.weights.w[ju];
      est_mean += w * (m[ju] + (protocol.mean_zeroing ? mom.mean : 0.0));
      est_var += w * w * v[ju];
    }
    out.mean.push_back(est_mean);
    out.variance.push_back(est_var);
  }
  return out;
}

// --- design effect -----------------------------------------------------------

DesignEffectResult check_design_effect(const ScriptedProtocol& protocol,
                                       long replications, std::uint64_t seed) {
  DesignEffectResult out;
  out.analytic.check = "design_effect_analytic";
  out.accumulation.check = "design_effect_accumulation";
  const int K = protocol.steps();
  const int C = protocol.categories();

  // Property 1: stationary-point variance strictly below the memoryless
  // variance at every step transition.
  for (int k = 1; k < K; ++k) {
    std::vector<CategoryMoments> prev, cur;
    for (int j = 0; j < C; ++j) {
      const auto& mp =
          protocol.moments[static_cast<std::size_t>(k - 1)][static_cast<std::size_t>(j)];
      const auto& mc =
          protocol.moments[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)];
      prev.push_back({Eigen::VectorXd::Constant(1, mp.mean),
                      Eigen::VectorXd::Constant(1, mp.variance), 1});
      cur.push_back({Eigen::VectorXd::Constant(1, mc.mean),
                     Eigen::VectorXd::Constant(1, mc.variance), 1});
    }
    const auto vsp = variance_sp(prev, cur, protocol.weights);
    out.analytic.add(k, vsp.value[0], protocol.memoryless_variance(k));
  }

  // Property 2: empirical variance against the run-max p/q accumulation.
  out.mc = mc_estimator_moments(protocol, replications, seed);
  double p_max = 0.0, q_max = 0.0;
  for (int k = 1; k < K; ++k)
    for (int j = 0; j < C; ++j) {
      const auto bc = protocol.coefficients(k, j);
      p_max = std::max(p_max, bc.p);
      q_max = std::max(q_max, bc.q);
    }
  out.accumulation.stats["p_max"] = p_max;
  out.accumulation.stats["q_max"] = q_max;
  const double var0 = protocol.memoryless_variance(0);
  for (int k = 1; k < K; ++k) {
    double rhs = std::pow(p_max, 2.0 * k) * var0;
    for (int i = 1; i <= k; ++i)
      rhs += std::pow(p_max, 2.0 * (k - i)) * q_max * q_max *
             protocol.memoryless_variance(i);
    const double tol = 4.0 * out.mc.variance_se[static_cast<std::size_t>(k)];
    out.accumulation.add(k, out.mc.variance[static_cast<std::size_t>(k)], rhs + tol);
  }
  return out;
}

ThresholdResult geometric_dominance_threshold(double eta, double gamma, long k0,
                                              long kmax) {
  if (!(eta > 0.0 && eta < 1.0))
    throw std::invalid_argument("threshold: eta must lie in (0,1)");
  if (!(gamma > 0.0 && gamma < 1.0))
    throw std::invalid_argument("threshold: gamma must lie in (0,1)");
  ThresholdResult out;
  out.no_gap = eta >= gamma;
  out.report.check = "geometric_dominance";
  const double lead = 1.0 + 1.0 / (1.0 - eta);
  long first_hold = -1;
  // Scan in log space; the plain powers underflow long before kmax.
  const double log_eta = std::log(eta), log_gamma = std::log(gamma);
  for (long k = k0 + 1; k <= kmax; ++k) {
    const double log_lhs = std::log(lead) + 2.0 * k * log_eta;
    const double log_rhs = 2.0 * (k - k0) * log_gamma;
    const bool holds = log_lhs <= log_rhs;
    if (holds && first_hold < 0) first_hold = k;
    if (!holds) first_hold = -1;  // must hold for every k after the threshold
    if (k - k0 <= 64 || k == kmax)  // keep the report bounded
      out.report.add(k, log_lhs, log_rhs);
  }
  if (first_hold > 0) out.threshold = first_hold;
  out.report.stats["eta"] = eta;
  out.report.stats["gamma"] = gamma;
  out.report.stats["threshold"] =
      out.threshold ? static_cast<double>(*out.threshold) : -1.0;
  return out;
}

BoundReport check_pl_inequality(const DifferentiableModel& model, int probes,
                                std::uint64_t seed) {
  const ModelConstants* k = model.constants();
  if (!k) throw std::invalid_argument("check_pl_inequality: model lacks constants");
  BoundReport report;
  report.check = "pl_inequality";
  rng::Engine eng(rng::derive(seed, 0x91));
  for (int t = 0; t < probes; ++t) {
    Eigen::VectorXd w(model.dim());
    for (int i = 0; i < model.dim(); ++i) w[i] = eng.normal(0.0, 2.0);
    w += k->minimizer;
    const double lhs = 2.0 * k->strong_convexity * (model.loss(w) - k->optimal_value);
    const double rhs = model.full_gradient(w).squaredNorm();
    report.add(t, lhs, rhs + 1e-9 * (1.0 + std::abs(rhs)));
  }
  return report;
}

BoundReport check_lipschitz(const DifferentiableModel& model, int pairs,
                            std::uint64_t seed) {
  const ModelConstants* k = model.constants();
  if (!k) throw std::invalid_argument("check_lipschitz: model lacks constants");
  BoundReport report;
  report.check = "lipschitz";
  rng::Engine eng(rng::derive(seed, 0x92));
  for (int t = 0; t < pairs; ++t) {
    Eigen::VectorXd a(model.dim()), b(model.dim());
    for (int i = 0; i < model.dim(); ++i) {
      a[i] = eng.normal(0.0, 3.0);
      b[i] = eng.normal(0.0, 3.0);
    }
    const double lhs = (model.full_gradient(a) - model.full_gradient(b)).norm();
    const double rhs = k->lipschitz * (a - b).norm();
    report.add(t, lhs, rhs + 1e-9 * (1.0 + rhs));
  }
  return report;
}

double ConvergenceParams::rho() const {
  return 1.0 - strong_convexity * mu * step_size * (2.0 - lipschitz * step_size);
}

double ConvergenceParams::noise_floor(double s_sq) const {
  return step_size * lipschitz * s_sq /
         (2.0 * strong_convexity * mu * (2.0 - step_size * lipschitz));
}

double ConvergenceParams::linear_rate() const {
  return std::max(1.0 - step_size * strong_convexity * mu / 2.0, gamma);
}

double gradient_population_variance(const DifferentiableModel& model,
                                    const Eigen::VectorXd& w) {
  const long n = model.sample_count();
  const Eigen::VectorXd mean = model.full_gradient(w);
  double acc = 0.0;
  for (long i = 0; i < n; ++i)
    acc += (model.sample_gradient(w, i) - mean).squaredNorm();
  return acc / static_cast<double>(n);
}

double stepper_gradient_variance(const DifferentiableModel& model,
                                 const Eigen::VectorXd& w, OptimizerKind kind,
                                 int batch_size) {
  const double sigma_sq = gradient_population_variance(model, w);
  const double n = static_cast<double>(model.sample_count());
  switch (kind) {
    case OptimizerKind::fgd: return 0.0;
    case OptimizerKind::sgd: return sigma_sq;
    case OptimizerKind::batch: {
      const double b = static_cast<double>(batch_size);
      if (b >= n) return 0.0;
      return sigma_sq * (n - b) / (b * (n - 1.0));
    }
    default:
      throw std::invalid_argument("stepper_gradient_variance: GDM steppers only");
  }
}

CviResult check_cvi(const DifferentiableModel& model, const Eigen::VectorXd& w0,
                    OptimizerKind kind, const OptimizerConfig& cfg,
                    long replications, double mu, std::uint64_t seed) {
  if (kind != OptimizerKind::fgd && kind != OptimizerKind::sgd &&
      kind != OptimizerKind::batch)
    throw std::invalid_argument("check_cvi: GDM steppers only");
  const ModelConstants* constants = model.constants();
  if (!constants) throw std::invalid_argument("check_cvi: model lacks constants");
  const double L = constants->lipschitz;
  const double c = constants->strong_convexity;
  if (!(cfg.step_size < 2.0 / L))
    throw std::invalid_argument("check_cvi: step size must be below 2/L");

  CviResult out;
  out.s1_sq = stepper_gradient_variance(model, w0, kind, cfg.batch_size);
  ConvergenceParams params;
  params.lipschitz = L;
  params.strong_convexity = c;
  params.mu = mu;
  params.step_size = cfg.step_size;
  out.rho = params.rho();
  out.lambda1 = params.noise_floor(out.s1_sq);

  const long reps = kind == OptimizerKind::fgd ? 1 : replications;
  std::vector<double> gap_sum, gap_sq;
  std::vector<long> iters;
  std::vector<double> sigma_track;

  for (long rep = 0; rep < reps; ++rep) {
    OptimizerConfig rc = cfg;
    rc.seed = rng::derive(seed, 0xc71, static_cast<std::uint64_t>(rep));
    const RunTrace trace = run(model, nullptr, kind, w0, rc);
    if (gap_sum.empty()) {
      gap_sum.assign(trace.rows.size(), 0.0);
      gap_sq.assign(trace.rows.size(), 0.0);
      for (const auto& row : trace.rows) iters.push_back(row.iteration);
    }
    for (std::size_t t = 0; t < trace.rows.size(); ++t) {
      const double gap = trace.rows[t].optimality_gap.value();
      gap_sum[t] += gap;
      gap_sq[t] += gap * gap;
    }
    if (rep == 0) {
      // population gradient variance along one reference trajectory
      Eigen::VectorXd w = w0;
      sigma_track.push_back(gradient_population_variance(model, w));
      rng::Engine eng(rng::derive(rc.seed, 0x0907, static_cast<std::uint64_t>(kind)));
      for (long k = 0; k < std::min<long>(cfg.max_iter, 64); ++k) {
        switch (kind) {
          case OptimizerKind::fgd: w = fgd_step(model, w, cfg.step_size); break;
          case OptimizerKind::sgd: w = sgd_step(model, w, cfg.step_size, eng); break;
          default: w = batch_step(model, w, cfg.step_size, cfg.batch_size, eng); break;
        }
        sigma_track.push_back(gradient_population_variance(model, w));
      }
    }
  }

  out.sigma_min_sq = *std::min_element(sigma_track.begin(), sigma_track.end());
  out.sigma_max_sq = *std::max_element(sigma_track.begin(), sigma_track.end());
  // Constant sample size n: the required ratio is sigma_min^2/sigma_max^2 <= 1.
  out.sample_ratio_condition_ok =
      out.sigma_min_sq <= out.sigma_max_sq * (1.0 + 1e-12);

  out.report.check = "cvi";
  out.report.stats["rho"] = out.rho;
  out.report.stats["lambda1"] = out.lambda1;
  out.report.stats["s1_sq"] = out.s1_sq;
  const double n = static_cast<double>(reps);
  const double gap0 = gap_sum[0] / n;
  for (std::size_t t = 1; t < gap_sum.size(); ++t) {
    const double mean = gap_sum[t] / n;
    const double var = std::max(0.0, gap_sq[t] / n - mean * mean);
    const double se = reps > 1 ? std::sqrt(var / n) : 0.0;
    out.mc_gap.push_back(mean);
    out.mc_gap_se.push_back(se);
    const double rhs = out.lambda1 +
                       std::pow(out.rho, static_cast<double>(iters[t])) *
                           (gap0 - out.lambda1);
    out.report.add(iters[t], mean, rhs + 4.0 * se + 1e-9 * (1.0 + std::abs(rhs)));
  }
  return out;
}

LinearConvergenceResult check_linear_convergence(const RunTrace& trace,
                                                 const ConvergenceParams& params,
                                                 double optimal_value) {
  LinearConvergenceResult out;
  out.report.check = "linear_convergence";
  out.floor = 1e3 * std::numeric_limits<double>::epsilon() *
                  std::abs(optimal_value) +
              1e-12;
  std::vector<double> xs, ys;
  for (const auto& row : trace.rows) {
    if (!row.optimality_gap)
      throw std::invalid_argument("check_linear_convergence: trace lacks gaps");
    const double gap = *row.optimality_gap;
    if (gap > out.floor) {
      xs.push_back(static_cast<double>(row.iteration));
      ys.push_back(std::log(gap));
    }
    const double bound =
        params.omega *
        std::pow(params.lambda,
                 2.0 * (static_cast<double>(row.iteration) - params.k0));
    if (gap > out.floor)
      out.report.add(row.iteration, gap, bound);
  }
  if (xs.size() >= 2) {
    const auto fit = fit_line(xs, ys);
    out.fitted_rate = fit.slope;
  }
  out.points_used = static_cast<long>(xs.size());
  out.report.stats["fitted_rate"] = out.fitted_rate;
  out.report.stats["floor"] = out.floor;
  return out;
}

VarianceDecayFit check_variance_decay(const std::vector<double>& variances,
                                      long k_lo, long k_hi) {
  if (k_lo < 0 || k_hi >= static_cast<long>(variances.size()) || k_hi - k_lo < 1)
    throw std::invalid_argument("check_variance_decay: bad window");
  std::vector<double> xs, ys;
  for (long k = k_lo; k <= k_hi; ++k) {
    const double v = variances[static_cast<std::size_t>(k)];
    if (v <= 0.0)
      throw std::invalid_argument("check_variance_decay: nonpositive variance");
    xs.push_back(static_cast<double>(k));
    ys.push_back(std::log(v));
  }
  const auto fit = fit_line(xs, ys);
  VarianceDecayFit out;
  out.gamma_sq_hat = std::exp(fit.slope);
  out.gamma_hat = std::exp(0.5 * fit.slope);
  out.k0 = k_lo;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double predicted = fit.intercept + fit.slope * xs[i];
    out.max_abs_residual = std::max(out.max_abs_residual, std::abs(ys[i] - predicted));
  }
  out.phi_hat = std::exp(fit.intercept + fit.slope * static_cast<double>(k_lo) +
                         out.max_abs_residual);
  out.report.check = "variance_decay";
  for (long k = k_lo; k <= k_hi; ++k) {
    const double envelope =
        out.phi_hat * std::pow(out.gamma_sq_hat, static_cast<double>(k - k_lo));
    out.report.add(k, variances[static_cast<std::size_t>(k)],
                   envelope * (1.0 + 1e-12));
  }
  out.report.stats["gamma_hat"] = out.gamma_hat;
  out.report.stats["gamma_sq_hat"] = out.gamma_sq_hat;
  out.report.stats["phi_hat"] = out.phi_hat;
  out.report.stats["max_abs_residual"] = out.max_abs_residual;
  return out;
}

LineFit fit_line(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size() || xs.size() < 2)
    throw std::invalid_argument("fit_line: need at least two points");
  const double n = static_cast<double>(xs.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sx += xs[i];
    sy += ys[i];
    sxx += xs[i] * xs[i];
    sxy += xs[i] * ys[i];
  }
  LineFit f;
  f.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  f.intercept = (sy - f.slope * sx) / n;
  return f;
}

}  // namespace mstgd
