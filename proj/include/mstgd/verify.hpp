#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mstgd/data.hpp"
#include "mstgd/estimator.hpp"
#include "mstgd/models.hpp"
#include "mstgd/optimizers.hpp"

// Monte-Carlo oracles, brute-force recursions, and bound checkers that turn
// the estimator and convergence claims into numbers.

namespace mstgd {

struct BoundRecord {
  long k = 0;
  double lhs = 0.0, rhs = 0.0, margin = 0.0;
  bool violated = false;
};

struct BoundReport {
  std::string check;
  std::vector<BoundRecord> records;
  std::map<std::string, double> stats;

  bool passed() const;
  long first_violation() const;  // -1 when clean
  std::string to_json() const;

  void add(long k, double lhs, double rhs) {
    records.push_back({k, lhs, rhs, rhs - lhs, lhs > rhs});
  }
};

// Ordering of two per-component variance vectors (diagonal comparison).
enum class DiagOrder { leq, lt, incomparable };
DiagOrder check_diag_order(const std::vector<double>& a, const std::vector<double>& b);

// --- scripted estimator protocols -------------------------------------------

enum class EstimatorKind { memory_general, memory_equal_mean, memoryless };

// A fully scripted sequence of per-category moments driving estimator
// replications: at step k the fresh draw for category j is
// normal(moments[k][j]). Blend coefficients come from consecutive scripted
// moments (or are forced).
struct ScriptedProtocol {
  std::vector<std::vector<ScalarMoments>> moments;  // [step][category]
  StratifiedWeights weights;
  EstimatorKind kind = EstimatorKind::memory_equal_mean;
  bool mean_zeroing = false;
  std::optional<double> force_p, force_q;

  int steps() const { return static_cast<int>(moments.size()); }
  int categories() const {
    return moments.empty() ? 0 : static_cast<int>(moments[0].size());
  }
  // Weighted population mean at step k (the estimand).
  double target_mean(int k) const;
  // Memoryless stratified variance sum_j w_j^2 V_j^k at step k.
  double memoryless_variance(int k) const;
  // Coefficients used at step k (k>=1), category j.
  BlendCoefficients coefficients(int k, int j) const;

  static ScriptedProtocol constant(double mean, double variance, int categories,
                                   int steps);
  // Fresh variance matched to the memory variance at every step: with forced
  // (1/2, 1/2) coefficients the estimator variance halves each step.
  static ScriptedProtocol matched_halving(double mean, double v0, int categories,
                                          int steps);
};

struct McMoments {
  std::vector<double> mean, mean_se;
  std::vector<double> variance, variance_se;
  long replications = 0;
};

// Empirical per-step estimator moments over M independent scripted
// trajectories. The first step always fills the memory with the first draw.
McMoments mc_estimator_moments(const ScriptedProtocol& protocol, long replications,
                               std::uint64_t seed);

struct RecursionMoments {
  std::vector<double> mean, variance;
};

// Exact mean/variance recursion for the scripted estimator (independent of
// the Monte-Carlo path): m_k = p m_{k-1} + q E_k, v_k = p^2 v_{k-1} + q^2 V_k
// per category, weighted into the estimator moments.
RecursionMoments exact_estimator_recursion(const ScriptedProtocol& protocol);

// --- checkers ---------------------------------------------------------------

// Design-effect study: per step, the stationary-point variance must sit
// strictly below the memoryless stratified variance (property 1), and the
// Monte-Carlo variance must respect the p/q accumulation bound (property 2)
// with a 4-SE allowance.
struct DesignEffectResult {
  BoundReport analytic;   // property 1
  BoundReport accumulation;  // property 2
  McMoments mc;
};
DesignEffectResult check_design_effect(const ScriptedProtocol& protocol,
                                       long replications, std::uint64_t seed);

// Smallest k in (k0, kmax] from which (1 + 1/(1-eta)) * eta^(2k) stays below
// gamma^(2(k-k0)) through kmax; nullopt when no such k exists (in particular
// whenever eta >= gamma).
struct ThresholdResult {
  std::optional<long> threshold;
  bool no_gap;  // eta >= gamma: right side cannot outpace the left
  BoundReport report;
};
ThresholdResult geometric_dominance_threshold(double eta, double gamma, long k0,
                                              long kmax);

// Polyak-Lojasiewicz consequence of strong convexity:
// 2c (J(w) - J*) <= ||grad J(w)||^2 at random probes around the minimizer.
BoundReport check_pl_inequality(const DifferentiableModel& model, int probes,
                                std::uint64_t seed);

// Lipschitz gradient check over random parameter pairs.
BoundReport check_lipschitz(const DifferentiableModel& model, int pairs,
                            std::uint64_t seed);

struct ConvergenceParams {
  double lipschitz = 0.0;
  double strong_convexity = 0.0;
  double mu = 1.0, mu_g = 1.0;
  double step_size = 0.0;
  double gamma = 0.0;
  long k0 = 0;
  double phi = 0.0;
  double omega = 0.0;
  double lambda = 0.0;

  // Gap contraction factor 1 - c*mu*h*(2 - L*h).
  double rho() const;
  // Noise floor h*L*s^2 / (2*c*mu*(2 - h*L)).
  double noise_floor(double s_sq) const;
  // Theorem-style linear rate max{1 - h*c*mu/2, gamma}.
  double linear_rate() const;
};

// Convergence-variance inequality on a GDM stepper: replicated runs, the
// expected gap must satisfy gap_{k} <= Lambda_1 + rho^k (gap_0 - Lambda_1)
// within 4 SE at every recorded iteration.
struct CviResult {
  double rho = 0.0, lambda1 = 0.0, s1_sq = 0.0;
  double sigma_min_sq = 0.0, sigma_max_sq = 0.0;
  bool sample_ratio_condition_ok = false;
  std::vector<double> mc_gap, mc_gap_se;
  BoundReport report;
};
CviResult check_cvi(const DifferentiableModel& model, const Eigen::VectorXd& w0,
                    OptimizerKind kind, const OptimizerConfig& cfg,
                    long replications, double mu, std::uint64_t seed);

// Per-sample gradient population variance (trace) at w.
double gradient_population_variance(const DifferentiableModel& model,
                                    const Eigen::VectorXd& w);
// Variance of the stepper's gradient estimate at w (finite-population
// corrected for without-replacement batches).
double stepper_gradient_variance(const DifferentiableModel& model,
                                 const Eigen::VectorXd& w, OptimizerKind kind,
                                 int batch_size);

// Least-squares fit of log(optimality gap) against iteration index over the
// recorded rows above the numerical floor, plus the
// gap <= Omega * lambda^{2(k-k0)} bound per row.
struct LinearConvergenceResult {
  double fitted_rate = 0.0;  // slope per iteration of log gap
  long points_used = 0;
  double floor = 0.0;
  BoundReport report;
};
LinearConvergenceResult check_linear_convergence(const RunTrace& trace,
                                                 const ConvergenceParams& params,
                                                 double optimal_value);

// Fit of log variance against step index over [k_lo, k_hi] (0-based,
// inclusive); needs at least 2 points, the spec-level experiments use >= 4.
struct VarianceDecayFit {
  double gamma_hat = 0.0;    // exp(slope/2)
  double gamma_sq_hat = 0.0; // exp(slope)
  double phi_hat = 0.0;      // envelope constant at k0
  long k0 = 0;
  double max_abs_residual = 0.0;  // in log space
  BoundReport report;             // residual envelope per step
};
VarianceDecayFit check_variance_decay(const std::vector<double>& variances,
                                      long k_lo, long k_hi);

// Simple least squares y = a + b x.
struct LineFit {
  double slope = 0.0, intercept = 0.0;
};
LineFit fit_line(const std::vector<double>& xs, const std::vector<double>& ys);

}  // namespace mstgd
