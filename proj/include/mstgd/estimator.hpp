#pragma once

#include <Eigen/Core>
#include <vector>

// Memory stochastic stratified gradient estimator: per-category memory
// components blended with fresh draws by (p, q) coefficients, class-weighted
// into the statistic that drives the MSTGD update.

namespace mstgd {

// Denominator threshold below which blend computation falls back to the
// memoryless form (p=0, q=1).
inline constexpr double kDenomEps = 1e-12;
// The history weight p must stay strictly below 1 for the geometric
// variance-decay argument to apply.
inline constexpr double kPMax = 1.0 - 1e-6;

struct BlendCoefficients {
  double p = 0.0;  // weight on the stored history component
  double q = 1.0;  // weight on the fresh draw
  bool degenerate = false;   // fell back to (0,1): vanishing denominator
  bool clamped = false;      // p clamped into [0, kPMax]
  bool full_memory = false;  // p == 1 (fresh draw ignored entirely)
};

// General-form coefficients from consecutive moments (scalar; applied
// component-wise for vector gradients). Satisfies the unbiasedness ratio
// p/(1-q) = e_cur/e_prev whenever e_prev != 0 and no clamp fired.
BlendCoefficients compute_blend_general(double e_prev, double e_cur,
                                        double v_prev, double v_cur);

// Equal-mean form: p = v_cur/(v_prev+v_cur), q = 1-p (exact). Both variances
// below kDenomEps fall back to (0,1).
BlendCoefficients compute_blend_equal_mean(double v_prev, double v_cur);

struct CategoryMoments {
  Eigen::VectorXd mean;
  Eigen::VectorXd variance;  // per-component, nonnegative
  long sample_count = 1;
};

struct StratifiedWeights {
  std::vector<double> w;  // nonnegative, sums to 1 within 1e-12

  static StratifiedWeights uniform(int categories);
  static StratifiedWeights proportional(const std::vector<long>& category_sizes);
  void validate() const;
  int size() const { return static_cast<int>(w.size()); }
};

// The per-category memory of MSTGD: C gradient-sized components plus the
// stored moment estimates from the previous iteration. Components start at
// zero; stored moments are empty (variance slot zero) until the first update.
struct MemoryState {
  std::vector<Eigen::VectorXd> components;    // G_j, dimension dim each
  std::vector<Eigen::VectorXd> stored_means;  // E_j from the last iteration
  std::vector<Eigen::VectorXd> stored_vars;   // V_j from the last iteration
  long iteration = 0;
  bool has_moments = false;

  static MemoryState zero(int categories, int dim);
  int categories() const { return static_cast<int>(components.size()); }
  int dim() const {
    return components.empty() ? 0 : static_cast<int>(components[0].size());
  }
};

// G' = p*G + q*g, scalar coefficients.
Eigen::VectorXd update_component(const Eigen::VectorXd& component, double p,
                                 double q, const Eigen::VectorXd& fresh);
// Component-wise coefficients.
Eigen::VectorXd update_component(const Eigen::VectorXd& component,
                                 const Eigen::ArrayXd& p,
                                 const Eigen::ArrayXd& q,
                                 const Eigen::VectorXd& fresh);

// Mean-zeroed update: G' = p*G + q*(g - mean).
Eigen::VectorXd update_component_zero_mean(const Eigen::VectorXd& component,
                                           double p, double q,
                                           const Eigen::VectorXd& fresh,
                                           const Eigen::VectorXd& mean);
Eigen::VectorXd update_component_zero_mean(const Eigen::VectorXd& component,
                                           const Eigen::ArrayXd& p,
                                           const Eigen::ArrayXd& q,
                                           const Eigen::VectorXd& fresh,
                                           const Eigen::VectorXd& mean);

// Class-weighted mean of the memory:  sum_j w_j * (G_j [+ E_j]).
// With add_back_means the stored means are added per component (the
// mean-zeroed update direction); without it this is the raw stratified form.
Eigen::VectorXd stratified_mean(const StratifiedWeights& weights,
                                const MemoryState& state, bool add_back_means);

struct VarianceSp {
  Eigen::VectorXd value;        // per-component variance
  long degenerate_count = 0;    // (category, component) pairs that fell back
};

// Stationary-point variance of the blended statistic:
//   sum_j w_j^2 * e_cur^2 v_prev v_cur / (e_cur^2 v_prev + e_prev^2 v_cur)
// computed per component; degenerate denominators contribute 0 and are
// counted.
VarianceSp variance_sp(const std::vector<CategoryMoments>& moments_prev,
                       const std::vector<CategoryMoments>& moments_cur,
                       const StratifiedWeights& weights);

}  // namespace mstgd
