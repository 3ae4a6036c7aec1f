#include "mstgd/estimator.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace mstgd {

namespace {

void check_dims(const Eigen::VectorXd& a, const Eigen::VectorXd& b,
                const char* what) {
  if (a.size() != b.size())
    throw std::invalid_argument(std::string(what) + ": dimension mismatch");
}

}  // namespace

BlendCoefficients compute_blend_general(double e_prev, double e_cur,
                                        double v_prev, double v_cur) {
  if (v_prev < 0.0 || v_cur < 0.0)
    throw std::invalid_argument("compute_blend_general: negative variance");
  BlendCoefficients out;
  const double denom = e_cur * e_cur * v_prev + e_prev * e_prev * v_cur;
  if (denom < kDenomEps) {
    out.p = 0.0;
    out.q = 1.0;
    out.degenerate = true;
    return out;
  }
  out.p = e_cur * e_prev * v_cur / denom;
  out.q = e_cur * e_cur * v_prev / denom;
  if (out.p < 0.0) {
    // Opposite-sign means: no history weight in [0,1) can keep the
    // unbiasedness ratio, so reduce to the memoryless form.
    out.p = 0.0;
    out.q = 1.0;
    out.clamped = true;
    return out;
  }
  if (out.p > kPMax) {
    out.clamped = true;
    // Rescale q so p/(1-q) = e_cur/e_prev still holds if that leaves q in
    // [0,1); otherwise give up on the history entirely.
    if (e_cur != 0.0) {
      const double q_new = 1.0 - kPMax * e_prev / e_cur;
      if (q_new >= 0.0 && q_new < 1.0) {
        out.p = kPMax;
        out.q = q_new;
        return out;
      }
    }
    out.p = 0.0;
    out.q = 1.0;
  }
  if (out.p >= 1.0) out.full_memory = true;
  return out;
}

BlendCoefficients compute_blend_equal_mean(double v_prev, double v_cur) {
  if (v_prev < 0.0 || v_cur < 0.0)
    throw std::invalid_argument("compute_blend_equal_mean: negative variance");
  BlendCoefficients out;
  const double denom = v_prev + v_cur;
  if (denom < kDenomEps) {
    out.p = 0.0;
    out.q = 1.0;
    out.degenerate = true;
    return out;
  }
  out.p = v_cur / denom;
  out.q = 1.0 - out.p;  // p + q == 1 exactly
  if (out.p == 1.0) out.full_memory = true;
  return out;
}

StratifiedWeights StratifiedWeights::uniform(int categories) {
  if (categories <= 0)
    throw std::invalid_argument("StratifiedWeights: need at least one category");
  StratifiedWeights s;
  s.w.assign(static_cast<std::size_t>(categories), 1.0 / categories);
  return s;
}

StratifiedWeights StratifiedWeights::proportional(
    const std::vector<long>& category_sizes) {
  long total = 0;
  for (long n : category_sizes) {
    if (n <= 0)
      throw std::invalid_argument("StratifiedWeights: empty category");
    total += n;
  }
  StratifiedWeights s;
  s.w.reserve(category_sizes.size());
  for (long n : category_sizes)
    s.w.push_back(static_cast<double>(n) / static_cast<double>(total));
  return s;
}

void StratifiedWeights::validate() const {
  double sum = 0.0;
  for (double x : w) {
    if (x < 0.0) throw std::invalid_argument("StratifiedWeights: negative weight");
    sum += x;
  }
  if (std::abs(sum - 1.0) > 1e-12)
    throw std::invalid_argument("StratifiedWeights: weights must sum to 1");
}

MemoryState MemoryState::zero(int categories, int dim) {
  if (categories <= 0 || dim <= 0)
    throw std::invalid_argument("MemoryState: categories and dim must be positive");
  MemoryState s;
  s.components.assign(static_cast<std::size_t>(categories),
                      Eigen::VectorXd::Zero(dim));
  s.stored_means.assign(static_cast<std::size_t>(categories),
                        Eigen::VectorXd::Zero(dim));
  s.stored_vars.assign(static_cast<std::size_t>(categories),
                       Eigen::VectorXd::Zero(dim));
  return s;
}

Eigen::VectorXd update_component(const Eigen::VectorXd& component, double p,
                                 double q, const Eigen::VectorXd& fresh) {
  check_dims(component, fresh, "update_component");
  return p * component + q * fresh;
}

Eigen::VectorXd update_component(const Eigen::VectorXd& component,
                                 const Eigen::ArrayXd& p,
                                 const Eigen::ArrayXd& q,
                                 const Eigen::VectorXd& fresh) {
  check_dims(component, fresh, "update_component");
  if (p.size() != component.size() || q.size() != component.size())
    throw std::invalid_argument("update_component: coefficient dimension mismatch");
  return (p * component.array() + q * fresh.array()).matrix();
}

Eigen::VectorXd update_component_zero_mean(const Eigen::VectorXd& component,
                                           double p, double q,
                                           const Eigen::VectorXd& fresh,
                                           const Eigen::VectorXd& mean) {
  check_dims(component, fresh, "update_component_zero_mean");
  check_dims(fresh, mean, "update_component_zero_mean");
  return p * component + q * (fresh - mean);
}

Eigen::VectorXd update_component_zero_mean(const Eigen::VectorXd& component,
                                           const Eigen::ArrayXd& p,
                                           const Eigen::ArrayXd& q,
                                           const Eigen::VectorXd& fresh,
                                           const Eigen::VectorXd& mean) {
  check_dims(component, fresh, "update_component_zero_mean");
  check_dims(fresh, mean, "update_component_zero_mean");
  if (p.size() != component.size() || q.size() != component.size())
    throw std::invalid_argument(
        "update_component_zero_mean: coefficient dimension mismatch");
  return (p * component.array() + q * (fresh - mean).array()).matrix();
}

Eigen::VectorXd stratified_mean(const StratifiedWeights& weights,
                                const MemoryState& state, bool add_back_means) {
  if (weights.size() != state.categories())
    throw std::invalid_argument("stratified_mean: weights/category mismatch");
  Eigen::VectorXd out = Eigen::VectorXd::Zero(state.dim());
  for (int j = 0; j < state.categories(); ++j) {
    const auto ju = static_cast<std::size_t>(j);
    if (add_back_means)
      out += weights.w[ju] * (state.components[ju] + state.stored_means[ju]);
    else
      out += weights.w[ju] * state.components[ju];
  }
  return out;
}

VarianceSp variance_sp(const std::vector<CategoryMoments>& moments_prev,
                       const std::vector<CategoryMoments>& moments_cur,
                       const StratifiedWeights& weights) {
  if (moments_prev.size() != moments_cur.size() ||
      static_cast<int>(moments_prev.size()) != weights.size())
    throw std::invalid_argument("variance_sp: category count mismatch");
  if (moments_prev.empty())
    throw std::invalid_argument("variance_sp: no categories");
  const auto dim = moments_prev[0].mean.size();
  VarianceSp out;
  out.value = Eigen::VectorXd::Zero(dim);
  for (std::size_t j = 0; j < moments_prev.size(); ++j) {
    const auto& mp = moments_prev[j];
    const auto& mc = moments_cur[j];
    if (mp.mean.size() != dim || mc.mean.size() != dim ||
        mp.variance.size() != dim || mc.variance.size() != dim)
      throw std::invalid_argument("variance_sp: component dimension mismatch");
    const double wj2 = weights.w[j] * weights.w[j];
    for (Eigen::Index i = 0; i < dim; ++i) {
      const double ep = mp.mean[i], ec = mc.mean[i];
      const double vp = mp.variance[i], vc = mc.variance[i];
      const double denom = ec * ec * vp + ep * ep * vc;
      if (denom < kDenomEps) {
        ++out.degenerate_count;
        continue;
      }
      out.value[i] += wj2 * ec * ec * vp * vc / denom;
    }
  }
  return out;
}

}  // namespace mstgd
