#pragma once

#include <Eigen/Core>
#include <functional>
#include <vector>

#include "mstgd/models.hpp"

namespace mstgd::test {

// Central finite differences, the independent oracle for every analytic
// gradient in the suite.
inline Eigen::VectorXd finite_difference_gradient(
    const std::function<double(const Eigen::VectorXd&)>& f,
    const Eigen::VectorXd& w, double step = 1e-5) {
  Eigen::VectorXd g(w.size());
  Eigen::VectorXd probe = w;
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    const double keep = probe[i];
    probe[i] = keep + step;
    const double hi = f(probe);
    probe[i] = keep - step;
    const double lo = f(probe);
    probe[i] = keep;
    g[i] = (hi - lo) / (2.0 * step);
  }
  return g;
}

inline double relative_error(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const double denom = std::max(1.0, std::max(a.norm(), b.norm()));
  return (a - b).norm() / denom;
}

// Two-pass mean/variance oracle (population convention).
inline std::pair<double, double> two_pass_moments(const std::vector<double>& xs) {
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double var = 0.0;
  for (double x : xs) var += (x - mean) * (x - mean);
  var /= static_cast<double>(xs.size());
  return {mean, var};
}

// Model whose per-sample gradients are fixed vectors: the loss is linear in w
// so gradients never depend on the iterate. Used for estimator studies inside
// the optimizer loop.
class FrozenModel final : public DifferentiableModel {
 public:
  explicit FrozenModel(std::vector<Eigen::VectorXd> gradients)
      : gradients_(std::move(gradients)) {}

  int dim() const override { return static_cast<int>(gradients_[0].size()); }
  long sample_count() const override { return static_cast<long>(gradients_.size()); }
  double sample_loss(const Eigen::VectorXd& w, long i) const override {
    return gradients_[static_cast<std::size_t>(i)].dot(w);
  }
  Eigen::VectorXd sample_gradient(const Eigen::VectorXd&, long i) const override {
    return gradients_[static_cast<std::size_t>(i)];
  }

 private:
  std::vector<Eigen::VectorXd> gradients_;
};

}  // namespace mstgd::test
