#include <doctest.h>

#include <cmath>

#include "mstgd/estimator.hpp"
#include "mstgd/rng.hpp"
#include "mstgd/verify.hpp"

using namespace mstgd;

TEST_CASE("general blend: equal moments split evenly") {
  const auto bc = compute_blend_general(1.0, 1.0, 0.7, 0.7);
  CHECK(bc.p == doctest::Approx(0.5));
  CHECK(bc.q == doctest::Approx(0.5));
  CHECK_FALSE(bc.degenerate);
}

TEST_CASE("general blend: hand case and unbiasedness ratio") {
  // e_prev=2, e_cur=1, v_prev=1, v_cur=2: denominator 1*1 + 4*2 = 9.
  const auto bc = compute_blend_general(2.0, 1.0, 1.0, 2.0);
  CHECK(bc.p == doctest::Approx(4.0 / 9.0).epsilon(1e-14));
  CHECK(bc.q == doctest::Approx(1.0 / 9.0).epsilon(1e-14));
  CHECK(bc.p / (1.0 - bc.q) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("general blend: ratio identity over random moments") {
  rng::Engine eng(42);
  for (int t = 0; t < 500; ++t) {
    const double ep = eng.uniform(0.2, 5.0);
    const double ec = eng.uniform(0.2, 5.0);
    const double vp = eng.uniform(0.01, 10.0);
    const double vc = eng.uniform(0.01, 10.0);
    const auto bc = compute_blend_general(ep, ec, vp, vc);
    if (bc.degenerate || bc.clamped) continue;
    CHECK(std::abs(bc.p / (1.0 - bc.q) - ec / ep) <= 1e-12 * std::abs(ec / ep));
    CHECK(bc.q >= 0.0);
    CHECK(bc.q < 1.0);
    CHECK(bc.p >= 0.0);
  }
}

TEST_CASE("general blend: zero denominator falls back to memoryless") {
  const auto bc = compute_blend_general(1.0, 1.0, 0.0, 0.0);
  CHECK(bc.p == 0.0);
  CHECK(bc.q == 1.0);
  CHECK(bc.degenerate);
}

TEST_CASE("general blend: clamp keeps the ratio when possible") {
  // e_prev=1, e_cur=10, v_prev=1, v_cur=100 gives p = 1000/200 = 5.
  const auto bc = compute_blend_general(1.0, 10.0, 1.0, 100.0);
  CHECK(bc.clamped);
  CHECK(bc.p == doctest::Approx(kPMax));
  CHECK(bc.p / (1.0 - bc.q) == doctest::Approx(10.0).epsilon(1e-9));
}

TEST_CASE("general blend: opposite-sign means reduce to memoryless") {
  const auto bc = compute_blend_general(-2.0, 1.0, 1.0, 1.0);
  CHECK(bc.p == 0.0);
  CHECK(bc.q == 1.0);
  CHECK(bc.clamped);
}

TEST_CASE("equal-mean blend: direct substitution") {
  const auto bc = compute_blend_equal_mean(1.0, 3.0);
  CHECK(bc.p == doctest::Approx(0.75).epsilon(1e-15));
  CHECK(bc.q == doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("equal-mean blend: symmetry and exact p+q") {
  rng::Engine eng(7);
  for (int t = 0; t < 500; ++t) {
    const double vp = eng.uniform(0.0, 5.0);
    const double vc = eng.uniform(0.0, 5.0);
    const auto bc = compute_blend_equal_mean(vp, vc);
    CHECK(bc.p + bc.q == 1.0);  // exact, by construction
    CHECK(bc.p <= 1.0);
  }
  const auto even = compute_blend_equal_mean(0.9, 0.9);
  CHECK(even.p == doctest::Approx(0.5));
}

TEST_CASE("equal-mean blend: certain fresh signal takes all weight") {
  const auto bc = compute_blend_equal_mean(0.0, 1.0);
  CHECK(bc.p == 1.0);
  CHECK(bc.q == 0.0);
  CHECK(bc.full_memory);
  const auto both_zero = compute_blend_equal_mean(0.0, 0.0);
  CHECK(both_zero.degenerate);
  CHECK(both_zero.q == 1.0);
}

TEST_CASE("update_component basics") {
  Eigen::VectorXd g(1), fresh(1);
  g << 0.5;
  fresh << 1.5;
  CHECK(update_component(g, 0.5, 0.5, fresh)[0] == doctest::Approx(1.0));
  CHECK(update_component(g, 0.0, 1.0, fresh)[0] == doctest::Approx(1.5));
  // fixed point of the recursion when both slots hold the same value
  Eigen::VectorXd same(1);
  same << 1.5;
  CHECK(update_component(same, 0.3, 0.7, fresh)[0] == doctest::Approx(1.5));
  Eigen::VectorXd wrong(2);
  CHECK_THROWS_AS(update_component(g, 0.5, 0.5, wrong), std::invalid_argument);
}

TEST_CASE("update_component_zero_mean centers the signal") {
  Eigen::VectorXd zero = Eigen::VectorXd::Zero(1);
  Eigen::VectorXd fresh(1), mean(1);
  fresh << 2.0;
  mean << 1.0;
  CHECK(update_component_zero_mean(zero, 0.5, 0.5, fresh, mean)[0] ==
        doctest::Approx(0.5));
  CHECK(update_component_zero_mean(zero, 0.4, 0.6, mean, mean)[0] ==
        doctest::Approx(0.0));
}

TEST_CASE("zero-mean storage drives the empirical mean of the memory to zero") {
  rng::Engine eng(11);
  Eigen::VectorXd g = Eigen::VectorXd::Zero(1);
  Eigen::VectorXd mean(1);
  mean << 3.0;
  double acc = 0.0;
  const int steps = 20000;
  for (int k = 0; k < steps; ++k) {
    Eigen::VectorXd fresh(1);
    fresh << eng.normal(3.0, 1.0);
    g = update_component_zero_mean(g, 0.5, 0.5, fresh, mean);
    acc += g[0];
  }
  CHECK(std::abs(acc / steps) < 0.02);
}

TEST_CASE("stratified_mean with and without the add-back") {
  auto state = MemoryState::zero(2, 1);
  state.components[0] << 1.0;
  state.components[1] << 3.0;
  auto weights = StratifiedWeights::uniform(2);
  CHECK(stratified_mean(weights, state, true)[0] == doctest::Approx(2.0));
  CHECK(stratified_mean(weights, state, false)[0] == doctest::Approx(2.0));
  state.stored_means[0] << 10.0;
  state.stored_means[1] << 20.0;
  CHECK(stratified_mean(weights, state, true)[0] == doctest::Approx(17.0));

  auto single = MemoryState::zero(1, 1);
  single.components[0] << 4.0;
  single.stored_means[0] << 1.5;
  CHECK(stratified_mean(StratifiedWeights::uniform(1), single, true)[0] ==
        doctest::Approx(5.5));

  StratifiedWeights bad;
  bad.w = {0.5};
  CHECK_THROWS_AS(stratified_mean(bad, state, true), std::invalid_argument);
}

TEST_CASE("memory state starts at zero") {
  const auto state = MemoryState::zero(3, 4);
  CHECK(state.categories() == 3);
  CHECK(state.dim() == 4);
  for (const auto& c : state.components) CHECK(c.norm() == 0.0);
  CHECK(state.iteration == 0);
  CHECK_FALSE(state.has_moments);
}

TEST_CASE("stratified weights invariants") {
  CHECK_THROWS_AS(StratifiedWeights::proportional({3, 0}), std::invalid_argument);
  const auto w = StratifiedWeights::proportional({10, 30});
  CHECK(w.w[0] == doctest::Approx(0.25));
  w.validate();
  StratifiedWeights bad;
  bad.w = {0.5, 0.6};
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

namespace {

std::vector<CategoryMoments> scalar_moments(std::vector<std::pair<double, double>> ms) {
  std::vector<CategoryMoments> out;
  for (auto [mean, var] : ms)
    out.push_back({Eigen::VectorXd::Constant(1, mean),
                   Eigen::VectorXd::Constant(1, var), 1});
  return out;
}

}  // namespace

TEST_CASE("variance_sp: equal-moment symmetry halves the variance") {
  const auto prev = scalar_moments({{1.0, 0.8}});
  const auto cur = scalar_moments({{1.0, 0.8}});
  const auto v = variance_sp(prev, cur, StratifiedWeights::uniform(1));
  CHECK(v.value[0] == doctest::Approx(0.4).epsilon(1e-14));
}

TEST_CASE("variance_sp: hand substitution") {
  const auto prev = scalar_moments({{2.0, 1.0}});
  const auto cur = scalar_moments({{1.0, 2.0}});
  const auto v = variance_sp(prev, cur, StratifiedWeights::uniform(1));
  CHECK(v.value[0] == doctest::Approx(2.0 / 9.0).epsilon(1e-14));
  CHECK(v.degenerate_count == 0);
}

TEST_CASE("variance_sp sits strictly below the memoryless variance") {
  rng::Engine eng(5);
  for (int t = 0; t < 300; ++t) {
    const int c = 1 + static_cast<int>(eng.next_below(4));
    std::vector<std::pair<double, double>> prev, cur;
    double memoryless = 0.0;
    const auto weights = StratifiedWeights::uniform(c);
    for (int j = 0; j < c; ++j) {
      prev.push_back({eng.uniform(0.2, 4.0), eng.uniform(0.05, 5.0)});
      cur.push_back({eng.uniform(0.2, 4.0), eng.uniform(0.05, 5.0)});
      memoryless += weights.w[static_cast<std::size_t>(j)] *
                    weights.w[static_cast<std::size_t>(j)] * cur.back().second;
    }
    const auto v = variance_sp(scalar_moments(prev), scalar_moments(cur), weights);
    CHECK(v.value[0] < memoryless);
  }
}

TEST_CASE("variance_sp flags degenerate denominators") {
  const auto prev = scalar_moments({{0.0, 0.0}});
  const auto cur = scalar_moments({{0.0, 0.0}});
  const auto v = variance_sp(prev, cur, StratifiedWeights::uniform(1));
  CHECK(v.value[0] == 0.0);
  CHECK(v.degenerate_count == 1);
}

TEST_CASE("scripted memory statistic is unbiased under the general blend") {
  // Two-step protocol with distinct category moments; the Monte-Carlo mean at
  // the second step must match the weighted current means within 4 SE.
  ScriptedProtocol protocol;
  protocol.moments = {{{1.0, 1.0}, {3.0, 2.0}}, {{2.0, 4.0}, {1.0, 0.5}}};
  protocol.weights = StratifiedWeights::uniform(2);
  protocol.kind = EstimatorKind::memory_general;
  const auto mc = mc_estimator_moments(protocol, 20000, 99);
  const double target = protocol.target_mean(1);
  CHECK(std::abs(mc.mean[1] - target) <= 4.0 * mc.mean_se[1]);
}

TEST_CASE("scripted memory statistic matches the stationary variance") {
  ScriptedProtocol protocol;
  protocol.moments = {{{2.0, 1.0}}, {{1.0, 2.0}}};
  protocol.weights = StratifiedWeights::uniform(1);
  protocol.kind = EstimatorKind::memory_general;
  const auto mc = mc_estimator_moments(protocol, 100000, 123);
  CHECK(mc.variance[1] == doctest::Approx(2.0 / 9.0).epsilon(0.05));
}

TEST_CASE("equal-mean zeroed scripting decays variance with bounded step ratio") {
  auto protocol = ScriptedProtocol::constant(1.0, 1.0, 1, 5);
  protocol.kind = EstimatorKind::memory_equal_mean;
  protocol.mean_zeroing = true;
  const auto mc = mc_estimator_moments(protocol, 100000, 17);
  // log-variance slope negative over the horizon
  std::vector<double> xs, ys;
  for (std::size_t k = 0; k < mc.variance.size(); ++k) {
    xs.push_back(static_cast<double>(k));
    ys.push_back(std::log(mc.variance[k]));
  }
  CHECK(fit_line(xs, ys).slope < 0.0);
  // per-step ratio below 0.95 on the early horizon
  for (std::size_t k = 1; k < 4; ++k)
    CHECK(mc.variance[k] / mc.variance[k - 1] < 0.95);
  // mean stays at the scripted value
  CHECK(std::abs(mc.mean.back() - 1.0) <= 4.0 * mc.mean_se.back());
}
