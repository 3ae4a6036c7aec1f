#pragma once

#include <string>
#include <vector>

#include "mstgd/verify.hpp"

// Pre-canned verification suites behind the CLI `verify` subcommand. Each
// suite pins its protocol and tolerances; `passed` reflects only the asserted
// checks (reported-only quantities land in `notes`).

namespace mstgd {

struct SuiteResult {
  std::string name;
  bool passed = false;
  std::vector<BoundReport> reports;
  std::vector<std::string> notes;

  std::string to_json() const;
};

// Scripted two-step population (C=2, distinct moments): the Monte-Carlo mean
// of the blended statistic matches the weighted population mean within 4 SE.
SuiteResult suite_unbias(std::uint64_t seed);

// Two-step single-category protocol: the Monte-Carlo variance matches the
// stationary-point variance within 5% at 1e5 replications; the hand value is
// 2/9 for moments (2,1)->(1,2).
SuiteResult suite_variance(std::uint64_t seed);

// 1000 random positive-variance moment configurations: stationary-point
// variance strictly below the memoryless stratified variance, plus the
// Monte-Carlo accumulation bound on a scripted run.
SuiteResult suite_design_effect(std::uint64_t seed);

// Matched-halving protocol: Monte-Carlo decay rate within 5% of the exact
// recursion's rate; memoryless control reported (not asserted).
SuiteResult suite_decay(std::uint64_t seed);

// Threshold scan: (0.9, 0.95) has a finite threshold that holds through 1e4;
// eta = gamma has none.
SuiteResult suite_threshold(std::uint64_t seed);

// Strong-convexity consequence and Lipschitz bound on three random
// quadratics, 100 probes/pairs each.
SuiteResult suite_model_facts(std::uint64_t seed);

// Gap contraction: exact 0.25 factor for the unit full-gradient case,
// noisy-quadratic plateau below 1.1x the noise floor over 1e3 replications,
// full-batch equivalence.
SuiteResult suite_cvi(std::uint64_t seed);

// Stratified least squares (N=400, C=4, d=10): negative fitted log-gap slope
// down to the 1e-12 floor and a final gap strictly below SGD's and the
// uniform mini-batch's at the same gradient-evaluation budget, over 5 seeds.
SuiteResult suite_linear(std::uint64_t seed);

std::string suites_to_json(const std::vector<SuiteResult>& suites);

}  // namespace mstgd
