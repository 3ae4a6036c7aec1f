#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "mstgd/estimator.hpp"
#include "mstgd/models.hpp"
#include "mstgd/rng.hpp"

// Synthetic stratified populations, IDX image ingestion, and seeded
// stratified/uniform sampling.

namespace mstgd {

struct Interval {
  double lo = 0.0, hi = 0.0;
};

struct ScalarMoments {
  double mean = 0.0;
  double variance = 0.0;  // population convention (1/n)
};

// A finite population of scalar observations observed over successive rounds.
// Values within each round are stored in ascending order and the categories
// are the C equal contiguous bands of that order, so each category is one
// layer of the round's value range.
struct StratifiedPopulation {
  int num_categories = 0;
  std::vector<std::vector<double>> rounds;  // [round][row], sorted ascending
  StratifiedWeights weights;

  std::vector<std::vector<ScalarMoments>> category_moments;  // [round][cat]
  std::vector<double> round_means;

  int num_rounds() const { return static_cast<int>(rounds.size()); }
  long rows_per_round() const {
    return rounds.empty() ? 0 : static_cast<long>(rounds[0].size());
  }
  long category_size() const { return rows_per_round() / num_categories; }
  double value(int round, int category, long offset) const {
    return rounds[static_cast<std::size_t>(round)]
                 [static_cast<std::size_t>(category) *
                      static_cast<std::size_t>(category_size()) +
                  static_cast<std::size_t>(offset)];
  }
  void compute_moments();
  // CSV export: header "round,category,value", one row per observation.
  void to_csv(const std::string& path) const;
};

// Round k holds `rows` uniform draws from intervals[k].
StratifiedPopulation gen_uniform_population(const std::vector<Interval>& intervals,
                                            int rows, int categories,
                                            std::uint64_t seed);

// The ten decreasing-mean intervals and their reverse.
std::vector<Interval> decreasing_mean_intervals();
std::vector<Interval> increasing_mean_intervals();

enum class NormalKind { random_params, mean_decreasing, mean_increasing,
                        var_decreasing, var_increasing };

// Normal rounds: `random_params` draws mu, sigma uniform on [1,20] per round;
// the mean/var kinds sweep the varying parameter linearly across [1,20]
// (decreasing: 20 -> 1) with the other parameter fixed at 10.
StratifiedPopulation gen_normal_population(NormalKind kind, int rows, int rounds,
                                           int categories, std::uint64_t seed);

// --- IDX image files ------------------------------------------------------

struct IdxError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct IdxBadMagic final : IdxError {
  using IdxError::IdxError;
};
struct IdxTruncated final : IdxError {
  using IdxError::IdxError;
};
struct IdxCountMismatch final : IdxError {
  using IdxError::IdxError;
};

struct IdxImageSet {
  long count = 0;
  int rows = 0, cols = 0;
  std::vector<std::uint8_t> images;  // count*rows*cols bytes
  std::vector<std::uint8_t> labels;  // count bytes, values 0..9
};

// Parses big-endian IDX pairs (image magic 0x00000803, label magic
// 0x00000801). Bad magic, truncation, and count mismatch raise their own
// error types.
IdxImageSet load_idx(const std::string& images_path, const std::string& labels_path);
void save_idx(const IdxImageSet& set, const std::string& images_path,
              const std::string& labels_path);

// Pixels scaled to [0,1].
LabeledDataset to_dataset(const IdxImageSet& set, long limit = -1);

// Deterministic 10-class 28x28 digit-like image set (class stroke templates
// with seeded shifts and pixel noise). Stand-in image data for training
// experiments when no IDX files are supplied.
IdxImageSet make_synthetic_digits(long count, std::uint64_t seed);

// --- draws ------------------------------------------------------------------

// One index set per category, uniform without replacement inside the
// category. Works off category sizes; offsets are local to the category.
std::vector<std::vector<long>> draw_stratified(const std::vector<long>& category_sizes,
                                               long per_category_count,
                                               rng::Engine& eng);

std::vector<std::vector<long>> draw_stratified(const LabeledDataset& data,
                                               long per_category_count,
                                               rng::Engine& eng);

std::vector<long> draw_uniform(long population_size, long n, rng::Engine& eng);

}  // namespace mstgd
