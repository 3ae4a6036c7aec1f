#include "mstgd/data.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "mstgd/io.hpp"

namespace mstgd {

void StratifiedPopulation::compute_moments() {
  const long c_size = category_size();
  category_moments.assign(rounds.size(), {});
  round_means.assign(rounds.size(), 0.0);
  for (std::size_t k = 0; k < rounds.size(); ++k) {
    const auto& round = rounds[k];
    double total = 0.0;
    for (double v : round) total += v;
    round_means[k] = total / static_cast<double>(round.size());
    auto& mom = category_moments[k];
    mom.resize(static_cast<std::size_t>(num_categories));
    for (int j = 0; j < num_categories; ++j) {
      double s = 0.0, s2 = 0.0;
      for (long i = 0; i < c_size; ++i) {
        const double v = round[static_cast<std::size_t>(j) *
                                   static_cast<std::size_t>(c_size) +
                               static_cast<std::size_t>(i)];
        s += v;
      }
      const double mean = s / static_cast<double>(c_size);
      for (long i = 0; i < c_size; ++i) {
        const double v = round[static_cast<std::size_t>(j) *
                                   static_cast<std::size_t>(c_size) +
                               static_cast<std::size_t>(i)];
        s2 += (v - mean) * (v - mean);
      }
      mom[static_cast<std::size_t>(j)] = {mean, s2 / static_cast<double>(c_size)};
    }
  }
}

void StratifiedPopulation::to_csv(const std::string& path) const {
  std::ostringstream out;
  out << "round,category,value\n";
  const long c_size = category_size();
  for (int k = 0; k < num_rounds(); ++k)
    for (long i = 0; i < rows_per_round(); ++i)
      out << k << ',' << (i / c_size) << ','
          << io::format_double(rounds[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)])
          << '\n';
  io::write_file_atomic(path, out.str());
}

namespace {

StratifiedPopulation finish_population(std::vector<std::vector<double>> rounds,
                                       int categories) {
  StratifiedPopulation pop;
  pop.num_categories = categories;
  for (auto& r : rounds) std::sort(r.begin(), r.end());
  pop.rounds = std::move(rounds);
  pop.weights = StratifiedWeights::uniform(categories);
  pop.compute_moments();
  return pop;
}

}  // namespace

StratifiedPopulation gen_uniform_population(const std::vector<Interval>& intervals,
                                            int rows, int categories,
                                            std::uint64_t seed) {
  if (intervals.empty())
    throw std::invalid_argument("gen_uniform_population: no intervals");
  if (rows <= 0 || categories <= 0 || rows % categories != 0)
    throw std::invalid_argument(
        "gen_uniform_population: rows must be a positive multiple of categories");
  std::vector<std::vector<double>> rounds;
  rounds.reserve(intervals.size());
  for (std::size_t k = 0; k < intervals.size(); ++k) {
    const auto& iv = intervals[k];
    if (!(iv.lo <= iv.hi))
      throw std::invalid_argument("gen_uniform_population: invalid interval");
    rng::Engine eng(rng::derive(seed, 0x110d, k));
    std::vector<double> round(static_cast<std::size_t>(rows));
    for (auto& v : round) v = eng.uniform(iv.lo, iv.hi);
    rounds.push_back(std::move(round));
  }
  return finish_population(std::move(rounds), categories);
}

std::vector<Interval> decreasing_mean_intervals() {
  return {{8, 12}, {8, 10}, {6, 9}, {5, 8}, {4, 7},
          {3, 6},  {3, 5},  {2, 4}, {2, 3}, {0, 3}};
}

std::vector<Interval> increasing_mean_intervals() {
  auto iv = decreasing_mean_intervals();
  std::reverse(iv.begin(), iv.end());
  return iv;
}

StratifiedPopulation gen_normal_population(NormalKind kind, int rows, int rounds,
                                           int categories, std::uint64_t seed) {
  if (rows <= 0 || rounds <= 0 || categories <= 0 || rows % categories != 0)
    throw std::invalid_argument("gen_normal_population: bad shape");
  std::vector<std::vector<double>> data;
  data.reserve(static_cast<std::size_t>(rounds));
  for (int k = 0; k < rounds; ++k) {
    // linear sweep over [1,20]; decreasing kinds go 20 -> 1
    const double t = rounds == 1 ? 0.0
                                 : static_cast<double>(k) / (rounds - 1);
    const double up = 1.0 + 19.0 * t;
    const double down = 20.0 - 19.0 * t;
    double mu = 10.0, sigma = 10.0;
    rng::Engine param_eng(rng::derive(seed, 0x220d, static_cast<std::uint64_t>(k), 1));
    switch (kind) {
      case NormalKind::random_params:
        mu = param_eng.uniform(1.0, 20.0);
        sigma = param_eng.uniform(1.0, 20.0);
        break;
      case NormalKind::mean_decreasing: mu = down; break;
      case NormalKind::mean_increasing: mu = up; break;
      case NormalKind::var_decreasing: sigma = down; break;
      case NormalKind::var_increasing: sigma = up; break;
    }
    rng::Engine eng(rng::derive(seed, 0x220d, static_cast<std::uint64_t>(k), 2));
    std::vector<double> round(static_cast<std::size_t>(rows));
    for (auto& v : round) v = eng.normal(mu, sigma);
    data.push_back(std::move(round));
  }
  return finish_population(std::move(data), categories);
}

// --- IDX -------------------------------------------------------------------

namespace {

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

std::vector<std::uint8_t> read_all(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IdxError("cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return bytes;
}

std::uint32_t read_be32(const std::vector<std::uint8_t>& b, std::size_t off,
                        const std::string& path) {
  if (off + 4 > b.size()) throw IdxTruncated(path + ": truncated header");
  return (static_cast<std::uint32_t>(b[off]) << 24) |
         (static_cast<std::uint32_t>(b[off + 1]) << 16) |
         (static_cast<std::uint32_t>(b[off + 2]) << 8) |
         static_cast<std::uint32_t>(b[off + 3]);
}

void write_be32(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>((v >> 24) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>(v & 0xff));
}

}  // namespace

IdxImageSet load_idx(const std::string& images_path,
                     const std::string& labels_path) {
  const auto img = read_all(images_path);
  if (read_be32(img, 0, images_path) != kImageMagic)
    throw IdxBadMagic(images_path + ": bad image magic");
  const long count = static_cast<long>(read_be32(img, 4, images_path));
  const int rows = static_cast<int>(read_be32(img, 8, images_path));
  const int cols = static_cast<int>(read_be32(img, 12, images_path));
  const std::size_t pixel_bytes =
      static_cast<std::size_t>(count) * rows * cols;
  if (img.size() < 16 + pixel_bytes)
    throw IdxTruncated(images_path + ": truncated pixel data");

  const auto lab = read_all(labels_path);
  if (read_be32(lab, 0, labels_path) != kLabelMagic)
    throw IdxBadMagic(labels_path + ": bad label magic");
  const long label_count = static_cast<long>(read_be32(lab, 4, labels_path));
  if (label_count != count)
    throw IdxCountMismatch(labels_path + ": label count " +
                           std::to_string(label_count) + " != image count " +
                           std::to_string(count));
  if (lab.size() < 8 + static_cast<std::size_t>(label_count))
    throw IdxTruncated(labels_path + ": truncated label data");

  IdxImageSet set;
  set.count = count;
  set.rows = rows;
  set.cols = cols;
  set.images.assign(img.begin() + 16, img.begin() + 16 + static_cast<long>(pixel_bytes));
  set.labels.assign(lab.begin() + 8, lab.begin() + 8 + label_count);
  return set;
}

void save_idx(const IdxImageSet& set, const std::string& images_path,
              const std::string& labels_path) {
  std::string img;
  write_be32(img, kImageMagic);
  write_be32(img, static_cast<std::uint32_t>(set.count));
  write_be32(img, static_cast<std::uint32_t>(set.rows));
  write_be32(img, static_cast<std::uint32_t>(set.cols));
  img.append(set.images.begin(), set.images.end());
  io::write_file_atomic(images_path, img);

  std::string lab;
  write_be32(lab, kLabelMagic);
  write_be32(lab, static_cast<std::uint32_t>(set.count));
  lab.append(set.labels.begin(), set.labels.end());
  io::write_file_atomic(labels_path, lab);
}

LabeledDataset to_dataset(const IdxImageSet& set, long limit) {
  const long n = limit < 0 ? set.count : std::min(limit, set.count);
  const long d = static_cast<long>(set.rows) * set.cols;
  Eigen::MatrixXd features(n, d);
  std::vector<int> labels(static_cast<std::size_t>(n));
  for (long i = 0; i < n; ++i) {
    for (long k = 0; k < d; ++k)
      features(i, k) =
          static_cast<double>(set.images[static_cast<std::size_t>(i * d + k)]) / 255.0;
    labels[static_cast<std::size_t>(i)] = set.labels[static_cast<std::size_t>(i)];
  }
  return LabeledDataset::from(std::move(features), std::move(labels));
}

// --- synthetic digit-like images --------------------------------------------

namespace {

// Seven-segment layout on a 28x28 canvas.
// Segment order: top, top-right, bottom-right, bottom, bottom-left, top-left,
// middle.
constexpr std::array<std::array<bool, 7>, 10> kSegments = {{
    {true, true, true, true, true, true, false},    // 0
    {false, true, true, false, false, false, false},// 1
    {true, true, false, true, true, false, true},   // 2
    {true, true, true, true, false, false, true},   // 3
    {false, true, true, false, false, true, true},  // 4
    {true, false, true, true, false, true, true},   // 5
    {true, false, true, true, true, true, true},    // 6
    {true, true, true, false, false, false, false}, // 7
    {true, true, true, true, true, true, true},     // 8
    {true, true, true, true, false, true, true},    // 9
}};

void fill_rect(std::array<double, 28 * 28>& img, int r0, int r1, int c0, int c1) {
  for (int r = r0; r <= r1; ++r)
    for (int c = c0; c <= c1; ++c)
      img[static_cast<std::size_t>(r) * 28 + c] = 1.0;
}

std::array<double, 28 * 28> render_digit(int digit) {
  std::array<double, 28 * 28> img{};
  const auto& seg = kSegments[static_cast<std::size_t>(digit)];
  if (seg[0]) fill_rect(img, 3, 5, 8, 19);     // top
  if (seg[1]) fill_rect(img, 4, 13, 18, 20);    // top-right
  if (seg[2]) fill_rect(img, 14, 23, 18, 20);   // bottom-right
  if (seg[3]) fill_rect(img, 22, 24, 8, 19);    // bottom
  if (seg[4]) fill_rect(img, 14, 23, 7, 9);     // bottom-left
  if (seg[5]) fill_rect(img, 4, 13, 7, 9);      // top-left
  if (seg[6]) fill_rect(img, 12, 15, 8, 19);    // middle
  return img;
}

}  // namespace

IdxImageSet make_synthetic_digits(long count, std::uint64_t seed) {
  if (count <= 0) throw std::invalid_argument("make_synthetic_digits: count <= 0");
  std::array<std::array<double, 28 * 28>, 10> templates;
  for (int d = 0; d < 10; ++d) templates[static_cast<std::size_t>(d)] = render_digit(d);

  IdxImageSet set;
  set.count = count;
  set.rows = 28;
  set.cols = 28;
  set.images.resize(static_cast<std::size_t>(count) * 28 * 28);
  set.labels.resize(static_cast<std::size_t>(count));

  for (long i = 0; i < count; ++i) {
    rng::Engine eng(rng::derive(seed, 0xd161, static_cast<std::uint64_t>(i)));
    const int digit = static_cast<int>(eng.next_below(10));
    set.labels[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(digit);
    const int dx = static_cast<int>(eng.next_below(5)) - 2;
    const int dy = static_cast<int>(eng.next_below(5)) - 2;
    const double intensity = 0.6 + 0.4 * eng.next_double();
    const auto& tpl = templates[static_cast<std::size_t>(digit)];
    for (int r = 0; r < 28; ++r) {
      for (int c = 0; c < 28; ++c) {
        const int sr = r - dy, sc = c - dx;
        double v = 0.0;
        if (sr >= 0 && sr < 28 && sc >= 0 && sc < 28)
          v = tpl[static_cast<std::size_t>(sr) * 28 + sc] * intensity;
        v += 0.25 * eng.next_double();  // background noise
        v = std::clamp(v, 0.0, 1.0);
        set.images[static_cast<std::size_t>(i) * 784 +
                   static_cast<std::size_t>(r) * 28 + c] =
            static_cast<std::uint8_t>(std::lround(v * 255.0));
      }
    }
  }
  return set;
}

// --- draws -------------------------------------------------------------------

std::vector<std::vector<long>> draw_stratified(const std::vector<long>& category_sizes,
                                               long per_category_count,
                                               rng::Engine& eng) {
  std::vector<std::vector<long>> out;
  out.reserve(category_sizes.size());
  for (long size : category_sizes) {
    if (per_category_count > size)
      throw std::invalid_argument("draw_stratified: count exceeds category size");
    out.push_back(rng::sample_without_replacement(size, per_category_count, eng));
  }
  return out;
}

std::vector<std::vector<long>> draw_stratified(const LabeledDataset& data,
                                               long per_category_count,
                                               rng::Engine& eng) {
  std::vector<long> sizes;
  sizes.reserve(data.category_indices.size());
  for (const auto& c : data.category_indices)
    sizes.push_back(static_cast<long>(c.size()));
  auto local = draw_stratified(sizes, per_category_count, eng);
  // map the per-category offsets back to dataset indices
  for (std::size_t j = 0; j < local.size(); ++j)
    for (auto& idx : local[j]) idx = data.category_indices[j][static_cast<std::size_t>(idx)];
  return local;
}

std::vector<long> draw_uniform(long population_size, long n, rng::Engine& eng) {
  if (n > population_size)
    throw std::invalid_argument("draw_uniform: n exceeds population size");
  return rng::sample_without_replacement(population_size, n, eng);
}

}  // namespace mstgd
