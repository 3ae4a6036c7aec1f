#include "mstgd/models.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

#include "mstgd/rng.hpp"

namespace mstgd {

LabeledDataset LabeledDataset::from(Eigen::MatrixXd features,
                                    std::vector<int> labels) {
  if (features.rows() != static_cast<Eigen::Index>(labels.size()))
    throw std::invalid_argument("LabeledDataset: feature/label count mismatch");
  if (labels.empty()) throw std::invalid_argument("LabeledDataset: empty");
  int max_label = 0;
  for (int l : labels) {
    if (l < 0) throw std::invalid_argument("LabeledDataset: negative label");
    max_label = std::max(max_label, l);
  }
  LabeledDataset d;
  d.features = std::move(features);
  d.labels = std::move(labels);
  d.category_indices.assign(static_cast<std::size_t>(max_label) + 1, {});
  for (long i = 0; i < static_cast<long>(d.labels.size()); ++i)
    d.category_indices[static_cast<std::size_t>(d.labels[static_cast<std::size_t>(i)])]
        .push_back(i);
  for (const auto& cat : d.category_indices)
    if (cat.empty())
      throw std::invalid_argument("LabeledDataset: empty category");
  return d;
}

double DifferentiableModel::loss(const Eigen::VectorXd& w) const {
  double sum = 0.0;
  const long n = sample_count();
  for (long i = 0; i < n; ++i) sum += sample_loss(w, i);
  return sum / static_cast<double>(n);
}

Eigen::VectorXd DifferentiableModel::full_gradient(const Eigen::VectorXd& w) const {
  Eigen::VectorXd g = Eigen::VectorXd::Zero(dim());
  const long n = sample_count();
  for (long i = 0; i < n; ++i) g += sample_gradient(w, i);
  return g / static_cast<double>(n);
}

Evaluation evaluate(const DifferentiableModel& model, const Eigen::VectorXd& w,
                    const std::vector<long>& index_set) {
  if (index_set.empty())
    throw std::invalid_argument("evaluate: empty index set");
  Evaluation out;
  out.gradient = Eigen::VectorXd::Zero(model.dim());
  for (long i : index_set) {
    if (i < 0 || i >= model.sample_count())
      throw std::out_of_range("evaluate: index out of range");
    out.loss += model.sample_loss(w, i);
    out.gradient += model.sample_gradient(w, i);
  }
  const double n = static_cast<double>(index_set.size());
  out.loss /= n;
  out.gradient /= n;
  return out;
}

QuadraticModel::QuadraticModel(Eigen::MatrixXd rows, Eigen::VectorXd targets,
                               double weight_decay)
    : rows_(std::move(rows)), targets_(std::move(targets)),
      weight_decay_(weight_decay) {
  if (rows_.rows() == 0) throw std::invalid_argument("QuadraticModel: no samples");
  if (rows_.rows() != targets_.size())
    throw std::invalid_argument("QuadraticModel: row/target count mismatch");
  const double n = static_cast<double>(rows_.rows());
  const long d = rows_.cols();
  hessian_ = rows_.transpose() * rows_ / n +
             weight_decay_ * Eigen::MatrixXd::Identity(d, d);
  rhs_ = rows_.transpose() * targets_ / n;

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(hessian_);
  const double lambda_min = eig.eigenvalues().minCoeff();
  const double lambda_max = eig.eigenvalues().maxCoeff();
  if (lambda_min < 1e-12)
    throw std::invalid_argument(
        "QuadraticModel: singular normal equations; add weight decay");
  constants_.lipschitz = lambda_max;
  constants_.strong_convexity = lambda_min;
  constants_.minimizer = hessian_.ldlt().solve(rhs_);
  constants_.optimal_value = loss(constants_.minimizer);
}

double QuadraticModel::sample_loss(const Eigen::VectorXd& w, long i) const {
  const double r = rows_.row(i).dot(w) - targets_[i];
  return 0.5 * r * r + 0.5 * weight_decay_ * w.squaredNorm();
}

Eigen::VectorXd QuadraticModel::sample_gradient(const Eigen::VectorXd& w,
                                                long i) const {
  const double r = rows_.row(i).dot(w) - targets_[i];
  return rows_.row(i).transpose() * r + weight_decay_ * w;
}

double QuadraticModel::loss(const Eigen::VectorXd& w) const {
  const Eigen::VectorXd r = rows_ * w - targets_;
  return 0.5 * r.squaredNorm() / static_cast<double>(rows_.rows()) +
         0.5 * weight_decay_ * w.squaredNorm();
}

Eigen::VectorXd QuadraticModel::full_gradient(const Eigen::VectorXd& w) const {
  return hessian_ * w - rhs_;
}

QuadraticModel make_quadratic(const Eigen::MatrixXd& rows,
                              const Eigen::VectorXd& targets,
                              double weight_decay) {
  return QuadraticModel(rows, targets, weight_decay);
}

Activation activation_from_string(const std::string& name) {
  if (name == "sigmoid") return Activation::sigmoid;
  if (name == "tanh") return Activation::tanh_act;
  if (name == "relu") return Activation::relu;
  throw std::invalid_argument("unknown activation: " + name);
}

namespace {

double act_value(Activation a, double x) {
  switch (a) {
    case Activation::sigmoid: return 1.0 / (1.0 + std::exp(-x));
    case Activation::tanh_act: return std::tanh(x);
    case Activation::relu: return x > 0.0 ? x : 0.0;
  }
  return 0.0;
}

// Derivative expressed through the activation output.
double act_deriv_from_value(Activation a, double y) {
  switch (a) {
    case Activation::sigmoid: return y * (1.0 - y);
    case Activation::tanh_act: return 1.0 - y * y;
    case Activation::relu: return y > 0.0 ? 1.0 : 0.0;
  }
  return 0.0;
}

Eigen::VectorXd softmax(const Eigen::VectorXd& z) {
  const double m = z.maxCoeff();
  Eigen::VectorXd e = (z.array() - m).exp();
  return e / e.sum();
}

}  // namespace

MlpModel::MlpModel(std::vector<int> layer_sizes, Activation activation,
                   double weight_decay,
                   std::shared_ptr<const LabeledDataset> data)
    : sizes_(std::move(layer_sizes)), act_(activation),
      weight_decay_(weight_decay), data_(std::move(data)) {
  if (sizes_.size() < 2)
    throw std::invalid_argument("MlpModel: need at least input and output layers");
  if (!data_ || data_->size() == 0)
    throw std::invalid_argument("MlpModel: empty dataset");
  if (data_->features.cols() != sizes_.front())
    throw std::invalid_argument("MlpModel: feature width != input layer size");
  if (data_->categories() > sizes_.back())
    throw std::invalid_argument("MlpModel: more labels than output units");
  long offset = 0;
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    LayerView v;
    v.in = sizes_[l];
    v.out = sizes_[l + 1];
    v.w_offset = offset;
    offset += static_cast<long>(v.in) * v.out;
    v.b_offset = offset;
    offset += v.out;
    layers_.push_back(v);
  }
  dim_ = static_cast<int>(offset);
}

Eigen::VectorXd MlpModel::init_weights(std::uint64_t seed) const {
  rng::Engine eng(rng::derive(seed, 0xa11c));
  Eigen::VectorXd w(dim_);
  for (const auto& v : layers_) {
    const double r = std::sqrt(6.0 / (v.in + v.out));
    for (long k = 0; k < static_cast<long>(v.in) * v.out; ++k)
      w[v.w_offset + k] = eng.uniform(-r, r);
    for (int k = 0; k < v.out; ++k) w[v.b_offset + k] = 0.0;
  }
  return w;
}

double MlpModel::forward(const Eigen::VectorXd& w, long i,
                         std::vector<Eigen::VectorXd>* activations) const {
  Eigen::VectorXd a = data_->features.row(i).transpose();
  if (activations) activations->push_back(a);
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& v = layers_[l];
    Eigen::Map<const Eigen::MatrixXd> W(w.data() + v.w_offset, v.out, v.in);
    Eigen::Map<const Eigen::VectorXd> b(w.data() + v.b_offset, v.out);
    Eigen::VectorXd z = W * a + b;
    if (l + 1 < layers_.size()) {
      for (int k = 0; k < v.out; ++k) z[k] = act_value(act_, z[k]);
    }
    a = std::move(z);
    if (activations) activations->push_back(a);
  }
  // a now holds the output logits
  const Eigen::VectorXd probs = softmax(a);
  const int label = data_->labels[static_cast<std::size_t>(i)];
  return -std::log(std::max(probs[label], 1e-300));
}

double MlpModel::sample_loss(const Eigen::VectorXd& w, long i) const {
  return forward(w, i, nullptr) + 0.5 * weight_decay_ * w.squaredNorm();
}

Eigen::VectorXd MlpModel::sample_gradient(const Eigen::VectorXd& w, long i) const {
  std::vector<Eigen::VectorXd> acts;
  acts.reserve(layers_.size() + 1);
  forward(w, i, &acts);

  Eigen::VectorXd grad = weight_decay_ * w;
  const int label = data_->labels[static_cast<std::size_t>(i)];
  Eigen::VectorXd delta = softmax(acts.back());
  delta[label] -= 1.0;

  for (std::size_t l = layers_.size(); l-- > 0;) {
    const auto& v = layers_[l];
    const Eigen::VectorXd& input = acts[l];
    Eigen::Map<Eigen::MatrixXd> gw(grad.data() + v.w_offset, v.out, v.in);
    gw.noalias() += delta * input.transpose();
    Eigen::Map<Eigen::VectorXd> gb(grad.data() + v.b_offset, v.out);
    gb += delta;
    if (l > 0) {
      Eigen::Map<const Eigen::MatrixXd> W(w.data() + v.w_offset, v.out, v.in);
      Eigen::VectorXd back = W.transpose() * delta;
      for (int k = 0; k < v.in; ++k)
        back[k] *= act_deriv_from_value(act_, input[k]);
      delta = std::move(back);
    }
  }
  return grad;
}

Eigen::VectorXd MlpModel::logits(const Eigen::VectorXd& w,
                                 const Eigen::VectorXd& x) const {
  Eigen::VectorXd a = x;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& v = layers_[l];
    Eigen::Map<const Eigen::MatrixXd> W(w.data() + v.w_offset, v.out, v.in);
    Eigen::Map<const Eigen::VectorXd> b(w.data() + v.b_offset, v.out);
    Eigen::VectorXd z = W * a + b;
    if (l + 1 < layers_.size())
      for (int k = 0; k < v.out; ++k) z[k] = act_value(act_, z[k]);
    a = std::move(z);
  }
  return a;
}

std::optional<double> MlpModel::accuracy(const Eigen::VectorXd& w) const {
  return accuracy_on(w, *data_);
}

double MlpModel::accuracy_on(const Eigen::VectorXd& w,
                             const LabeledDataset& data) const {
  long hits = 0;
  for (long i = 0; i < data.size(); ++i) {
    const Eigen::VectorXd z = logits(w, data.features.row(i).transpose());
    Eigen::Index best;
    z.maxCoeff(&best);
    if (static_cast<int>(best) == data.labels[static_cast<std::size_t>(i)]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(data.size());
}

long MlpModel::output_weight_index(int to, int from) const {
  const auto& v = layers_.back();
  if (to < 0 || to >= v.out || from < 0 || from >= v.in)
    throw std::out_of_range("output_weight_index: unit out of range");
  // column-major (out x in) map: element (to, from) sits at from*out + to
  return v.w_offset + static_cast<long>(from) * v.out + to;
}

MlpModel make_mlp(const std::vector<int>& layer_sizes, Activation activation,
                  double weight_decay,
                  std::shared_ptr<const LabeledDataset> data) {
  return MlpModel(layer_sizes, activation, weight_decay, std::move(data));
}

}  // namespace mstgd
