#pragma once

#include <Eigen/Core>
#include <memory>
#include <optional>
#include <string>
#include <vector>

// Differentiable finite-sum objectives with exact per-sample gradients.

namespace mstgd {

struct LabeledDataset {
  Eigen::MatrixXd features;                        // N x d
  std::vector<int> labels;                         // 0..C-1
  std::vector<std::vector<long>> category_indices; // partition of 0..N-1

  long size() const { return features.rows(); }
  int categories() const { return static_cast<int>(category_indices.size()); }

  // Builds category index lists and validates that every category up to
  // max(labels) is nonempty.
  static LabeledDataset from(Eigen::MatrixXd features, std::vector<int> labels);
};

struct ModelConstants {
  double lipschitz = 0.0;       // L
  double strong_convexity = 0.0;  // c
  double optimal_value = 0.0;   // J*
  Eigen::VectorXd minimizer;    // W*
};

class DifferentiableModel {
 public:
  virtual ~DifferentiableModel() = default;

  virtual int dim() const = 0;           // parameter count
  virtual long sample_count() const = 0; // N

  virtual double sample_loss(const Eigen::VectorXd& w, long i) const = 0;
  virtual Eigen::VectorXd sample_gradient(const Eigen::VectorXd& w, long i) const = 0;

  virtual double loss(const Eigen::VectorXd& w) const;
  virtual Eigen::VectorXd full_gradient(const Eigen::VectorXd& w) const;

  // Analytic constants when the model knows them.
  virtual const ModelConstants* constants() const { return nullptr; }

  // Fraction of correctly classified samples; nullopt for non-classifiers.
  virtual std::optional<double> accuracy(const Eigen::VectorXd&) const {
    return std::nullopt;
  }
};

struct Evaluation {
  double loss = 0.0;
  Eigen::VectorXd gradient;
};

// Mean loss and gradient over an index set. Throws on an empty set.
Evaluation evaluate(const DifferentiableModel& model, const Eigen::VectorXd& w,
                    const std::vector<long>& index_set);

// Least squares with optional ridge term:
//   J_i = 1/2 (a_i^T w - y_i)^2 + lambda/2 ||w||^2.
// Carries L, c, J*, W* from the mean Hessian and the normal equations.
class QuadraticModel final : public DifferentiableModel {
 public:
  QuadraticModel(Eigen::MatrixXd rows, Eigen::VectorXd targets, double weight_decay);

  int dim() const override { return static_cast<int>(rows_.cols()); }
  long sample_count() const override { return rows_.rows(); }
  double sample_loss(const Eigen::VectorXd& w, long i) const override;
  Eigen::VectorXd sample_gradient(const Eigen::VectorXd& w, long i) const override;
  double loss(const Eigen::VectorXd& w) const override;
  Eigen::VectorXd full_gradient(const Eigen::VectorXd& w) const override;
  const ModelConstants* constants() const override { return &constants_; }

 private:
  Eigen::MatrixXd rows_;
  Eigen::VectorXd targets_;
  double weight_decay_;
  Eigen::MatrixXd hessian_;  // A^T A / N + lambda I
  Eigen::VectorXd rhs_;      // A^T y / N
  ModelConstants constants_;
};

QuadraticModel make_quadratic(const Eigen::MatrixXd& rows,
                              const Eigen::VectorXd& targets,
                              double weight_decay = 0.0);

enum class Activation { sigmoid, tanh_act, relu };

Activation activation_from_string(const std::string& name);

// Dense feedforward classifier, softmax cross-entropy plus lambda/2 ||W||^2,
// gradients by backpropagation. No analytic constants.
class MlpModel final : public DifferentiableModel {
 public:
  MlpModel(std::vector<int> layer_sizes, Activation activation,
           double weight_decay, std::shared_ptr<const LabeledDataset> data);

  int dim() const override { return dim_; }
  long sample_count() const override { return data_->size(); }
  double sample_loss(const Eigen::VectorXd& w, long i) const override;
  Eigen::VectorXd sample_gradient(const Eigen::VectorXd& w, long i) const override;
  std::optional<double> accuracy(const Eigen::VectorXd& w) const override;

  // Accuracy on a foreign dataset with matching feature width (test split).
  double accuracy_on(const Eigen::VectorXd& w, const LabeledDataset& data) const;

  // Seeded uniform init in [-r, r], r = sqrt(6/(fan_in+fan_out)) per layer.
  Eigen::VectorXd init_weights(std::uint64_t seed) const;

  const std::vector<int>& layer_sizes() const { return sizes_; }
  const LabeledDataset& data() const { return *data_; }

  // Logits for one feature vector.
  Eigen::VectorXd logits(const Eigen::VectorXd& w, const Eigen::VectorXd& x) const;

  // Packed index of the connection weight from input unit `from` of the last
  // layer to output unit `to` (the coordinate tracked in the gradient-matrix
  // experiment).
  long output_weight_index(int to, int from) const;

 private:
  struct LayerView {
    long w_offset, b_offset;
    int in, out;
  };
  double forward(const Eigen::VectorXd& w, long i,
                 std::vector<Eigen::VectorXd>* activations) const;

  std::vector<int> sizes_;
  Activation act_;
  double weight_decay_;
  std::shared_ptr<const LabeledDataset> data_;
  std::vector<LayerView> layers_;
  int dim_ = 0;
};

MlpModel make_mlp(const std::vector<int>& layer_sizes, Activation activation,
                  double weight_decay, std::shared_ptr<const LabeledDataset> data);

}  // namespace mstgd
