#pragma once

#include "rllc/numerics.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace rllc {

enum class Split { train, val, test };

/// Feature matrix plus integer labels with disjoint train/val/test ranges
/// (train first, then val, then test). Features are stored normalized; the
/// applied global mean/std are recorded so the transform round-trips.
struct Dataset {
  Mat features;  ///< samples × dims
  std::vector<int> labels;
  int train_count = 0;
  int val_count = 0;
  int test_count = 0;
  double feature_mean = 0.0;
  double feature_std = 1.0;

  int sample_count() const { return static_cast<int>(features.rows()); }
  int feature_dim() const { return static_cast<int>(features.cols()); }
  int class_count() const;

  /// Index range [begin, end) of a split.
  std::pair<int, int> split_range(Split split) const;

  void save(const std::string& path) const;
  static Dataset load(const std::string& path);
};

/// A differentiable objective with an exact gradient oracle. Immutable and
/// pure: gradient(params, batch_seed) is deterministic and thread-safe.
class Task {
 public:
  virtual ~Task() = default;
  virtual int param_dim() const = 0;
  virtual Vec initial_params(std::uint64_t seed) const = 0;
  virtual Vec gradient(const Eigen::Ref<const Vec>& params, std::uint64_t batch_seed) const = 0;
  virtual double loss(const Eigen::Ref<const Vec>& params, Split split) const = 0;
  virtual std::optional<double> metric(const Eigen::Ref<const Vec>&, Split) const {
    return std::nullopt;
  }
  virtual bool has_split(Split split) const { return split == Split::train; }
  virtual std::string name() const = 0;
};

using TaskPtr = std::shared_ptr<const Task>;

/// f(θ) = ½ θᵀAθ with A symmetric positive definite, eigenvalues log-spaced
/// in [1, condition]. Deterministic gradient Aθ; optimum loss 0.
TaskPtr quadratic_task(int n, double condition, std::uint64_t seed);

/// Chained Rosenbrock over n/2 independent pairs; n must be even.
TaskPtr rosenbrock_task(int n);

/// Multinomial logistic regression (softmax cross-entropy) with optional L2
/// penalty on the weights; minibatches drawn by seeded shuffling.
TaskPtr logistic_task(std::shared_ptr<const Dataset> data, double l2, int batch);

/// Fully connected ReLU network with softmax cross-entropy and hand-written
/// backpropagation; no normalization layers. ReLU subgradient at 0 is 0.
TaskPtr mlp_task(std::shared_ptr<const Dataset> data, std::vector<int> hidden, int batch,
                 std::uint64_t seed);

struct IdxError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Loads an IDX image/label pair (big-endian, magics 0x00000803/0x00000801).
/// Pixels are scaled to [0,1] then normalized as (x - mean) / stddev.
/// All samples land in the train split.
Dataset load_idx(const std::string& images_path, const std::string& labels_path,
                 std::optional<int> limit = std::nullopt, double mean = 0.1307,
                 double stddev = 0.3081);

/// Gaussian class blobs with controlled center separation; split 80/10/10.
/// Fully determined by the seed.
Dataset synthetic_classification(int n_samples, int n_features, int n_classes, double separation,
                                 std::uint64_t seed);

}  // namespace rllc
