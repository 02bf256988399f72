#include "rllc/tasks.hpp"

#include "rllc/rng.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

namespace rllc {

int Dataset::class_count() const {
  int c = 0;
  for (int label : labels) c = std::max(c, label + 1);
  return c;
}

std::pair<int, int> Dataset::split_range(Split split) const {
  switch (split) {
    case Split::train: return {0, train_count};
    case Split::val: return {train_count, train_count + val_count};
    case Split::test: return {train_count + val_count, train_count + val_count + test_count};
  }
  return {0, 0};
}

namespace {

std::pair<int, int> checked_range(const Dataset& data, Split split, const char* who) {
  auto [begin, end] = data.split_range(split);
  if (end <= begin) {
    throw std::invalid_argument(std::string(who) + ": requested split is empty");
  }
  return {begin, end};
}

// Deterministic minibatch: partial Fisher-Yates over the split indices.
std::vector<int> batch_indices(int begin, int end, int batch, std::uint64_t batch_seed) {
  const int count = end - begin;
  std::vector<int> idx(count);
  std::iota(idx.begin(), idx.end(), begin);
  if (batch <= 0 || batch >= count) {
    return idx;
  }
  Rng rng(batch_seed);
  for (int i = 0; i < batch; ++i) {
    const int j = i + static_cast<int>(rng.below(static_cast<std::uint64_t>(count - i)));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(batch);
  return idx;
}

class QuadraticTask final : public Task {
 public:
  QuadraticTask(int n, double condition, std::uint64_t seed) : n_(n) {
    if (n < 1) throw std::invalid_argument("quadratic_task: n must be at least 1");
    if (condition < 1.0) throw std::invalid_argument("quadratic_task: condition must be >= 1");
    Rng rng(mix_seed(seed, 0x51ad));
    Mat gauss(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) gauss(i, j) = rng.normal();
    Mat q = Eigen::HouseholderQR<Mat>(gauss).householderQ();
    Vec eigs(n);
    for (int i = 0; i < n; ++i) {
      const double t = n == 1 ? 0.0 : static_cast<double>(i) / (n - 1);
      eigs[i] = std::pow(condition, t);
    }
    Mat raw = q * eigs.asDiagonal() * q.transpose();
    a_ = 0.5 * (raw + raw.transpose());  // exact symmetry
    char cond[32];
    std::snprintf(cond, sizeof(cond), "%g", condition);
    name_ = "quadratic(n=" + std::to_string(n) + ",cond=" + cond + ")";
  }

  int param_dim() const override { return n_; }

  Vec initial_params(std::uint64_t seed) const override {
    Rng rng(mix_seed(seed, 0x7e7a));
    Vec theta(n_);
    for (int i = 0; i < n_; ++i) theta[i] = rng.normal();
    return theta;
  }

  Vec gradient(const Eigen::Ref<const Vec>& params, std::uint64_t) const override {
    check_dim(params);
    return a_ * params;
  }

  double loss(const Eigen::Ref<const Vec>& params, Split split) const override {
    require_train(split, "quadratic_task");
    check_dim(params);
    return 0.5 * params.dot(a_ * params);
  }

  std::string name() const override { return name_; }

 private:
  void check_dim(const Eigen::Ref<const Vec>& params) const {
    if (params.size() != n_) throw DimensionError("quadratic_task: parameter dimension mismatch");
  }
  static void require_train(Split split, const char* who) {
    if (split != Split::train) {
      throw std::invalid_argument(std::string(who) + ": only the train split exists");
    }
  }

  int n_;
  Mat a_;
  std::string name_;
};

class RosenbrockTask final : public Task {
 public:
  explicit RosenbrockTask(int n) : n_(n) {
    if (n < 2 || n % 2 != 0) throw std::invalid_argument("rosenbrock_task: n must be even");
  }

  int param_dim() const override { return n_; }

  Vec initial_params(std::uint64_t seed) const override {
    // Classic start plus a small seeded jitter so distinct seeds explore
    // distinct trajectories.
    Rng rng(mix_seed(seed, 0x05e7));
    Vec theta(n_);
    for (int i = 0; i < n_; i += 2) {
      theta[i] = -1.2 + 0.1 * rng.normal();
      theta[i + 1] = 1.0 + 0.1 * rng.normal();
    }
    return theta;
  }

  Vec gradient(const Eigen::Ref<const Vec>& params, std::uint64_t) const override {
    check_dim(params);
    Vec grad(n_);
    for (int i = 0; i < n_; i += 2) {
      const double x = params[i];
      const double y = params[i + 1];
      grad[i] = -400.0 * x * (y - x * x) - 2.0 * (1.0 - x);
      grad[i + 1] = 200.0 * (y - x * x);
    }
    return grad;
  }

  double loss(const Eigen::Ref<const Vec>& params, Split split) const override {
    if (split != Split::train) {
      throw std::invalid_argument("rosenbrock_task: only the train split exists");
    }
    check_dim(params);
    double total = 0.0;
    for (int i = 0; i < n_; i += 2) {
      const double x = params[i];
      const double y = params[i + 1];
      total += 100.0 * (y - x * x) * (y - x * x) + (1.0 - x) * (1.0 - x);
    }
    return total;
  }

  std::string name() const override { return "rosenbrock(n=" + std::to_string(n_) + ")"; }

 private:
  void check_dim(const Eigen::Ref<const Vec>& params) const {
    if (params.size() != n_) throw DimensionError("rosenbrock_task: parameter dimension mismatch");
  }

  int n_;
};

// Softmax cross-entropy over logits (rows = samples); returns mean loss and
// optionally writes softmax probabilities.
double softmax_cross_entropy(const Mat& logits, const std::vector<int>& labels,
                             const std::vector<int>& rows, Mat* probs_out) {
  double total = 0.0;
  if (probs_out) probs_out->resize(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const double m = logits.row(r).maxCoeff();
    Eigen::RowVectorXd e = (logits.row(r).array() - m).exp();
    const double z = e.sum();
    total -= std::log(e[labels[rows[r]]] / z);
    if (probs_out) probs_out->row(r) = e / z;
  }
  return total / static_cast<double>(logits.rows());
}

class LogisticTask final : public Task {
 public:
  LogisticTask(std::shared_ptr<const Dataset> data, double l2, int batch)
      : data_(std::move(data)), l2_(l2), batch_(batch) {
    if (!data_ || data_->sample_count() == 0) {
      throw std::invalid_argument("logistic_task: empty dataset");
    }
    if (l2 < 0.0) throw std::invalid_argument("logistic_task: l2 must be nonnegative");
    classes_ = data_->class_count();
    dims_ = data_->feature_dim();
  }

  int param_dim() const override { return classes_ * dims_ + classes_; }

  Vec initial_params(std::uint64_t) const override { return Vec::Zero(param_dim()); }

  Vec gradient(const Eigen::Ref<const Vec>& params, std::uint64_t batch_seed) const override {
    auto [begin, end] = checked_range(*data_, Split::train, "logistic_task");
    const std::vector<int> rows = batch_indices(begin, end, batch_, batch_seed);
    return gradient_on(params, rows);
  }

  double loss(const Eigen::Ref<const Vec>& params, Split split) const override {
    auto [begin, end] = checked_range(*data_, split, "logistic_task");
    std::vector<int> rows(end - begin);
    std::iota(rows.begin(), rows.end(), begin);
    const auto w = weights(params);
    Mat logits = gather(rows) * w;
    logits.rowwise() += bias(params).transpose();
    double value = softmax_cross_entropy(logits, data_->labels, rows, nullptr);
    value += 0.5 * l2_ * w.squaredNorm();
    return value;
  }

  std::optional<double> metric(const Eigen::Ref<const Vec>& params, Split split) const override {
    return accuracy(*data_, params, split);
  }

  bool has_split(Split split) const override {
    auto [begin, end] = data_->split_range(split);
    return end > begin;
  }

  std::string name() const override {
    return "logistic(classes=" + std::to_string(classes_) + ",dims=" + std::to_string(dims_) + ")";
  }

  std::optional<double> accuracy(const Dataset& data, const Eigen::Ref<const Vec>& params,
                                 Split split) const {
    auto [begin, end] = data.split_range(split);
    if (end <= begin) return std::nullopt;
    const auto w = weights(params);
    int hits = 0;
    for (int r = begin; r < end; ++r) {
      Eigen::RowVectorXd logits = data.features.row(r) * w + bias(params).transpose();
      Eigen::Index best;
      logits.maxCoeff(&best);
      hits += (static_cast<int>(best) == data.labels[r]);
    }
    return static_cast<double>(hits) / static_cast<double>(end - begin);
  }

 private:
  Eigen::Map<const Mat> weights(const Eigen::Ref<const Vec>& params) const {
    if (params.size() != param_dim()) {
      throw DimensionError("logistic_task: parameter dimension mismatch");
    }
    return Eigen::Map<const Mat>(params.data(), dims_, classes_);
  }
  Eigen::Map<const Vec> bias(const Eigen::Ref<const Vec>& params) const {
    return Eigen::Map<const Vec>(params.data() + dims_ * classes_, classes_);
  }
  Mat gather(const std::vector<int>& rows) const {
    Mat x(rows.size(), dims_);
    for (std::size_t i = 0; i < rows.size(); ++i) x.row(i) = data_->features.row(rows[i]);
    return x;
  }

  Vec gradient_on(const Eigen::Ref<const Vec>& params, const std::vector<int>& rows) const {
    const auto w = weights(params);
    Mat x = gather(rows);
    Mat logits = x * w;
    logits.rowwise() += bias(params).transpose();
    Mat probs;
    softmax_cross_entropy(logits, data_->labels, rows, &probs);
    for (std::size_t i = 0; i < rows.size(); ++i) probs(i, data_->labels[rows[i]]) -= 1.0;
    probs /= static_cast<double>(rows.size());
    Vec grad(param_dim());
    Eigen::Map<Mat>(grad.data(), dims_, classes_) = x.transpose() * probs + l2_ * w;
    Eigen::Map<Vec>(grad.data() + dims_ * classes_, classes_) = probs.colwise().sum();
    return grad;
  }

  std::shared_ptr<const Dataset> data_;
  double l2_;
  int batch_;
  int classes_ = 0;
  int dims_ = 0;
};

class MlpTask final : public Task {
 public:
  MlpTask(std::shared_ptr<const Dataset> data, std::vector<int> hidden, int batch,
          std::uint64_t seed)
      : data_(std::move(data)), batch_(batch), seed_(seed) {
    if (!data_ || data_->sample_count() == 0) throw std::invalid_argument("mlp_task: empty dataset");
    for (int w : hidden) {
      if (w < 1) throw std::invalid_argument("mlp_task: hidden widths must be positive");
    }
    widths_.push_back(data_->feature_dim());
    for (int w : hidden) widths_.push_back(w);
    widths_.push_back(data_->class_count());
    dim_ = 0;
    for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
      dim_ += widths_[l] * widths_[l + 1] + widths_[l + 1];
    }
  }

  int param_dim() const override { return dim_; }

  Vec initial_params(std::uint64_t seed) const override {
    Rng rng(mix_seed(seed_ ^ 0x6d6c70, seed));
    Vec params(dim_);
    int at = 0;
    for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
      const int fan_in = widths_[l];
      const int fan_out = widths_[l + 1];
      const bool last = l + 2 == widths_.size();
      // He init for ReLU layers; a small classifier head keeps the initial
      // logits near zero (loss starts at ~ln C)
      const double scale = (last ? 0.1 : std::sqrt(2.0)) / std::sqrt(fan_in);
      for (int i = 0; i < fan_in * fan_out; ++i) params[at++] = scale * rng.normal();
      for (int i = 0; i < fan_out; ++i) params[at++] = 0.0;
    }
    return params;
  }

  Vec gradient(const Eigen::Ref<const Vec>& params, std::uint64_t batch_seed) const override {
    auto [begin, end] = checked_range(*data_, Split::train, "mlp_task");
    const std::vector<int> rows = batch_indices(begin, end, batch_, batch_seed);
    return backprop(params, rows);
  }

  double loss(const Eigen::Ref<const Vec>& params, Split split) const override {
    auto [begin, end] = checked_range(*data_, split, "mlp_task");
    std::vector<int> rows(end - begin);
    std::iota(rows.begin(), rows.end(), begin);
    Mat logits = forward(params, rows, nullptr);
    return softmax_cross_entropy(logits, data_->labels, rows, nullptr);
  }

  std::optional<double> metric(const Eigen::Ref<const Vec>& params, Split split) const override {
    auto [begin, end] = data_->split_range(split);
    if (end <= begin) return std::nullopt;
    std::vector<int> rows(end - begin);
    std::iota(rows.begin(), rows.end(), begin);
    Mat logits = forward(params, rows, nullptr);
    int hits = 0;
    for (Eigen::Index r = 0; r < logits.rows(); ++r) {
      Eigen::Index best;
      logits.row(r).maxCoeff(&best);
      hits += (static_cast<int>(best) == data_->labels[rows[r]]);
    }
    return static_cast<double>(hits) / static_cast<double>(end - begin);
  }

  bool has_split(Split split) const override {
    auto [begin, end] = data_->split_range(split);
    return end > begin;
  }

  std::string name() const override {
    std::string n = "mlp(";
    for (std::size_t l = 0; l < widths_.size(); ++l) {
      if (l) n += "-";
      n += std::to_string(widths_[l]);
    }
    return n + ")";
  }

 private:
  struct LayerView {
    Eigen::Map<const Mat> w;
    Eigen::Map<const Vec> b;
  };

  LayerView layer(const Eigen::Ref<const Vec>& params, std::size_t l) const {
    int at = 0;
    for (std::size_t i = 0; i < l; ++i) {
      at += widths_[i] * widths_[i + 1] + widths_[i + 1];
    }
    const int fan_in = widths_[l];
    const int fan_out = widths_[l + 1];
    return {Eigen::Map<const Mat>(params.data() + at, fan_in, fan_out),
            Eigen::Map<const Vec>(params.data() + at + fan_in * fan_out, fan_out)};
  }

  // Returns logits; optionally stores post-activation values per layer
  // (activations[0] = input batch).
  Mat forward(const Eigen::Ref<const Vec>& params, const std::vector<int>& rows,
              std::vector<Mat>* activations) const {
    if (params.size() != dim_) throw DimensionError("mlp_task: parameter dimension mismatch");
    Mat h(rows.size(), widths_[0]);
    for (std::size_t i = 0; i < rows.size(); ++i) h.row(i) = data_->features.row(rows[i]);
    if (activations) activations->push_back(h);
    for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
      const auto [w, b] = layer(params, l);
      Mat z = h * w;
      z.rowwise() += b.transpose();
      if (l + 2 < widths_.size()) {
        h = z.cwiseMax(0.0);  // ReLU, subgradient 0 at 0
        if (activations) activations->push_back(h);
      } else {
        h = std::move(z);
      }
    }
    return h;
  }

  Vec backprop(const Eigen::Ref<const Vec>& params, const std::vector<int>& rows) const {
    std::vector<Mat> acts;
    Mat logits = forward(params, rows, &acts);
    Mat delta;
    softmax_cross_entropy(logits, data_->labels, rows, &delta);
    for (std::size_t i = 0; i < rows.size(); ++i) delta(i, data_->labels[rows[i]]) -= 1.0;
    delta /= static_cast<double>(rows.size());

    Vec grad = Vec::Zero(dim_);
    int tail = dim_;
    for (std::size_t l = widths_.size() - 1; l-- > 0;) {
      const int fan_in = widths_[l];
      const int fan_out = widths_[l + 1];
      tail -= fan_in * fan_out + fan_out;
      const auto [w, b] = layer(params, l);
      Eigen::Map<Mat>(grad.data() + tail, fan_in, fan_out) = acts[l].transpose() * delta;
      Eigen::Map<Vec>(grad.data() + tail + fan_in * fan_out, fan_out) = delta.colwise().sum();
      if (l > 0) {
        delta = (delta * w.transpose()).cwiseProduct(
            (acts[l].array() > 0.0).cast<double>().matrix());
      }
    }
    return grad;
  }

  std::shared_ptr<const Dataset> data_;
  int batch_;
  std::uint64_t seed_;
  std::vector<int> widths_;
  int dim_ = 0;
};

}  // namespace

TaskPtr quadratic_task(int n, double condition, std::uint64_t seed) {
  return std::make_shared<QuadraticTask>(n, condition, seed);
}

TaskPtr rosenbrock_task(int n) { return std::make_shared<RosenbrockTask>(n); }

TaskPtr logistic_task(std::shared_ptr<const Dataset> data, double l2, int batch) {
  return std::make_shared<LogisticTask>(std::move(data), l2, batch);
}

TaskPtr mlp_task(std::shared_ptr<const Dataset> data, std::vector<int> hidden, int batch,
                 std::uint64_t seed) {
  return std::make_shared<MlpTask>(std::move(data), std::move(hidden), batch, seed);
}

Dataset synthetic_classification(int n_samples, int n_features, int n_classes, double separation,
                                 std::uint64_t seed) {
  if (n_samples < 1 || n_features < 1 || n_classes < 1) {
    throw std::invalid_argument("synthetic_classification: counts must be positive");
  }
  if (separation < 0.0) {
    throw std::invalid_argument("synthetic_classification: separation must be nonnegative");
  }
  Rng rng(mix_seed(seed, 0xb10b5));
  Mat centers(n_classes, n_features);
  for (int c = 0; c < n_classes; ++c) {
    Vec dir(n_features);
    for (int j = 0; j < n_features; ++j) dir[j] = rng.normal();
    const double norm = dir.norm();
    centers.row(c) = (norm > 0 ? separation / norm : 0.0) * dir.transpose();
  }

  Dataset data;
  data.features.resize(n_samples, n_features);
  data.labels.resize(n_samples);
  // Balanced labels in seeded-shuffled order.
  std::vector<int> order(n_samples);
  std::iota(order.begin(), order.end(), 0);
  for (int i = n_samples - 1; i > 0; --i) {
    std::swap(order[i], order[rng.below(static_cast<std::uint64_t>(i + 1))]);
  }
  for (int i = 0; i < n_samples; ++i) {
    const int label = order[i] % n_classes;
    data.labels[i] = label;
    for (int j = 0; j < n_features; ++j) {
      data.features(i, j) = centers(label, j) + rng.normal();
    }
  }

  data.train_count = std::max(1, (n_samples * 8) / 10);
  data.val_count = (n_samples - data.train_count) / 2;
  data.test_count = n_samples - data.train_count - data.val_count;

  // Normalize with train-split statistics; record them.
  const auto train = data.features.topRows(data.train_count);
  data.feature_mean = train.mean();
  const double var = (train.array() - data.feature_mean).square().mean();
  data.feature_std = var > 0 ? std::sqrt(var) : 1.0;
  data.features = (data.features.array() - data.feature_mean) / data.feature_std;
  return data;
}

}  // namespace rllc
