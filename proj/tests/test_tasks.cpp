#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "oracles.hpp"

#include "rllc/optim.hpp"
#include "rllc/tasks.hpp"

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <unistd.h>

using namespace rllc;

namespace {

namespace fs = std::filesystem;

// 20-coordinate central-difference sweep; mixed relative/absolute tolerance.
void check_gradient(const Task& task, const Vec& params, double rtol, std::uint64_t seed) {
  const Vec grad = task.gradient(params, 0);
  Rng rng(mix_seed(seed, 0x9d));
  for (int c = 0; c < 20; ++c) {
    const int i = static_cast<int>(rng.below(task.param_dim()));
    const double fd = oracles::central_difference(task, params, i, 1e-6);
    CHECK(oracles::close(grad[i], fd, rtol));
  }
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("rllc_tasks_" + std::to_string(::getpid()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string write_idx_pair(const fs::path& dir, int count, int rows, int cols,
                           const std::vector<unsigned char>& pixels,
                           const std::vector<unsigned char>& labels, bool corrupt_magic = false,
                           bool truncate = false, int label_count_override = -1) {
  auto be32 = [](std::uint32_t v) {
    return std::string{static_cast<char>(v >> 24), static_cast<char>(v >> 16),
                       static_cast<char>(v >> 8), static_cast<char>(v)};
  };
  const fs::path images = dir / "images.idx";
  const fs::path labels_path = dir / "labels.idx";
  {
    std::ofstream out(images, std::ios::binary);
    out << be32(corrupt_magic ? 0xdeadbeef : 0x00000803) << be32(count) << be32(rows) << be32(cols);
    std::string data(pixels.begin(), pixels.end());
    if (truncate) data.resize(data.size() / 2);
    out << data;
  }
  {
    std::ofstream out(labels_path, std::ios::binary);
    out << be32(0x00000801) << be32(label_count_override >= 0 ? label_count_override : count);
    out << std::string(labels.begin(), labels.end());
  }
  return images.string();
}

}  // namespace

TEST_CASE("quadratic task basics") {
  const TaskPtr task = quadratic_task(6, 10.0, 3);
  CHECK(task->param_dim() == 6);

  // optimum at the origin
  CHECK(task->loss(Vec::Zero(6), Split::train) == 0.0);
  CHECK(task->gradient(Vec::Zero(6), 0).norm() == 0.0);

  // f = theta' A theta / 2, so loss == <theta, grad>/2 exactly
  const Vec theta = task->initial_params(9);
  const Vec grad = task->gradient(theta, 0);
  CHECK(task->loss(theta, Split::train) ==
        doctest::Approx(0.5 * theta.dot(grad)).epsilon(1e-12));

  // the gradient is linear in theta
  const Vec theta2 = task->initial_params(10);
  const Vec sum_grad = task->gradient(theta + theta2, 0);
  CHECK((sum_grad - grad - task->gradient(theta2, 0)).lpNorm<Eigen::Infinity>() < 1e-10);

  check_gradient(*task, theta, 1e-6, 21);
  CHECK_THROWS_AS(task->loss(theta, Split::val), std::invalid_argument);
  CHECK_THROWS_AS(quadratic_task(0, 10.0, 1), std::invalid_argument);
  CHECK_THROWS_AS(quadratic_task(4, 0.5, 1), std::invalid_argument);
}

TEST_CASE("sgd contracts on a well-conditioned quadratic") {
  const TaskPtr task = quadratic_task(10, 10.0, 7);
  auto opt = make_sgd(0.1);
  Vec theta = task->initial_params(1);
  for (int t = 1; t <= 200; ++t) theta += opt->step(task->gradient(theta, 0));
  CHECK(task->loss(theta, Split::train) < 1e-6);
}

TEST_CASE("rosenbrock task") {
  const TaskPtr task = rosenbrock_task(2);

  // global minimum at all ones
  CHECK(task->loss(Vec::Ones(2), Split::train) == 0.0);
  CHECK(task->gradient(Vec::Ones(2), 0).norm() == 0.0);

  // hand evaluation at the origin
  const Vec zero = Vec::Zero(2);
  CHECK(task->loss(zero, Split::train) == 1.0);
  const Vec grad = task->gradient(zero, 0);
  CHECK(grad[0] == -2.0);
  CHECK(grad[1] == 0.0);

  const TaskPtr task6 = rosenbrock_task(6);
  check_gradient(*task6, task6->initial_params(4), 1e-6, 31);

  CHECK_THROWS_AS(rosenbrock_task(3), std::invalid_argument);
  CHECK_THROWS_AS(rosenbrock_task(0), std::invalid_argument);
}

TEST_CASE("synthetic classification dataset") {
  const Dataset a = synthetic_classification(500, 10, 3, 1.5, 42);
  const Dataset b = synthetic_classification(500, 10, 3, 1.5, 42);
  CHECK(a.sample_count() == 500);
  CHECK(a.feature_dim() == 10);
  CHECK(a.class_count() == 3);
  CHECK(a.train_count + a.val_count + a.test_count == 500);
  CHECK(a.train_count == 400);

  // byte-for-byte reproducible
  CHECK(std::memcmp(a.features.data(), b.features.data(), sizeof(double) * a.features.size()) ==
        0);
  CHECK(a.labels == b.labels);

  // normalization applied and recorded
  const double train_mean = a.features.topRows(a.train_count).mean();
  CHECK(std::abs(train_mean) < 1e-12);
  CHECK(a.feature_std > 0.0);

  CHECK_THROWS_AS(synthetic_classification(0, 5, 2, 1.0, 1), std::invalid_argument);
}

TEST_CASE("strong separation is linearly solvable, zero separation is not") {
  auto easy = std::make_shared<Dataset>(synthetic_classification(600, 8, 2, 10.0, 5));
  const TaskPtr task = logistic_task(easy, 0.0, 0);
  Vec theta = task->initial_params(1);
  auto opt = make_sgd(0.5);
  for (int t = 1; t <= 300; ++t) theta += opt->step(task->gradient(theta, 0));
  CHECK(*task->metric(theta, Split::train) >= 0.99);

  auto flat = std::make_shared<Dataset>(synthetic_classification(2000, 8, 4, 0.0, 6));
  const TaskPtr hopeless = logistic_task(flat, 0.0, 0);
  Vec w = hopeless->initial_params(1);
  auto opt2 = make_sgd(0.5);
  for (int t = 1; t <= 300; ++t) w += opt2->step(hopeless->gradient(w, 0));
  CHECK(*hopeless->metric(w, Split::val) <= 0.25 + 0.12);
}

TEST_CASE("logistic task closed forms") {
  // exactly balanced two-class set so the origin gradient has a closed form
  auto data = std::make_shared<Dataset>();
  const int n = 60, d = 6;
  data->features = oracles::random_matrix(n, d, 9);
  data->labels.resize(n);
  for (int r = 0; r < n; ++r) data->labels[r] = r % 2;
  data->train_count = n;
  const TaskPtr task = logistic_task(data, 0.0, 0);

  // zero weights on a two-class problem: loss = ln 2
  const Vec zero = task->initial_params(0);
  CHECK(task->loss(zero, Split::train) == doctest::Approx(std::log(2.0)).epsilon(1e-12));

  // full-batch gradient at the origin: the difference of the two weight-row
  // gradients is half the class-mean feature difference
  const Vec grad = task->gradient(zero, 0);
  Vec mean0 = Vec::Zero(d), mean1 = Vec::Zero(d);
  for (int r = 0; r < n; ++r) {
    (data->labels[r] == 0 ? mean0 : mean1) += data->features.row(r).transpose();
  }
  mean0 /= n / 2;
  mean1 /= n / 2;
  const Vec w0_grad = grad.head(d);
  const Vec w1_grad = grad.segment(d, d);
  CHECK((w0_grad - w1_grad - 0.5 * (mean1 - mean0)).lpNorm<Eigen::Infinity>() < 1e-12);

  const Vec probe_point = 0.3 * oracles::random_vector(task->param_dim(), 11);
  check_gradient(*task, probe_point, 1e-5, 41);

  CHECK_THROWS_AS(logistic_task(std::make_shared<Dataset>(), 0.0, 0), std::invalid_argument);
}

TEST_CASE("logistic minibatch is seeded and deterministic") {
  auto data = std::make_shared<Dataset>(synthetic_classification(300, 5, 3, 1.0, 13));
  const TaskPtr task = logistic_task(data, 0.0, 32);
  const Vec w = oracles::random_vector(task->param_dim(), 15) * 0.1;
  const Vec g1 = task->gradient(w, 777);
  const Vec g2 = task->gradient(w, 777);
  const Vec g3 = task->gradient(w, 778);
  CHECK((g1 - g2).lpNorm<Eigen::Infinity>() == 0.0);
  CHECK((g1 - g3).lpNorm<Eigen::Infinity>() > 0.0);
}

TEST_CASE("mlp task") {
  auto data = std::make_shared<Dataset>(synthetic_classification(300, 12, 10, 1.0, 17));
  const TaskPtr task = mlp_task(data, {16, 8}, 0, 3);

  // untrained ten-class net sits near ln 10
  const double initial = task->loss(task->initial_params(5), Split::train);
  CHECK(std::abs(initial - std::log(10.0)) < 0.2);

  check_gradient(*task, task->initial_params(5), 1e-3, 51);

  // same seed, same trace
  auto run_trace = [&task](std::uint64_t seed) {
    Vec theta = task->initial_params(seed);
    auto opt = make_sgd(0.1);
    Vec losses(10);
    for (int t = 0; t < 10; ++t) {
      theta += opt->step(task->gradient(theta, mix_seed(seed, t)));
      losses[t] = task->loss(theta, Split::train);
    }
    return losses;
  };
  CHECK((run_trace(4) - run_trace(4)).lpNorm<Eigen::Infinity>() == 0.0);
  CHECK((run_trace(4) - run_trace(5)).lpNorm<Eigen::Infinity>() > 0.0);

  CHECK_THROWS_AS(mlp_task(data, {0}, 0, 1), std::invalid_argument);
}

TEST_CASE("idx loader parses a synthetic fixture") {
  TempDir tmp;
  // two 2x2 images
  const std::vector<unsigned char> pixels = {0, 64, 128, 255, 10, 20, 30, 40};
  const std::vector<unsigned char> labels = {7, 2};
  const std::string images = write_idx_pair(tmp.path, 2, 2, 2, pixels, labels);
  const Dataset data = load_idx(images, (tmp.path / "labels.idx").string());
  CHECK(data.sample_count() == 2);
  CHECK(data.feature_dim() == 4);
  CHECK(data.labels.size() == 2);
  CHECK(data.labels[0] == 7);
  CHECK(data.labels[1] == 2);
  CHECK(data.train_count == 2);

  // normalization endpoints: (0 - 0.1307)/0.3081 and (1 - 0.1307)/0.3081
  CHECK(data.features(0, 0) == doctest::Approx((0.0 - 0.1307) / 0.3081).epsilon(1e-12));
  CHECK(data.features(0, 3) == doctest::Approx((1.0 - 0.1307) / 0.3081).epsilon(1e-12));
  CHECK(data.features(0, 0) == doctest::Approx(-0.4242).epsilon(1e-3));
  CHECK(data.features(0, 3) == doctest::Approx(2.8215).epsilon(1e-3));

  // limit truncation
  const Dataset limited = load_idx(images, (tmp.path / "labels.idx").string(), 1);
  CHECK(limited.sample_count() == 1);
}

TEST_CASE("idx loader rejects malformed files") {
  const std::vector<unsigned char> pixels = {0, 64, 128, 255, 10, 20, 30, 40};
  const std::vector<unsigned char> labels = {7, 2};
  {
    TempDir tmp;
    const std::string images = write_idx_pair(tmp.path, 2, 2, 2, pixels, labels, true);
    CHECK_THROWS_WITH_AS(load_idx(images, (tmp.path / "labels.idx").string()),
                         doctest::Contains("offset 0"), IdxError);
  }
  {
    TempDir tmp;
    const std::string images = write_idx_pair(tmp.path, 2, 2, 2, pixels, labels, false, true);
    CHECK_THROWS_AS(load_idx(images, (tmp.path / "labels.idx").string()), IdxError);
  }
  {
    TempDir tmp;
    const std::string images =
        write_idx_pair(tmp.path, 2, 2, 2, pixels, labels, false, false, 3);
    CHECK_THROWS_AS(load_idx(images, (tmp.path / "labels.idx").string()), IdxError);
  }
  CHECK_THROWS_AS(load_idx("/nonexistent/img", "/nonexistent/lab"), IdxError);
}

TEST_CASE("dataset save and load round trip") {
  TempDir tmp;
  const Dataset original = synthetic_classification(120, 7, 3, 1.2, 23);
  const std::string path = (tmp.path / "data.rlds").string();
  original.save(path);
  const Dataset loaded = Dataset::load(path);
  CHECK(loaded.sample_count() == original.sample_count());
  CHECK(loaded.feature_dim() == original.feature_dim());
  CHECK(loaded.train_count == original.train_count);
  CHECK(loaded.val_count == original.val_count);
  CHECK(loaded.test_count == original.test_count);
  CHECK(loaded.feature_mean == original.feature_mean);
  CHECK(loaded.feature_std == original.feature_std);
  CHECK(loaded.labels == original.labels);
  CHECK(std::memcmp(loaded.features.data(), original.features.data(),
                    sizeof(double) * original.features.size()) == 0);
}
