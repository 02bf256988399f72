#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "oracles.hpp"

#include "rllc/numerics.hpp"

#include <Eigen/QR>

#include <limits>

using namespace rllc;

namespace {

Mat orthogonal(int n, std::uint64_t seed) {
  return Eigen::HouseholderQR<Mat>(oracles::random_matrix(n, n, seed)).householderQ();
}

Mat spd_with_condition(int n, double condition, std::uint64_t seed) {
  Mat q = orthogonal(n, seed);
  Vec eigs(n);
  for (int i = 0; i < n; ++i) {
    eigs[i] = std::pow(condition, n == 1 ? 0.0 : double(i) / (n - 1));
  }
  Mat a = q * eigs.asDiagonal() * q.transpose();
  return 0.5 * (a + Mat(a.transpose()));
}

}  // namespace

TEST_CASE("relaxed pseudo-inverse: orthonormal columns project exactly") {
  Mat m(3, 2);
  m << 1, 0, 0, 1, 0, 0;
  Vec g(3);
  g << 2, 3, 7;
  const Vec r = relaxed_pinv_apply(m, g, 0.0);
  CHECK(r.size() == 2);
  CHECK(r[0] == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(r[1] == doctest::Approx(3.0).epsilon(1e-14));
}

TEST_CASE("relaxed pseudo-inverse: zero memory with shift gives zero") {
  const Mat m = Mat::Zero(3, 2);
  const Vec g = Vec::Ones(3);
  const Vec r = relaxed_pinv_apply(m, g, 1e-8);
  CHECK(r.norm() == 0.0);
}

TEST_CASE("relaxed pseudo-inverse: normal-equation residual vanishes") {
  const Mat m = oracles::random_matrix(50, 3, 42);
  const Vec g = oracles::random_vector(50, 43);
  const Vec r = relaxed_pinv_apply(m, g, 0.0);
  const Vec residual = m.transpose() * (g - m * r);
  CHECK(residual.lpNorm<Eigen::Infinity>() < 1e-9);
}

TEST_CASE("relaxed pseudo-inverse errors") {
  Mat rank_deficient(3, 2);
  rank_deficient << 1, 2, 2, 4, 3, 6;  // second column is twice the first
  CHECK_THROWS_AS(relaxed_pinv_apply(rank_deficient, Vec::Ones(3), 0.0), SingularMatrixError);
  CHECK(!try_relaxed_pinv_apply(rank_deficient, Vec::Ones(3), 0.0).has_value());
  // the shifted system handles the same matrix
  CHECK(try_relaxed_pinv_apply(rank_deficient, Vec::Ones(3), 1e-8).has_value());
  CHECK_THROWS_AS(relaxed_pinv_apply(Mat::Identity(3, 2), Vec::Ones(4), 0.0), DimensionError);
  CHECK_THROWS_AS(relaxed_pinv_apply(Mat::Identity(3, 2), Vec::Ones(3), -1.0),
                  std::invalid_argument);
}

TEST_CASE("matrix multiply basics and oracle") {
  Mat b(2, 3);
  b << 1, 2, 3, 4, 5, 6;
  CHECK((matrix_multiply(Mat::Identity(2, 2), b) - b).norm() == 0.0);

  Mat a(2, 2), swap(2, 2);
  a << 1, 2, 3, 4;
  swap << 0, 1, 1, 0;
  Mat prod = matrix_multiply(a, swap);
  Mat expected(2, 2);
  expected << 2, 1, 4, 3;
  CHECK((prod - expected).norm() == 0.0);

  const Mat x = oracles::random_matrix(3, 4, 7);
  const Mat y = oracles::random_matrix(4, 2, 8);
  CHECK((matrix_multiply(x, y) - oracles::naive_multiply(x, y)).lpNorm<Eigen::Infinity>() <
        1e-12);

  CHECK_THROWS_AS(matrix_multiply(x, x), DimensionError);
}

TEST_CASE("solve_spd closed forms") {
  Vec b3(3);
  b3 << 2, 4, 6;
  const Vec x = solve_spd(2.0 * Mat::Identity(3, 3), b3);
  CHECK((x - Vec(b3 / 2.0)).lpNorm<Eigen::Infinity>() < 1e-14);

  Mat a(2, 2);
  a << 4, 1, 1, 3;
  Vec b2(2);
  b2 << 1, 2;
  const Vec y = solve_spd(a, b2);
  CHECK(y[0] == doctest::Approx(1.0 / 11.0).epsilon(1e-13));
  CHECK(y[1] == doctest::Approx(7.0 / 11.0).epsilon(1e-13));

  const Vec z = oracles::random_vector(5, 9);
  CHECK((solve_spd(Mat::Identity(5, 5), z) - z).lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("solve_spd residual accuracy on ill-conditioned systems") {
  // the 1e-10 relative-residual bound is comfortably met through cond 1e6
  for (std::uint64_t seed : {11ull, 12ull, 13ull}) {
    const Mat a = spd_with_condition(6, 1e6, seed);
    const Vec b = oracles::random_vector(6, seed + 50);
    const Vec x = solve_spd(a, b);
    CHECK((a * x - b).norm() <= 1e-10 * b.norm());
  }
  // at cond 1e8 double precision caps the measurable residual near
  // eps*||A||*||x||; the solve stays backward stable at that level
  const Mat a = spd_with_condition(6, 1e8, 11);
  const Vec b = oracles::random_vector(6, 12);
  const Vec x = solve_spd(a, b);
  const double backward_scale = 1e8 * x.norm() * std::numeric_limits<double>::epsilon();
  CHECK((a * x - b).norm() <= 50.0 * backward_scale);
}

TEST_CASE("solve_spd rejects non-positive-definite pivots") {
  Mat indefinite(2, 2);
  indefinite << 1, 2, 2, 1;
  CHECK_THROWS_AS(solve_spd(indefinite, Vec::Ones(2)), SingularMatrixError);
  CHECK_THROWS_AS(solve_spd(Mat::Identity(3, 2), Vec::Ones(2)), DimensionError);
  CHECK_THROWS_AS(solve_spd(Mat::Identity(2, 2), Vec::Ones(3)), DimensionError);
}

TEST_CASE("invert closed forms and residual oracle") {
  CHECK((invert(Mat::Identity(3, 3)) - Mat::Identity(3, 3)).norm() == 0.0);

  Vec diag(2);
  diag << 2, 4;
  Mat d_inv = invert(Mat(diag.asDiagonal()));
  CHECK(d_inv(0, 0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(d_inv(1, 1) == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(d_inv(0, 1) == 0.0);

  const Mat q = oracles::random_matrix(4, 4, 21) + 4.0 * Mat::Identity(4, 4);
  CHECK((q * invert(q) - Mat::Identity(4, 4)).lpNorm<Eigen::Infinity>() < 1e-10);

  CHECK_THROWS_AS(invert(Mat::Zero(2, 2)), SingularMatrixError);
  CHECK_THROWS_AS(invert(Mat::Identity(3, 2)), DimensionError);
}

TEST_CASE("invert stays accurate at condition 1e6") {
  Mat q = orthogonal(5, 31);
  Vec s(5);
  for (int i = 0; i < 5; ++i) s[i] = std::pow(1e6, double(i) / 4.0);
  Mat m = q * s.asDiagonal() * orthogonal(5, 32).transpose();
  CHECK((m * invert(m) - Mat::Identity(5, 5)).lpNorm<Eigen::Infinity>() < 1e-10);
}

TEST_CASE("property: (MQ)+ g equals Q^-1 M+ g on full-rank memory") {
  for (std::uint64_t seed : {1ull, 2ull, 3ull, 4ull}) {
    const Mat m = oracles::random_matrix(30, 3, seed);
    const Vec g = oracles::random_vector(30, seed + 100);
    const Mat q = oracles::random_matrix(3, 3, seed + 200) + 3.0 * Mat::Identity(3, 3);
    const Vec left = relaxed_pinv_apply(m * q, g, 0.0);
    const Vec right = invert(q) * relaxed_pinv_apply(m, g, 0.0);
    const double scale = std::max(1.0, right.lpNorm<Eigen::Infinity>());
    CHECK((left - right).lpNorm<Eigen::Infinity>() / scale < 1e-8);
  }
}

TEST_CASE("property: projection aligns with the gradient") {
  for (std::uint64_t seed : {5ull, 6ull, 7ull}) {
    const Mat m = oracles::random_matrix(40, 4, seed);
    const Vec g = oracles::random_vector(40, seed + 300);
    const Vec r = relaxed_pinv_apply(m, g, 0.0);
    const Vec p = m * r;
    CHECK(std::abs(p.dot(g) - p.dot(p)) < 1e-9 * std::max(1.0, p.dot(p)));
    CHECK(p.dot(g) >= -1e-9);
  }
}

TEST_CASE("property: continuity in epsilon") {
  const Mat m = oracles::random_matrix(25, 3, 51);
  const Vec g = oracles::random_vector(25, 52);
  const Vec exact = relaxed_pinv_apply(m, g, 0.0);
  const Vec shifted = relaxed_pinv_apply(m, g, 1e-12);
  const double scale = std::max(1.0, exact.lpNorm<Eigen::Infinity>());
  CHECK((exact - shifted).lpNorm<Eigen::Infinity>() / scale < 1e-6);
}

TEST_CASE("gram_eigen_ratio rank proxy") {
  CHECK(gram_eigen_ratio(Mat::Zero(5, 2)) == 0.0);
  CHECK(gram_eigen_ratio(Mat::Identity(5, 2)) == doctest::Approx(1.0).epsilon(1e-12));
  Mat rank1(4, 2);
  rank1.col(0) = oracles::random_vector(4, 61);
  rank1.col(1) = 2.0 * rank1.col(0);
  CHECK(gram_eigen_ratio(rank1) < 1e-14);
}

TEST_CASE("non-finite inputs are rejected, not propagated") {
  Mat bad = Mat::Ones(2, 2);
  bad(0, 1) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(matrix_multiply(bad, Mat::Ones(2, 2)), NonFiniteError);
}
