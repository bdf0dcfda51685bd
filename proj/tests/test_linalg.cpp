#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <cmath>

#include "catenc/errors.h"
#include "catenc/linalg.h"
#include "catenc/rng.h"
#include "doctest.h"
#include "exact.h"

using namespace catenc;

namespace {

Eigen::MatrixXd random_matrix(int rows, int cols, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = rng.normal();
  return m;
}

}  // namespace

TEST_CASE("svd reconstructs, factors orthonormal, spectrum sorted") {
  for (std::uint64_t seed : {11u, 12u, 13u}) {
    for (auto [rows, cols] : {std::pair{8, 5}, {5, 8}, {6, 6}}) {
      Eigen::MatrixXd m = random_matrix(rows, cols, seed);
      SvdFactors f = svd(m);
      const int r = std::min(rows, cols);
      REQUIRE(f.u.cols() == r);
      REQUIRE(f.v.cols() == r);

      Eigen::MatrixXd recon = f.u * f.d.asDiagonal() * f.v.transpose();
      CHECK((recon - m).norm() / m.norm() <= 1e-12);
      CHECK((f.u.transpose() * f.u - Eigen::MatrixXd::Identity(r, r)).norm() <=
            1e-12);
      CHECK((f.v.transpose() * f.v - Eigen::MatrixXd::Identity(r, r)).norm() <=
            1e-12);
      for (int i = 0; i < r; ++i) {
        CHECK(f.d(i) >= 0.0);
        if (i > 0) CHECK(f.d(i) <= f.d(i - 1));
      }
      // sign convention: dominant entry of every left vector is positive
      for (int j = 0; j < r; ++j) {
        int arg = 0;
        f.u.col(j).cwiseAbs().maxCoeff(&arg);
        CHECK(f.u(arg, j) > 0.0);
      }
    }
  }
}

TEST_CASE("singular values match gram eigenvalues") {
  // independent spectral route: eigenvalues of m^T m
  Eigen::MatrixXd m = random_matrix(10, 6, 99);
  SvdFactors f = svd(m);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m.transpose() * m);
  Eigen::VectorXd ev = es.eigenvalues();  // ascending
  for (int i = 0; i < 6; ++i) {
    const double from_gram = std::sqrt(std::max(0.0, ev(5 - i)));
    CHECK(std::fabs(f.d(i) - from_gram) <= 1e-8 * std::max(1.0, from_gram));
  }
}

TEST_CASE("svd determinism") {
  Eigen::MatrixXd m = random_matrix(7, 4, 5);
  SvdFactors a = svd(m);
  SvdFactors b = svd(m);
  CHECK(bitwise_equal(a.u, b.u));
  CHECK(bitwise_equal(a.d, b.d));
  CHECK(bitwise_equal(a.v, b.v));
}

TEST_CASE("pseudo_inverse satisfies the Moore-Penrose identities") {
  auto check_mp = [](const Eigen::MatrixXd& m) {
    Eigen::MatrixXd pinv = pseudo_inverse(m);
    const double scale = std::max(1.0, m.norm());
    CHECK((m * pinv * m - m).norm() <= 1e-9 * scale);
    CHECK((pinv * m * pinv - pinv).norm() <= 1e-9 * std::max(1.0, pinv.norm()));
    Eigen::MatrixXd mp = m * pinv;
    Eigen::MatrixXd pm = pinv * m;
    CHECK((mp - mp.transpose()).norm() <= 1e-9);
    CHECK((pm - pm.transpose()).norm() <= 1e-9);
  };

  check_mp(random_matrix(9, 4, 21));
  check_mp(random_matrix(4, 9, 22));

  // rank-1 outer product: exact formula pinv = (1 / (|u|^2 |v|^2)) v u^T
  Eigen::VectorXd u = random_matrix(6, 1, 23);
  Eigen::VectorXd v = random_matrix(4, 1, 24);
  Eigen::MatrixXd outer = u * v.transpose();
  Eigen::MatrixXd expect =
      v * u.transpose() / (u.squaredNorm() * v.squaredNorm());
  CHECK((pseudo_inverse(outer) - expect).norm() <= 1e-12);

  // square invertible: pinv equals inverse
  Eigen::MatrixXd sq = random_matrix(5, 5, 25);
  CHECK((pseudo_inverse(sq) - sq.inverse()).norm() <=
        1e-8 * sq.inverse().norm());
}

TEST_CASE("linalg input validation") {
  Eigen::MatrixXd empty;
  CHECK_THROWS_AS(svd(empty), NumericError);
  Eigen::MatrixXd bad(2, 2);
  bad << 1, 2, 3, std::nan("");
  CHECK_THROWS_AS(svd(bad), NumericError);
  CHECK_THROWS_AS(pseudo_inverse(bad), NumericError);
}
