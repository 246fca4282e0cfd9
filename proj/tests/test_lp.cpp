#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "mpg_lab/lp.hpp"
#include "test_support.hpp"

using namespace mpg;

namespace {

Mat box_rows(Index n) {
  Mat C(2 * n, n);
  C.topRows(n) = -Mat::Identity(n, n);
  C.bottomRows(n) = Mat::Identity(n, n);
  return C;
}

Vec box_rhs(const Vec& lo, const Vec& hi) {
  Vec d(2 * lo.size());
  d.head(lo.size()) = -lo;
  d.tail(hi.size()) = hi;
  return d;
}

} // namespace

TEST_CASE("one-dimensional bounds") {
  Vec c(1), d(2);
  c << -1.0;
  Mat C(2, 1);
  C << 1.0, -1.0;
  d << 2.0, 3.0; // x <= 2, x >= -3
  LpResult r = solve_lp(c, C, d, Mat(), Vec());
  REQUIRE(r.status == LpResult::Status::Optimal);
  CHECK(r.x(0) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(r.value == doctest::Approx(-2.0).epsilon(1e-12));
}

TEST_CASE("box minimization matches the per-coordinate sign rule") {
  testutil::Rng g(21);
  for (int trial = 0; trial < 50; ++trial) {
    Index n = 1 + trial % 5;
    Vec lo = testutil::rand_vec(g, n, 3.0);
    Vec hi = lo + Vec::Constant(n, 0.5) + testutil::rand_vec(g, n, 0.5).cwiseAbs();
    Vec c = testutil::rand_vec(g, n, 2.0);
    LpResult r = solve_lp(c, box_rows(n), box_rhs(lo, hi), Mat(), Vec());
    REQUIRE(r.status == LpResult::Status::Optimal);
    double want = 0.0;
    for (Index i = 0; i < n; ++i) want += c(i) * (c(i) >= 0.0 ? lo(i) : hi(i));
    CHECK(r.value == doctest::Approx(want).epsilon(1e-9));
  }
}

TEST_CASE("infeasible rows are reported") {
  Vec c(1);
  c << 1.0;
  Mat C(2, 1);
  C << 1.0, -1.0;
  Vec d(2);
  d << -1.0, 0.0; // x <= -1 and x >= 0
  CHECK(solve_lp(c, C, d, Mat(), Vec()).status == LpResult::Status::Infeasible);
}

TEST_CASE("unbounded direction is returned as a descent ray") {
  Vec c(2);
  c << -1.0, 0.0;
  Mat C(1, 2);
  C << -1.0, 0.0; // x0 >= 0 only
  Vec d(1);
  d << 0.0;
  LpResult r = solve_lp(c, C, d, Mat(), Vec());
  REQUIRE(r.status == LpResult::Status::Unbounded);
  CHECK(c.dot(r.ray) < 0.0);
  CHECK((C * r.ray).maxCoeff() <= 1e-12);
}

TEST_CASE("equality constraints restrict the feasible line") {
  Vec c(2);
  c << 1.0, 1.0;
  Mat H(1, 2);
  H << 1.0, -1.0; // x0 = x1
  Vec h(1);
  h << 0.0;
  Mat C = box_rows(2);
  Vec lo = Vec::Constant(2, -1.0), hi = Vec::Constant(2, 5.0);
  LpResult r = solve_lp(c, C, box_rhs(lo, hi), H, h);
  REQUIRE(r.status == LpResult::Status::Optimal);
  CHECK(r.x(0) == doctest::Approx(-1.0).epsilon(1e-10));
  CHECK(r.x(1) == doctest::Approx(-1.0).epsilon(1e-10));
}

TEST_CASE("duplicated rows do not break the pivoting") {
  Vec c(2);
  c << 0.0, -1.0;
  Mat C(5, 2);
  C << 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, -1.0, 0.0, 1.0, 0.0;
  Vec d(5);
  d << 2.0, 2.0, 2.0, 1.0, 1.0;
  LpResult r = solve_lp(c, C, d, Mat(), Vec());
  REQUIRE(r.status == LpResult::Status::Optimal);
  CHECK(r.x(1) == doctest::Approx(2.0).epsilon(1e-10));
}

TEST_CASE("random polytopes: reported optimum is feasible and beats sampled points") {
  testutil::Rng g(22);
  for (int trial = 0; trial < 30; ++trial) {
    Index n = 2 + trial % 3;
    Vec lo = Vec::Constant(n, -2.0), hi = Vec::Constant(n, 2.0);
    Mat C(2 * n + 2, n);
    C.topRows(2 * n) = box_rows(n);
    C.row(2 * n) = testutil::rand_vec(g, n, 1.0).transpose();
    C.row(2 * n + 1) = testutil::rand_vec(g, n, 1.0).transpose();
    Vec d(2 * n + 2);
    d.head(2 * n) = box_rhs(lo, hi);
    d(2 * n) = testutil::unif(g, 0.5, 2.0);
    d(2 * n + 1) = testutil::unif(g, 0.5, 2.0);
    Vec c = testutil::rand_vec(g, n, 1.5);
    LpResult r = solve_lp(c, C, d, Mat(), Vec());
    REQUIRE(r.status == LpResult::Status::Optimal);
    CHECK((C * r.x - d).maxCoeff() <= 1e-9);
    for (int s = 0; s < 40; ++s) {
      Vec y = testutil::rand_vec(g, n, 2.0);
      if ((C * y - d).maxCoeff() <= 0.0) CHECK(c.dot(r.x) <= c.dot(y) + 1e-9);
    }
  }
}
