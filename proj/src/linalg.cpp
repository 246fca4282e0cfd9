#include "mpg_lab/linalg.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>

namespace mpg {

Mat symmetric_part(const Mat& M) {
  return 0.5 * (M + M.transpose());
}

double spectral_radius(const Mat& A) {
  Eigen::EigenSolver<Mat> es(A, /*computeEigenvectors=*/false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

double lambda_min_sym(const Mat& S) {
  Eigen::SelfAdjointEigenSolver<Mat> es(symmetric_part(S), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

double lambda_max_sym(const Mat& S) {
  Eigen::SelfAdjointEigenSolver<Mat> es(symmetric_part(S), Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff();
}

double operator_norm(const Mat& M) {
  if (M.size() == 0) return 0.0;
  Eigen::JacobiSVD<Mat> svd(M);
  return svd.singularValues()(0);
}

namespace {

// Power iteration for the dominant eigenvalue of a symmetric matrix.
// The caller shifts so the sought eigenvalue dominates in magnitude.
double dominant_eig(const Mat& S, double tol, long max_iter) {
  const Index n = S.rows();
  if (n == 0) return 0.0;
  Vec v = Vec::Ones(n);
  // Deterministic non-uniform start so eigenvectors orthogonal to the
  // all-ones vector are still reachable.
  for (Index i = 0; i < n; ++i) v(i) += 0.5 * std::sin(double(i + 1));
  v.normalize();
  double lambda = 0.0;
  for (long it = 0; it < max_iter; ++it) {
    Vec w = S * v;
    double nw = w.norm();
    if (nw == 0.0) return 0.0;
    w /= nw;
    double next = w.dot(S * w);
    bool settled = std::abs(next - lambda) <= tol * (1.0 + std::abs(next));
    lambda = next;
    v = w;
    if (settled && it > 2) break;
  }
  return lambda;
}

} // namespace

double power_lambda_max(const Mat& S, double tol, long max_iter) {
  const Mat A = symmetric_part(S);
  const Index n = A.rows();
  if (n == 0) return 0.0;
  // Shift by a Gershgorin lower bound so the maximum eigenvalue of A
  // becomes the dominant eigenvalue of A + shift*I.
  double low = 0.0;
  for (Index i = 0; i < n; ++i) {
    double r = A.row(i).cwiseAbs().sum() - std::abs(A(i, i));
    low = std::min(low, A(i, i) - r);
  }
  const double shift = -low + 1.0;
  Mat B = A + shift * Mat::Identity(n, n);
  return dominant_eig(B, tol, max_iter) - shift;
}

double power_lambda_min(const Mat& S, double tol, long max_iter) {
  const Mat A = symmetric_part(S);
  const Index n = A.rows();
  if (n == 0) return 0.0;
  double high = 0.0;
  for (Index i = 0; i < n; ++i) {
    double r = A.row(i).cwiseAbs().sum() - std::abs(A(i, i));
    high = std::max(high, A(i, i) + r);
  }
  const double shift = high + 1.0;
  Mat B = shift * Mat::Identity(n, n) - A;
  return shift - dominant_eig(B, tol, max_iter);
}

bool cholesky_positive_definite(const Mat& S, double margin) {
  const Mat A = symmetric_part(S) - margin * Mat::Identity(S.rows(), S.cols());
  Eigen::LLT<Mat> llt(A);
  return llt.info() == Eigen::Success;
}

} // namespace mpg
