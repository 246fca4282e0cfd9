#include "mpg_lab/certify.hpp"

#include "mpg_lab/linalg.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>

namespace mpg {

Mat CertificateProblem::successor_map() const {
  Mat S(state_dim, state_dim + total_width);
  S.leftCols(state_dim) = A;
  Index off = state_dim;
  for (const Mat& b : B_hat) {
    S.middleCols(off, b.cols()) = b;
    off += b.cols();
  }
  return S;
}

Mat CertificateProblem::state_selector() const {
  Mat E = Mat::Zero(state_dim, state_dim + total_width);
  E.leftCols(state_dim) = Mat::Identity(state_dim, state_dim);
  return E;
}

Mat CertificateProblem::coupling_form() const {
  const Index N = state_dim + total_width;
  Mat W = Mat::Zero(N, N);
  Index off = state_dim;
  for (size_t j = 0; j < B_hat.size(); ++j) {
    const Index w = block_width[j];
    W.block(off, off, w, w) = -rho[j] * Mat::Identity(w, w);
    W.block(off, 0, w, state_dim) = -0.5 * F_x[j];
    W.block(0, off, state_dim, w) = -0.5 * F_x[j].transpose();
    off += w;
  }
  return W;
}

CertificateProblem build_certificate_problem(const ControllerBank& bank, bool reduced) {
  CertificateProblem prob;
  prob.A = bank.dynamics().A;
  prob.state_dim = bank.dynamics().state_dim();
  prob.reduced = reduced;
  for (int j = 0; j < bank.num_agents(); ++j) {
    const AffineVI& vi = bank.vi(j);
    const SignalLayout& L = vi.layout;
    const Index mj = L.m[(size_t)j];
    if (reduced) {
      prob.B_hat.push_back(bank.dynamics().B[(size_t)j]);
      prob.F_x.push_back(vi.F_x.middleRows(L.agent_start(j), mj));
      prob.block_width.push_back(mj);
    } else {
      Mat Bh = Mat::Zero(prob.state_dim, L.dim());
      Bh.middleCols(L.agent_start(j), mj) = bank.dynamics().B[(size_t)j];
      prob.B_hat.push_back(std::move(Bh));
      prob.F_x.push_back(vi.F_x);
      prob.block_width.push_back(L.dim());
    }
    prob.rho.push_back(vi.rho);
    prob.total_width += prob.block_width.back();
  }
  return prob;
}

Mat lmi_value(const CertificateProblem& prob, const Mat& P, double lambda) {
  const Mat Ps = symmetric_part(P);
  const Mat S = prob.successor_map();
  Mat G = symmetric_part(S.transpose() * (Ps * S));
  G.topLeftCorner(prob.state_dim, prob.state_dim) -= Ps;
  G += lambda * prob.coupling_form();
  return G;
}

namespace {

// Euclidean projection of eigenvalues onto { e >= floor, sum e = total }.
Vec project_spectrum(const Vec& e, double floor, double total) {
  auto mass = [&](double tau) {
    double s = 0.0;
    for (Index i = 0; i < e.size(); ++i) s += std::max(floor, e(i) - tau);
    return s;
  };
  double lo = e.minCoeff() - total - 1.0;
  double hi = e.maxCoeff() + 1.0;
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    if (mass(mid) > total)
      lo = mid;
    else
      hi = mid;
  }
  double tau = 0.5 * (lo + hi);
  Vec out(e.size());
  for (Index i = 0; i < e.size(); ++i) out(i) = std::max(floor, e(i) - tau);
  return out;
}

void project_iterate(Mat& P, double& lambda, const CertifyOptions& opts, Index n) {
  lambda = std::max(lambda, opts.delta_lambda);
  Eigen::SelfAdjointEigenSolver<Mat> es(symmetric_part(P));
  Vec e = project_spectrum(es.eigenvalues(), opts.delta_P, (double)n);
  P = es.eigenvectors() * e.asDiagonal() * es.eigenvectors().transpose();
  P = symmetric_part(P);
}

} // namespace

CertifySearchResult find_certificate(const CertificateProblem& prob, const CertifyOptions& opts) {
  const Index n = prob.state_dim;
  const Mat S = prob.successor_map();
  const Mat W = prob.coupling_form();

  Mat P = Mat::Identity(n, n);
  double lambda = std::max(1.0, opts.delta_lambda);
  project_iterate(P, lambda, opts, n);

  CertifySearchResult res;
  res.best_value = std::numeric_limits<double>::infinity();

  // Level-method bookkeeping for the Polyak step.
  double record = std::numeric_limits<double>::infinity();
  double level_gap = 0.0;
  double path = 0.0;
  const double path_budget = 2.0 * ((double)n + 5.0);

  for (long it = 1; it <= opts.max_iter; ++it) {
    res.iterations = it;
    Mat G = lmi_value(prob, P, lambda);
    Eigen::SelfAdjointEigenSolver<Mat> es(G);
    const Index top = G.rows() - 1;
    double phi = es.eigenvalues()(top);
    Vec v = es.eigenvectors().col(top);

    if (phi < res.best_value) {
      res.best_value = phi;
      res.best_P = P;
      res.best_lambda = lambda;
    }
    if (it == 1) {
      record = phi;
      level_gap = 0.5 * std::max(1.0, std::abs(phi));
    }

    Vec Sv = S * v;
    Vec Ev = v.head(n);
    Mat gP = Sv * Sv.transpose() - Ev * Ev.transpose();
    double glam = v.dot(W * v);
    double gnorm2 = gP.squaredNorm() + glam * glam;
    if (gnorm2 <= 1e-300) break;

    double target = record - level_gap;
    double step = (phi - target) / gnorm2;
    if (step <= 0.0) step = level_gap / gnorm2;
    P -= step * gP;
    lambda -= step * glam;
    project_iterate(P, lambda, opts, n);

    path += step * std::sqrt(gnorm2);
    if (phi <= record - 0.5 * level_gap) {
      record = phi;
      path = 0.0;
    } else if (path > path_budget) {
      level_gap *= 0.5;
      record = res.best_value;
      path = 0.0;
    }
    if (level_gap < std::max(1e-14, 1e-5 * std::abs(res.best_value))) break;
  }

  if (res.best_value <= -opts.epsilon_target) {
    res.verdict = CertifyVerdict::Certified;
    StabilityCertificate cert;
    cert.P = res.best_P;
    cert.lambda = res.best_lambda;
    cert.epsilon = -res.best_value * (1.0 - 1e-3);
    cert.achieved_max_eig = res.best_value + cert.epsilon;
    res.certificate = std::move(cert);
  } else if (res.best_value > opts.infeasible_margin) {
    res.verdict = CertifyVerdict::LikelyInfeasible;
  } else {
    res.verdict = CertifyVerdict::Inconclusive;
  }
  return res;
}

CertificateCheck verify_certificate(const CertificateProblem& prob,
                                    const StabilityCertificate& cert,
                                    const CertifyOptions& opts) {
  CertificateCheck chk;
  const Mat Ps = symmetric_part(cert.P);
  chk.lambda_min_P = power_lambda_min(Ps);
  bool chol = cholesky_positive_definite(Ps, opts.delta_P * (1.0 - 1e-9));
  chk.p_positive = chol && chk.lambda_min_P >= opts.delta_P * (1.0 - 1e-6) &&
                   cert.lambda >= opts.delta_lambda * (1.0 - 1e-12) && cert.epsilon > 0.0;

  Mat G = lmi_value(prob, Ps, cert.lambda);
  Mat shifted = G + cert.epsilon * Mat::Identity(G.rows(), G.cols());
  chk.max_eig_with_eps = power_lambda_max(shifted, 1e-13);
  chk.lmi_holds = chk.max_eig_with_eps <= 1e-9;
  return chk;
}

} // namespace mpg
