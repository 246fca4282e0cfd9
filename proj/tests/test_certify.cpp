#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <Eigen/Eigenvalues>

#include "mpg_lab/certify.hpp"
#include "mpg_lab/linalg.hpp"
#include "test_support.hpp"

using namespace mpg;

namespace {

// Decoupled single-agent problem: contractive plant, no input influence,
// no state coupling. Every P > 0 with any lambda > 0 certifies it.
CertificateProblem contractive_toy(double a) {
  CertificateProblem prob;
  prob.A = a * Mat::Identity(2, 2);
  prob.B_hat = {Mat::Zero(2, 1)};
  prob.F_x = {Mat::Zero(1, 2)};
  prob.rho = {0.5};
  prob.state_dim = 2;
  prob.block_width = {1};
  prob.total_width = 1;
  return prob;
}

// Two-agent bank with misaligned conjectures and a strongly contractive
// plant; the dissipation inequality is comfortably feasible for it.
ControllerBank coupled_bank() {
  Mat A(2, 2);
  A << 0.1, 0.03, 0.0, 0.05;
  Mat B1(2, 1), B2(2, 1);
  B1 << 0.5, 0.2;
  B2 << 0.3, 0.5;
  Dynamics dyn = Dynamics::create(A, {B1, B2});
  int K = 5;
  auto poly = std::make_shared<const Polytope>(
      Polytope::box(Vec::Constant(2 * K, -4.0), Vec::Constant(2 * K, 4.0)));

  auto cost = [](double q00, double q11, double q0, double q1, Mat R) {
    Mat Q = Mat::Zero(2, 2);
    Q(0, 0) = q00;
    Q(1, 1) = q11;
    Vec q(2);
    q << q0, q1;
    return StageCost::create(Q, q, std::move(R));
  };
  Mat R1(2, 2), R2(2, 2), R1c(2, 2), R2c(2, 2);
  R1 << 1.0, 0.1, 0.1, 0.2;
  R2 << 0.2, 0.05, 0.05, 1.0;
  R2c << 0.2, 0.08, 0.08, 1.1;
  R1c << 0.95, 0.12, 0.12, 0.2;
  StageCost g1 = cost(1.0, 0.5, -1.0, -0.4, R1);
  StageCost g2 = cost(0.5, 1.0, -0.3, -0.8, R2);
  StageCost g2c = cost(0.4, 0.9, -0.2, -0.7, R2c);
  StageCost g1c = cost(1.1, 0.45, -0.9, -0.5, R1c);

  std::vector<ConjectureAssembly> assemblies;
  assemblies.push_back(assemble_with_theta(
      ConjectureSet::create(0, K, {CostEntry::fixed(g1), CostEntry::fixed(g2c)}), dyn, poly));
  assemblies.push_back(assemble_with_theta(
      ConjectureSet::create(1, K, {CostEntry::fixed(g1c), CostEntry::fixed(g2)}), dyn, poly));
  return ControllerBank(dyn, std::move(assemblies));
}

} // namespace

TEST_CASE("problem maps follow the documented aggregate layout") {
  ControllerBank bank = coupled_bank();
  CertificateProblem prob = build_certificate_problem(bank, false);
  const Index nx = 2;
  REQUIRE(prob.state_dim == nx);
  REQUIRE(prob.B_hat.size() == 2);
  REQUIRE(prob.total_width == prob.block_width[0] + prob.block_width[1]);

  // Full convention: each block spans the agent's whole stacked game.
  for (int j = 0; j < 2; ++j) {
    const AffineVI& vi = bank.vi(j);
    const SignalLayout& L = vi.layout;
    CHECK(prob.block_width[(size_t)j] == L.dim());
    CHECK((prob.F_x[(size_t)j] - vi.F_x).cwiseAbs().maxCoeff() == 0.0);
    CHECK(prob.rho[(size_t)j] == vi.rho);
    Mat expect = Mat::Zero(nx, L.dim());
    expect.middleCols(L.agent_start(j), L.m[(size_t)j]) = bank.dynamics().B[(size_t)j];
    CHECK((prob.B_hat[(size_t)j] - expect).cwiseAbs().maxCoeff() == 0.0);
  }

  Mat S = prob.successor_map();
  CHECK((S.leftCols(nx) - prob.A).cwiseAbs().maxCoeff() == 0.0);
  CHECK((S.middleCols(nx, prob.block_width[0]) - prob.B_hat[0]).cwiseAbs().maxCoeff() == 0.0);
  Mat E = prob.state_selector();
  CHECK((E.leftCols(nx) - Mat::Identity(nx, nx)).cwiseAbs().maxCoeff() == 0.0);
  CHECK(E.rightCols(prob.total_width).cwiseAbs().maxCoeff() == 0.0);

  // Double-entry rebuild of the coupling form.
  const Index N = nx + prob.total_width;
  Mat W = Mat::Zero(N, N);
  Index off = nx;
  for (size_t j = 0; j < 2; ++j) {
    Index w = prob.block_width[j];
    W.block(off, off, w, w) = -prob.rho[j] * Mat::Identity(w, w);
    W.block(off, 0, w, nx) = -0.5 * prob.F_x[j];
    W.block(0, off, nx, w) = -0.5 * prob.F_x[j].transpose();
    off += w;
  }
  CHECK((prob.coupling_form() - W).cwiseAbs().maxCoeff() == 0.0);

  // Reduced convention: only the applied first stage of each agent.
  CertificateProblem red = build_certificate_problem(bank, true);
  CHECK(red.reduced);
  for (int j = 0; j < 2; ++j) {
    const AffineVI& vi = bank.vi(j);
    const SignalLayout& L = vi.layout;
    CHECK(red.block_width[(size_t)j] == L.m[(size_t)j]);
    CHECK((red.B_hat[(size_t)j] - bank.dynamics().B[(size_t)j]).cwiseAbs().maxCoeff() == 0.0);
    Mat rows = vi.F_x.middleRows(L.agent_start(j), L.m[(size_t)j]);
    CHECK((red.F_x[(size_t)j] - rows).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("matrix inequality value matches its definition and is homogeneous") {
  testutil::Rng g(81);
  ControllerBank bank = coupled_bank();
  CertificateProblem prob = build_certificate_problem(bank, false);
  Mat S = prob.successor_map();
  Mat E = prob.state_selector();
  Mat W = prob.coupling_form();
  for (int trial = 0; trial < 5; ++trial) {
    Mat P = testutil::rand_psd(g, 2, 0.1, 1.0);
    double lambda = testutil::unif(g, 0.1, 3.0);
    Mat G = lmi_value(prob, P, lambda);
    Mat manual = S.transpose() * P * S - E.transpose() * P * E + lambda * W;
    CHECK((G - manual).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((G - G.transpose()).cwiseAbs().maxCoeff() == 0.0);

    double alpha = 2.75;
    Mat scaled = lmi_value(prob, Mat(alpha * P), alpha * lambda);
    CHECK((scaled - alpha * G).cwiseAbs().maxCoeff() <= 1e-10);
  }
}

TEST_CASE("top eigenvalue of the inequality is midpoint convex") {
  testutil::Rng g(82);
  ControllerBank bank = coupled_bank();
  CertificateProblem prob = build_certificate_problem(bank, false);
  auto top = [&](const Mat& P, double l) {
    Eigen::SelfAdjointEigenSolver<Mat> es(lmi_value(prob, P, l));
    return es.eigenvalues().maxCoeff();
  };
  for (int trial = 0; trial < 20; ++trial) {
    Mat P1 = testutil::rand_psd(g, 2, 0.05, 1.0);
    Mat P2 = testutil::rand_psd(g, 2, 0.05, 1.0);
    double l1 = testutil::unif(g, 0.05, 2.0), l2 = testutil::unif(g, 0.05, 2.0);
    double mid = top(Mat(0.5 * (P1 + P2)), 0.5 * (l1 + l2));
    CHECK(mid <= 0.5 * (top(P1, l1) + top(P2, l2)) + 1e-9);
  }
}

TEST_CASE("contractive decoupled problem certifies and re-verifies") {
  CertificateProblem prob = contractive_toy(0.5);
  CertifySearchResult res = find_certificate(prob);
  REQUIRE(res.verdict == CertifyVerdict::Certified);
  REQUIRE(res.certificate.has_value());
  const StabilityCertificate& cert = *res.certificate;
  CHECK(cert.epsilon >= CertifyOptions{}.epsilon_target);
  CHECK(res.best_value <= -0.3);

  CertificateCheck chk = verify_certificate(prob, cert);
  CHECK(chk.ok());
  CHECK(chk.p_positive);
  CHECK(chk.lmi_holds);
  CHECK(chk.max_eig_with_eps <= 1e-9);
  CHECK(chk.lambda_min_P >= CertifyOptions{}.delta_P * (1.0 - 1e-6));

  // The search is deterministic.
  CertifySearchResult again = find_certificate(prob);
  CHECK(again.iterations == res.iterations);
  CHECK(again.best_value == res.best_value);
  CHECK((again.best_P - res.best_P).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("verifier rejects tampered certificates") {
  CertificateProblem prob = contractive_toy(0.5);
  CertifySearchResult res = find_certificate(prob);
  REQUIRE(res.certificate.has_value());

  StabilityCertificate negated = *res.certificate;
  negated.P = -negated.P;
  CHECK(!verify_certificate(prob, negated).p_positive);
  CHECK(!verify_certificate(prob, negated).ok());

  StabilityCertificate inflated = *res.certificate;
  inflated.epsilon += 10.0;
  CHECK(!verify_certificate(prob, inflated).lmi_holds);

  StabilityCertificate no_lambda = *res.certificate;
  no_lambda.lambda = 0.0;
  CHECK(!verify_certificate(prob, no_lambda).p_positive);
}

TEST_CASE("expanding decoupled problem reads as likely infeasible") {
  CertificateProblem prob = contractive_toy(1.5);
  CertifyOptions opts;
  opts.max_iter = 5000;
  CertifySearchResult res = find_certificate(prob, opts);
  CHECK(res.verdict == CertifyVerdict::LikelyInfeasible);
  CHECK(!res.certificate.has_value());
  // lambda_max(2.25 P - P) >= 1.25 under the trace normalization.
  CHECK(res.best_value >= 1.25 - 1e-6);
}

TEST_CASE("coupled heterogeneous bank earns a verified certificate") {
  ControllerBank bank = coupled_bank();
  CertificateProblem prob = build_certificate_problem(bank, false);
  CertifySearchResult res = find_certificate(prob);
  REQUIRE(res.verdict == CertifyVerdict::Certified);
  REQUIRE(res.certificate.has_value());
  CertificateCheck chk = verify_certificate(prob, *res.certificate);
  CHECK(chk.ok());

  // P enters only through its symmetric part, so the certificate is one.
  CHECK((res.certificate->P - res.certificate->P.transpose()).cwiseAbs().maxCoeff() <= 1e-12);
}
