#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <Eigen/Eigenvalues>

#include "mpg_lab/game_model.hpp"
#include "mpg_lab/linalg.hpp"
#include "test_support.hpp"

using namespace mpg;

TEST_CASE("stacked prediction matrices reproduce the explicit rollout") {
  testutil::Rng g(41);
  for (int trial = 0; trial < 20; ++trial) {
    int n = 1 + trial % 3;
    std::vector<Index> m;
    for (int i = 0; i < n; ++i) m.push_back(1 + (trial + i) % 2);
    int K = 2 + trial % 3;
    testutil::RandomGame game = testutil::random_game(g, n, m, 2 + trial % 2, K);
    const Dynamics& dyn = game.dyn;
    SignalLayout L = SignalLayout::create(dyn, K);
    PredictionMatrices pm = build_prediction_matrices(dyn, K);

    Vec u = testutil::rand_vec(g, L.dim(), 2.0);
    Vec x0 = testutil::rand_vec(g, dyn.state_dim(), 2.0);
    Vec xt = pm.A_tilde * x0;
    for (int i = 0; i < n; ++i) {
      Vec ui = u.segment(L.agent_start(i), L.agent_width(i));
      xt += pm.B_tilde[(size_t)i] * ui;
    }
    Vec x = x0;
    Mat B = dyn.joint_B();
    for (int k = 0; k <= K; ++k) {
      CHECK((xt.segment((Index)k * dyn.state_dim(), dyn.state_dim()) - x).cwiseAbs().maxCoeff() <=
            1e-12);
      if (k < K) x = dyn.A * x + B * L.stage_slice(u, k);
    }
  }
}

TEST_CASE("pseudo-gradient assembly matches finite differences of the rollout cost") {
  testutil::Rng g(42);
  const double h = 1e-6;
  for (int trial = 0; trial < 100; ++trial) {
    int n = 1 + trial % 3;
    std::vector<Index> m;
    for (int i = 0; i < n; ++i) m.push_back(1 + (trial + i) % 2);
    int K = 2 + trial % 3;
    testutil::RandomGame game = testutil::random_game(g, n, m, 2, K);
    const Dynamics& dyn = game.dyn;

    for (int j = 0; j < n; ++j) {
      AffineVI vi = assemble_affine_vi(game.conjectures[(size_t)j], dyn, game.poly);
      const SignalLayout& L = vi.layout;
      Vec u = testutil::rand_vec(g, L.dim(), 1.5);
      Vec x = testutil::rand_vec(g, dyn.state_dim(), 1.5);
      Vec F = vi.pseudo_gradient(u, x);
      for (int i = 0; i < n; ++i) {
        StageCost gi = game.conjectures[(size_t)j].effective_cost(i);
        for (Index c = 0; c < L.agent_width(i); ++c) {
          Index coord = L.agent_start(i) + c;
          Vec up = u, um = u;
          up(coord) += h;
          um(coord) -= h;
          double fd = (testutil::rollout_cost(dyn, gi, L, up, x) -
                       testutil::rollout_cost(dyn, gi, L, um, x)) /
                      (2.0 * h);
          CHECK(std::abs(F(coord) - fd) <= 1e-5 * (1.0 + std::abs(fd)));
        }
      }
    }
  }
}

TEST_CASE("horizon cost agrees with an independent rollout evaluation") {
  testutil::Rng g(43);
  for (int trial = 0; trial < 30; ++trial) {
    testutil::RandomGame game = testutil::random_game(g, 2, {1, 2}, 2, 3);
    SignalLayout L = SignalLayout::create(game.dyn, 3);
    StageCost cost = game.conjectures[0].effective_cost(1);
    Vec u = testutil::rand_vec(g, L.dim(), 2.0);
    Vec x0 = testutil::rand_vec(g, 2, 2.0);
    double lib = horizon_cost(game.dyn, cost, L, u, x0);
    double ind = testutil::rollout_cost(game.dyn, cost, L, u, x0);
    CHECK(lib == doctest::Approx(ind).epsilon(1e-12));
  }
}

TEST_CASE("monotonicity constant is the smallest symmetric-part eigenvalue") {
  testutil::Rng g(44);
  for (int trial = 0; trial < 15; ++trial) {
    testutil::RandomGame game = testutil::random_game(g, 2, {1, 1}, 2, 3);
    AffineVI vi = assemble_affine_vi(game.conjectures[0], game.dyn, game.poly);
    Eigen::SelfAdjointEigenSolver<Mat> es(symmetric_part(vi.M));
    CHECK(vi.rho == doctest::Approx(es.eigenvalues().minCoeff()).epsilon(1e-10));
    CHECK(vi.lipschitz == doctest::Approx(operator_norm(vi.M)).epsilon(1e-12));
    CHECK(vi.rho > 0.0);
  }
}

TEST_CASE("assembly is affine in theta with the reported basis derivatives") {
  testutil::Rng g(45);
  Dynamics dyn = Dynamics::create(testutil::rand_stable(g, 2, 0.4),
                                  {testutil::rand_mat(g, 2, 1), testutil::rand_mat(g, 2, 1)});
  const Index m = 2;
  auto cost = [&](double scale) {
    return StageCost::create(testutil::rand_psd(g, 2, 0.1, scale), testutil::rand_vec(g, 2, scale),
                             testutil::rand_psd(g, m, 0.2, scale));
  };
  std::vector<CostEntry> entries;
  entries.push_back(CostEntry::fixed(cost(1.0)));
  entries.push_back(CostEntry::mixture({cost(1.0), cost(0.7)}));
  Vec th(2);
  th << 0.4, 0.6;
  ConjectureSet conj = ConjectureSet::create(1, 3, entries, th);

  ConjectureAssembly asm_a = assemble_with_theta(conj, dyn, nullptr);
  REQUIRE(asm_a.dtheta.size() == 2);
  Vec th2(2);
  th2 << 0.9, 0.3;
  ConjectureAssembly asm_b = assemble_with_theta(conj.with_theta(th2), dyn, nullptr);

  Vec dt = th2 - th;
  Mat dM = asm_b.vi.M - asm_a.vi.M;
  Vec df = asm_b.vi.f - asm_a.vi.f;
  Mat dFx = asm_b.vi.F_x - asm_a.vi.F_x;
  Mat dM_pred = dt(0) * asm_a.dtheta[0].M + dt(1) * asm_a.dtheta[1].M;
  Vec df_pred = dt(0) * asm_a.dtheta[0].f + dt(1) * asm_a.dtheta[1].f;
  Mat dFx_pred = dt(0) * asm_a.dtheta[0].F_x + dt(1) * asm_a.dtheta[1].F_x;
  CHECK((dM - dM_pred).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK((df - df_pred).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK((dFx - dFx_pred).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("conic mixtures reject negative and all-zero weights") {
  StageCost a = StageCost::create(Mat::Identity(2, 2), Vec::Zero(2), Mat::Identity(2, 2));
  ParamCostBasis basis;
  basis.basis = {a, a};
  basis.theta = Vec(2);
  basis.theta << 0.5, -0.1;
  CHECK_THROWS_AS(mix_costs(basis), SchemaError);
  basis.theta << 0.0, 0.0;
  CHECK_THROWS_AS(mix_costs(basis), SchemaError);
  basis.theta << 2.0, 1.0;
  StageCost mixed = mix_costs(basis);
  CHECK((mixed.Q - 3.0 * Mat::Identity(2, 2)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("stage cost ingest symmetrizes and records the asymmetry") {
  Mat Q(2, 2);
  Q << 1.0, 0.3, 0.1, 2.0;
  StageCost c = StageCost::create(Q, Vec::Zero(2), Mat::Identity(1, 1));
  CHECK(c.asymmetry == doctest::Approx(0.2).epsilon(1e-14));
  CHECK((c.Q - c.Q.transpose()).cwiseAbs().maxCoeff() == 0.0);
  CHECK(c.Q(0, 1) == doctest::Approx(0.2).epsilon(1e-14));
}

TEST_CASE("signal layout coordinates tile the stacked vector exactly once") {
  Dynamics dyn = Dynamics::create(Mat::Identity(2, 2) * 0.5,
                                  {Mat::Ones(2, 2), Mat::Ones(2, 1), Mat::Ones(2, 3)});
  int K = 4;
  SignalLayout L = SignalLayout::create(dyn, K);
  CHECK(L.dim() == (Index)K * 6);
  std::vector<int> hit((size_t)L.dim(), 0);
  for (int i = 0; i < 3; ++i)
    for (int k = 0; k < K; ++k)
      for (Index c = 0; c < L.m[(size_t)i]; ++c) hit[(size_t)L.coord(i, k, c)]++;
  for (int h : hit) CHECK(h == 1);

  // stage_slice pulls out the per-stage joint block, agents side by side.
  Vec u(L.dim());
  for (Index i = 0; i < u.size(); ++i) u(i) = (double)i;
  Vec s = L.stage_slice(u, 2);
  REQUIRE(s.size() == 6);
  for (int i = 0; i < 3; ++i)
    for (Index c = 0; c < L.m[(size_t)i]; ++c)
      CHECK(s(L.stage_offset[(size_t)i] + c) == (double)L.coord(i, 2, c));
}

TEST_CASE("stage shift drops the first stage and repeats the last") {
  Dynamics dyn = Dynamics::create(Mat::Identity(1, 1) * 0.5, {Mat::Ones(1, 2)});
  SignalLayout L = SignalLayout::create(dyn, 3);
  Vec u(6);
  u << 0, 1, 2, 3, 4, 5;
  Vec s = L.shift_stages(u);
  Vec want(6);
  want << 2, 3, 4, 5, 4, 5;
  CHECK((s - want).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("model construction rejects inconsistent shapes") {
  CHECK_THROWS_AS(Dynamics::create(Mat::Ones(2, 3), {Mat::Ones(2, 1)}), SchemaError);
  CHECK_THROWS_AS(Dynamics::create(Mat::Identity(2, 2), {Mat::Ones(3, 1)}), SchemaError);
  CHECK_THROWS_AS(Dynamics::create(Mat::Identity(2, 2), {}), SchemaError);
  CHECK_THROWS_AS(StageCost::create(Mat::Ones(2, 3), Vec::Zero(2), Mat::Ones(1, 1)), SchemaError);

  StageCost a = StageCost::create(Mat::Identity(2, 2), Vec::Zero(2), Mat::Identity(2, 2));
  std::vector<CostEntry> entries = {CostEntry::fixed(a), CostEntry::mixture({a, a})};
  // Mixed entry with a theta of the wrong dimension.
  CHECK_THROWS_AS(ConjectureSet::create(0, 3, entries, Vec::Ones(3)), SchemaError);
  ConjectureSet ok = ConjectureSet::create(0, 3, entries, Vec::Ones(2));
  CHECK_THROWS_AS(ok.with_theta(Vec::Ones(3)), SchemaError);

  // Non-monotone game: flip the action weight negative.
  StageCost bad =
      StageCost::create(Mat::Zero(2, 2), Vec::Zero(2), Mat(-Mat::Identity(2, 2)));
  std::vector<CostEntry> bad_entries = {CostEntry::fixed(bad), CostEntry::fixed(bad)};
  Dynamics dyn =
      Dynamics::create(Mat::Identity(2, 2) * 0.3, {Mat::Ones(2, 1), Mat::Ones(2, 1)});
  ConjectureSet bad_conj = ConjectureSet::create(0, 2, bad_entries);
  CHECK_THROWS_AS(assemble_affine_vi(bad_conj, dyn, nullptr), AssumptionError);
}
