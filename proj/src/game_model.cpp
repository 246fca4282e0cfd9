#include "mpg_lab/game_model.hpp"

#include "mpg_lab/linalg.hpp"

#include <cmath>

namespace mpg {

Dynamics Dynamics::create(Mat A, std::vector<Mat> B) {
  if (A.rows() == 0 || A.rows() != A.cols()) throw SchemaError("dynamics: A must be square");
  if (B.empty()) throw SchemaError("dynamics: at least one agent is required");
  for (size_t i = 0; i < B.size(); ++i) {
    if (B[i].rows() != A.rows())
      throw SchemaError("dynamics: B_" + std::to_string(i + 1) + " row count disagrees with A");
    if (B[i].cols() < 1)
      throw SchemaError("dynamics: B_" + std::to_string(i + 1) + " has no input columns");
  }
  Dynamics d;
  d.A = std::move(A);
  d.B = std::move(B);
  return d;
}

Index Dynamics::total_input_dim() const {
  Index m = 0;
  for (const Mat& b : B) m += b.cols();
  return m;
}

Mat Dynamics::joint_B() const {
  Mat J(state_dim(), total_input_dim());
  Index c = 0;
  for (const Mat& b : B) {
    J.middleCols(c, b.cols()) = b;
    c += b.cols();
  }
  return J;
}

StageCost StageCost::create(Mat Q, Vec q, Mat R) {
  if (Q.rows() != Q.cols()) throw SchemaError("stage cost: Q must be square");
  if (R.rows() != R.cols()) throw SchemaError("stage cost: R must be square");
  if (q.size() != Q.rows()) throw SchemaError("stage cost: q length disagrees with Q");
  StageCost c;
  double aq = Q.size() > 0 ? (Q - Q.transpose()).cwiseAbs().maxCoeff() : 0.0;
  double ar = R.size() > 0 ? (R - R.transpose()).cwiseAbs().maxCoeff() : 0.0;
  c.asymmetry = std::max(aq, ar);
  c.Q = symmetric_part(Q);
  c.R = symmetric_part(R);
  c.q = std::move(q);
  return c;
}

StageCost StageCost::zero(Index state_dim, Index input_dim) {
  StageCost c;
  c.Q = Mat::Zero(state_dim, state_dim);
  c.q = Vec::Zero(state_dim);
  c.R = Mat::Zero(input_dim, input_dim);
  return c;
}

StageCost mix_costs(const ParamCostBasis& basis) {
  const Vec& theta = basis.theta;
  if (basis.basis.empty()) throw SchemaError("cost mixture: empty basis");
  if ((Index)basis.basis.size() != theta.size())
    throw SchemaError("cost mixture: weight count disagrees with basis size");
  for (Index k = 0; k < theta.size(); ++k)
    if (theta(k) < 0.0)
      throw SchemaError("cost mixture: negative weight at entry " + std::to_string(k) +
                        " (conic combinations only)");
  if (theta.size() > 0 && theta.maxCoeff() <= 0.0)
    throw SchemaError("cost mixture: weight vector is identically zero");
  const StageCost& first = basis.basis.front();
  Mat Q = Mat::Zero(first.Q.rows(), first.Q.cols());
  Vec q = Vec::Zero(first.q.size());
  Mat R = Mat::Zero(first.R.rows(), first.R.cols());
  for (size_t k = 0; k < basis.basis.size(); ++k) {
    const StageCost& b = basis.basis[k];
    if (b.Q.rows() != Q.rows() || b.R.rows() != R.rows())
      throw SchemaError("cost mixture: basis members have mismatched dimensions");
    Q += theta((Index)k) * b.Q;
    q += theta((Index)k) * b.q;
    R += theta((Index)k) * b.R;
  }
  StageCost out;
  out.Q = std::move(Q);
  out.q = std::move(q);
  out.R = std::move(R);
  return out;
}

CostEntry CostEntry::fixed(StageCost c) {
  CostEntry e;
  e.basis.push_back(std::move(c));
  e.mixed = false;
  return e;
}

CostEntry CostEntry::mixture(std::vector<StageCost> basis) {
  if (basis.empty()) throw SchemaError("cost entry: mixture needs a nonempty basis");
  CostEntry e;
  e.basis = std::move(basis);
  e.mixed = true;
  return e;
}

StageCost CostEntry::at(const Vec& theta) const {
  if (!mixed) return basis.front();
  ParamCostBasis b;
  b.basis = basis;
  b.theta = theta;
  return mix_costs(b);
}

ConjectureSet ConjectureSet::create(int owner, int horizon, std::vector<CostEntry> costs,
                                    Vec theta) {
  if (horizon < 1) throw SchemaError("conjecture set: horizon must be at least 1");
  if (costs.empty()) throw SchemaError("conjecture set: needs one cost entry per player");
  if (owner < 0 || owner >= (int)costs.size())
    throw SchemaError("conjecture set: owner index out of range");
  for (Index k = 0; k < theta.size(); ++k)
    if (theta(k) < 0.0) throw SchemaError("conjecture set: negative theta entry");
  for (size_t i = 0; i < costs.size(); ++i) {
    if (costs[i].mixed && (Index)costs[i].basis.size() != theta.size())
      throw SchemaError("conjecture set: mixed entry for player " + std::to_string(i + 1) +
                        " disagrees with theta dimension");
  }
  ConjectureSet c;
  c.owner = owner;
  c.horizon = horizon;
  c.costs = std::move(costs);
  c.theta = std::move(theta);
  return c;
}

StageCost ConjectureSet::effective_cost(int player) const {
  return costs[(size_t)player].at(theta);
}

ConjectureSet ConjectureSet::with_theta(Vec t) const {
  if (t.size() != theta.size()) throw SchemaError("conjecture set: theta dimension change");
  ConjectureSet c = *this;
  c.theta = std::move(t);
  return c;
}

SignalLayout SignalLayout::create(const Dynamics& dyn, int horizon) {
  if (horizon < 1) throw SchemaError("signal layout: horizon must be at least 1");
  SignalLayout L;
  L.horizon = horizon;
  Index off = 0;
  for (int i = 0; i < dyn.num_agents(); ++i) {
    L.m.push_back(dyn.input_dim(i));
    L.stage_offset.push_back(off);
    off += dyn.input_dim(i);
  }
  L.total_m = off;
  return L;
}

Vec SignalLayout::stage_slice(const Vec& u, int k) const {
  Vec s(total_m);
  for (size_t i = 0; i < m.size(); ++i)
    s.segment(stage_offset[i], m[i]) = u.segment(coord((int)i, k, 0), m[i]);
  return s;
}

Vec SignalLayout::shift_stages(const Vec& u) const {
  Vec s(u.size());
  for (size_t i = 0; i < m.size(); ++i) {
    for (int k = 0; k + 1 < horizon; ++k)
      s.segment(coord((int)i, k, 0), m[i]) = u.segment(coord((int)i, k + 1, 0), m[i]);
    s.segment(coord((int)i, horizon - 1, 0), m[i]) =
        u.segment(coord((int)i, horizon - 1, 0), m[i]);
  }
  return s;
}

PredictionMatrices build_prediction_matrices(const Dynamics& dyn, int horizon) {
  if (horizon < 1) throw SchemaError("prediction matrices: horizon must be at least 1");
  const Index mx = dyn.state_dim();
  const int K = horizon;
  PredictionMatrices pm;
  pm.horizon = K;

  std::vector<Mat> Apow((size_t)K + 1);
  Apow[0] = Mat::Identity(mx, mx);
  for (int r = 1; r <= K; ++r) Apow[(size_t)r] = dyn.A * Apow[(size_t)r - 1];

  pm.A_tilde = Mat((K + 1) * mx, mx);
  for (int r = 0; r <= K; ++r) pm.A_tilde.middleRows((Index)r * mx, mx) = Apow[(size_t)r];

  for (int i = 0; i < dyn.num_agents(); ++i) {
    const Mat& Bi = dyn.B[(size_t)i];
    const Index mi = Bi.cols();
    Mat Bt = Mat::Zero((K + 1) * mx, (Index)K * mi);
    for (int r = 1; r <= K; ++r)
      for (int c = 0; c < r && c < K; ++c)
        Bt.block((Index)r * mx, (Index)c * mi, mx, mi) = Apow[(size_t)(r - 1 - c)] * Bi;
    pm.B_tilde.push_back(std::move(Bt));
  }
  return pm;
}

namespace {

// Horizon-stacked cost pieces of one conjectured player cost: Q_hat is
// block diagonal with K copies of Q and a zero terminal block (the stage
// sum runs over k = 0..K-1, the terminal state carries no cost).
struct StackedCost {
  Mat Q_hat;
  Vec q_hat;
};

StackedCost stack_cost(const StageCost& g, Index mx, int K) {
  StackedCost s;
  s.Q_hat = Mat::Zero((K + 1) * mx, (K + 1) * mx);
  s.q_hat = Vec::Zero((K + 1) * mx);
  for (int k = 0; k < K; ++k) {
    s.Q_hat.block((Index)k * mx, (Index)k * mx, mx, mx) = g.Q;
    s.q_hat.segment((Index)k * mx, mx) = g.q;
  }
  return s;
}

// R restricted to the (i, l) agent blocks and tiled over stages.
Mat stage_tiled_R(const StageCost& g, const SignalLayout& L, int i, int l) {
  const Index mi = L.m[(size_t)i];
  const Index ml = L.m[(size_t)l];
  const int K = L.horizon;
  Mat out = Mat::Zero((Index)K * mi, (Index)K * ml);
  Mat blk = g.R.block(L.stage_offset[(size_t)i], L.stage_offset[(size_t)l], mi, ml);
  for (int k = 0; k < K; ++k) out.block((Index)k * mi, (Index)k * ml, mi, ml) = blk;
  return out;
}

// Shared assembly of the affine pieces for a full set of player costs.
ViComponents assemble_components(const std::vector<StageCost>& costs, const Dynamics& dyn,
                                 const SignalLayout& L, const PredictionMatrices& pm) {
  const Index mx = dyn.state_dim();
  const int n = dyn.num_agents();
  const int K = L.horizon;
  ViComponents out;
  out.M = Mat::Zero(L.dim(), L.dim());
  out.f = Vec::Zero(L.dim());
  out.F_x = Mat::Zero(L.dim(), mx);

  for (int i = 0; i < n; ++i) {
    StackedCost sc = stack_cost(costs[(size_t)i], mx, K);
    const Mat& Bti = pm.B_tilde[(size_t)i];
    Mat BtQ = Bti.transpose() * sc.Q_hat;
    for (int l = 0; l < n; ++l) {
      Mat blk = 2.0 * (BtQ * pm.B_tilde[(size_t)l] + stage_tiled_R(costs[(size_t)i], L, i, l));
      out.M.block(L.agent_start(i), L.agent_start(l), L.agent_width(i), L.agent_width(l)) = blk;
    }
    out.f.segment(L.agent_start(i), L.agent_width(i)) = Bti.transpose() * sc.q_hat;
    out.F_x.middleRows(L.agent_start(i), L.agent_width(i)) = 2.0 * (BtQ * pm.A_tilde);
  }
  return out;
}

std::vector<StageCost> effective_costs(const ConjectureSet& conj, const Dynamics& dyn) {
  if ((int)conj.costs.size() != dyn.num_agents())
    throw SchemaError("conjecture set: one cost entry per player is required");
  std::vector<StageCost> cs;
  for (int i = 0; i < dyn.num_agents(); ++i) {
    StageCost g = conj.effective_cost(i);
    if (g.Q.rows() != dyn.state_dim())
      throw SchemaError("conjecture set: Q dimension disagrees with the state");
    if (g.R.rows() != dyn.total_input_dim())
      throw SchemaError("conjecture set: R must cover the joint input");
    cs.push_back(std::move(g));
  }
  return cs;
}

} // namespace

AffineVI assemble_affine_vi(const ConjectureSet& conj, const Dynamics& dyn,
                            std::shared_ptr<const Polytope> feasible, bool require_monotone) {
  SignalLayout L = SignalLayout::create(dyn, conj.horizon);
  if (feasible && feasible->dim() != L.dim())
    throw SchemaError("affine vi: feasible set dimension disagrees with the stacked signal");
  PredictionMatrices pm = build_prediction_matrices(dyn, conj.horizon);
  ViComponents c = assemble_components(effective_costs(conj, dyn), dyn, L, pm);

  AffineVI vi;
  vi.M = std::move(c.M);
  vi.f = std::move(c.f);
  vi.F_x = std::move(c.F_x);
  vi.feasible = std::move(feasible);
  vi.layout = std::move(L);
  vi.rho = lambda_min_sym(vi.M);
  vi.lipschitz = operator_norm(vi.M);
  if (require_monotone && vi.rho <= 0.0)
    throw AssumptionError(
        "affine vi: pseudo-gradient is not strongly monotone (smallest symmetric-part "
        "eigenvalue " +
        std::to_string(vi.rho) + ")");
  return vi;
}

ConjectureAssembly assemble_with_theta(const ConjectureSet& conj, const Dynamics& dyn,
                                       std::shared_ptr<const Polytope> feasible) {
  ConjectureAssembly out;
  out.vi = assemble_affine_vi(conj, dyn, std::move(feasible));
  out.conjecture = conj;
  PredictionMatrices pm = build_prediction_matrices(dyn, conj.horizon);
  for (Index k = 0; k < conj.theta_dim(); ++k) {
    std::vector<StageCost> cs;
    for (int i = 0; i < dyn.num_agents(); ++i) {
      const CostEntry& e = conj.costs[(size_t)i];
      if (e.mixed)
        cs.push_back(e.basis[(size_t)k]);
      else
        cs.push_back(StageCost::zero(dyn.state_dim(), dyn.total_input_dim()));
    }
    out.dtheta.push_back(assemble_components(cs, dyn, out.vi.layout, pm));
  }
  return out;
}

double horizon_cost(const Dynamics& dyn, const StageCost& cost, const SignalLayout& layout,
                    const Vec& u_stacked, const Vec& x0) {
  if (u_stacked.size() != layout.dim()) throw SchemaError("horizon cost: signal length mismatch");
  if (x0.size() != dyn.state_dim()) throw SchemaError("horizon cost: state length mismatch");
  Mat B = dyn.joint_B();
  Vec x = x0;
  double J = 0.0;
  for (int k = 0; k < layout.horizon; ++k) {
    Vec uk = layout.stage_slice(u_stacked, k);
    J += x.dot(cost.Q * x) + cost.q.dot(x) + uk.dot(cost.R * uk);
    x = dyn.A * x + B * uk;
  }
  return J;
}

} // namespace mpg
