#pragma once

#include "mpg_lab/polytope.hpp"
#include "mpg_lab/types.hpp"

#include <memory>
#include <vector>

namespace mpg {

/// Discrete-time linear dynamics x+ = A x + sum_i B_i u_i.
struct Dynamics {
  Mat A;
  std::vector<Mat> B;

  static Dynamics create(Mat A, std::vector<Mat> B);

  Index state_dim() const { return A.rows(); }
  int num_agents() const { return (int)B.size(); }
  Index input_dim(int i) const { return B[(size_t)i].cols(); }
  Index total_input_dim() const;
  /// [B_1 ... B_n], maps the per-stage joint input to the state update.
  Mat joint_B() const;
};

/// Quadratic stage cost x'Q x + q'x + u'R u over the joint per-stage input
/// u. Q and R are symmetrized on ingest; the worst asymmetry found is kept
/// so callers can surface suspicious inputs.
struct StageCost {
  Mat Q;
  Vec q;
  Mat R;
  double asymmetry = 0.0;

  static StageCost create(Mat Q, Vec q, Mat R);
  static StageCost zero(Index state_dim, Index input_dim);
};

/// Basis of stage costs with a nonnegative weight vector; the represented
/// cost is the conic combination sum_k theta_k basis_k.
struct ParamCostBasis {
  std::vector<StageCost> basis;
  Vec theta;
};

/// Conic mixture of a cost basis. Negative weights are rejected (they can
/// destroy the convexity every downstream result relies on), as is an
/// all-zero weight vector.
StageCost mix_costs(const ParamCostBasis& basis);

/// One conjectured player cost: either a single fixed cost or a
/// theta-parameterized mixture over the owner's parameter vector.
struct CostEntry {
  std::vector<StageCost> basis;
  bool mixed = false;

  static CostEntry fixed(StageCost c);
  static CostEntry mixture(std::vector<StageCost> basis);
  StageCost at(const Vec& theta) const;
};

/// Agent j's private model of the whole game: one cost entry per player
/// (its own entry is its true objective), a shared horizon, and the
/// parameter vector feeding any mixed entries.
struct ConjectureSet {
  int owner = 0;
  int horizon = 1;
  std::vector<CostEntry> costs;
  Vec theta;

  static ConjectureSet create(int owner, int horizon, std::vector<CostEntry> costs,
                              Vec theta = Vec());
  StageCost effective_cost(int player) const;
  ConjectureSet with_theta(Vec t) const;
  Index theta_dim() const { return theta.size(); }
};

/// Stacked-horizon layout of the joint decision vector: agent-major, each
/// agent's block holding its stage-0..K-1 inputs contiguously.
struct SignalLayout {
  int horizon = 0;
  std::vector<Index> m;
  std::vector<Index> stage_offset;
  Index total_m = 0;

  static SignalLayout create(const Dynamics& dyn, int horizon);
  Index dim() const { return horizon * total_m; }
  Index agent_start(int i) const { return horizon * stage_offset[(size_t)i]; }
  Index agent_width(int i) const { return horizon * m[(size_t)i]; }
  Index coord(int i, int k, Index c) const {
    return agent_start(i) + (Index)k * m[(size_t)i] + c;
  }
  /// Joint per-stage input (agent blocks side by side) at stage k.
  Vec stage_slice(const Vec& u, int k) const;
  /// One-stage shift of every agent block with the last stage repeated;
  /// standard receding-horizon warm start.
  Vec shift_stages(const Vec& u) const;
};

/// Stacked prediction of the state trajectory: x_tilde = A_tilde x0 +
/// sum_i B_tilde_i u_tilde_i, with block row r holding x_r for r = 0..K.
struct PredictionMatrices {
  Mat A_tilde;
  std::vector<Mat> B_tilde;
  int horizon = 0;
};

PredictionMatrices build_prediction_matrices(const Dynamics& dyn, int horizon);

/// Affine variational inequality over a polytope: find u in Z with
/// (v - u)'(M u + f + F_x x) >= 0 for all v in Z. Encodes the first-order
/// conditions of one agent's conjectured finite-horizon game.
struct AffineVI {
  Mat M;
  Vec f;
  Mat F_x;
  std::shared_ptr<const Polytope> feasible;
  SignalLayout layout;
  double rho = 0.0;       // smallest eigenvalue of the symmetric part of M
  double lipschitz = 0.0; // operator norm of M

  Vec pseudo_gradient(const Vec& u, const Vec& x) const { return M * u + f + F_x * x; }
};

/// Raw affine pieces of a VI, used for parameter derivatives.
struct ViComponents {
  Mat M;
  Vec f;
  Mat F_x;
};

/// Assemble the affine VI of one agent's conjectured game. Rejects models
/// whose pseudo-gradient is not strongly monotone when require_monotone is
/// set, naming the offending eigenvalue.
AffineVI assemble_affine_vi(const ConjectureSet& conj, const Dynamics& dyn,
                            std::shared_ptr<const Polytope> feasible,
                            bool require_monotone = true);

/// Assembly plus the exact derivative of (M, f, F_x) in each entry of the
/// owner's theta. The VI is affine in theta, so the derivative of component
/// k is the assembly of the basis-k game with fixed entries zeroed.
struct ConjectureAssembly {
  AffineVI vi;
  std::vector<ViComponents> dtheta;
  ConjectureSet conjecture;
};

ConjectureAssembly assemble_with_theta(const ConjectureSet& conj, const Dynamics& dyn,
                                       std::shared_ptr<const Polytope> feasible);

/// Cost of a stacked input signal for one player under a stage cost,
/// evaluated by rolling the dynamics from x0 over the layout's horizon.
double horizon_cost(const Dynamics& dyn, const StageCost& cost, const SignalLayout& layout,
                    const Vec& u_stacked, const Vec& x0);

} // namespace mpg
