#include "mpg_lab/sensitivity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace mpg {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

/// Rank of the stacked active inequality rows and equality rows, plus the
/// first row index whose addition does not increase the rank (the natural
/// offender to report). Row order: active C rows, then H rows.
struct RankProbe {
  Index rank = 0;
  Index rows = 0;
  Index dependent_row = -1; // position in the stacked order
};

RankProbe constraint_rank(const Mat& G, double rank_tol) {
  RankProbe probe;
  probe.rows = G.rows();
  if (G.rows() == 0) return probe;
  Eigen::JacobiSVD<Mat> svd(G);
  const double thresh = rank_tol * std::max(1.0, svd.singularValues()(0));
  probe.rank = (svd.singularValues().array() > thresh).count();
  if (probe.rank == probe.rows) return probe;

  // Grow row by row; the first row that fails to raise the rank is
  // dependent on its predecessors.
  Index have = 0;
  for (Index k = 0; k < G.rows(); ++k) {
    Mat head = G.topRows(k + 1);
    Eigen::JacobiSVD<Mat> s(head);
    double t = rank_tol * std::max(1.0, s.singularValues()(0));
    Index rk = (s.singularValues().array() > t).count();
    if (rk == have) {
      probe.dependent_row = k;
      break;
    }
    have = rk;
  }
  return probe;
}

} // namespace

KktPoint make_kkt_point(const AffineVI& vi, const VgneSolution& sol, const Vec& x,
                        const SensOptions& opts) {
  const Polytope& Z = *vi.feasible;
  const Mat& C = Z.C();
  const Vec& d = Z.d();
  const Mat& H = Z.H();
  const Index p = Z.num_inequalities();
  const Index r = Z.num_equalities();

  KktPoint pt;
  pt.u = sol.u;
  pt.nu = sol.nu.size() == p ? sol.nu : Vec::Zero(p);
  pt.mu = sol.mu.size() == r ? sol.mu : Vec::Zero(r);
  pt.x = x;

  const double act_scale = 1.0 + (p > 0 ? d.cwiseAbs().maxCoeff() : 0.0);
  const double act_tol = opts.active_tol * act_scale;

  Vec slack = p > 0 ? Vec(d - C * pt.u) : Vec();
  pt.min_active_multiplier = kInf;
  pt.min_inactive_slack = kInf;
  for (Index k = 0; k < p; ++k) {
    if (std::abs(slack(k)) <= act_tol) {
      pt.active.push_back(k);
      pt.min_active_multiplier = std::min(pt.min_active_multiplier, pt.nu(k));
    } else {
      pt.min_inactive_slack = std::min(pt.min_inactive_slack, slack(k));
    }
  }

  // Stacked residual of the stationarity, equality, and complementarity
  // conditions, plus the sign conditions that are not part of the map.
  Vec stat = vi.pseudo_gradient(pt.u, x);
  if (p > 0) stat += C.transpose() * pt.nu;
  if (r > 0) stat += H.transpose() * pt.mu;
  double res2 = stat.squaredNorm();
  if (r > 0) res2 += (H * pt.u - Z.h()).squaredNorm();
  for (Index k = 0; k < p; ++k) {
    double comp = pt.nu(k) * (-slack(k));
    res2 += comp * comp;
  }
  pt.kkt_residual = std::sqrt(res2);

  double worst_violation = 0.0;
  for (Index k = 0; k < p; ++k) worst_violation = std::max(worst_violation, -slack(k));
  if (pt.kkt_residual > opts.kkt_tol)
    throw SolverError("kkt point: residual " + fmt(pt.kkt_residual) + " exceeds " +
                      fmt(opts.kkt_tol));
  if (worst_violation > act_tol)
    throw SolverError("kkt point: primal infeasibility " + fmt(worst_violation));
  if (p > 0 && pt.nu.minCoeff() < -opts.kkt_tol)
    throw SolverError("kkt point: negative inequality multiplier " + fmt(pt.nu.minCoeff()));

  pt.strict_ok = pt.min_active_multiplier >= opts.strict_tol;

  Mat G(pt.active.size() + (size_t)r, pt.u.size());
  for (size_t k = 0; k < pt.active.size(); ++k) G.row((Index)k) = C.row(pt.active[k]);
  if (r > 0) G.bottomRows(r) = H;
  RankProbe probe = constraint_rank(G, opts.rank_tol);
  pt.licq_ok = probe.rank == probe.rows;
  return pt;
}

KktJacobians kkt_jacobians(const KktPoint& point, const AffineVI& vi,
                           const std::vector<ViComponents>& theta_basis,
                           const SensOptions& opts) {
  const Polytope& Z = *vi.feasible;
  const Mat& C = Z.C();
  const Vec& d = Z.d();
  const Mat& H = Z.H();
  const Index N = point.u.size();
  const Index p = Z.num_inequalities();
  const Index r = Z.num_equalities();

  if (!point.strict_ok) {
    Index offender = -1;
    for (Index k : point.active)
      if (point.nu(k) < opts.strict_tol) {
        offender = k;
        break;
      }
    throw RegularityError("strict complementarity fails: inequality row " +
                          std::to_string(offender) + " is active with multiplier " +
                          fmt(offender >= 0 ? point.nu(offender) : 0.0));
  }
  if (!point.licq_ok) {
    Mat G(point.active.size() + (size_t)r, N);
    for (size_t k = 0; k < point.active.size(); ++k) G.row((Index)k) = C.row(point.active[k]);
    if (r > 0) G.bottomRows(r) = H;
    RankProbe probe = constraint_rank(G, opts.rank_tol);
    std::string row_name;
    if (probe.dependent_row >= 0 && probe.dependent_row < (Index)point.active.size())
      row_name = "inequality row " + std::to_string(point.active[(size_t)probe.dependent_row]);
    else if (probe.dependent_row >= 0)
      row_name = "equality row " + std::to_string(probe.dependent_row - (Index)point.active.size());
    else
      row_name = "an active row";
    throw RegularityError("licq fails: active constraint gradients have rank " +
                          std::to_string(probe.rank) + " of " + std::to_string(probe.rows) +
                          " rows; " + row_name + " is dependent on its predecessors");
  }

  KktJacobians J;
  const Index total = N + p + r;
  J.dp = Mat::Zero(total, total);
  J.dp.topLeftCorner(N, N) = vi.M;
  if (p > 0) {
    J.dp.block(0, N, N, p) = C.transpose();
    Vec slack_signed = C * point.u - d;
    for (Index k = 0; k < p; ++k) {
      J.dp.row(N + r + k).head(N) = point.nu(k) * C.row(k);
      J.dp(N + r + k, N + k) = slack_signed(k);
    }
  }
  if (r > 0) {
    J.dp.block(0, N + p, N, r) = H.transpose();
    J.dp.block(N, 0, r, N) = H;
  }

  J.dx = Mat::Zero(total, vi.F_x.cols());
  J.dx.topRows(N) = vi.F_x;

  J.dtheta = Mat::Zero(total, (Index)theta_basis.size());
  for (size_t k = 0; k < theta_basis.size(); ++k) {
    const ViComponents& b = theta_basis[k];
    J.dtheta.col((Index)k).head(N) = b.M * point.u + b.f + b.F_x * point.x;
  }
  return J;
}

PredictionSensitivity prediction_sensitivity(const KktPoint& point, const AffineVI& vi,
                                             const std::vector<ViComponents>& theta_basis,
                                             const SensOptions& opts) {
  KktJacobians J = kkt_jacobians(point, vi, theta_basis, opts);
  const Index N = point.u.size();

  Eigen::JacobiSVD<Mat> svd(J.dp, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vec& sv = svd.singularValues();
  double smin = sv(sv.size() - 1);
  double cond = smin > 0.0 ? sv(0) / smin : kInf;
  if (!(cond < opts.max_condition))
    throw RegularityError("kkt jacobian is ill-conditioned: condition " + fmt(cond) +
                          " exceeds " + fmt(opts.max_condition));

  PredictionSensitivity out;
  out.condition = cond;
  out.point = point;
  Mat dx_full = svd.solve(J.dx);
  Mat dth_full = J.dtheta.cols() > 0 ? Mat(svd.solve(J.dtheta)) : Mat(J.dp.rows(), 0);
  out.du_dx = -dx_full.topRows(N);
  out.du_dtheta = -dth_full.topRows(N);
  return out;
}

ActionJacobian realized_action_jacobian(ControllerBank& bank, const Vec& x,
                                        const std::vector<VgneSolution>& sols,
                                        const SensOptions& opts, int threads) {
  const Dynamics& dyn = bank.dynamics();
  const int n = bank.num_agents();
  const Index n_x = dyn.state_dim();
  const Index m = dyn.total_input_dim();

  ActionJacobian out;
  out.agents.resize((size_t)n);
  // Per-agent prediction Jacobians; independent problems, so the parallel
  // path mirrors the serial one with errors collected per agent.
  std::vector<std::exception_ptr> errs((size_t)n);
  if (threads > 1) {
#pragma omp parallel for num_threads(threads) schedule(static)
    for (int j = 0; j < n; ++j) {
      try {
        const ConjectureAssembly& a = bank.assembly(j);
        KktPoint pt = make_kkt_point(a.vi, sols[(size_t)j], x, opts);
        out.agents[(size_t)j] = prediction_sensitivity(pt, a.vi, a.dtheta, opts);
      } catch (...) {
        errs[(size_t)j] = std::current_exception();
      }
    }
  } else {
    for (int j = 0; j < n; ++j) {
      try {
        const ConjectureAssembly& a = bank.assembly(j);
        KktPoint pt = make_kkt_point(a.vi, sols[(size_t)j], x, opts);
        out.agents[(size_t)j] = prediction_sensitivity(pt, a.vi, a.dtheta, opts);
      } catch (...) {
        errs[(size_t)j] = std::current_exception();
      }
    }
  }
  for (int j = 0; j < n; ++j)
    if (errs[(size_t)j])
      rethrow_with_context(errs[(size_t)j], "agent " + std::to_string(j) + ": ");

  out.theta_offset.assign((size_t)n + 1, 0);
  for (int j = 0; j < n; ++j)
    out.theta_offset[(size_t)j + 1] =
        out.theta_offset[(size_t)j] + (Index)bank.assembly(j).dtheta.size();
  const Index n_theta = out.theta_offset[(size_t)n];

  out.du_bar_dx = Mat::Zero(m, n_x);
  out.du_bar_dtheta = Mat::Zero(m, n_theta);
  for (int j = 0; j < n; ++j) {
    const SignalLayout& L = bank.assembly(j).vi.layout;
    const Index mj = L.m[(size_t)j];
    const Index dst = L.stage_offset[(size_t)j];
    const Index src = L.coord(j, 0, 0);
    out.du_bar_dx.middleRows(dst, mj) = out.agents[(size_t)j].du_dx.middleRows(src, mj);
    if (out.agents[(size_t)j].du_dtheta.cols() > 0)
      out.du_bar_dtheta.block(dst, out.theta_offset[(size_t)j], mj,
                              out.agents[(size_t)j].du_dtheta.cols()) =
          out.agents[(size_t)j].du_dtheta.middleRows(src, mj);
  }
  return out;
}

SensitivityReport equilibrium_sensitivity(ControllerBank& bank, const Vec& x_star,
                                          const SensOptions& opts, int threads) {
  const Dynamics& dyn = bank.dynamics();
  const Index n_x = dyn.state_dim();

  auto sols = bank.solve_all(x_star, threads);
  Vec u_bar = bank.realized_action(sols);
  SensitivityReport rep;
  rep.equilibrium_residual = (x_star - (dyn.A * x_star + dyn.joint_B() * u_bar)).norm();
  if (rep.equilibrium_residual > opts.equilibrium_tol)
    throw SolverError("equilibrium sensitivity: state is not an equilibrium (residual " +
                      fmt(rep.equilibrium_residual) + " exceeds " + fmt(opts.equilibrium_tol) +
                      ")");

  Eigen::FullPivLU<Mat> lu(Mat::Identity(n_x, n_x) - dyn.A);
  if (!lu.isInvertible())
    throw RegularityError("equilibrium sensitivity: I - A is singular");
  rep.T = lu.solve(dyn.joint_B());

  rep.actions = realized_action_jacobian(bank, x_star, sols, opts, threads);

  Mat closure = Mat::Identity(n_x, n_x) - rep.T * rep.actions.du_bar_dx;
  Eigen::JacobiSVD<Mat> svd(closure, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vec& sv = svd.singularValues();
  double smin = sv(sv.size() - 1);
  rep.closure_condition = smin > 0.0 ? sv(0) / smin : kInf;
  if (!(rep.closure_condition < opts.max_condition))
    throw RegularityError("equilibrium sensitivity: I - T du/dx is ill-conditioned (condition " +
                          fmt(rep.closure_condition) + ")");
  rep.dx_star = svd.solve(rep.T * rep.actions.du_bar_dtheta);
  return rep;
}

} // namespace mpg
