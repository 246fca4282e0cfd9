#include "mpg_lab/vi_solver.hpp"

#include "mpg_lab/linalg.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <sstream>

namespace mpg {

double monotonicity_constant(const Mat& M) {
  return lambda_min_sym(M);
}

namespace {

double natural_residual(const AffineVI& vi, const Vec& u, const Vec& x) {
  Vec g = vi.pseudo_gradient(u, x);
  return (u - vi.feasible->project(u - g)).norm();
}

} // namespace

VgneSolution solve_vgne(const AffineVI& vi, const Vec& x, const SolverOptions& opts,
                        const Vec* warm_start) {
  if (!vi.feasible) throw SchemaError("vi solver: missing feasible set");
  if (x.size() != vi.F_x.cols()) throw SchemaError("vi solver: state dimension mismatch");
  if (vi.rho <= 0.0)
    throw SolverError("vi solver: map is not strongly monotone, fixed-step scheme undefined");

  const Polytope& Z = *vi.feasible;
  const double rho = vi.rho;
  const double L = vi.lipschitz;
  const double gamma = rho / (L * L);
  const double c2 = std::max(0.0, 1.0 - (rho * rho) / (L * L));
  const double contraction = std::sqrt(c2);
  // ||u_k - u*|| <= tail * ||u_k - u_{k-1}|| for a gamma-step contraction.
  const double tail = contraction < 1.0 ? contraction / (1.0 - contraction) : 0.0;

  VgneSolution sol;
  Vec u = warm_start ? Z.project(*warm_start) : Z.project(Vec::Zero(vi.layout.dim()));
  double step_norm = 0.0;
  for (long it = 1; it <= opts.max_iter; ++it) {
    Vec g = vi.pseudo_gradient(u, x);
    Vec un = Z.project(u - gamma * g);
    step_norm = (un - u).norm();
    u = std::move(un);
    sol.iterations = it;

    double bound = tail * step_norm;
    bool distance_ok = !opts.tighten_to_distance || bound <= opts.tol / rho;
    // step_norm / gamma bounds the unit-step natural residual from above,
    // so the extra projection is only spent when it can plausibly pass.
    if (step_norm <= gamma * opts.tol * 2.0 && distance_ok) {
      double r = natural_residual(vi, u, x);
      if (r <= opts.tol) {
        sol.residual = r;
        sol.distance_bound = bound;
        sol.u = u;
        recover_multipliers(vi, x, sol);
        return sol;
      }
    }
  }
  std::ostringstream ss;
  ss << "vi solver: iteration budget exhausted (last step " << step_norm
     << ", natural residual " << natural_residual(vi, u, x) << ", tolerance " << opts.tol
     << ")";
  throw SolverError(ss.str());
}

void recover_multipliers(const AffineVI& vi, const Vec& x, VgneSolution& sol) {
  const Polytope& Z = *vi.feasible;
  const Mat& C = Z.C();
  const Vec& d = Z.d();
  const Mat& H = Z.H();
  const Index p = C.rows();
  const Index r = H.rows();
  const Vec F = vi.pseudo_gradient(sol.u, x);

  const double act_tol = 1e-8 * (1.0 + (p > 0 ? d.cwiseAbs().maxCoeff() : 0.0));
  std::vector<Index> active;
  for (Index i = 0; i < p; ++i)
    if (C.row(i).dot(sol.u) - d(i) >= -act_tol) active.push_back(i);

  sol.nu = Vec::Zero(p);
  sol.mu = Vec::Zero(r);
  sol.licq_ok = true;

  for (;;) {
    const Index a = (Index)active.size();
    if (a + r == 0) {
      sol.active_set.clear();
      sol.stationarity = F.norm();
      return;
    }
    Mat G(a + r, sol.u.size());
    for (Index k = 0; k < a; ++k) G.row(k) = C.row(active[(size_t)k]);
    if (r > 0) G.bottomRows(r) = H;

    Eigen::JacobiSVD<Mat> svd(G);
    double smax = svd.singularValues().size() > 0 ? svd.singularValues()(0) : 0.0;
    Index rank = 0;
    for (Index k = 0; k < svd.singularValues().size(); ++k)
      if (svd.singularValues()(k) > 1e-9 * std::max(1.0, smax)) ++rank;
    bool licq = rank == a + r;

    // Minimum-norm least squares for F + G' lambda = 0.
    Vec lam = Mat(G.transpose()).completeOrthogonalDecomposition().solve(-F);

    Index drop = -1;
    double most_neg = -1e-10;
    for (Index k = 0; k < a; ++k) {
      if (lam(k) < most_neg) {
        most_neg = lam(k);
        drop = k;
      }
    }
    if (drop >= 0) {
      active.erase(active.begin() + drop);
      continue;
    }

    sol.licq_ok = licq;
    sol.nu.setZero();
    for (Index k = 0; k < a; ++k) sol.nu(active[(size_t)k]) = std::max(0.0, lam(k));
    if (r > 0) sol.mu = lam.tail(r);
    sol.active_set = active;
    std::sort(sol.active_set.begin(), sol.active_set.end());
    sol.stationarity = (F + G.transpose() * lam).norm();
    return;
  }
}

} // namespace mpg
