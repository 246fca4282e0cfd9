#include "mpg_lab/polytope.hpp"

#include "mpg_lab/linalg.hpp"
#include "mpg_lab/lp.hpp"

#include <Eigen/QR>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

namespace mpg {

namespace {

constexpr long kDualMaxIter = 20000;
constexpr int kPolishPeriod = 10;

bool all_finite(const Vec& v) {
  return v.allFinite();
}

} // namespace

Polytope Polytope::from_rows(Mat C, Vec d, Mat H, Vec h) {
  Polytope z;
  Index n = C.cols() > 0 ? C.cols() : H.cols();
  if (n <= 0) throw SchemaError("polytope: cannot infer dimension from empty row sets");
  if (C.rows() != d.size()) throw SchemaError("polytope: inequality rows and bounds disagree");
  if (H.rows() != h.size()) throw SchemaError("polytope: equality rows and bounds disagree");
  if (C.rows() > 0 && C.cols() != n) throw SchemaError("polytope: inequality column count mismatch");
  if (H.rows() > 0 && H.cols() != n) throw SchemaError("polytope: equality column count mismatch");
  z.dim_ = n;
  z.C_ = C.rows() > 0 ? std::move(C) : Mat(0, n);
  z.d_ = std::move(d);
  z.H_ = H.rows() > 0 ? std::move(H) : Mat(0, n);
  z.h_ = std::move(h);
  z.probe_or_throw();
  return z;
}

Polytope Polytope::box(Vec lower, Vec upper) {
  return box_with_rows(std::move(lower), std::move(upper), Mat(), Vec(), Mat(), Vec());
}

Polytope Polytope::box_with_rows(Vec lower, Vec upper, Mat C_extra, Vec d_extra, Mat H, Vec h) {
  const Index n = lower.size();
  if (upper.size() != n || n == 0) throw SchemaError("polytope: box bound lengths disagree");
  if (!all_finite(lower) || !all_finite(upper))
    throw SchemaError("polytope: box bounds must be finite");
  for (Index i = 0; i < n; ++i)
    if (lower(i) > upper(i))
      throw SchemaError("polytope: box lower bound exceeds upper bound at coordinate " +
                        std::to_string(i));
  const Index pe = C_extra.rows();
  if (pe != d_extra.size()) throw SchemaError("polytope: extra rows and bounds disagree");
  if (pe > 0 && C_extra.cols() != n) throw SchemaError("polytope: extra row width mismatch");
  if (H.rows() != h.size()) throw SchemaError("polytope: equality rows and bounds disagree");
  if (H.rows() > 0 && H.cols() != n) throw SchemaError("polytope: equality column width mismatch");

  Mat C(2 * n + pe, n);
  Vec d(2 * n + pe);
  C.topRows(n) = -Mat::Identity(n, n);
  d.head(n) = -lower;
  C.middleRows(n, n) = Mat::Identity(n, n);
  d.segment(n, n) = upper;
  if (pe > 0) {
    C.bottomRows(pe) = C_extra;
    d.tail(pe) = d_extra;
  }

  Polytope z;
  z.dim_ = n;
  z.C_ = std::move(C);
  z.d_ = std::move(d);
  z.H_ = H.rows() > 0 ? std::move(H) : Mat(0, n);
  z.h_ = std::move(h);
  z.has_box_ = true;
  z.lo_ = std::move(lower);
  z.hi_ = std::move(upper);
  z.probe_or_throw();
  return z;
}

void Polytope::probe_or_throw() {
  const Index n = dim_;
  const Index p = C_.rows();
  // Chebyshev-style probe: maximize the slack margin t with Cu + ||C_i|| t <= d,
  // Hu = h, t <= 1. A nonnegative optimum certifies nonemptiness and yields
  // an interior-leaning feasible point.
  Mat Ca(p + 1, n + 1);
  Vec da(p + 1);
  Ca.setZero();
  for (Index i = 0; i < p; ++i) {
    Ca.block(i, 0, 1, n) = C_.row(i);
    Ca(i, n) = C_.row(i).norm();
    da(i) = d_(i);
  }
  Ca(p, n) = 1.0;
  da(p) = 1.0;
  Mat Ha;
  Vec ha;
  if (H_.rows() > 0) {
    Ha = Mat::Zero(H_.rows(), n + 1);
    Ha.leftCols(n) = H_;
    ha = h_;
  }
  Vec c = Vec::Zero(n + 1);
  c(n) = -1.0;
  LpResult lp = solve_lp(c, Ca, da, Ha, ha);
  double scale = 1.0;
  if (d_.size() > 0) scale += d_.cwiseAbs().maxCoeff();
  if (lp.status != LpResult::Status::Optimal || lp.x(n) < -1e-9 * scale)
    throw AssumptionError("polytope: constraint set is empty (feasibility probe failed)");
  probe_ = lp.x.head(n);
}

FeasibilityReport Polytope::is_feasible(const Vec& u, double tol) const {
  if (u.size() != dim_) throw SchemaError("polytope: point dimension mismatch");
  FeasibilityReport rep;
  rep.max_violation = -std::numeric_limits<double>::infinity();
  for (Index i = 0; i < C_.rows(); ++i) {
    double v = C_.row(i).dot(u) - d_(i);
    if (v > rep.max_violation) {
      rep.max_violation = v;
      rep.worst_row = i;
    }
  }
  for (Index j = 0; j < H_.rows(); ++j) {
    double v = std::abs(H_.row(j).dot(u) - h_(j));
    if (v > rep.max_violation) {
      rep.max_violation = v;
      rep.worst_row = C_.rows() + j;
    }
  }
  if (C_.rows() + H_.rows() == 0) rep.max_violation = 0.0;
  rep.feasible = rep.max_violation <= tol;
  return rep;
}

namespace {

// Exact KKT finishing step for the projection QP. Solves the
// equality-constrained projection onto the working rows, then accepts only
// if the full KKT system (stationarity, feasibility, sign, tightness)
// checks out.
struct PolishContext {
  const Mat& C;
  const Vec& d;
  const Mat& H;
  const Vec& h;
  const Vec& u;
  Vec row_tol; // per inequality row feasibility tolerance
  double eq_tol;
};

std::optional<std::pair<Vec, Vec>> try_polish(const PolishContext& ctx,
                                              std::vector<Index> working) {
  const Index n = ctx.u.size();
  const Index p = ctx.C.rows();
  const Index r = ctx.H.rows();
  const Index max_rounds = 3 * (p + 2);
  for (Index round = 0; round < max_rounds; ++round) {
    const Index a = (Index)working.size();
    Mat G(a + r, n);
    Vec rhs(a + r);
    for (Index k = 0; k < a; ++k) {
      G.row(k) = ctx.C.row(working[k]);
      rhs(k) = ctx.d(working[k]);
    }
    if (r > 0) {
      G.bottomRows(r) = ctx.H;
      rhs.tail(r) = ctx.h;
    }
    Vec lam;
    Vec y;
    if (G.rows() == 0) {
      y = ctx.u;
      lam = Vec();
    } else {
      Mat GG = G * G.transpose();
      Vec res = G * ctx.u - rhs;
      lam = GG.colPivHouseholderQr().solve(res);
      y = ctx.u - G.transpose() * lam;
    }

    // Dual sign: drop the most negative working multiplier and retry.
    Index drop = -1;
    double most_neg = -1e-11;
    for (Index k = 0; k < a; ++k) {
      if (lam(k) < most_neg) {
        most_neg = lam(k);
        drop = k;
      }
    }
    if (drop >= 0) {
      working.erase(working.begin() + drop);
      continue;
    }

    // Tightness of the working rows (consistency of the KKT solve).
    bool tight = true;
    if (G.rows() > 0) {
      Vec resid = G * y - rhs;
      for (Index k = 0; k < a; ++k)
        if (std::abs(resid(k)) > ctx.row_tol(working[k])) tight = false;
      for (Index j = 0; j < r; ++j)
        if (std::abs(resid(a + j)) > ctx.eq_tol) tight = false;
    }
    if (!tight) return std::nullopt;

    // Primal feasibility of every row; add the worst violator if any.
    Index add = -1;
    double worst = 0.0;
    for (Index i = 0; i < p; ++i) {
      double v = ctx.C.row(i).dot(y) - ctx.d(i);
      if (v > ctx.row_tol(i) && v > worst) {
        worst = v;
        add = i;
      }
    }
    if (add >= 0) {
      bool already = false;
      for (Index w : working)
        if (w == add) already = true;
      if (already) return std::nullopt;
      working.push_back(add);
      continue;
    }
    for (Index j = 0; j < r; ++j)
      if (std::abs(ctx.H.row(j).dot(y) - ctx.h(j)) > ctx.eq_tol) return std::nullopt;

    Vec nu = Vec::Zero(p);
    for (Index k = 0; k < a; ++k) nu(working[k]) = std::max(0.0, lam(k));
    return std::make_pair(y, nu);
  }
  return std::nullopt;
}

} // namespace

Vec Polytope::project(const Vec& u) const {
  if (u.size() != dim_) throw SchemaError("polytope: point dimension mismatch");
  if (pure_box()) return u.cwiseMax(lo_).cwiseMin(hi_);

  const Index p = C_.rows();
  const Index r = H_.rows();
  if (p + r == 0) return u;

  const double unorm = u.cwiseAbs().maxCoeff();
  PolishContext ctx{C_, d_, H_, h_, u, Vec(p), 0.0};
  for (Index i = 0; i < p; ++i) ctx.row_tol(i) = 1e-11 * (1.0 + std::abs(d_(i)) + unorm);
  double hmax = r > 0 ? h_.cwiseAbs().maxCoeff() : 0.0;
  ctx.eq_tol = 1e-11 * (1.0 + hmax + unorm);

  // Strictly feasible points project to themselves.
  {
    FeasibilityReport rep = is_feasible(u, 0.0);
    if (rep.feasible) return u;
  }

  Mat G(p + r, dim_);
  Vec g(p + r);
  if (p > 0) {
    G.topRows(p) = C_;
    g.head(p) = d_;
  }
  if (r > 0) {
    G.bottomRows(r) = H_;
    g.tail(r) = h_;
  }
  const double Ld = lambda_max_sym(G * G.transpose());
  if (Ld <= 0.0) return u; // only zero rows; feasibility was checked above
  const double step = 1.0 / Ld;

  // Accelerated dual ascent on the projection dual, with periodic exact
  // polish. Only polished (KKT-verified) points are ever returned.
  Vec lam = Vec::Zero(p + r);
  Vec lam_prev = lam;
  double tk = 1.0;
  for (long it = 1; it <= kDualMaxIter; ++it) {
    double tn = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * tk * tk));
    Vec z = lam + ((tk - 1.0) / tn) * (lam - lam_prev);
    if (p > 0) z.head(p) = z.head(p).cwiseMax(0.0);
    Vec y = u - G.transpose() * z;
    Vec grad = G * y - g;
    lam_prev = lam;
    lam = z + step * grad;
    if (p > 0) lam.head(p) = lam.head(p).cwiseMax(0.0);
    tk = tn;

    if (it % kPolishPeriod == 0 || it == kDualMaxIter) {
      Vec yc = u - G.transpose() * lam;
      std::vector<Index> working;
      for (Index i = 0; i < p; ++i) {
        double slack = d_(i) - C_.row(i).dot(yc);
        bool near = slack <= 1e-6 * (1.0 + std::abs(d_(i)) + unorm);
        if (lam(i) > 1e-12 || near) working.push_back(i);
      }
      if (auto res = try_polish(ctx, std::move(working))) return res->first;
    }
  }
  throw SolverError("polytope: projection did not converge within the iteration budget");
}

CompactnessReport Polytope::compactness_check() const {
  CompactnessReport rep;
  if (has_box_) {
    rep.compact = true;
    rep.via_box = true;
    rep.lower = lo_;
    rep.upper = hi_;
    return rep;
  }
  rep.lower = Vec::Constant(dim_, -std::numeric_limits<double>::infinity());
  rep.upper = Vec::Constant(dim_, std::numeric_limits<double>::infinity());
  for (Index i = 0; i < dim_; ++i) {
    for (int sgn : {+1, -1}) {
      Vec c = Vec::Zero(dim_);
      c(i) = sgn;
      LpResult lp = solve_lp(c, C_, d_, H_, h_);
      if (lp.status == LpResult::Status::Unbounded) {
        rep.compact = false;
        rep.unbounded_coordinate = i;
        rep.direction = sgn > 0 ? -1 : +1; // minimizing +e_i unbounded => below
        rep.recession = lp.ray;
        return rep;
      }
      if (lp.status != LpResult::Status::Optimal)
        throw SolverError("polytope: bound probe LP failed unexpectedly");
      if (sgn > 0)
        rep.lower(i) = lp.value;
      else
        rep.upper(i) = -lp.value;
    }
  }
  rep.compact = true;
  return rep;
}

} // namespace mpg
