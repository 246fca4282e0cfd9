#include "mpg_lab/lp.hpp"

#include <cmath>
#include <limits>
#include <vector>

namespace mpg {

namespace {

constexpr double kPivotEps = 1e-11;
constexpr double kReducedCostEps = 1e-9;

struct Tableau {
  Mat T;                    // rows x (ncols + 1), last column is the rhs
  std::vector<Index> basic; // basic[i] = column basic in row i

  Index rows() const { return T.rows(); }
  Index rhs() const { return T.cols() - 1; }

  void pivot(Index pr, Index pc) {
    T.row(pr) /= T(pr, pc);
    for (Index i = 0; i < rows(); ++i) {
      if (i == pr) continue;
      double a = T(i, pc);
      if (a != 0.0) T.row(i) -= a * T.row(pr);
    }
    basic[pr] = pc;
  }
};

// Reduced-cost row for cost vector c over columns [0, ncols).
Eigen::RowVectorXd reduced_costs(const Tableau& tb, const Vec& c, Index ncols) {
  Eigen::RowVectorXd r = Eigen::RowVectorXd::Zero(tb.T.cols());
  r.head(ncols) = c.transpose();
  for (Index i = 0; i < tb.rows(); ++i) {
    Index b = tb.basic[i];
    double cb = b < ncols ? c(b) : 0.0;
    if (cb != 0.0) r -= cb * tb.T.row(i);
  }
  return r;
}

// Bland entering rule over columns [0, ncols). Returns -1 at optimality.
Index entering_column(const Eigen::RowVectorXd& r, Index ncols) {
  for (Index j = 0; j < ncols; ++j)
    if (r(j) < -kReducedCostEps) return j;
  return -1;
}

// Ratio test with Bland tie-breaking. Returns -1 when the column is
// nonpositive, i.e. the direction is a recession ray.
Index leaving_row(const Tableau& tb, Index pc) {
  Index pr = -1;
  double best = std::numeric_limits<double>::infinity();
  for (Index i = 0; i < tb.rows(); ++i) {
    double a = tb.T(i, pc);
    if (a <= kPivotEps) continue;
    double ratio = tb.T(i, tb.rhs()) / a;
    if (ratio < best - 1e-12 ||
        (ratio < best + 1e-12 && (pr < 0 || tb.basic[i] < tb.basic[pr]))) {
      best = ratio;
      pr = i;
    }
  }
  return pr;
}

enum class RunStatus { Optimal, Unbounded };

RunStatus run_simplex(Tableau& tb, const Vec& c, Index ncols, Index* unbounded_col) {
  for (;;) {
    Eigen::RowVectorXd r = reduced_costs(tb, c, ncols);
    Index pc = entering_column(r, ncols);
    if (pc < 0) return RunStatus::Optimal;
    Index pr = leaving_row(tb, pc);
    if (pr < 0) {
      if (unbounded_col) *unbounded_col = pc;
      return RunStatus::Unbounded;
    }
    tb.pivot(pr, pc);
  }
}

} // namespace

LpResult solve_lp(const Vec& c, const Mat& C, const Vec& d, const Mat& H, const Vec& h) {
  const Index n = c.size();
  const Index p = C.rows();
  const Index r = H.rows();
  const Index m = p + r;
  const Index nslack = p;
  const Index nstruct = 2 * n + nslack; // x+ | x- | slack
  const Index ncols = nstruct + m;      // + artificials

  if (p > 0 && C.cols() != n) throw SchemaError("lp: inequality matrix has wrong column count");
  if (r > 0 && H.cols() != n) throw SchemaError("lp: equality matrix has wrong column count");
  if (d.size() != p || h.size() != r) throw SchemaError("lp: right-hand side length mismatch");

  Tableau tb;
  tb.T = Mat::Zero(m, ncols + 1);
  tb.basic.resize(m);
  for (Index i = 0; i < p; ++i) {
    tb.T.block(i, 0, 1, n) = C.row(i);
    tb.T.block(i, n, 1, n) = -C.row(i);
    tb.T(i, 2 * n + i) = 1.0;
    tb.T(i, ncols) = d(i);
  }
  for (Index i = 0; i < r; ++i) {
    tb.T.block(p + i, 0, 1, n) = H.row(i);
    tb.T.block(p + i, n, 1, n) = -H.row(i);
    tb.T(p + i, ncols) = h(i);
  }
  for (Index i = 0; i < m; ++i) {
    if (tb.T(i, ncols) < 0.0) tb.T.row(i) = -tb.T.row(i);
    tb.T(i, nstruct + i) = 1.0;
    tb.basic[i] = nstruct + i;
  }

  // Phase 1: minimize the sum of artificials.
  Vec c1 = Vec::Zero(ncols);
  c1.tail(m).setOnes();
  run_simplex(tb, c1, ncols, nullptr);

  double infeas = 0.0;
  for (Index i = 0; i < tb.rows(); ++i)
    if (tb.basic[i] >= nstruct) infeas += tb.T(i, tb.rhs());
  double scale = 1.0;
  if (d.size() > 0) scale = std::max(scale, d.cwiseAbs().maxCoeff());
  if (h.size() > 0) scale = std::max(scale, h.cwiseAbs().maxCoeff());
  LpResult res;
  if (infeas > 1e-9 * scale) {
    res.status = LpResult::Status::Infeasible;
    return res;
  }

  // Drive remaining artificials out of the basis; rows that admit no pivot
  // are redundant and are dropped.
  std::vector<Index> keep;
  for (Index i = 0; i < tb.rows(); ++i) {
    if (tb.basic[i] < nstruct) {
      keep.push_back(i);
      continue;
    }
    Index pc = -1;
    for (Index j = 0; j < nstruct; ++j) {
      if (std::abs(tb.T(i, j)) > kPivotEps) {
        pc = j;
        break;
      }
    }
    if (pc >= 0) {
      tb.pivot(i, pc);
      keep.push_back(i);
    }
  }
  if ((Index)keep.size() != tb.rows()) {
    Mat T2(keep.size(), tb.T.cols());
    std::vector<Index> b2(keep.size());
    for (size_t k = 0; k < keep.size(); ++k) {
      T2.row(k) = tb.T.row(keep[k]);
      b2[k] = tb.basic[keep[k]];
    }
    tb.T = std::move(T2);
    tb.basic = std::move(b2);
  }

  // Phase 2 over structural columns only.
  Vec c2 = Vec::Zero(ncols);
  c2.head(n) = c;
  c2.segment(n, n) = -c;
  Index ub_col = -1;
  RunStatus st = run_simplex(tb, c2, nstruct, &ub_col);

  Vec z = Vec::Zero(nstruct);
  for (Index i = 0; i < tb.rows(); ++i)
    if (tb.basic[i] < nstruct) z(tb.basic[i]) = tb.T(i, tb.rhs());
  res.x = z.head(n) - z.segment(n, n);
  res.value = c.dot(res.x);

  if (st == RunStatus::Unbounded) {
    Vec ray_std = Vec::Zero(nstruct);
    ray_std(ub_col) = 1.0;
    for (Index i = 0; i < tb.rows(); ++i)
      if (tb.basic[i] < nstruct) ray_std(tb.basic[i]) = -tb.T(i, ub_col);
    Vec ray = ray_std.head(n) - ray_std.segment(n, n);
    double nr = ray.norm();
    res.ray = nr > 0 ? Vec(ray / nr) : ray;
    res.status = LpResult::Status::Unbounded;
    return res;
  }

  res.status = LpResult::Status::Optimal;
  return res;
}

} // namespace mpg
