#pragma once

#include "mpg_lab/types.hpp"

namespace mpg {

/// (M + M^T)/2, exactly symmetric in floating point.
Mat symmetric_part(const Mat& M);

/// Largest |eigenvalue| of a general square matrix.
double spectral_radius(const Mat& A);

/// Smallest eigenvalue of a symmetric matrix (symmetrized defensively).
double lambda_min_sym(const Mat& S);

/// Largest eigenvalue of a symmetric matrix (symmetrized defensively).
double lambda_max_sym(const Mat& S);

/// Largest singular value.
double operator_norm(const Mat& M);

/// Largest eigenvalue of a symmetric matrix by shifted power iteration.
/// Independent of the direct eigensolver path; used to cross-check
/// certificates. Accurate to roughly tol * ||S||.
double power_lambda_max(const Mat& S, double tol = 1e-12, long max_iter = 200000);

/// Smallest eigenvalue via power iteration on a spectral shift of S.
double power_lambda_min(const Mat& S, double tol = 1e-12, long max_iter = 200000);

/// True when S (symmetrized) admits a Cholesky factorization after the
/// shift S - margin * I, i.e. lambda_min(S) > margin up to factorization
/// tolerance.
bool cholesky_positive_definite(const Mat& S, double margin = 0.0);

} // namespace mpg
