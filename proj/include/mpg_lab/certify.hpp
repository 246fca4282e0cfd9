#pragma once

#include "mpg_lab/mpg.hpp"

#include <optional>
#include <vector>

namespace mpg {

/// Data of the closed-loop dissipation matrix inequality. The aggregate
/// vector is z = [x; u_1; ...; u_n] where u_j is agent j's stacked game
/// solution (full convention) or only its applied first stage (reduced
/// convention). Feasibility of lmi_value(P, lambda) <= -eps I together
/// with P > 0 certifies geometric decrease of (x - x_bar)' P (x - x_bar)
/// along the closed loop.
struct CertificateProblem {
  Mat A;
  std::vector<Mat> B_hat; // per agent: state update from that agent's block
  std::vector<Mat> F_x;   // per agent: state coupling rows of its game
  std::vector<double> rho;
  bool reduced = false;

  Index state_dim = 0;
  std::vector<Index> block_width;
  Index total_width = 0;

  /// [A, B_hat_1, ..., B_hat_n]; maps z to the successor state.
  Mat successor_map() const;
  /// [I, 0, ..., 0]; maps z to the current state.
  Mat state_selector() const;
  /// Monotonicity coupling form; block diagonal -rho_j I with
  /// -F_x^j / 2 couplings against the state block.
  Mat coupling_form() const;
};

CertificateProblem build_certificate_problem(const ControllerBank& bank, bool reduced = false);

/// S' P S - E' P E + lambda W, returned exactly symmetric.
Mat lmi_value(const CertificateProblem& prob, const Mat& P, double lambda);

struct StabilityCertificate {
  Mat P;
  double lambda = 0.0;
  double epsilon = 0.0;
  /// Largest eigenvalue of the certified block matrix shifted by epsilon;
  /// nonpositive up to verification tolerance for a valid certificate.
  double achieved_max_eig = 0.0;
};

enum class CertifyVerdict { Certified, Inconclusive, LikelyInfeasible };

struct CertifyOptions {
  double delta_P = 1e-6;      // floor on the eigenvalues of P
  double delta_lambda = 1e-8; // floor on lambda
  double epsilon_target = 1e-6;
  long max_iter = 50000;
  double infeasible_margin = 1e-9; // best value above this reads as infeasible
};

struct CertifySearchResult {
  CertifyVerdict verdict = CertifyVerdict::Inconclusive;
  std::optional<StabilityCertificate> certificate;
  double best_value = 0.0; // smallest max eigenvalue of the LMI seen
  Mat best_P;
  double best_lambda = 0.0;
  long iterations = 0;
};

/// Projected subgradient level method on (P, lambda), minimizing the top
/// eigenvalue of the LMI over {P >= delta_P I, trace P = state_dim,
/// lambda >= delta_lambda}. The trace normalization removes the scale
/// invariance of the inequality. Deterministic.
CertifySearchResult find_certificate(const CertificateProblem& prob,
                                     const CertifyOptions& opts = {});

struct CertificateCheck {
  bool p_positive = false;
  bool lmi_holds = false;
  double lambda_min_P = 0.0;
  double max_eig_with_eps = 0.0; // top eigenvalue of lmi_value + eps I
  bool ok() const { return p_positive && lmi_holds; }
};

/// Re-examines a certificate through an independent eigenvalue path
/// (Cholesky and power iteration rather than the direct solver).
CertificateCheck verify_certificate(const CertificateProblem& prob,
                                    const StabilityCertificate& cert,
                                    const CertifyOptions& opts = {});

} // namespace mpg
