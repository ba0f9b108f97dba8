#pragma once

#include <Eigen/Dense>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ca/lp.hpp"
#include "ca/model.hpp"
#include "ca/oracles.hpp"
#include "ca/rng.hpp"

namespace ca {

struct ConeProgramOptions {
  double eps = 2e-9;          // equality + splitting residual target
  double gap_eps = 1e-7;      // relative primal-dual gap target
  int max_iterations = 200000;
  double rho = 1.0;  // ADMM penalty, adapted during the solve
  // Plain splitting: over-relaxation destabilizes the mixed-cone iteration
  // on degenerate instances (stalls at 1e-3 residuals).
  double over_relax = 1.0;
};

// Dual point of the cone program in the appendix variable layout: u,p >= 0,
// one y per directed conflict edge (ordered as bidder_graph.edges()), and
// the diagonal multipliers q0, q_i of the moment matrix.
struct DualPoint {
  std::vector<double> u, p, z;
  std::vector<double> y;
  double q0 = 0.0;
  std::vector<double> q;
};

// Q assembled entrywise from the dual multipliers: Q_ii = q_i,
// Q_0i = -z_i + sum of incident y, off-diagonal Q_ij = summed y of the
// pair. Index 0 is the handle vertex w0, bidder i sits at row i+1.
Eigen::MatrixXd assemble_dual_q(const AuctionInstance& inst, const DualPoint& d);

// The PSD test runs on the trace-inner-product adjoint, i.e. -Q with its
// off-diagonal entries halved; checking -Q verbatim would certify against
// a strictly smaller dual cone and cannot close the duality gap.
Eigen::MatrixXd dual_slack_matrix(const AuctionInstance& inst, const DualPoint& d);

double dual_objective_upper(const AuctionInstance& inst, const DualPoint& d);

struct DualCheck {
  bool feasible = false;
  std::string violation;
  std::optional<Eigen::VectorXd> eigenvector;  // separating certificate
  int violated_bidder = -1;
  Mask violated_bundle = 0;
  double objective_upper = 0.0;  // valid only when feasible
};

DualCheck dual_certificate(const AuctionInstance& inst, const DualPoint& d,
                           double eig_tol = 1e-7, double slack_tol = 1e-7);

struct ConeResiduals {
  double norm = 0.0;      // | ||w_i|| - 1 |
  double coupling = 0.0;  // | (1+w0.wi)/2 - sum_S x_{i,S} |
  double conflict = 0.0;  // | (w0+wi).(w0+wj) | over edges
  double lp = 0.0;        // LP constraint families (i),(ii)
  double max() const;
};

struct ConeSolution {
  std::vector<LpColumn> columns;
  std::map<std::pair<int, Mask>, double> x;
  std::vector<Eigen::VectorXd> w;  // w[0] = w0, w[i+1] = w_i, unit rows
  double objective = 0.0;          // Z*
  ConeResiduals residuals;
  DualPoint dual;            // purified solver dual iterate
  double dual_upper = 0.0;   // certified upper bound on Z*
  double gap = 0.0;          // dual_upper - objective
  int iterations = 0;
  bool converged = false;
};

// Explicit column set for the cone program. Zero-valued bundles are kept:
// the coupling constraints are equalities and the slack mass matters.
std::vector<LpColumn> cone_columns(const AuctionInstance& inst);

// Mixed LP/PSD relaxation solved by operator splitting over the product
// cone (orthant for x, alpha, beta; PSD for the moment matrix), with the
// affine projection prefactored. m <= 10 and n <= 60 for the explicit
// column set; callers with structured valuations may pass their own.
ConeSolution solve_cpr(const AuctionInstance& inst, const ConeProgramOptions& opts = {});
ConeSolution solve_cpr_columns(const AuctionInstance& inst, std::vector<LpColumn> columns,
                               const ConeProgramOptions& opts = {});

// Strictly feasible interior point of the standard form: uniform densities
// x_{i,S} = 1/(4(2^m-1)n^2) and the triangular Gram construction. Needs
// n >= 2. `a`/`b` expose the recurrence values for verification.
struct SlaterPoint {
  std::vector<LpColumn> columns;
  std::vector<double> x, alpha, beta;
  Eigen::MatrixXd moment;  // (n+1)x(n+1), positive definite
  std::vector<Eigen::VectorXd> w;
  std::vector<double> a, b;
  double epsilon = 0.0;
};

SlaterPoint slater_point(const AuctionInstance& inst);

// Max |A v - b| of the standard-form equalities at the point.
double slater_equality_residual(const AuctionInstance& inst, const SlaterPoint& p);

struct RoundingParams {
  double tau = 0.49;
  double gamma = 0.0;
  double theta = 0.0;
  int trials = 64;

  // Natural logs; Delta below e^e clamps tau to 0.49 and theta to 0.
  static RoundingParams for_out_degree(int delta, int trials = 64);
};

// Bucket classification by s_i = 1 + w0.w_i, half-open as printed:
// [0, 2tau] -> light, (2tau, 1] -> middle, (1, 2] -> heavy.
struct CprBuckets {
  Mask light = 0, middle = 0, heavy = 0;
};
CprBuckets cpr_buckets(const ConeSolution& sol, int n, double tau);

// Three-bucket rounding of a cone solution: FCRA on the heavy bucket,
// projected-Gaussian threshold + out-edge removal on the middle one,
// dwelled densities plus conflict handling on the light one; best of the
// three per trial, best across trials.
Allocation round_cpr(const AuctionInstance& inst, const ConeSolution& sol,
                     const RoundingParams& params, Rng& rng);

// Directed weighted-independent-set approximation via the cone program on
// the one-private-item-per-vertex auction.
WisResult wis_approx(const ConflictGraph& g, const std::vector<double>& weights, Rng& rng,
                     int trials = 64);

}  // namespace ca
