#include "ca/coneprog.hpp"

#include <Eigen/Sparse>
#include <algorithm>
#include <cmath>

#include "ca/fcra.hpp"

namespace ca {

namespace {

constexpr double kSqrt2 = 1.4142135623730951;

// Canonical undirected conflict pairs (i < j). Both orientations of a
// mutual edge share one equality row; duplicated rows would make AA^T
// singular.
std::vector<std::pair<int, int>> conflict_pairs(const ConflictGraph& g) {
  std::vector<std::pair<int, int>> pairs;
  for (auto [i, j] : g.edges()) {
    auto p = std::minmax(i, j);
    pairs.emplace_back(p.first, p.second);
  }
  std::sort(pairs.begin(), pairs.end());
  pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
  return pairs;
}

// Standard form of the cone program: variables (x, alpha, beta, svec(M))
// over orthant x PSD, equality rows in the appendix layout. svec carries
// sqrt(2) on off-diagonal entries so that Frobenius products survive.
struct CprProblem {
  int n = 0, m = 0;
  int nx = 0, nsym = 0, nvar = 0, nrow = 0;
  std::vector<LpColumn> columns;
  std::vector<std::pair<int, int>> pairs;
  Eigen::SparseMatrix<double> A;
  Eigen::VectorXd b, c;

  int var_x(int col) const { return col; }
  int var_alpha(int i) const { return nx + i; }
  int var_beta(int k) const { return nx + n + k; }
  // svec index of moment entry (r,c), r <= c, matrix size n+1
  int var_m(int r, int c) const { return nx + n + m + c * (c + 1) / 2 + r; }

  int row_u(int i) const { return i; }
  int row_p(int k) const { return n + k; }
  int row_z(int i) const { return n + m + i; }
  int row_pair(int e) const { return n + m + n + e; }
  int row_q0() const { return n + m + n + static_cast<int>(pairs.size()); }
  int row_qi(int i) const { return row_q0() + 1 + i; }

  // svec/unsvec operate on the M block of the full variable vector.
  Eigen::MatrixXd unsvec(const Eigen::VectorXd& v) const {
    Eigen::MatrixXd M(n + 1, n + 1);
    for (int c = 0; c <= n; ++c)
      for (int r = 0; r <= c; ++r) {
        const double val = v[var_m(r, c)];
        M(r, c) = M(c, r) = (r == c) ? val : val / kSqrt2;
      }
    return M;
  }

  void svec_into(const Eigen::MatrixXd& M, Eigen::VectorXd& v) const {
    for (int c = 0; c <= n; ++c)
      for (int r = 0; r <= c; ++r)
        v[var_m(r, c)] = (r == c) ? M(r, c) : kSqrt2 * M(r, c);
  }
};

CprProblem build_problem(const AuctionInstance& inst, std::vector<LpColumn> columns) {
  CprProblem pb;
  pb.n = inst.n;
  pb.m = inst.m;
  pb.columns = std::move(columns);
  pb.pairs = conflict_pairs(inst.bidder_graph);
  pb.nx = static_cast<int>(pb.columns.size());
  pb.nsym = (inst.n + 2) * (inst.n + 1) / 2;
  pb.nvar = pb.nx + inst.n + inst.m + pb.nsym;
  pb.nrow = 3 * inst.n + inst.m + static_cast<int>(pb.pairs.size()) + 1;

  pb.b = Eigen::VectorXd::Zero(pb.nrow);
  pb.c = Eigen::VectorXd::Zero(pb.nvar);
  std::vector<Eigen::Triplet<double>> trip;

  for (int i = 0; i < inst.n; ++i) {
    trip.emplace_back(pb.row_u(i), pb.var_alpha(i), -1.0);
    pb.b[pb.row_u(i)] = -1.0;
    trip.emplace_back(pb.row_z(i), pb.var_m(0, i + 1), -1.0 / kSqrt2);
    pb.b[pb.row_z(i)] = 1.0;
    trip.emplace_back(pb.row_qi(i), pb.var_m(i + 1, i + 1), 1.0);
    pb.b[pb.row_qi(i)] = 1.0;
  }
  for (int k = 0; k < inst.m; ++k) {
    trip.emplace_back(pb.row_p(k), pb.var_beta(k), -1.0);
    pb.b[pb.row_p(k)] = -1.0;
  }
  for (int c = 0; c < pb.nx; ++c) {
    const LpColumn& col = pb.columns[c];
    trip.emplace_back(pb.row_u(col.bidder), pb.var_x(c), -1.0);
    trip.emplace_back(pb.row_z(col.bidder), pb.var_x(c), 2.0);
    for (int k = 0; k < inst.m; ++k)
      if (contains(col.bundle, k)) trip.emplace_back(pb.row_p(k), pb.var_x(c), -1.0);
    pb.c[pb.var_x(c)] = -col.value;
  }
  for (int e = 0; e < static_cast<int>(pb.pairs.size()); ++e) {
    auto [i, j] = pb.pairs[e];
    trip.emplace_back(pb.row_pair(e), pb.var_m(0, i + 1), 1.0 / kSqrt2);
    trip.emplace_back(pb.row_pair(e), pb.var_m(0, j + 1), 1.0 / kSqrt2);
    trip.emplace_back(pb.row_pair(e), pb.var_m(i + 1, j + 1), 1.0 / kSqrt2);
    pb.b[pb.row_pair(e)] = -1.0;
  }
  trip.emplace_back(pb.row_q0(), pb.var_m(0, 0), 1.0);
  pb.b[pb.row_q0()] = 1.0;

  pb.A.resize(pb.nrow, pb.nvar);
  pb.A.setFromTriplets(trip.begin(), trip.end());
  return pb;
}

void project_cone(const CprProblem& pb, Eigen::VectorXd& v) {
  const int lin = pb.nx + pb.n + pb.m;
  for (int i = 0; i < lin; ++i) v[i] = std::max(0.0, v[i]);
  Eigen::MatrixXd M = pb.unsvec(v);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(M);
  Eigen::VectorXd lam = eig.eigenvalues().cwiseMax(0.0);
  M = eig.eigenvectors() * lam.asDiagonal() * eig.eigenvectors().transpose();
  pb.svec_into(M, v);
}

// Map the equality multipliers onto the appendix dual variables. The
// canonical-pair multiplier lands on one representative directed edge.
DualPoint multipliers_to_dual(const AuctionInstance& inst, const CprProblem& pb,
                              const Eigen::VectorXd& mult) {
  DualPoint d;
  d.u.resize(inst.n);
  d.p.resize(inst.m);
  d.z.resize(inst.n);
  d.q.resize(inst.n);
  d.y.assign(inst.bidder_graph.edges().size(), 0.0);
  for (int i = 0; i < inst.n; ++i) {
    d.u[i] = mult[pb.row_u(i)];
    d.z[i] = mult[pb.row_z(i)];
    d.q[i] = mult[pb.row_qi(i)];
  }
  for (int k = 0; k < inst.m; ++k) d.p[k] = mult[pb.row_p(k)];
  d.q0 = mult[pb.row_q0()];
  const auto& edges = inst.bidder_graph.edges();
  for (int e = 0; e < static_cast<int>(pb.pairs.size()); ++e) {
    auto [i, j] = pb.pairs[e];
    auto it = std::find(edges.begin(), edges.end(), std::make_pair(i, j));
    if (it == edges.end()) it = std::find(edges.begin(), edges.end(), std::make_pair(j, i));
    d.y[static_cast<std::size_t>(it - edges.begin())] = mult[pb.row_pair(e)];
  }
  return d;
}

// Repair the solver's dual iterate into an exactly feasible certificate:
// clamp the sign constraints, lift u_i to cover the demand-oracle maximum,
// and shift the q diagonal by the most negative eigenvalue of the slack
// matrix. Each repair only increases the reported upper bound.
void purify_dual(const AuctionInstance& inst, DualPoint& d) {
  for (double& pk : d.p) pk = std::max(0.0, pk);
  PriceVector prices{d.p};
  const SlotMarket* slots = inst.slots ? &*inst.slots : nullptr;
  for (int i = 0; i < inst.n; ++i) {
    const double demand = demand_query_nonempty(inst.valuations[i], prices, slots).utility;
    d.u[i] = std::max({d.u[i], 0.0, demand + 2.0 * d.z[i]});
  }
  Eigen::MatrixXd N = dual_slack_matrix(inst, d);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(N);
  const double lam_min = eig.eigenvalues().minCoeff();
  if (lam_min < 0.0) {
    d.q0 += lam_min;
    for (double& qi : d.q) qi += lam_min;
  }
}

}  // namespace

std::vector<LpColumn> cone_columns(const AuctionInstance& inst) {
  if (inst.m > 10) throw SizeLimit("explicit cone program requires m <= 10");
  if (inst.n > 60) throw SizeLimit("cone program supports n <= 60");
  std::vector<LpColumn> cols;
  cols.reserve(static_cast<std::size_t>(inst.n) * ((Mask{1} << inst.m) - 1));
  for (int i = 0; i < inst.n; ++i)
    for (Mask s = 1; s <= full_mask(inst.m); ++s)
      cols.push_back({i, s, inst.value(i, s)});
  return cols;
}

Eigen::MatrixXd assemble_dual_q(const AuctionInstance& inst, const DualPoint& d) {
  const int n = inst.n;
  Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(n + 1, n + 1);
  Q(0, 0) = d.q0;
  for (int i = 0; i < n; ++i) Q(i + 1, i + 1) = d.q[i];
  const auto& edges = inst.bidder_graph.edges();
  std::vector<double> incident(n, 0.0);
  for (std::size_t e = 0; e < edges.size(); ++e) {
    auto [i, j] = edges[e];
    incident[i] += d.y[e];
    incident[j] += d.y[e];
    Q(i + 1, j + 1) += d.y[e];
    Q(j + 1, i + 1) += d.y[e];
  }
  for (int i = 0; i < n; ++i) {
    Q(0, i + 1) = -d.z[i] + incident[i];
    Q(i + 1, 0) = Q(0, i + 1);
  }
  return Q;
}

Eigen::MatrixXd dual_slack_matrix(const AuctionInstance& inst, const DualPoint& d) {
  Eigen::MatrixXd Q = assemble_dual_q(inst, d);
  Eigen::MatrixXd N = -0.5 * Q;
  for (int i = 0; i <= inst.n; ++i) N(i, i) = -Q(i, i);
  return N;
}

double dual_objective_upper(const AuctionInstance& inst, const DualPoint& d) {
  double upper = -d.q0;
  for (int i = 0; i < inst.n; ++i) upper += d.u[i] - d.z[i] - d.q[i];
  for (int k = 0; k < inst.m; ++k) upper += d.p[k];
  for (double ye : d.y) upper += ye;
  return upper;
}

DualCheck dual_certificate(const AuctionInstance& inst, const DualPoint& d, double eig_tol,
                           double slack_tol) {
  DualCheck out;
  for (int i = 0; i < inst.n; ++i)
    if (d.u[i] < -slack_tol) {
      out.violation = "u[" + std::to_string(i) + "] negative";
      return out;
    }
  for (int k = 0; k < inst.m; ++k)
    if (d.p[k] < -slack_tol) {
      out.violation = "p[" + std::to_string(k) + "] negative";
      return out;
    }

  Eigen::MatrixXd N = dual_slack_matrix(inst, d);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(N);
  if (eig.eigenvalues().minCoeff() < -eig_tol) {
    int idx = 0;
    eig.eigenvalues().minCoeff(&idx);
    out.violation = "dual slack matrix not PSD";
    out.eigenvector = eig.eigenvectors().col(idx);
    return out;
  }

  PriceVector prices;
  prices.prices.resize(inst.m);
  for (int k = 0; k < inst.m; ++k) prices.prices[k] = std::max(0.0, d.p[k]);
  const SlotMarket* slots = inst.slots ? &*inst.slots : nullptr;
  for (int i = 0; i < inst.n; ++i) {
    const DemandResult res = demand_query_nonempty(inst.valuations[i], prices, slots);
    if (res.utility + 2.0 * d.z[i] - d.u[i] > slack_tol) {
      out.violation = "bidder constraint violated";
      out.violated_bidder = i;
      out.violated_bundle = res.bundle;
      return out;
    }
  }

  out.feasible = true;
  out.objective_upper = dual_objective_upper(inst, d);
  return out;
}

double ConeResiduals::max() const {
  return std::max({norm, coupling, conflict, lp});
}

ConeSolution solve_cpr(const AuctionInstance& inst, const ConeProgramOptions& opts) {
  return solve_cpr_columns(inst, cone_columns(inst), opts);
}

ConeSolution solve_cpr_columns(const AuctionInstance& inst, std::vector<LpColumn> columns,
                               const ConeProgramOptions& opts) {
  inst.validate();
  CprProblem pb = build_problem(inst, std::move(columns));

  double cscale = 1.0;
  for (const auto& col : pb.columns) cscale = std::max(cscale, col.value);
  const Eigen::VectorXd c_hat = pb.c / cscale;

  const Eigen::MatrixXd AAT = Eigen::MatrixXd(pb.A * pb.A.transpose());
  Eigen::LLT<Eigen::MatrixXd> llt(AAT);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("cone program: singular constraint normal matrix");

  // Splitting iterate: v affine-feasible, w cone-feasible, lam scaled dual.
  Eigen::VectorXd w = Eigen::VectorXd::Zero(pb.nvar);
  for (int i = 0; i < inst.n; ++i) w[pb.var_alpha(i)] = 1.0;
  for (int k = 0; k < inst.m; ++k) w[pb.var_beta(k)] = 1.0;
  pb.svec_into(Eigen::MatrixXd::Identity(inst.n + 1, inst.n + 1), w);
  Eigen::VectorXd lam = Eigen::VectorXd::Zero(pb.nvar);
  Eigen::VectorXd v(pb.nvar), nu(pb.nrow), w_prev(pb.nvar);

  double rho = opts.rho;
  int iter = 0;
  bool converged = false;
  for (; iter < opts.max_iterations; ++iter) {
    Eigen::VectorXd g = w - lam - c_hat / rho;
    nu = llt.solve(pb.A * g - pb.b);
    v = g - pb.A.transpose() * nu;
    Eigen::VectorXd v_or = opts.over_relax * v + (1.0 - opts.over_relax) * w;
    w_prev = w;
    w = v_or + lam;
    project_cone(pb, w);
    lam += v_or - w;

    if (iter % 25 == 24) {
      const double eq_res = (pb.A * w - pb.b).lpNorm<Eigen::Infinity>();
      const double split = (v - w).lpNorm<Eigen::Infinity>();
      const double primal_hat = -c_hat.dot(w);
      const double dual_hat = rho * pb.b.dot(nu);
      const double gap = std::abs(primal_hat - dual_hat) / std::max(1.0, std::abs(primal_hat));
      if (eq_res < opts.eps && split < opts.eps && gap < opts.gap_eps) {
        converged = true;
        ++iter;
        break;
      }
      if (iter % 100 == 99) {
        const double pri = (v - w).norm();
        const double dua = rho * (w - w_prev).norm();
        if (pri > 10.0 * dua && rho < 1e3) {
          rho *= 2.0;
          lam *= 0.5;
        } else if (dua > 10.0 * pri && rho > 1e-3) {
          rho *= 0.5;
          lam *= 2.0;
        }
      }
    }
  }

  ConeSolution sol;
  sol.columns = pb.columns;
  sol.iterations = iter;

  // Primal recovery from the cone-feasible iterate.
  for (int c = 0; c < pb.nx; ++c) {
    const double xv = w[pb.var_x(c)];
    if (xv > 1e-12) sol.x[{pb.columns[c].bidder, pb.columns[c].bundle}] += xv;
  }
  sol.objective = 0.0;
  for (int c = 0; c < pb.nx; ++c) sol.objective += pb.columns[c].value * w[pb.var_x(c)];

  // Gram recovery: factor the PSD moment block, then normalize the rows.
  Eigen::MatrixXd M = pb.unsvec(w);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(M);
  Eigen::VectorXd lam_clamped = eig.eigenvalues().cwiseMax(0.0);
  Eigen::MatrixXd W = eig.eigenvectors() * lam_clamped.cwiseSqrt().asDiagonal();
  sol.w.resize(inst.n + 1);
  for (int r = 0; r <= inst.n; ++r) {
    Eigen::VectorXd row = W.row(r).transpose();
    const double nrm = row.norm();
    sol.residuals.norm = std::max(sol.residuals.norm, std::abs(nrm - 1.0));
    if (nrm > 1e-12)
      row /= nrm;
    else
      row = Eigen::VectorXd::Unit(inst.n + 1, r);
    sol.w[r] = row;
  }

  // Residuals of the invariant families on the recovered quantities.
  std::vector<double> bidder_mass(inst.n, 0.0), item_mass(inst.m, 0.0);
  for (const auto& [key, xv] : sol.x) {
    sol.residuals.lp = std::max(sol.residuals.lp, -xv);
    bidder_mass[key.first] += xv;
    for (int k = 0; k < inst.m; ++k)
      if (contains(key.second, k)) item_mass[k] += xv;
  }
  for (int i = 0; i < inst.n; ++i) {
    sol.residuals.lp = std::max(sol.residuals.lp, bidder_mass[i] - 1.0);
    const double s = 0.5 * (1.0 + sol.w[0].dot(sol.w[i + 1]));
    sol.residuals.coupling = std::max(sol.residuals.coupling, std::abs(s - bidder_mass[i]));
  }
  for (int k = 0; k < inst.m; ++k)
    sol.residuals.lp = std::max(sol.residuals.lp, item_mass[k] - 1.0);
  for (auto [i, j] : pb.pairs) {
    const double viol =
        std::abs((sol.w[0] + sol.w[i + 1]).dot(sol.w[0] + sol.w[j + 1]));
    sol.residuals.conflict = std::max(sol.residuals.conflict, viol);
  }

  sol.converged = converged && sol.residuals.max() <= 1e-6;

  // Dual certificate from the last affine-projection multipliers.
  sol.dual = multipliers_to_dual(inst, pb, Eigen::VectorXd(-cscale * rho * nu));
  purify_dual(inst, sol.dual);
  sol.dual_upper = dual_objective_upper(inst, sol.dual);
  sol.gap = sol.dual_upper - sol.objective;
  return sol;
}

SlaterPoint slater_point(const AuctionInstance& inst) {
  if (inst.n < 2) throw std::invalid_argument("slater point needs n >= 2");
  const int n = inst.n;
  const double bundles = std::ldexp(1.0, inst.m) - 1.0;

  SlaterPoint pt;
  pt.columns = cone_columns(inst);
  pt.epsilon = 1.0 / (2.0 * n * n);
  const double xval = 1.0 / (4.0 * bundles * n * n);
  pt.x.assign(pt.columns.size(), xval);
  pt.alpha.assign(n, 1.0 - 1.0 / (4.0 * n * n));
  pt.beta.assign(inst.m, 1.0 - std::ldexp(1.0, inst.m - 1) * n * xval);

  // Triangular Gram construction: a_i on the diagonal, the b_ell fill.
  pt.a.resize(n);
  pt.b.resize(n > 1 ? n - 1 : 0);
  const double eps = pt.epsilon;
  double b_sq_sum = 0.0;
  for (int i = 0; i < n; ++i) {
    pt.a[i] = std::sqrt(2.0 * eps - eps * eps - b_sq_sum);
    if (i + 1 < n) {
      pt.b[i] = -(eps * eps + b_sq_sum) / pt.a[i];
      b_sq_sum += pt.b[i] * pt.b[i];
    }
  }

  pt.w.resize(n + 1);
  pt.w[0] = Eigen::VectorXd::Unit(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    Eigen::VectorXd wi = Eigen::VectorXd::Zero(n + 1);
    wi[0] = eps - 1.0;
    for (int l = 1; l < i; ++l) wi[l] = pt.b[l - 1];
    wi[i] = pt.a[i - 1];
    pt.w[i] = wi;
  }
  pt.moment.resize(n + 1, n + 1);
  for (int r = 0; r <= n; ++r)
    for (int c = 0; c <= n; ++c) pt.moment(r, c) = pt.w[r].dot(pt.w[c]);
  return pt;
}

double slater_equality_residual(const AuctionInstance& inst, const SlaterPoint& pt) {
  CprProblem pb = build_problem(inst, pt.columns);
  Eigen::VectorXd v = Eigen::VectorXd::Zero(pb.nvar);
  for (int c = 0; c < pb.nx; ++c) v[pb.var_x(c)] = pt.x[c];
  for (int i = 0; i < inst.n; ++i) v[pb.var_alpha(i)] = pt.alpha[i];
  for (int k = 0; k < inst.m; ++k) v[pb.var_beta(k)] = pt.beta[k];
  pb.svec_into(pt.moment, v);
  return (pb.A * v - pb.b).lpNorm<Eigen::Infinity>();
}

RoundingParams RoundingParams::for_out_degree(int delta, int trials) {
  RoundingParams p;
  p.trials = trials;
  const double d = std::max(1, delta);
  const double ee = std::exp(std::exp(1.0));
  if (d < ee) {
    p.tau = 0.49;
    p.gamma = (1.0 - 2.0 * p.tau) / (2.0 - 2.0 * p.tau);
    p.theta = 0.0;
  } else {
    const double ln = std::log(d);
    p.tau = 3.0 * std::log(ln) / (4.0 * ln);
    p.gamma = (1.0 - 2.0 * p.tau) / (2.0 - 2.0 * p.tau);
    p.theta = std::sqrt(2.0 * p.gamma / (1.0 - p.gamma) * ln);
  }
  return p;
}

namespace {

FcraDensities densities_from_sparse(const std::map<std::pair<int, Mask>, double>& x, int n,
                                    Mask keep, double factor) {
  FcraDensities d;
  d.per_bidder.assign(n, {});
  for (const auto& [key, density] : x) {
    if (!contains(keep, key.first) || density <= 0.0) continue;
    d.per_bidder[key.first].emplace_back(key.second, density * factor);
  }
  return d;
}

}  // namespace

CprBuckets cpr_buckets(const ConeSolution& sol, int n, double tau) {
  CprBuckets b;
  for (int i = 0; i < n; ++i) {
    const double s = std::clamp(1.0 + sol.w[0].dot(sol.w[i + 1]), 0.0, 2.0);
    if (s <= 2.0 * tau)
      b.light |= bit(i);
    else if (s <= 1.0)
      b.middle |= bit(i);
    else
      b.heavy |= bit(i);
  }
  return b;
}

Allocation round_cpr(const AuctionInstance& inst, const ConeSolution& sol,
                     const RoundingParams& params, Rng& rng) {
  const int n = inst.n;
  const int delta = std::max(1, inst.bidder_graph.max_out_degree());

  const CprBuckets buckets = cpr_buckets(sol, n, params.tau);
  const Mask b0 = buckets.light, b1 = buckets.middle, b2 = buckets.heavy;

  // LPR re-solves keyed by surviving bidder set; J1 varies per trial.
  std::map<Mask, LpSolution> lp_cache;
  auto lp_for = [&](Mask keep) -> const LpSolution& {
    auto it = lp_cache.find(keep);
    if (it != lp_cache.end()) return it->second;
    std::vector<LpColumn> cols;
    for (const auto& col : sol.columns)
      if (contains(keep, col.bidder) && col.value > 0.0) cols.push_back(col);
    return lp_cache.emplace(keep, solve_lpr_columns(inst, std::move(cols))).first->second;
  };

  // Dwelled densities for the light bucket. The divisor floors at 1 so the
  // point stays feasible when 2*tau*Delta < 1 (only possible at Delta=1).
  const double divisor = std::max(1.0, 2.0 * params.tau * delta);
  const FcraDensities dwelled = densities_from_sparse(sol.x, n, b0, 1.0 / divisor);

  // Projected directions for the middle bucket, fixed across trials.
  std::vector<Eigen::VectorXd> dir(n);
  for (int i = 0; i < n; ++i) {
    if (!contains(b1, i)) continue;
    Eigen::VectorXd wp = sol.w[i + 1] - sol.w[0].dot(sol.w[i + 1]) * sol.w[0];
    const double nrm = wp.norm();
    if (nrm < 1e-9) {
      Eigen::VectorXd g(n + 1);
      for (int c = 0; c <= n; ++c) g[c] = rng.gaussian();
      wp = g - sol.w[0].dot(g) * sol.w[0];
      wp.normalize();
    } else {
      wp /= nrm;
    }
    dir[i] = wp;
  }

  Allocation best(n);
  double best_welfare = -1.0;
  auto consider = [&](const Allocation& alloc) {
    const double w = externality_welfare(inst, alloc).total;
    if (w > best_welfare + 1e-12) {
      best_welfare = w;
      best = alloc;
    }
  };

  for (int trial = 0; trial < params.trials; ++trial) {
    // Heavy bucket: plain FCRA on the re-solved LP.
    consider(fcra_round(inst, FcraDensities::from_lp(lp_for(b2), n), rng));

    // Middle bucket: Gaussian threshold, then drop out-edges inside.
    Eigen::VectorXd r(n + 1);
    for (int c = 0; c <= n; ++c) r[c] = rng.gaussian();
    Mask b1p = 0;
    for (int i = 0; i < n; ++i)
      if (contains(b1, i) && dir[i].dot(r) >= params.theta) b1p |= bit(i);
    Mask j1 = b1p;
    for (int i = 0; i < n; ++i)
      if (contains(b1p, i) && (inst.bidder_graph.out_neighbors(i) & b1p)) j1 &= ~bit(i);
    consider(fcra_round(inst, FcraDensities::from_lp(lp_for(j1), n), rng));

    // Light bucket: FCRA on dwelled densities, then conflict handling.
    Allocation t = fcra_round(inst, dwelled, rng);
    Mask nonempty = 0;
    for (int j = 0; j < n; ++j)
      if (t.assigned[j]) nonempty |= bit(j);
    for (int i = 0; i < n; ++i)
      if (contains(b0, i) && (inst.bidder_graph.out_neighbors(i) & nonempty))
        t.assigned[i] = 0;
    consider(t);
  }
  return best;
}

WisResult wis_approx(const ConflictGraph& g, const std::vector<double>& weights, Rng& rng,
                     int trials) {
  const int n = g.node_count();
  if (static_cast<int>(weights.size()) != n)
    throw std::invalid_argument("weight vector size mismatch");

  // One private item per vertex, valued at the vertex weight.
  AuctionInstance inst;
  inst.n = n;
  inst.m = n;
  inst.bidder_graph = g;
  std::vector<LpColumn> columns;
  for (int i = 0; i < n; ++i) {
    std::vector<double> clause(n, 0.0);
    clause[i] = weights[i];
    inst.valuations.push_back(Valuation::xos({clause}));
    columns.push_back({i, bit(i), weights[i]});
  }

  ConeSolution sol = solve_cpr_columns(inst, std::move(columns));
  const RoundingParams params =
      RoundingParams::for_out_degree(std::max(1, g.max_out_degree()), trials);
  Allocation alloc = round_cpr(inst, sol, params, rng);

  Mask selected = 0;
  for (int i = 0; i < n; ++i)
    if (weights[i] > 0.0 && contains(alloc.assigned[i], i)) selected |= bit(i);
  // Safety sweep: independence holds by construction, but enforce it.
  for (auto [i, j] : g.edges())
    if (contains(selected, i) && contains(selected, j)) selected &= ~bit(i);

  WisResult out;
  out.vertices = selected;
  for (int i = 0; i < n; ++i)
    if (contains(selected, i)) out.weight += weights[i];
  return out;
}

}  // namespace ca
