#include <doctest.h>

#include <cmath>

#include "ca/coneprog.hpp"
#include "ca/experiment.hpp"
#include "ca/oracles.hpp"
#include "support.hpp"

using namespace ca;
using test::unit_demand_instance;
using test::xos_instance;

TEST_SUITE("coneprog") {

TEST_CASE("solver on canonical tiny programs") {
  SUBCASE("single unconstrained bidder") {
    const AuctionInstance inst = xos_instance(1, 2, {}, {{{2, 3}}});
    const ConeSolution sol = solve_cpr(inst);
    CHECK(sol.converged);
    CHECK(sol.objective == doctest::Approx(5.0).epsilon(1e-6));
    CHECK(sol.w[0].dot(sol.w[1]) == doctest::Approx(1.0).epsilon(1e-5));
  }
  SUBCASE("two mutually conflicted identical bidders") {
    const AuctionInstance inst = unit_demand_instance(2, {1, 1}, {1.0}, {{0, 1}, {1, 0}});
    const ConeSolution sol = solve_cpr(inst);
    CHECK(sol.converged);
    CHECK(sol.objective >= exact_optimum(inst).welfare - 1e-6);
    CHECK(sol.objective == doctest::Approx(1.0).epsilon(1e-5));
  }
}

TEST_CASE("relaxation dominates the integral optimum") {
  for (int t = 0; t < 12; ++t) {
    GeneratorSpec spec;
    spec.n = 4 + (t % 6);
    spec.m = 1 + (t % 3);
    spec.delta = std::min(spec.n - 1, 1 + (t % 3));
    Rng rng(mix_seed(200, t));
    const AuctionInstance inst = generate_instance(spec, rng);
    const ConeSolution sol = solve_cpr(inst);
    CHECK(sol.converged);
    CHECK(sol.objective >= exact_optimum(inst).welfare - 1e-5 * std::max(1.0, sol.objective));
    // invariant families on the recovered solution
    CHECK(sol.residuals.max() <= 1e-6);
    for (const auto& w : sol.w) CHECK(w.norm() == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("weak duality sandwich certifies the gap") {
  for (int t = 0; t < 8; ++t) {
    GeneratorSpec spec;
    spec.n = 5 + (t % 5);
    spec.m = 1 + (t % 3);
    spec.delta = 1 + (t % 3);
    Rng rng(mix_seed(300, t));
    const AuctionInstance inst = generate_instance(spec, rng);
    const ConeSolution sol = solve_cpr(inst);
    const DualCheck check = dual_certificate(inst, sol.dual);
    CHECK(check.feasible);
    CHECK(check.objective_upper == doctest::Approx(sol.dual_upper));
    CHECK(sol.dual_upper >= sol.objective - 1e-5 * std::max(1.0, sol.objective));
    CHECK(std::abs(sol.gap) <= 1e-4 * std::max(1.0, sol.objective));
  }
}

TEST_CASE("slater interior point") {
  SUBCASE("n = 2 worked values") {
    const AuctionInstance inst = xos_instance(2, 2, {{0, 1}}, {{{1, 1}}, {{1, 1}}});
    const SlaterPoint pt = slater_point(inst);
    CHECK(pt.epsilon == doctest::Approx(1.0 / 8.0));
    CHECK(pt.a[0] == doctest::Approx(std::sqrt(15.0 / 64.0)));
    CHECK(pt.b[0] == doctest::Approx(-(1.0 / 64.0) / std::sqrt(15.0 / 64.0)));
    CHECK(std::abs(pt.b[0]) <= 1.0 / 24.0);
    CHECK(pt.alpha[0] == doctest::Approx(1.0 - 1.0 / (4.0 * 2 * 2)));
  }
  SUBCASE("bounds and strict feasibility across sizes") {
    for (int n = 2; n <= 30; ++n) {
      AuctionInstance inst;
      inst.n = n;
      inst.m = 2;
      inst.bidder_graph = ConflictGraph(n, {{0, 1}, {1, 0}});
      for (int i = 0; i < n; ++i) inst.valuations.push_back(Valuation::xos({{1.0, 0.5}}));
      const SlaterPoint pt = slater_point(inst);
      CHECK(slater_equality_residual(inst, pt) <= 1e-10);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(pt.moment);
      CHECK(eig.eigenvalues().minCoeff() > 0.0);
      for (double a : pt.a) CHECK(a >= std::sqrt(133.0) / (12.0 * n));
      for (double b : pt.b) {
        CHECK(b < 0.0);
        CHECK(std::abs(b) <= 1.0 / (3.0 * n * n * n));
      }
      for (double x : pt.x) CHECK(x > 0.0);
      for (double a : pt.alpha) CHECK(a > 0.0);
      for (double bta : pt.beta) CHECK(bta > 0.0);
    }
  }
  SUBCASE("single-bidder auctions have no interior construction") {
    const AuctionInstance inst = xos_instance(1, 1, {}, {{{1}}});
    CHECK_THROWS_AS(slater_point(inst), std::invalid_argument);
  }
}

TEST_CASE("dual certificate separation") {
  const AuctionInstance inst = xos_instance(2, 2, {{0, 1}}, {{{2, 1}}, {{1, 2}}});
  const int n = inst.n;
  SUBCASE("all-zero dual cannot dominate positive valuations") {
    DualPoint d;
    d.u.assign(n, 0.0);
    d.p.assign(inst.m, 0.0);
    d.z.assign(n, 0.0);
    d.q.assign(n, 0.0);
    d.y.assign(inst.bidder_graph.edges().size(), 0.0);
    const DualCheck check = dual_certificate(inst, d);
    CHECK_FALSE(check.feasible);
    CHECK(check.violated_bidder >= 0);
    CHECK(inst.value(check.violated_bidder, check.violated_bundle) > 0.0);
  }
  SUBCASE("covering dual is feasible and bounds the objective") {
    DualPoint d;
    d.u = {3.0, 3.0};  // max bundle values
    d.p.assign(inst.m, 0.0);
    d.z.assign(n, 0.0);
    d.q.assign(n, -1.0);
    d.q0 = 0.0;
    d.y.assign(inst.bidder_graph.edges().size(), 0.0);
    const DualCheck check = dual_certificate(inst, d);
    CHECK(check.feasible);
    const ConeSolution sol = solve_cpr(inst);
    CHECK(check.objective_upper >= sol.objective - 1e-7);
  }
  SUBCASE("planted negative eigenvalue yields an eigenvector certificate") {
    DualPoint d;
    d.u = {3.0, 3.0};
    d.p.assign(inst.m, 0.0);
    d.z.assign(n, 0.0);
    d.q.assign(n, -1.0);
    d.q[0] = 1.0;  // positive diagonal makes -Q indefinite
    d.q0 = 0.0;
    d.y.assign(inst.bidder_graph.edges().size(), 0.0);
    const DualCheck check = dual_certificate(inst, d);
    CHECK_FALSE(check.feasible);
    REQUIRE(check.eigenvector.has_value());
    const Eigen::MatrixXd slack = dual_slack_matrix(inst, d);
    const double rayleigh = check.eigenvector->dot(slack * *check.eigenvector);
    CHECK(rayleigh < 0.0);
  }
}

TEST_CASE("dual slack matrix uses the trace-adjoint halving") {
  // Private-item pair with mutual conflict: Z* = 1. The hand-derived dual
  // optimum needs the PSD block; verbatim -Q would reject it and no
  // verbatim-feasible point can reach the primal value.
  const AuctionInstance inst =
      xos_instance(2, 2, {{0, 1}, {1, 0}}, {{{1, 0}}, {{0, 1}}});
  DualPoint d;
  d.u = {0.0, 0.0};
  d.p = {0.0, 0.0};
  d.z = {-0.5, -0.5};
  d.q0 = 0.0;
  d.q = {-0.25, -0.25};
  d.y = {-0.25, -0.25};  // edges (0,1) and (1,0)
  const DualCheck check = dual_certificate(inst, d);
  CHECK(check.feasible);
  CHECK(check.objective_upper == doctest::Approx(1.0));
  const ConeSolution sol = solve_cpr(inst);
  CHECK(sol.objective == doctest::Approx(1.0).epsilon(1e-6));
  // the verbatim stencil matrix is genuinely indefinite at this point
  Eigen::MatrixXd verbatim = -assemble_dual_q(inst, d);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(verbatim);
  CHECK(eig.eigenvalues().minCoeff() < -1e-3);
}

TEST_CASE("rounding parameters") {
  SUBCASE("small out-degrees clamp") {
    const RoundingParams p = RoundingParams::for_out_degree(3);
    CHECK(p.tau == doctest::Approx(0.49));
    CHECK(p.theta == 0.0);
  }
  SUBCASE("asymptotic regime") {
    const RoundingParams p = RoundingParams::for_out_degree(64);
    const double ln = std::log(64.0);
    CHECK(p.tau == doctest::Approx(3.0 * std::log(ln) / (4.0 * ln)));
    CHECK(p.tau < 0.5);
    CHECK(p.tau > 0.0);
    CHECK(p.gamma == doctest::Approx((1 - 2 * p.tau) / (2 - 2 * p.tau)));
    CHECK(p.theta == doctest::Approx(std::sqrt(2 * p.gamma / (1 - p.gamma) * ln)));
  }
}

TEST_CASE("bucket classification is half-open as printed") {
  ConeSolution sol;
  const int n = 3;
  sol.w.assign(n + 1, Eigen::VectorXd::Zero(n + 1));
  sol.w[0] = Eigen::VectorXd::Unit(n + 1, 0);
  // s_1 = 1 + w0.w1 = 2*tau exactly -> light bucket (ties go down)
  const double tau = 0.3;
  sol.w[1] = Eigen::VectorXd::Unit(n + 1, 1) * std::sqrt(1 - (2 * tau - 1) * (2 * tau - 1));
  sol.w[1][0] = 2 * tau - 1;
  // s_2 = 1 exactly -> middle bucket boundary
  sol.w[2] = Eigen::VectorXd::Unit(n + 1, 2);
  // s_3 = 2 -> heavy
  sol.w[3] = sol.w[0];
  const CprBuckets buckets = cpr_buckets(sol, n, tau);
  CHECK(buckets.light == bit(0));
  CHECK(buckets.middle == bit(1));
  CHECK(buckets.heavy == bit(2));
}

TEST_CASE("rounding a conflict-free instance lands everyone in the heavy bucket") {
  const AuctionInstance inst = xos_instance(2, 2, {}, {{{4, 0}}, {{0, 3}}});
  const ConeSolution sol = solve_cpr(inst);
  const RoundingParams params = RoundingParams::for_out_degree(1, 8);
  const CprBuckets buckets = cpr_buckets(sol, inst.n, params.tau);
  CHECK(buckets.heavy == full_mask(2));
  Rng rng(77);
  const Allocation a = round_cpr(inst, sol, params, rng);
  CHECK(externality_welfare(inst, a).total == doctest::Approx(7.0).epsilon(1e-6));
}

TEST_CASE("rounded allocations are disjoint and conflict-free") {
  for (int t = 0; t < 8; ++t) {
    GeneratorSpec spec;
    spec.n = 5 + (t % 6);
    spec.m = 1 + (t % 3);
    spec.delta = std::min(spec.n - 1, 1 + (t % 4));
    Rng rng(mix_seed(210, t));
    const AuctionInstance inst = generate_instance(spec, rng);
    const ConeSolution sol = solve_cpr(inst);
    const RoundingParams params = RoundingParams::for_out_degree(inst.max_out_degree(), 4);
    Rng rrng(mix_seed(211, t));
    for (int round = 0; round < 10; ++round) {
      const Allocation a = round_cpr(inst, sol, params, rrng);
      CHECK(a.disjoint());
      CHECK(externality_welfare(inst, a).total ==
            doctest::Approx(unconflicted_welfare(inst, a)));
    }
  }
}

TEST_CASE("five-bidder cycle meets the pinned regression bound") {
  std::vector<std::pair<int, int>> edges;
  for (int i = 0; i < 5; ++i) edges.emplace_back(i, (i + 1) % 5);
  const AuctionInstance inst =
      unit_demand_instance(5, {5, 4, 3, 2, 1}, {1.0, 0.7}, edges);
  const ConeSolution sol = solve_cpr(inst);
  const double opt = exact_optimum(inst).welfare;
  const int delta = std::max(1, inst.max_out_degree());
  const RoundingParams params = RoundingParams::for_out_degree(delta, 64);
  for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
    Rng rng(seed);
    const Allocation a = round_cpr(inst, sol, params, rng);
    CHECK(externality_welfare(inst, a).total >= opt / (8.0 * delta) - 1e-9);
  }
}

TEST_CASE("directed WIS approximation") {
  SUBCASE("edgeless graph keeps every vertex") {
    Rng rng(4);
    const WisResult r = wis_approx(ConflictGraph(5, {}), {1, 1, 1, 1, 1}, rng);
    CHECK(r.vertices == full_mask(5));
  }
  SUBCASE("single edge with lopsided weights keeps the heavy vertex") {
    Rng rng(4);
    const WisResult r = wis_approx(ConflictGraph(2, {{0, 1}}), {10, 1}, rng);
    CHECK(contains(r.vertices, 0));
    CHECK(r.weight >= 10.0);
  }
  SUBCASE("independent always, within 4 delta of the exact oracle") {
    for (int t = 0; t < 10; ++t) {
      GeneratorSpec spec;
      spec.n = 6 + (t % 11);
      spec.m = 1;
      spec.delta = std::min(spec.n - 1, 1 + (t % 3));
      Rng grng(mix_seed(220, t));
      const ConflictGraph g = generate_instance(spec, grng).bidder_graph;
      std::vector<double> w(spec.n);
      Rng wrng(mix_seed(221, t));
      for (double& x : w) x = 0.05 + wrng.next_double();
      Rng rng(mix_seed(222, t));
      const WisResult approx = wis_approx(g, w, rng);
      CHECK(g.independent(approx.vertices));
      const WisResult exact = exact_wis(g, w);
      const int delta = std::max(1, g.max_out_degree());
      CHECK(approx.weight >= exact.weight / (4.0 * delta) - 1e-9);
    }
  }
}

TEST_CASE("explicit column set guards") {
  AuctionInstance inst;
  inst.n = 1;
  inst.m = 11;
  inst.bidder_graph = ConflictGraph(1, {});
  inst.valuations.push_back(Valuation::zero(11));
  CHECK_THROWS_AS(solve_cpr(inst), SizeLimit);
}

}  // TEST_SUITE
