#include "ca/fcra.hpp"

#include <cmath>

namespace ca {

FcraDensities FcraDensities::from_lp(const LpSolution& sol, int n) {
  return from_lp_scaled(sol, n, ~Mask{0}, 1.0);
}

FcraDensities FcraDensities::from_lp_scaled(const LpSolution& sol, int n, Mask keep,
                                            double factor) {
  FcraDensities d;
  d.per_bidder.assign(n, {});
  for (const auto& [key, density] : sol.x) {
    if (!contains(keep, key.first)) continue;
    if (density <= 0.0) continue;
    d.per_bidder[key.first].emplace_back(key.second, density * factor);
  }
  return d;
}

double FcraDensities::item_mass(int bidder, int item) const {
  double p = 0.0;
  for (const auto& [bundle, prob] : per_bidder[bidder])
    if (contains(bundle, item)) p += prob;
  return p;
}

double FcraDensities::bidder_mass(int bidder) const {
  double p = 0.0;
  for (const auto& [bundle, prob] : per_bidder[bidder]) p += prob;
  return p;
}

void check_fcra_feasible(const FcraDensities& d, int m, double tol) {
  std::vector<double> item_mass(m, 0.0);
  for (int i = 0; i < d.bidders(); ++i) {
    double total = 0.0;
    for (const auto& [bundle, prob] : d.per_bidder[i]) {
      if (prob < -tol) throw InfeasiblePoint("negative density");
      if (bundle == 0) throw InfeasiblePoint("explicit empty-set density");
      total += prob;
      for (int k = 0; k < m; ++k)
        if (contains(bundle, k)) item_mass[k] += prob;
    }
    if (total > 1.0 + tol) throw InfeasiblePoint("bidder density mass exceeds 1");
  }
  for (double s : item_mass)
    if (s > 1.0 + tol) throw InfeasiblePoint("item density mass exceeds 1");
}

std::vector<double> fcra_ownership(const std::vector<double>& mass, Mask contenders) {
  const int a = popcount(contenders);
  if (a == 0) return {};
  if (a == 1) return {1.0};

  std::vector<double> raw;
  raw.reserve(a);
  double norm = 0.0;
  for (std::size_t i = 0; i < mass.size(); ++i) {
    if (!contains(contenders, static_cast<int>(i))) continue;
    double w = 0.0;
    for (std::size_t j = 0; j < mass.size(); ++j) {
      if (j == i) continue;
      if (contains(contenders, static_cast<int>(j)))
        w += mass[j] / (a - 1);
      else
        w += mass[j] / a;
    }
    raw.push_back(w);
    norm += w;
  }
  // norm equals sum_j p_j(k) algebraically; renormalize to absorb rounding.
  for (double& w : raw) w /= norm;
  return raw;
}

Allocation fcra_round(const AuctionInstance& inst, const FcraDensities& densities, Rng& rng,
                      std::vector<Mask>* sampled_out) {
  check_fcra_feasible(densities, inst.m);

  // Stage 1: each bidder samples a tentative bundle.
  std::vector<Mask> sampled(inst.n, 0);
  for (int i = 0; i < inst.n && i < densities.bidders(); ++i) {
    double u = rng.next_double();
    for (const auto& [bundle, prob] : densities.per_bidder[i]) {
      if (u < prob) {
        sampled[i] = bundle;
        break;
      }
      u -= prob;
    }
  }

  if (sampled_out) *sampled_out = sampled;

  // Stage 2: resolve each contended item independently.
  Allocation out(inst.n);
  std::vector<double> mass(inst.n, 0.0);
  for (int k = 0; k < inst.m; ++k) {
    Mask contenders = 0;
    for (int i = 0; i < inst.n; ++i)
      if (contains(sampled[i], k)) contenders |= bit(i);
    if (contenders == 0) continue;

    for (int i = 0; i < inst.n; ++i)
      mass[i] = i < densities.bidders() ? densities.item_mass(i, k) : 0.0;
    const std::vector<double> prob = fcra_ownership(mass, contenders);

    double u = rng.next_double();
    int slot = 0, winner = -1;
    for (int i = 0; i < inst.n; ++i) {
      if (!contains(contenders, i)) continue;
      winner = i;
      if (u < prob[slot]) break;
      u -= prob[slot];
      ++slot;
    }
    out.assigned[winner] |= bit(k);
  }
  return out;
}

}  // namespace ca
