#include "ca/lp.hpp"

#include <algorithm>
#include <cmath>

namespace ca {

namespace {

constexpr double kEps = 1e-9;

// Dense tableau simplex for  max c.x  s.t.  A x <= b, x >= 0, b >= 0.
// Bland's rule throughout: slower than Dantzig but cycle-free and
// deterministic, which is what the reproducibility contract needs.
class Simplex {
 public:
  Simplex(int rows, int cols) : rows_(rows), cols_(cols) {
    width_ = cols + rows + 1;
    t_.assign(static_cast<std::size_t>(rows + 1) * width_, 0.0);
    basis_.resize(rows);
    for (int r = 0; r < rows; ++r) {
      basis_[r] = cols + r;
      at(r, cols + r) = 1.0;
    }
  }

  double& at(int r, int c) { return t_[static_cast<std::size_t>(r) * width_ + c]; }
  void set_rhs(int r, double v) { at(r, cols_ + rows_) = v; }
  void set_objective(int c, double v) { at(rows_, c) = -v; }

  void solve() {
    const int rhs = cols_ + rows_;
    for (;;) {
      int enter = -1;
      for (int c = 0; c < cols_ + rows_; ++c)
        if (at(rows_, c) < -kEps) {
          enter = c;
          break;
        }
      if (enter < 0) return;

      int leave = -1;
      double best_ratio = 0.0;
      for (int r = 0; r < rows_; ++r) {
        const double a = at(r, enter);
        if (a > kEps) {
          const double ratio = at(r, rhs) / a;
          if (leave < 0 || ratio < best_ratio - kEps ||
              (ratio < best_ratio + kEps && basis_[r] < basis_[leave]))
            leave = r, best_ratio = ratio;
        }
      }
      if (leave < 0) throw std::runtime_error("LP unbounded (malformed packing program)");
      pivot(leave, enter);
    }
  }

  double objective() const {
    return t_[static_cast<std::size_t>(rows_) * width_ + cols_ + rows_];
  }

  double primal(int c) const {
    for (int r = 0; r < rows_; ++r)
      if (basis_[r] == c) return t_[static_cast<std::size_t>(r) * width_ + cols_ + rows_];
    return 0.0;
  }

 private:
  void pivot(int leave, int enter) {
    const double piv = at(leave, enter);
    for (int c = 0; c < width_; ++c) at(leave, c) /= piv;
    for (int r = 0; r <= rows_; ++r) {
      if (r == leave) continue;
      const double f = at(r, enter);
      if (f == 0.0) continue;
      for (int c = 0; c < width_; ++c) at(r, c) -= f * at(leave, c);
    }
    basis_[leave] = enter;
  }

  int rows_, cols_, width_;
  std::vector<double> t_;
  std::vector<int> basis_;
};

}  // namespace

double LpSolution::max_violation(int n, int m) const {
  std::vector<double> bidder_mass(n, 0.0), item_mass(m, 0.0);
  double worst = 0.0;
  for (const auto& [key, d] : x) {
    worst = std::max(worst, -d);
    bidder_mass[key.first] += d;
    for (int k = 0; k < m; ++k)
      if (contains(key.second, k)) item_mass[k] += d;
  }
  for (double s : bidder_mass) worst = std::max(worst, s - 1.0);
  for (double s : item_mass) worst = std::max(worst, s - 1.0);
  return worst;
}

std::vector<LpColumn> full_columns(const AuctionInstance& inst, Mask bidders) {
  if (inst.m > 12) throw SizeLimit("explicit LPR formulation requires m <= 12");
  std::vector<LpColumn> cols;
  for (int i = 0; i < inst.n; ++i) {
    if (!contains(bidders, i)) continue;
    for (Mask s = 1; s <= full_mask(inst.m); ++s) {
      const double v = inst.value(i, s);
      if (v > 0.0) cols.push_back({i, s, v});
    }
  }
  return cols;
}

LpSolution solve_lpr(const AuctionInstance& inst, Mask bidders) {
  return solve_lpr_columns(inst, full_columns(inst, bidders));
}

LpSolution solve_lpr_columns(const AuctionInstance& inst, std::vector<LpColumn> columns) {
  const int rows = inst.n + inst.m;
  Simplex sx(rows, static_cast<int>(columns.size()));
  for (int r = 0; r < rows; ++r) sx.set_rhs(r, 1.0);
  for (int c = 0; c < static_cast<int>(columns.size()); ++c) {
    const LpColumn& col = columns[c];
    sx.at(col.bidder, c) = 1.0;
    for (int k = 0; k < inst.m; ++k)
      if (contains(col.bundle, k)) sx.at(inst.n + k, c) = 1.0;
    sx.set_objective(c, col.value);
  }
  sx.solve();

  LpSolution sol;
  sol.objective = sx.objective();
  sol.per_bidder.assign(inst.n, 0.0);
  for (int c = 0; c < static_cast<int>(columns.size()); ++c) {
    const double d = sx.primal(c);
    if (d > 1e-12) {
      sol.x[{columns[c].bidder, columns[c].bundle}] += d;
      sol.per_bidder[columns[c].bidder] += d * columns[c].value;
    }
  }
  return sol;
}

}  // namespace ca
