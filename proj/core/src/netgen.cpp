#include "rdsmdr/netgen.hpp"

#include <cmath>
#include <limits>
#include <random>

#include "rdsmdr/math.hpp"

namespace rdsmdr {

Population draw_population(const PopulationRecipe& recipe, RngStream stream) {
  if (recipe.n < 2) fail_config("population size must be at least 2");
  if (!(recipe.age_shape > 0.0) || !(recipe.age_rate > 0.0))
    fail_config("gamma age parameters must be positive");
  if (recipe.max_retries < 1) fail_config("max_retries must be at least 1");

  auto eng = stream.engine();
  std::gamma_distribution<double> age_dist(recipe.age_shape, 1.0 / recipe.age_rate);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const std::size_t n = recipe.n;

  for (int attempt = 1; attempt <= recipe.max_retries; ++attempt) {
    std::vector<double> ages(n);
    std::vector<std::int8_t> z(n);
    for (std::size_t i = 0; i < n; ++i) {
      ages[i] = age_dist(eng);
      z[i] = unif(eng) < expit(recipe.infect_intercept + recipe.infect_slope * ages[i]) ? 1 : 0;
    }
    std::vector<std::vector<NodeId>> adj(n);
    bool any_tie = false;
    for (std::size_t i = 0; i + 1 < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        const double p = expit(recipe.ergm.eta1 + recipe.ergm.eta2 * std::abs(ages[i] - ages[j]));
        if (unif(eng) < p) {
          adj[i].push_back(static_cast<NodeId>(j));
          adj[j].push_back(static_cast<NodeId>(i));
          any_tie = true;
        }
      }
    }
    bool isolated = false;
    for (std::size_t i = 0; i < n; ++i) {
      if (adj[i].empty()) {
        isolated = true;
        break;
      }
    }
    if (isolated || !any_tie) continue;
    return Population::build(std::move(adj), std::move(ages), std::move(z));
  }
  fail_numeric("network generation failed: isolated nodes persisted after " +
               std::to_string(recipe.max_retries) + " attempts");
}

double estimate_tau(const Population& pop, double threshold_years) {
  const auto& ages = pop.ages();
  const std::size_t n = pop.size();
  long close_dyads = 0, far_dyads = 0, close_ties = 0, far_ties = 0;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const auto& nbr = pop.neighbors(static_cast<NodeId>(i));
    for (std::size_t j = i + 1; j < n; ++j) {
      const bool close = std::abs(ages[i] - ages[j]) <= threshold_years;
      const bool tie = std::binary_search(nbr.begin(), nbr.end(), static_cast<NodeId>(j));
      if (close) {
        ++close_dyads;
        close_ties += tie;
      } else {
        ++far_dyads;
        far_ties += tie;
      }
    }
  }
  if (close_dyads == 0 || far_dyads == 0)
    fail_data("tau is undefined: a dyad class is empty at threshold " + std::to_string(threshold_years));
  const double p_close = static_cast<double>(close_ties) / static_cast<double>(close_dyads);
  const double p_far = static_cast<double>(far_ties) / static_cast<double>(far_dyads);
  if (p_far == 0.0) return std::numeric_limits<double>::infinity();
  return p_close / p_far;
}

AgePairSample sample_age_pairs(std::span<const double> ages, const CalibrationOptions& opt) {
  if (ages.size() < 2) fail_config("age sample must contain at least 2 values");
  AgePairSample out;
  out.n_ages = ages.size();
  out.gaps.resize(opt.mc_pairs);
  auto eng = RngStream(opt.mc_seed).engine();
  std::uniform_int_distribution<std::size_t> pick(0, ages.size() - 1);
  for (std::size_t k = 0; k < opt.mc_pairs; ++k) {
    std::size_t a = pick(eng), b = pick(eng);
    while (b == a) b = pick(eng);
    out.gaps[k] = std::abs(ages[a] - ages[b]);
  }
  return out;
}

double analytic_mean_degree(const ErgmParams& eta, const AgePairSample& pairs) {
  KahanSum acc;
  for (double g : pairs.gaps) acc.add(expit(eta.eta1 + eta.eta2 * g));
  return static_cast<double>(pairs.n_ages - 1) * acc.value() / static_cast<double>(pairs.gaps.size());
}

double analytic_tau(const ErgmParams& eta, const AgePairSample& pairs, double threshold_years) {
  KahanSum close_acc, far_acc;
  std::size_t n_close = 0, n_far = 0;
  for (double g : pairs.gaps) {
    const double p = expit(eta.eta1 + eta.eta2 * g);
    if (g <= threshold_years) {
      close_acc.add(p);
      ++n_close;
    } else {
      far_acc.add(p);
      ++n_far;
    }
  }
  if (n_close == 0 || n_far == 0) fail_data("tau is undefined: a dyad class is empty in the age-pair sample");
  return (close_acc.value() / static_cast<double>(n_close)) /
         (far_acc.value() / static_cast<double>(n_far));
}

namespace {

// Solve analytic_mean_degree(eta1; eta2) = target on [lo, 0]; mean degree is
// strictly increasing in eta1.
double solve_eta1(double eta2, double target, const AgePairSample& pairs, double lo, double rel_tol) {
  double hi = 0.0;
  if (analytic_mean_degree({lo, eta2}, pairs) > target)
    fail_numeric("calibration failed: mean degree at the lower eta1 bound already exceeds the target");
  if (analytic_mean_degree({hi, eta2}, pairs) < target)
    fail_numeric("calibration failed: target mean degree unreachable inside the search box");
  double mid = 0.5 * (lo + hi);
  for (int it = 0; it < 60 && (hi - lo) > 1e-9; ++it) {
    mid = 0.5 * (lo + hi);
    const double d = analytic_mean_degree({mid, eta2}, pairs);
    (d < target ? lo : hi) = mid;
  }
  const double achieved = analytic_mean_degree({mid, eta2}, pairs);
  if (std::abs(achieved - target) > rel_tol * target)
    fail_numeric("calibration failed: mean degree tolerance not met");
  return mid;
}

}  // namespace

ErgmParams calibrate_eta(double target_tau, double target_mean_degree,
                         std::span<const double> age_sample, const CalibrationOptions& opt) {
  if (!(target_tau >= 1.0)) fail_config("target tau must be >= 1 (the dyad model has eta2 <= 0)");
  if (!(target_mean_degree > 0.0)) fail_config("target mean degree must be positive");

  const AgePairSample pairs = sample_age_pairs(age_sample, opt);

  // tau == 1 is exact at eta2 = 0 (constant dyad probability).
  if (target_tau == 1.0) {
    const double eta1 = solve_eta1(0.0, target_mean_degree, pairs, opt.eta_lo, opt.rel_tol);
    return {eta1, 0.0};
  }

  auto tau_at = [&](double eta2) {
    const double eta1 = solve_eta1(eta2, target_mean_degree, pairs, opt.eta_lo, opt.rel_tol);
    return std::pair<double, double>{analytic_tau({eta1, eta2}, pairs, opt.threshold_years), eta1};
  };

  // tau(eta2) increases as eta2 decreases from 0, but steep slopes can put
  // the degree target out of reach (mean degree is capped at its eta1 = 0
  // value, which shrinks with the slope). Feasibility is monotone in eta2,
  // so expand the bracket downward from 0 and stop at the last feasible
  // point; everything above it stays solvable for the bisection.
  double lo = -0.1, hi = 0.0;
  for (;;) {
    double tau_lo = 0.0;
    bool feasible = true;
    try {
      tau_lo = tau_at(lo).first;
    } catch (const Error&) {
      feasible = false;
    }
    if (feasible && tau_lo >= target_tau) break;
    if (!feasible || lo <= opt.eta_lo)
      fail_numeric("calibration failed: target tau unreachable inside the search box");
    hi = lo;
    lo = std::max(opt.eta_lo, 2.0 * lo);
  }
  for (int it = 0; it < 60; ++it) {
    const double mid = 0.5 * (lo + hi);
    auto [tau_mid, eta1_mid] = tau_at(mid);
    if (std::abs(tau_mid - target_tau) <= opt.rel_tol * target_tau) return {eta1_mid, mid};
    (tau_mid > target_tau ? lo : hi) = mid;
  }
  fail_numeric("calibration failed: tau bisection did not converge to tolerance");
}

}  // namespace rdsmdr
