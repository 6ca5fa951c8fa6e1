#pragma once

#include <cstdint>
#include <span>

#include "rdsmdr/population.hpp"
#include "rdsmdr/rng.hpp"

namespace rdsmdr {

// Dyadic tie model: P(tie between i,j) = expit(eta1 + eta2 * |age_i - age_j|).
struct ErgmParams {
  double eta1 = -4.41;
  double eta2 = 0.0;
};

/**
 * Recipe for a synthetic population: ages i.i.d. Gamma(shape, rate), infection
 * Bernoulli(expit(intercept + slope*age)) given age, ties independent across
 * dyads under ErgmParams.
 *
 * Realizations containing isolated nodes are discarded and fully redrawn
 * (ages, infection and ties alike), up to max_retries attempts. Strong
 * age homophily makes isolated high-age nodes common, so homophilous recipes
 * need a generous cap; the scenario harness passes 2000.
 */
struct PopulationRecipe {
  std::size_t n = 1000;
  double age_shape = 26.0;
  double age_rate = 1.0;
  double infect_intercept = -4.0;
  double infect_slope = 0.09;
  ErgmParams ergm;
  int max_retries = 100;
};

Population draw_population(const PopulationRecipe& recipe, RngStream stream);

// Empirical tie-propensity ratio between close-age and distant-age dyads.
// Returns +inf when the distant-age class has zero ties; errors when either
// dyad class is empty.
double estimate_tau(const Population& pop, double threshold_years = 5.0);

struct CalibrationOptions {
  std::size_t mc_pairs = 1'000'000;   // age pairs drawn once, shared by all evaluations
  std::uint64_t mc_seed = 0x5eedu;    // fixed so calibration is a deterministic function
  double rel_tol = 0.01;
  double eta_lo = -20.0;              // search box is [eta_lo, 0] in each coordinate
  double threshold_years = 5.0;
};

// Expected mean degree / tau of the dyad model against a fixed set of
// sampled age differences; used by calibrate_eta and exposed for tests.
struct AgePairSample {
  std::vector<double> gaps;           // |age_a - age_b| for sampled pairs
  std::size_t n_ages = 0;
};
AgePairSample sample_age_pairs(std::span<const double> ages, const CalibrationOptions& opt);
double analytic_mean_degree(const ErgmParams& eta, const AgePairSample& pairs);
double analytic_tau(const ErgmParams& eta, const AgePairSample& pairs, double threshold_years = 5.0);

// Finds eta with analytic tau = target_tau and analytic mean degree =
// target_mean_degree (both within rel_tol), by nested bisection: eta2 outer,
// eta1 inner. target_tau = 1 forces eta2 = 0 exactly.
ErgmParams calibrate_eta(double target_tau, double target_mean_degree,
                         std::span<const double> age_sample, const CalibrationOptions& opt = {});

}  // namespace rdsmdr
