#pragma once

// Reference implementations and small helpers shared by the test binaries.
// Everything here favors transparency over speed: dense matrices, literal
// formulas, central differences. The library is never allowed to check
// itself against its own internals.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <utility>
#include <vector>

#include <rdsmdr/error.hpp>
#include <rdsmdr/population.hpp>
#include <rdsmdr/recruitment.hpp>
#include <rdsmdr/rng.hpp>
#include <rdsmdr/sampler.hpp>

namespace oracle {

using rdsmdr::AttrValues;
using rdsmdr::Error;
using rdsmdr::ErrorKind;
using rdsmdr::MDRModel;
using rdsmdr::NodeId;
using rdsmdr::Population;
using rdsmdr::RngStream;

inline bool throws_kind(ErrorKind want, const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind() == want;
  } catch (...) {
    return false;
  }
  return false;
}

// Connected random graph: a path backbone plus Bernoulli extra ties, ages
// uniform on [18, 60], infection Bernoulli(0.3).
inline Population random_connected_population(RngStream rng, int n_lo, int n_hi,
                                              double extra_p = -1.0) {
  auto eng = rng.engine();
  const int n = std::uniform_int_distribution<int>(n_lo, n_hi)(eng);
  std::vector<std::pair<NodeId, NodeId>> edges;
  for (int i = 1; i < n; ++i) edges.emplace_back(i - 1, i);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double p = extra_p >= 0.0 ? extra_p : std::min(1.0, 4.0 / n);
  for (int i = 0; i < n; ++i)
    for (int j = i + 2; j < n; ++j)
      if (unif(eng) < p) edges.emplace_back(i, j);
  std::vector<double> ages(static_cast<std::size_t>(n));
  std::vector<std::int8_t> z(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    ages[static_cast<std::size_t>(i)] = 18.0 + 42.0 * unif(eng);
    z[static_cast<std::size_t>(i)] = unif(eng) < 0.3 ? 1 : 0;
  }
  return Population::from_edges(static_cast<std::size_t>(n), edges, std::move(ages),
                                std::move(z));
}

// The four-covariate family the comparison study uses: recruit age, recruit
// infection status, their product, and the dyad age gap.
inline std::vector<rdsmdr::CovariateSpec> standard_covariates() {
  using rdsmdr::CovariateSpec;
  std::vector<CovariateSpec> covs;
  covs.push_back(CovariateSpec::recruit_attribute("age"));
  covs.push_back(CovariateSpec::recruit_attribute("z"));
  covs.push_back(CovariateSpec::recruit_product({"age", "z"}));
  covs.push_back(CovariateSpec::age_gap());
  return covs;
}

// Random coefficients for the standard covariates. Age-scaled coordinates
// stay small so logits remain moderate on ages up to 60.
inline MDRModel random_standard_model(RngStream rng) {
  auto eng = rng.engine();
  std::uniform_real_distribution<double> small(-0.05, 0.05);
  std::uniform_real_distribution<double> wide(-0.8, 0.8);
  MDRModel m;
  m.covariates = standard_covariates();
  m.beta = {small(eng), wide(eng), small(eng), small(eng)};
  return m;
}

// Dense transition matrix of the recruitment chain under the standard
// covariates, from first principles: row i puts mass proportional to
// exp(b1 age_j + b2 z_j + b3 age_j z_j + b4 |age_i - age_j|) on each
// neighbor j of i and zero elsewhere.
inline std::vector<std::vector<double>> dense_transition_standard(const Population& pop,
                                                                  const MDRModel& model) {
  const auto n = static_cast<NodeId>(pop.size());
  const auto& age = pop.ages();
  const auto& z = pop.infection();
  std::vector<std::vector<double>> P(static_cast<std::size_t>(n),
                                     std::vector<double>(static_cast<std::size_t>(n), 0.0));
  for (NodeId i = 0; i < n; ++i) {
    double total = 0.0;
    for (NodeId j : pop.neighbors(i)) {
      const auto aj = age[static_cast<std::size_t>(j)];
      const auto zj = static_cast<double>(z[static_cast<std::size_t>(j)]);
      const double x = model.beta[0] * aj + model.beta[1] * zj + model.beta[2] * aj * zj +
                       model.beta[3] * std::abs(age[static_cast<std::size_t>(i)] - aj);
      P[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = std::exp(x);
      total += std::exp(x);
    }
    for (NodeId j : pop.neighbors(i))
      P[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] /= total;
  }
  return P;
}

// Stationary distribution by power iteration on the lazy chain (P + I)/2,
// which is aperiodic whenever the walk is irreducible.
inline std::vector<double> power_stationary(const std::vector<std::vector<double>>& P,
                                            double tol = 1e-14, int max_iter = 200000) {
  const auto n = P.size();
  std::vector<double> pi(n, 1.0 / static_cast<double>(n));
  std::vector<double> next(n);
  for (int it = 0; it < max_iter; ++it) {
    std::fill(next.begin(), next.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      next[i] += 0.5 * pi[i];
      for (std::size_t j = 0; j < n; ++j) next[j] += 0.5 * pi[i] * P[i][j];
    }
    double diff = 0.0;
    for (std::size_t i = 0; i < n; ++i) diff += std::abs(next[i] - pi[i]);
    pi.swap(next);
    if (diff < tol) break;
  }
  return pi;
}

inline std::vector<double> fd_gradient(const std::function<double(const std::vector<double>&)>& f,
                                       std::vector<double> x, double h = 1e-5) {
  std::vector<double> g(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double xk = x[k];
    x[k] = xk + h;
    const double up = f(x);
    x[k] = xk - h;
    const double dn = f(x);
    x[k] = xk;
    g[k] = (up - dn) / (2.0 * h);
  }
  return g;
}

inline double grid_argmax(const std::function<double(double)>& f, double lo, double hi,
                          double step) {
  double best_x = lo;
  double best = f(lo);
  for (double x = lo + step; x <= hi + step / 2; x += step) {
    const double v = f(x);
    if (v > best) {
      best = v;
      best_x = x;
    }
  }
  return best_x;
}

// Hand-built sample member. Members always carry their infection status as
// an attribute, mirroring what the samplers produce.
inline rdsmdr::Member member(int recruiter, int wave, double degree, int z,
                             AttrValues attrs = {}, std::vector<AttrValues> alters = {}) {
  rdsmdr::Member m;
  m.recruiter = recruiter;
  m.wave = wave;
  m.reported_degree = degree;
  m.z = z;
  m.attrs = std::move(attrs);
  m.alters = std::move(alters);
  if (m.attrs.find("z") == m.attrs.end()) m.attrs["z"] = static_cast<double>(z);
  return m;
}

// One simulated sampling unit on a connected random graph.
struct SimUnit {
  Population pop;
  rdsmdr::RDSSample sample;
};

inline SimUnit simulate_unit(RngStream rng, int pop_lo = 150, int pop_hi = 300,
                             int n_target = 80, int n_seeds = 4, int coupons = 2,
                             const MDRModel* model = nullptr) {
  Population pop = random_connected_population(rng.child(0), pop_lo, pop_hi);
  const MDRModel walk = rdsmdr::random_walk_model();
  rdsmdr::SamplingDesign design;
  design.n_target = n_target;
  design.n_seeds = n_seeds;
  design.coupons = coupons;
  rdsmdr::RDSSample sample =
      rdsmdr::run_rds(pop, model != nullptr ? *model : walk, design, rng.child(1));
  return {std::move(pop), std::move(sample)};
}

}  // namespace oracle
