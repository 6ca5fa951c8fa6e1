#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rdsmdr/estimators.hpp"
#include "rdsmdr/rng.hpp"

namespace rdsmdr {

enum class BootstrapMethod { salganik, lu, dr, nb, nb_fixed };

const char* bootstrap_method_name(BootstrapMethod m);
std::optional<BootstrapMethod> parse_bootstrap_method(const std::string& name);

struct BootstrapConfig {
  BootstrapMethod method = BootstrapMethod::salganik;
  int replicates = 200;  // B
  double alpha = 0.05;
  std::uint64_t rng_seed = 0;
  int threads = 1;  // parallelism for replicate-refitting methods

  void validate() const;
};

/**
 * One resampled view of the sample. Chain-style procedures fill mult and
 * z_events (the synthetic recruitment transitions). Cluster-style procedures
 * also record which recruiter trees were drawn: clusters lists each drawn
 * recruiter with the recruits it kept, and event_mult counts how often each
 * recruitment event of the original sample occurs in the replicate, aligned
 * with ChoiceData event order.
 */
struct Replicate {
  struct Cluster {
    int head = -1;              // member row of the drawn recruiter
    std::vector<int> children;  // member rows of the kept recruits
  };

  std::vector<double> mult;                  // per member occurrence count
  std::vector<std::pair<int, int>> z_events; // (recruiter z, recruit z), repeats included
  std::vector<double> event_mult;            // cluster procedures only
  std::vector<Cluster> clusters;             // cluster procedures only
  int n_b = 0;                               // multiset size of the replicate
};

// Evaluates one replicate; an undefined estimate becomes a dropped NaN.
using ReplicateEval = std::function<EstimateValue(const Replicate&)>;

/**
 * Chain resampler over the two recruiter-status classes: each replicate
 * starts from a uniformly drawn member and, from a member of status k, draws
 * the next uniformly from the members who were recruited by a status-k
 * recruiter, with replacement, until the replicate reaches the sample size.
 * A replicate that needs an empty class is redrawn and the restart counted;
 * the whole procedure fails once restarts exceed the replicate budget (a
 * restart rate above one half).
 */
std::vector<double> salganik_bootstrap(const RDSSample& sample, int B, RngStream rng,
                                       const ReplicateEval& eval, int* restarts = nullptr);

// Chain resampler over infection groups: transitions follow the tie-share
// mixing of the alter reports under degree weights, and the member is drawn
// uniformly within the target group. Errors when either group is absent.
std::vector<double> lu_bootstrap(const RDSSample& sample, int B, RngStream rng,
                                 const ReplicateEval& eval);

/**
 * Chain resampler over the two groups of a binary attribute: the group jump
 * k -> l has probability proportional to the reported tie count between the
 * groups scaled by phi^l, rows normalized; the member is drawn uniformly
 * within the target group. Errors when a group is empty or reports no ties.
 */
std::vector<double> dr_bootstrap(const RDSSample& sample, double phi, const std::string& attr,
                                 int B, RngStream rng, const ReplicateEval& eval);

/**
 * Cluster resampler: each replicate draws as many recruiters as the sample
 * has, with replacement; a drawn recruiter brings every one of its recruits.
 * Members are counted once per cluster instance, so replicate sizes vary.
 * Seeds enter replicates only as drawn recruiters, never as recruits.
 */
std::vector<double> nb_bootstrap(const RDSSample& sample, int B, RngStream rng,
                                 const ReplicateEval& eval, int threads = 1);

/**
 * Fixed-size variant: starts from ceil(n / (1 + c)) drawn recruiters, grows
 * by ceil(deficit / (1 + c)) clusters while the replicate is short, then
 * sheds the exact surplus by pruning uniformly chosen recruits while every
 * cluster instance keeps at least one, falling back to dropping one whole
 * cluster of exactly the surplus size. A replicate that cannot be fixed is
 * redrawn, erroring after 100 attempts. Every replicate has exactly n
 * members, counted with multiplicity.
 */
std::vector<double> nb_fixed_bootstrap(const RDSSample& sample, int B, RngStream rng,
                                       const ReplicateEval& eval, int threads = 1);

// Single fixed-size replicate, exposed so audits can inspect the cluster
// structure directly.
Replicate nb_fixed_replicate(const RDSSample& sample, RngStream rng);

struct NormalCI {
  double se = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  bool clamped = false;  // interval truncated to [0, 1]
  int used = 0;          // defined replicate estimates
  int dropped = 0;       // undefined (NaN) replicate estimates
};

// Normal-quantile interval point +- z_{1-alpha/2} * sd(replicates), on the
// prevalence scale. NaN entries are dropped and counted; fewer than two
// defined estimates is an error.
NormalCI normal_ci(std::span<const double> estimates, double point, double alpha);

// Estimator identity used by the bootstrap driver, the scenario harness, and
// the CLI.
enum class EstimatorKind { vh, sh, lu, dr_ii, dr_ego, mdr_ii, mdr_ego };

const char* estimator_name(EstimatorKind k);
std::optional<EstimatorKind> parse_estimator(const std::string& name);

struct EstimatorSpec {
  EstimatorKind kind = EstimatorKind::vh;
  std::string attr;                         // dr_ii / dr_ego attribute
  std::vector<CovariateSpec> covariates;    // mdr_ii / mdr_ego model
};

// The resampling scheme each estimator's variance was studied under.
BootstrapMethod default_method(EstimatorKind k);

struct BootstrapResult {
  BootstrapMethod method = BootstrapMethod::salganik;
  int B = 0;
  EstimateValue point;
  NormalCI ci;
  std::vector<double> replicate_estimates;  // NaN where undefined
  int restarts = 0;        // chain resampler restarts
  int refit_failures = 0;  // cluster replicates whose refit failed or diverged
};

/**
 * Point estimate plus bootstrap interval for one estimator. `fit` carries
 * the original-sample coefficient fit and is required for the model-based
 * estimators; chain methods reuse it unchanged in every replicate, while
 * cluster methods refit the coefficients per replicate from the original
 * estimate (capped at 200 iterations) so the interval reflects coefficient
 * uncertainty. Errors when the point estimate is undefined.
 */
BootstrapResult bootstrap_ci(const RDSSample& sample, const EstimatorSpec& estimator,
                             const FitResult* fit, const BootstrapConfig& config);

}  // namespace rdsmdr
