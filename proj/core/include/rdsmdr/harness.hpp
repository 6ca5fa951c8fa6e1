#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "rdsmdr/bootstrap.hpp"
#include "rdsmdr/netgen.hpp"
#include "rdsmdr/sampler.hpp"

namespace rdsmdr {

// Strength levels of the two scenario axes: age homophily of the network and
// covariate-driven recruitment preference of the chain.
enum class Level { none, moderate, high };

const char* level_name(Level level);
std::optional<Level> parse_level(const std::string& name);

// Calibrated dyad coefficients (intercept, age-gap slope) giving tie
// propensity ratios of about 1.0 / 3.2 / 5.1 at mean degree 12.
ErgmParams ergm_for(Level homophily);

// Recruitment coefficients for the four scenario covariates, chosen so the
// mean per-node preference ratio on a moderately homophilous network is about
// 1.0 / 2.0 / 4.0.
std::vector<double> beta_for(Level mdr);

// The scenario recruitment model: recruit age, recruit infection status,
// their product, and the dyad age gap.
std::vector<CovariateSpec> scenario_covariates();
MDRModel scenario_mdr_model(Level mdr);

// Scenario population: ages Gamma(26, 1), infection expit(-4 + 0.09 age),
// ties from the homophily level's dyad model. The retry cap is generous
// because strongly homophilous draws often leave an isolated node.
PopulationRecipe scenario_recipe(Level homophily, std::size_t n = 1000);

// The six estimators the scenario study compares, in reporting order.
std::vector<EstimatorKind> default_scenario_estimators();

/**
 * One cell of the scenario study: draw `networks` populations, run
 * `samples_per_network` recruitment samples on each, estimate prevalence with
 * every requested estimator, and (optionally) attach a bootstrap interval
 * per estimate. Each estimator uses its own default resampling method; the
 * `bootstrap` field supplies the replicate count and level only.
 */
struct ScenarioConfig {
  Level homophily = Level::none;
  Level mdr = Level::none;
  int networks = 5;
  int samples_per_network = 40;
  std::size_t population_n = 1000;
  SamplingDesign design;
  std::vector<EstimatorKind> estimators;  // empty: the six comparison estimators
  BootstrapConfig bootstrap;
  bool with_ci = true;
  std::uint64_t root_seed = 0;
  int threads = 1;

  void validate() const;
};

struct EstimatorCellStats {
  EstimatorKind kind = EstimatorKind::vh;
  double bias = 0.0;
  double sd = 0.0;  // population formula, so rmse^2 == bias^2 + sd^2
  double rmse = 0.0;
  double coverage = std::numeric_limits<double>::quiet_NaN();
  int defined = 0;    // units with a defined estimate
  int undefined = 0;  // units without one, unit failures included
  int ci_count = 0;   // units with an interval (the coverage denominator)
};

struct ScenarioResult {
  Level homophily = Level::none;
  Level mdr = Level::none;
  int networks = 0;
  int samples_per_network = 0;
  std::vector<EstimatorKind> estimators;
  std::vector<double> true_mu;    // per network; NaN when generation failed
  std::vector<int> unit_network;  // unit index -> network index

  // Per estimator, per unit; NaN where undefined or failed.
  std::vector<std::vector<double>> estimates;
  std::vector<std::vector<double>> ci_lo;
  std::vector<std::vector<double>> ci_hi;

  std::vector<EstimatorCellStats> stats;
  int failed_units = 0;
  std::vector<std::string> failures;  // first few failure messages, unit order

  int units() const { return networks * samples_per_network; }
  // Estimation errors (estimate minus the unit's network prevalence) for one
  // estimator, NaN preserved.
  std::vector<double> errors(int estimator_index) const;
};

// Runs one cell. Unit-level failures are tolerated up to 20% of units; beyond
// that the cell aborts with a numeric error. Identical configs (any thread
// count) produce identical results.
ScenarioResult run_scenario(const ScenarioConfig& config);

/**
 * Paired comparison of per-unit squared errors against the estimator with the
 * smallest mean squared error. p-values are two-sided normal tests of the
 * mean paired difference, compared to a familywise threshold alpha/(J-1);
 * estimators that clear it are flagged indistinguishable from the best.
 * Units where any trace is NaN are dropped listwise.
 */
struct MseComparison {
  int best = 0;
  std::vector<double> mean_sq;
  std::vector<double> p_value;  // unadjusted; NaN for the best itself
  std::vector<bool> indistinguishable;
  double alpha = 0.05;
};

MseComparison bonferroni_mse_compare(const std::vector<std::vector<double>>& sq_errors,
                                     double alpha = 0.05);

// ---------------------------------------------------------------------------
// Survey ingestion and repair
// ---------------------------------------------------------------------------

// Age bracket catalog used by grouped degree reports: [18,20), then
// five-year brackets [20,25) ... [75,80), then the open bracket [80, inf).
class AgeGroups {
 public:
  static constexpr int count = 14;
  static int group_of(double age);  // errors below 18
  static double lower(int g);
  static double upper(int g);  // +inf for the last bracket
  static std::string label(int g);
  // Distance between bracket lower bounds in years, floored at 1 so a
  // member's own bracket stays eligible in inverse-distance draws.
  static double distance(int a, int b);
};

/**
 * Fill gaps (coded -1) in a binary attribute along the recruitment tree. A
 * gap copies the value of an observed tree neighbor (its recruiter if
 * observed, otherwise one of its recruits) with probability same_prob and
 * takes the opposite value otherwise. Passes repeat until no gap remains; a
 * gap with no observed neighbor on any pass is a data error.
 */
std::vector<int> impute_binary(std::vector<int> values, std::span<const int> recruiter,
                               double same_prob, RngStream rng);

// The three degree reports of one survey row. Counts, stored exactly.
struct DegreeReport {
  long total = 0;
  std::array<long, 2> by_gender{};  // [non-male, male]
  std::array<long, AgeGroups::count> by_age{};

  long gender_sum() const;
  long age_sum() const;
  bool consistent() const;
};

struct ReconcileOptions {
  double same_gender_prob = 0.62;
  // Population share of each age bracket; adds are restricted to brackets
  // with positive share.
  std::span<const double> group_freq;
};

struct ReconcileOutcome {
  DegreeReport report;
  bool changed = false;  // any field differs from the input
  bool floored = false;  // recruitment activity exceeded every reported total
};

/**
 * Make the three degree measures agree. The target degree is the most
 * frequent of the three reported totals (median when all differ), floored at
 * the member's observed recruitment activity. Age-bracket counts are then
 * adjusted one contact at a time, adding to bracket g with probability
 * proportional to 1 / (distance(own, g) * freq_g) and removing with the
 * inverse probability restricted to nonempty brackets; gender counts add a
 * same-gender contact with probability same_gender_prob and remove an
 * opposite-gender one with the same probability.
 */
ReconcileOutcome reconcile_degrees(const DegreeReport& reported, int own_gender,
                                   int own_age_group, int activity, const ReconcileOptions& opt,
                                   RngStream rng);

struct ReconstructOptions {
  double open_age_cap = 90.0;  // upper draw bound for the open age bracket
  std::string age_attr = "age";
  std::string gender_attr = "male";
};

// One synthetic alter per counted contact: ages drawn uniformly within the
// contact's bracket, gender labels shuffled to match the by-gender totals.
// Requires a consistent report.
std::vector<AttrValues> reconstruct_alters(const DegreeReport& report,
                                           const ReconstructOptions& opt, RngStream rng);

// One row of a wide survey table.
struct RawRecord {
  std::string id;
  std::string recruiter_id;  // empty for seeds
  double age = std::numeric_limits<double>::quiet_NaN();
  int gender = -1;  // 1 male, 0 non-male, -1 missing
  DegreeReport report;
};

struct IngestOptions {
  // Probability that a recruitment crosses no gender line; NaN means
  // estimate it from the observed recruiter-recruit pairs.
  double same_gender_prob = std::numeric_limits<double>::quiet_NaN();
  double open_age_cap = 90.0;
  std::string outcome = "male";  // binary attribute copied into z
};

struct RepairAudit {
  int members = 0;
  int imputed_gender = 0;
  int raised_to_activity = 0;  // rows whose reports undercounted known contacts
  int modified = 0;            // rows changed by any repair
  double same_gender_prob = 0.0;
  std::vector<std::string> notes;
};

struct IngestResult {
  RDSSample sample;
  RepairAudit audit;
};

/**
 * Full repair pipeline: link the tree, impute missing genders, reconcile the
 * degree reports, and build each member's alter list. Tree neighbors
 * (recruiter and recruits) enter the list with their actual attributes and
 * an in_sample flag of 1; the remaining contacts are reconstructed from the
 * reconciled bracket counts. Member attributes carry age, male, and a z copy
 * of the outcome attribute; alters likewise.
 */
IngestResult ingest_survey(std::vector<RawRecord> records, const IngestOptions& opt,
                           RngStream rng);

/**
 * Perturbs an ingested sample toward stronger recruitment preference: the
 * reconstructed (in_sample == 0) alters of each member are relabeled so a
 * share `convert` of them are non-male, and their age gaps to the member
 * shrink by `age_shift` years (floored at zero). Tree-neighbor alters are
 * observed data and stay untouched.
 */
struct SensitivityOptions {
  double convert = 0.7;
  double age_shift = 3.0;
  std::string gender_attr = "male";
  std::string age_attr = "age";
};

RDSSample sensitivity_transform(RDSSample sample, const SensitivityOptions& opt, RngStream rng);

}  // namespace rdsmdr
