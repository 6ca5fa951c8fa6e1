#include "rdsmdr/harness.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include "rdsmdr/error.hpp"
#include "rdsmdr/estimators.hpp"
#include "rdsmdr/math.hpp"
#include "rdsmdr/parallel.hpp"

namespace rdsmdr {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}

const char* level_name(Level level) {
  switch (level) {
    case Level::none: return "none";
    case Level::moderate: return "moderate";
    case Level::high: return "high";
  }
  return "?";
}

std::optional<Level> parse_level(const std::string& name) {
  if (name == "none") return Level::none;
  if (name == "moderate") return Level::moderate;
  if (name == "high") return Level::high;
  return std::nullopt;
}

ErgmParams ergm_for(Level homophily) {
  switch (homophily) {
    case Level::none: return {-4.41, 0.0};
    case Level::moderate: return {-3.60, -0.19};
    case Level::high: return {-3.27, -0.28};
  }
  return {};
}

std::vector<double> beta_for(Level mdr) {
  switch (mdr) {
    case Level::none: return {0.0, 0.0, 0.0, 0.0};
    case Level::moderate: return {0.126, 0.064, 0.010, -0.017};
    case Level::high: return {0.230, 0.031, 0.018, -0.003};
  }
  return {};
}

std::vector<CovariateSpec> scenario_covariates() {
  return {CovariateSpec::recruit_attribute("age"), CovariateSpec::recruit_attribute("z"),
          CovariateSpec::recruit_product({"age", "z"}), CovariateSpec::age_gap()};
}

MDRModel scenario_mdr_model(Level mdr) {
  MDRModel model{scenario_covariates(), beta_for(mdr)};
  model.validate();
  return model;
}

PopulationRecipe scenario_recipe(Level homophily, std::size_t n) {
  PopulationRecipe recipe;
  recipe.n = n;
  recipe.ergm = ergm_for(homophily);
  recipe.max_retries = 2000;
  return recipe;
}

std::vector<EstimatorKind> default_scenario_estimators() {
  return {EstimatorKind::vh,     EstimatorKind::dr_ii,  EstimatorKind::mdr_ii,
          EstimatorKind::lu,     EstimatorKind::dr_ego, EstimatorKind::mdr_ego};
}

void ScenarioConfig::validate() const {
  if (networks < 1) fail_config("networks must be at least 1");
  if (samples_per_network < 1) fail_config("samples_per_network must be at least 1");
  if (population_n < 2) fail_config("population size must be at least 2");
  if (threads < 0) fail_config("thread count cannot be negative");
  design.validate();
  if (with_ci) bootstrap.validate();
}

std::vector<double> ScenarioResult::errors(int estimator_index) const {
  if (estimator_index < 0 || estimator_index >= static_cast<int>(estimates.size()))
    fail_config("estimator index out of range");
  const auto& est = estimates[static_cast<std::size_t>(estimator_index)];
  std::vector<double> err(est.size(), kNaN);
  for (std::size_t u = 0; u < est.size(); ++u) {
    const double mu = true_mu[static_cast<std::size_t>(unit_network[u])];
    if (!std::isnan(est[u]) && std::isfinite(mu)) err[u] = est[u] - mu;
  }
  return err;
}

namespace {

EstimateValue point_estimate(const RDSSample& sample, EstimatorKind kind,
                             const std::optional<FitResult>& dr_fit,
                             const std::optional<FitResult>& mdr_fit,
                             const std::vector<CovariateSpec>& covs) {
  switch (kind) {
    case EstimatorKind::vh: return vh(sample);
    case EstimatorKind::sh: return sh(sample);
    case EstimatorKind::lu: return lu(sample);
    case EstimatorKind::dr_ii: return dr_ii(sample, *dr_fit, "z");
    case EstimatorKind::dr_ego: return dr_ego(sample, *dr_fit, "z");
    case EstimatorKind::mdr_ii: return mdr_ii(sample, *mdr_fit, covs);
    case EstimatorKind::mdr_ego: return mdr_ego(sample, *mdr_fit, covs);
  }
  fail_config("unknown estimator");
}

}  // namespace

ScenarioResult run_scenario(const ScenarioConfig& config) {
  config.validate();
  const std::vector<EstimatorKind> kinds =
      config.estimators.empty() ? default_scenario_estimators() : config.estimators;
  const int E = static_cast<int>(kinds.size());
  const int G = config.networks;
  const int S = config.samples_per_network;
  const int U = G * S;
  const int threads = resolve_threads(config.threads);

  const MDRModel truth = scenario_mdr_model(config.mdr);
  const std::vector<CovariateSpec> covs = scenario_covariates();
  const PopulationRecipe recipe = scenario_recipe(config.homophily, config.population_n);
  const RngStream root(config.root_seed);

  const bool needs_dr = std::any_of(kinds.begin(), kinds.end(), [](EstimatorKind k) {
    return k == EstimatorKind::dr_ii || k == EstimatorKind::dr_ego;
  });
  const bool needs_mdr = std::any_of(kinds.begin(), kinds.end(), [](EstimatorKind k) {
    return k == EstimatorKind::mdr_ii || k == EstimatorKind::mdr_ego;
  });

  std::vector<std::optional<Population>> pops(static_cast<std::size_t>(G));
  std::vector<double> true_mu(static_cast<std::size_t>(G), kNaN);
  std::vector<std::string> net_failure(static_cast<std::size_t>(G));
  parallel_for(static_cast<std::size_t>(G), threads, [&](std::size_t g) {
    try {
      pops[g].emplace(draw_population(recipe, root.child(g).child(0)));
      true_mu[g] = pops[g]->true_prevalence();
    } catch (const Error& err) {
      net_failure[g] = err.what();
    }
  });

  struct UnitOut {
    std::vector<double> est, lo, hi;
    std::string failure;
    bool failed = false;
  };
  std::vector<UnitOut> out(static_cast<std::size_t>(U));

  parallel_for(static_cast<std::size_t>(U), threads, [&](std::size_t u) {
    const std::size_t g = u / static_cast<std::size_t>(S);
    const std::size_t s = u % static_cast<std::size_t>(S);
    UnitOut& o = out[u];
    o.est.assign(static_cast<std::size_t>(E), kNaN);
    o.lo.assign(static_cast<std::size_t>(E), kNaN);
    o.hi.assign(static_cast<std::size_t>(E), kNaN);
    if (!pops[g]) {
      o.failed = true;
      o.failure = net_failure[g];
      return;
    }
    const RngStream unit = root.child(g).child(1 + s);
    try {
      const RDSSample sample = run_rds(*pops[g], truth, config.design, unit.child(0));
      std::optional<FitResult> dr_fit, mdr_fit;
      if (needs_dr) dr_fit = fit_dr(sample, "z");
      if (needs_mdr) mdr_fit = fit_mdr(sample, covs);

      for (int e = 0; e < E; ++e) {
        const EstimateValue point = point_estimate(sample, kinds[e], dr_fit, mdr_fit, covs);
        if (!point.defined()) continue;
        o.est[static_cast<std::size_t>(e)] = *point.value;
        if (!config.with_ci) continue;

        EstimatorSpec espec;
        espec.kind = kinds[e];
        espec.attr = "z";
        espec.covariates = covs;
        const FitResult* fit = nullptr;
        if (kinds[e] == EstimatorKind::dr_ii || kinds[e] == EstimatorKind::dr_ego)
          fit = &*dr_fit;
        else if (kinds[e] == EstimatorKind::mdr_ii || kinds[e] == EstimatorKind::mdr_ego)
          fit = &*mdr_fit;

        BootstrapConfig bc = config.bootstrap;
        bc.method = default_method(kinds[e]);
        bc.rng_seed = unit.child(static_cast<std::uint64_t>(1 + e)).key();
        bc.threads = 1;
        try {
          const BootstrapResult br = bootstrap_ci(sample, espec, fit, bc);
          o.lo[static_cast<std::size_t>(e)] = br.ci.lo;
          o.hi[static_cast<std::size_t>(e)] = br.ci.hi;
        } catch (const Error&) {
          // interval unavailable for this unit; the point estimate stands
        }
      }
    } catch (const Error& err) {
      o.failed = true;
      o.failure = err.what();
      std::fill(o.est.begin(), o.est.end(), kNaN);
      std::fill(o.lo.begin(), o.lo.end(), kNaN);
      std::fill(o.hi.begin(), o.hi.end(), kNaN);
    }
  });

  ScenarioResult res;
  res.homophily = config.homophily;
  res.mdr = config.mdr;
  res.networks = G;
  res.samples_per_network = S;
  res.estimators = kinds;
  res.true_mu = true_mu;
  res.unit_network.resize(static_cast<std::size_t>(U));
  res.estimates.assign(static_cast<std::size_t>(E), std::vector<double>(U, kNaN));
  res.ci_lo = res.estimates;
  res.ci_hi = res.estimates;
  for (int u = 0; u < U; ++u) {
    res.unit_network[static_cast<std::size_t>(u)] = u / S;
    const UnitOut& o = out[static_cast<std::size_t>(u)];
    if (o.failed) {
      ++res.failed_units;
      if (res.failures.size() < 10) res.failures.push_back(o.failure);
    }
    for (int e = 0; e < E; ++e) {
      res.estimates[e][u] = o.est[static_cast<std::size_t>(e)];
      res.ci_lo[e][u] = o.lo[static_cast<std::size_t>(e)];
      res.ci_hi[e][u] = o.hi[static_cast<std::size_t>(e)];
    }
  }

  if (res.failed_units * 5 > U)
    fail_numeric("scenario cell aborted: " + std::to_string(res.failed_units) + " of " +
                 std::to_string(U) + " units failed (first: " +
                 (res.failures.empty() ? std::string("?") : res.failures.front()) + ")");

  res.stats.resize(static_cast<std::size_t>(E));
  for (int e = 0; e < E; ++e) {
    EstimatorCellStats& st = res.stats[static_cast<std::size_t>(e)];
    st.kind = kinds[e];
    std::vector<double> errs;
    errs.reserve(static_cast<std::size_t>(U));
    KahanSum sq;
    int covered = 0, cis = 0;
    for (int u = 0; u < U; ++u) {
      const double mu = true_mu[static_cast<std::size_t>(u / S)];
      const double v = res.estimates[e][u];
      if (!std::isnan(v) && std::isfinite(mu)) {
        errs.push_back(v - mu);
        sq.add((v - mu) * (v - mu));
      }
      const double lo = res.ci_lo[e][u], hi = res.ci_hi[e][u];
      if (!std::isnan(lo) && !std::isnan(hi) && std::isfinite(mu)) {
        ++cis;
        if (lo <= mu && mu <= hi) ++covered;
      }
    }
    st.defined = static_cast<int>(errs.size());
    st.undefined = U - st.defined;
    if (!errs.empty()) {
      st.bias = mean(errs);
      st.sd = population_sd(errs);
      st.rmse = std::sqrt(sq.value() / static_cast<double>(errs.size()));
    } else {
      st.bias = st.sd = st.rmse = kNaN;
    }
    st.ci_count = cis;
    st.coverage = cis > 0 ? static_cast<double>(covered) / cis : kNaN;
  }
  return res;
}

MseComparison bonferroni_mse_compare(const std::vector<std::vector<double>>& sq_errors,
                                     double alpha) {
  const int J = static_cast<int>(sq_errors.size());
  if (J < 2) fail_config("need at least two estimators to compare");
  if (!(alpha > 0.0 && alpha < 1.0)) fail_config("alpha must lie strictly between 0 and 1");
  const std::size_t U = sq_errors.front().size();
  for (const auto& t : sq_errors)
    if (t.size() != U) fail_data("squared-error traces differ in length");

  std::vector<std::size_t> complete;
  for (std::size_t u = 0; u < U; ++u) {
    bool ok = true;
    for (const auto& t : sq_errors)
      if (!std::isfinite(t[u])) {
        ok = false;
        break;
      }
    if (ok) complete.push_back(u);
  }
  const std::size_t m = complete.size();
  if (m < 2) fail_data("fewer than two units with every trace defined");

  MseComparison cmp;
  cmp.alpha = alpha;
  cmp.mean_sq.resize(static_cast<std::size_t>(J));
  for (int j = 0; j < J; ++j) {
    KahanSum s;
    for (std::size_t u : complete) s.add(sq_errors[j][u]);
    cmp.mean_sq[static_cast<std::size_t>(j)] = s.value() / static_cast<double>(m);
  }
  cmp.best = static_cast<int>(
      std::min_element(cmp.mean_sq.begin(), cmp.mean_sq.end()) - cmp.mean_sq.begin());

  cmp.p_value.assign(static_cast<std::size_t>(J), kNaN);
  cmp.indistinguishable.assign(static_cast<std::size_t>(J), false);
  cmp.indistinguishable[static_cast<std::size_t>(cmp.best)] = true;
  const double threshold = alpha / static_cast<double>(J - 1);
  std::vector<double> diff(m);
  for (int j = 0; j < J; ++j) {
    if (j == cmp.best) continue;
    for (std::size_t t = 0; t < m; ++t)
      diff[t] = sq_errors[j][complete[t]] - sq_errors[cmp.best][complete[t]];
    const double md = mean(diff);
    const double sd = sample_sd(diff);
    double p;
    if (sd == 0.0)
      p = md == 0.0 ? 1.0 : 0.0;
    else
      p = 2.0 * (1.0 - normal_cdf(std::abs(md / (sd / std::sqrt(static_cast<double>(m))))));
    cmp.p_value[static_cast<std::size_t>(j)] = p;
    cmp.indistinguishable[static_cast<std::size_t>(j)] = p >= threshold;
  }
  return cmp;
}

// ---------------------------------------------------------------------------
// Survey ingestion and repair
// ---------------------------------------------------------------------------

namespace {

constexpr std::array<double, AgeGroups::count> kBracketLower = {
    18, 20, 25, 30, 35, 40, 45, 50, 55, 60, 65, 70, 75, 80};

}  // namespace

int AgeGroups::group_of(double age) {
  if (!(age >= 18.0)) fail_data("age " + std::to_string(age) + " is below the survey minimum of 18");
  if (age < 20.0) return 0;
  const int g = 1 + static_cast<int>((age - 20.0) / 5.0);
  return std::min(g, count - 1);
}

double AgeGroups::lower(int g) {
  if (g < 0 || g >= count) fail_config("age bracket index out of range");
  return kBracketLower[static_cast<std::size_t>(g)];
}

double AgeGroups::upper(int g) {
  if (g < 0 || g >= count) fail_config("age bracket index out of range");
  return g + 1 < count ? kBracketLower[static_cast<std::size_t>(g) + 1]
                       : std::numeric_limits<double>::infinity();
}

std::string AgeGroups::label(int g) {
  const double lo = lower(g);
  if (g + 1 == count) return "[" + std::to_string(static_cast<int>(lo)) + ",inf)";
  return "[" + std::to_string(static_cast<int>(lo)) + "," +
         std::to_string(static_cast<int>(upper(g))) + ")";
}

double AgeGroups::distance(int a, int b) {
  return std::max(1.0, std::abs(lower(a) - lower(b)));
}

std::vector<int> impute_binary(std::vector<int> values, std::span<const int> recruiter,
                               double same_prob, RngStream rng) {
  const std::size_t n = values.size();
  if (recruiter.size() != n) fail_config("recruiter links must cover every value");
  if (!(same_prob >= 0.0 && same_prob <= 1.0))
    fail_config("same-value probability must lie in [0, 1]");
  for (std::size_t i = 0; i < n; ++i)
    if (values[i] != -1 && values[i] != 0 && values[i] != 1)
      fail_data("value at row " + std::to_string(i) + " is not 0, 1 or missing");

  std::vector<std::vector<int>> recruits(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int r = recruiter[i];
    if (r < -1 || r >= static_cast<int>(n)) fail_config("recruiter link out of range");
    if (r >= 0) recruits[static_cast<std::size_t>(r)].push_back(static_cast<int>(i));
  }

  auto eng = rng.engine();
  std::bernoulli_distribution same(same_prob);
  bool progress = true;
  while (progress) {
    progress = false;
    bool gaps = false;
    for (std::size_t i = 0; i < n; ++i) {
      if (values[i] != -1) continue;
      int source = -1;
      const int r = recruiter[i];
      if (r >= 0 && values[static_cast<std::size_t>(r)] != -1) source = values[r];
      if (source == -1)
        for (int c : recruits[i])
          if (values[static_cast<std::size_t>(c)] != -1) {
            source = values[c];
            break;
          }
      if (source == -1) {
        gaps = true;
        continue;
      }
      values[i] = same(eng) ? source : 1 - source;
      progress = true;
    }
    if (!gaps) return values;
  }
  for (std::size_t i = 0; i < n; ++i)
    if (values[i] == -1)
      fail_data("row " + std::to_string(i) +
                " is missing with no observed recruiter or recruit to impute from");
  return values;
}

long DegreeReport::gender_sum() const { return by_gender[0] + by_gender[1]; }

long DegreeReport::age_sum() const {
  long t = 0;
  for (long c : by_age) t += c;
  return t;
}

bool DegreeReport::consistent() const { return total == gender_sum() && total == age_sum(); }

namespace {

void check_counts(const DegreeReport& r) {
  if (r.total < 0 || r.by_gender[0] < 0 || r.by_gender[1] < 0)
    fail_data("degree reports cannot be negative");
  for (long c : r.by_age)
    if (c < 0) fail_data("degree reports cannot be negative");
}

// Most frequent of the three totals; median when all three differ.
long majority_total(long a, long b, long c) {
  if (a == b || a == c) return a;
  if (b == c) return b;
  return std::max(std::min(a, b), std::min(std::max(a, b), c));
}

// Inverse-CDF draw over nonnegative weights; total must be positive.
int weighted_pick(std::span<const double> w, std::mt19937_64& eng) {
  double total = 0.0;
  for (double x : w) total += x;
  std::uniform_real_distribution<double> unit(0.0, total);
  double u = unit(eng);
  for (std::size_t g = 0; g < w.size(); ++g) {
    u -= w[g];
    if (u < 0.0) return static_cast<int>(g);
  }
  for (std::size_t g = w.size(); g-- > 0;)
    if (w[g] > 0.0) return static_cast<int>(g);
  return 0;
}

}  // namespace

ReconcileOutcome reconcile_degrees(const DegreeReport& reported, int own_gender,
                                   int own_age_group, int activity, const ReconcileOptions& opt,
                                   RngStream rng) {
  if (own_gender != 0 && own_gender != 1) fail_config("own gender must be 0 or 1");
  if (own_age_group < 0 || own_age_group >= AgeGroups::count)
    fail_config("own age bracket out of range");
  if (activity < 0) fail_config("recruitment activity cannot be negative");
  if (!(opt.same_gender_prob >= 0.0 && opt.same_gender_prob <= 1.0))
    fail_config("same-gender probability must lie in [0, 1]");
  if (opt.group_freq.size() != static_cast<std::size_t>(AgeGroups::count))
    fail_config("bracket frequency table must cover every bracket");
  check_counts(reported);

  const long majority = majority_total(reported.total, reported.gender_sum(), reported.age_sum());
  const long truth = std::max(majority, static_cast<long>(activity));

  ReconcileOutcome out;
  out.floored = static_cast<long>(activity) > majority;
  DegreeReport& r = out.report;
  r = reported;
  r.total = truth;

  auto eng = rng.engine();

  // Bracket adds favor brackets near the member's own, damped by how common
  // the bracket is; removals invert that preference.
  std::array<double, AgeGroups::count> add_w{}, del_w{};
  double add_total = 0.0;
  for (int g = 0; g < AgeGroups::count; ++g) {
    const double df = AgeGroups::distance(own_age_group, g) * opt.group_freq[g];
    add_w[g] = opt.group_freq[g] > 0.0 ? 1.0 / df : 0.0;
    del_w[g] = df;
    add_total += add_w[g];
  }

  while (r.age_sum() < truth) {
    if (add_total <= 0.0)
      fail_data("irreconcilable reports: no age bracket is eligible to receive a contact");
    ++r.by_age[static_cast<std::size_t>(weighted_pick(add_w, eng))];
  }
  while (r.age_sum() > truth) {
    std::array<double, AgeGroups::count> w{};
    double total = 0.0;
    for (int g = 0; g < AgeGroups::count; ++g)
      if (r.by_age[static_cast<std::size_t>(g)] > 0) {
        w[g] = del_w[g];
        total += w[g];
      }
    if (total <= 0.0)
      fail_data("irreconcilable reports: no age bracket is eligible to give up a contact");
    --r.by_age[static_cast<std::size_t>(weighted_pick(w, eng))];
  }

  std::bernoulli_distribution same(opt.same_gender_prob);
  while (r.gender_sum() < truth) ++r.by_gender[same(eng) ? own_gender : 1 - own_gender];
  while (r.gender_sum() > truth) {
    int target = same(eng) ? 1 - own_gender : own_gender;
    if (r.by_gender[static_cast<std::size_t>(target)] == 0) target = 1 - target;
    --r.by_gender[static_cast<std::size_t>(target)];
  }

  out.changed = r.total != reported.total || r.by_gender != reported.by_gender ||
                r.by_age != reported.by_age;
  return out;
}

std::vector<AttrValues> reconstruct_alters(const DegreeReport& report,
                                           const ReconstructOptions& opt, RngStream rng) {
  check_counts(report);
  if (!report.consistent())
    fail_data("degree reports disagree; reconcile them before reconstructing alters");
  if (!(opt.open_age_cap > AgeGroups::lower(AgeGroups::count - 1)))
    fail_config("open bracket age cap must exceed the bracket's lower bound");

  auto eng = rng.engine();
  std::vector<AttrValues> alters;
  alters.reserve(static_cast<std::size_t>(report.total));
  for (int g = 0; g < AgeGroups::count; ++g) {
    const double lo = AgeGroups::lower(g);
    const double hi = std::min(AgeGroups::upper(g), opt.open_age_cap);
    std::uniform_real_distribution<double> age(lo, hi);
    for (long c = 0; c < report.by_age[static_cast<std::size_t>(g)]; ++c)
      alters.push_back({{opt.age_attr, age(eng)}});
  }

  std::vector<int> labels;
  labels.reserve(alters.size());
  labels.assign(static_cast<std::size_t>(report.by_gender[1]), 1);
  labels.resize(alters.size(), 0);
  std::shuffle(labels.begin(), labels.end(), eng);
  for (std::size_t i = 0; i < alters.size(); ++i)
    alters[i][opt.gender_attr] = static_cast<double>(labels[i]);
  return alters;
}

IngestResult ingest_survey(std::vector<RawRecord> records, const IngestOptions& opt,
                           RngStream rng) {
  const std::size_t n = records.size();
  if (n == 0) fail_data("survey table is empty");
  if (opt.outcome != "male")
    fail_config("the survey schema provides 'male' as its only binary outcome");

  std::map<std::string, int> row_of;
  for (std::size_t i = 0; i < n; ++i) {
    if (records[i].id.empty()) fail_data("row " + std::to_string(i) + " has an empty id");
    if (!row_of.emplace(records[i].id, static_cast<int>(i)).second)
      fail_data("duplicate id '" + records[i].id + "'");
  }

  std::vector<int> recr(n, -1);
  for (std::size_t i = 0; i < n; ++i) {
    if (records[i].recruiter_id.empty()) continue;
    const auto it = row_of.find(records[i].recruiter_id);
    if (it == row_of.end())
      fail_data("unknown recruiter id '" + records[i].recruiter_id + "' for id '" +
                records[i].id + "'");
    if (it->second == static_cast<int>(i))
      fail_data("id '" + records[i].id + "' lists itself as recruiter");
    recr[i] = it->second;
  }

  // Waves via chain walking; a revisit inside the current walk is a cycle.
  std::vector<int> wave(n, -1);
  std::vector<char> on_path(n, 0);
  std::vector<int> path;
  for (std::size_t i = 0; i < n; ++i) {
    if (wave[i] >= 0) continue;
    path.clear();
    int cur = static_cast<int>(i);
    while (cur >= 0 && wave[static_cast<std::size_t>(cur)] < 0) {
      if (on_path[static_cast<std::size_t>(cur)])
        fail_data("recruitment links form a cycle at id '" +
                  records[static_cast<std::size_t>(cur)].id + "'");
      on_path[static_cast<std::size_t>(cur)] = 1;
      path.push_back(cur);
      cur = recr[static_cast<std::size_t>(cur)];
    }
    int w = cur < 0 ? -1 : wave[static_cast<std::size_t>(cur)];
    for (auto it = path.rbegin(); it != path.rend(); ++it) {
      wave[static_cast<std::size_t>(*it)] = ++w;
      on_path[static_cast<std::size_t>(*it)] = 0;
    }
  }

  std::vector<int> age_group(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (std::isnan(records[i].age)) fail_data("missing age for id '" + records[i].id + "'");
    try {
      age_group[i] = AgeGroups::group_of(records[i].age);
    } catch (const Error&) {
      fail_data("age " + std::to_string(records[i].age) + " for id '" + records[i].id +
                "' is below the survey minimum of 18");
    }
  }

  RepairAudit audit;
  audit.members = static_cast<int>(n);

  std::vector<int> gender(n);
  for (std::size_t i = 0; i < n; ++i) {
    gender[i] = records[i].gender;
    if (gender[i] == -1) ++audit.imputed_gender;
  }

  double p = opt.same_gender_prob;
  if (std::isnan(p)) {
    long same = 0, pairs = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const int r = recr[i];
      if (r < 0 || gender[i] == -1 || gender[static_cast<std::size_t>(r)] == -1) continue;
      ++pairs;
      if (gender[i] == gender[static_cast<std::size_t>(r)]) ++same;
    }
    if (pairs == 0)
      fail_data(
          "cannot estimate the same-gender recruitment share: no recruitment pair has both "
          "genders observed");
    p = static_cast<double>(same) / static_cast<double>(pairs);
  } else if (!(p >= 0.0 && p <= 1.0)) {
    fail_config("same-gender probability must lie in [0, 1]");
  }
  audit.same_gender_prob = p;
  gender = impute_binary(std::move(gender), recr, p, rng.child(0));

  std::vector<std::vector<int>> recruits(n);
  int max_recruits = 1;
  for (std::size_t i = 0; i < n; ++i)
    if (recr[i] >= 0) recruits[static_cast<std::size_t>(recr[i])].push_back(static_cast<int>(i));
  for (const auto& rs : recruits) max_recruits = std::max(max_recruits, static_cast<int>(rs.size()));

  std::array<double, AgeGroups::count> freq{};
  for (std::size_t i = 0; i < n; ++i)
    freq[static_cast<std::size_t>(age_group[i])] += 1.0 / static_cast<double>(n);

  ReconcileOptions ropt;
  ropt.same_gender_prob = p;
  ropt.group_freq = freq;

  std::vector<DegreeReport> rep(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int activity = (recr[i] >= 0 ? 1 : 0) + static_cast<int>(recruits[i].size());
    ReconcileOutcome rc;
    try {
      rc = reconcile_degrees(records[i].report, gender[i], age_group[i], activity, ropt,
                             rng.child(1).child(i));
    } catch (const Error& err) {
      if (err.kind() == ErrorKind::data)
        fail_data("id '" + records[i].id + "': " + err.what());
      throw;
    }
    rep[i] = rc.report;
    if (rc.changed) ++audit.modified;
    if (rc.floored) ++audit.raised_to_activity;
  }

  // Alter lists: tree neighbors enter with their actual attributes; the rest
  // of the reconciled counts are reconstructed. When a neighbor's bracket or
  // gender is exhausted in the remainder, the overflow is borrowed from the
  // fullest other entry so totals stay intact.
  ReconstructOptions recon;
  recon.open_age_cap = opt.open_age_cap;
  std::vector<std::vector<AttrValues>> alters(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<int> known;
    if (recr[i] >= 0) known.push_back(recr[i]);
    known.insert(known.end(), recruits[i].begin(), recruits[i].end());

    DegreeReport remainder = rep[i];
    bool borrowed = false;
    for (int nb : known) {
      const std::size_t nbs = static_cast<std::size_t>(nb);
      const int g = age_group[nbs];
      if (remainder.by_age[static_cast<std::size_t>(g)] > 0) {
        --remainder.by_age[static_cast<std::size_t>(g)];
      } else {
        int fullest = 0;
        for (int h = 1; h < AgeGroups::count; ++h)
          if (remainder.by_age[static_cast<std::size_t>(h)] >
              remainder.by_age[static_cast<std::size_t>(fullest)])
            fullest = h;
        --remainder.by_age[static_cast<std::size_t>(fullest)];
        borrowed = true;
      }
      const int gg = gender[nbs];
      if (remainder.by_gender[static_cast<std::size_t>(gg)] > 0)
        --remainder.by_gender[static_cast<std::size_t>(gg)];
      else {
        --remainder.by_gender[static_cast<std::size_t>(1 - gg)];
        borrowed = true;
      }
      --remainder.total;
    }
    if (borrowed && audit.notes.size() < 20)
      audit.notes.push_back("id '" + records[i].id +
                            "': reported composition adjusted to cover in-sample contacts");

    auto& list = alters[i];
    for (int nb : known) {
      const std::size_t nbs = static_cast<std::size_t>(nb);
      list.push_back({{"age", records[nbs].age},
                      {"male", static_cast<double>(gender[nbs])},
                      {"z", static_cast<double>(gender[nbs])},
                      {"in_sample", 1.0}});
    }
    for (AttrValues& a : reconstruct_alters(remainder, recon, rng.child(2).child(i))) {
      const double male = a.at("male");
      a["z"] = male;
      a["in_sample"] = 0.0;
      list.push_back(std::move(a));
    }
  }

  // Rows ordered by wave so every recruiter precedes their recruits.
  std::vector<int> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = static_cast<int>(i);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return wave[static_cast<std::size_t>(a)] < wave[static_cast<std::size_t>(b)]; });
  std::vector<int> newpos(n);
  for (std::size_t k = 0; k < n; ++k) newpos[static_cast<std::size_t>(order[k])] = static_cast<int>(k);

  IngestResult result;
  result.sample.coupons = max_recruits;
  result.sample.members.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t i = static_cast<std::size_t>(order[k]);
    Member m;
    m.node = -1;
    m.recruiter = recr[i] < 0 ? -1 : newpos[static_cast<std::size_t>(recr[i])];
    m.wave = wave[i];
    m.reported_degree = static_cast<double>(rep[i].total);
    m.z = gender[i];
    m.attrs = {{"age", records[i].age},
               {"male", static_cast<double>(gender[i])},
               {"z", static_cast<double>(gender[i])}};
    m.alters = std::move(alters[i]);
    result.sample.members.push_back(std::move(m));
  }
  result.sample.validate();
  result.audit = audit;
  return result;
}

RDSSample sensitivity_transform(RDSSample sample, const SensitivityOptions& opt, RngStream rng) {
  if (!(opt.convert >= 0.0 && opt.convert <= 1.0))
    fail_config("conversion share must lie in [0, 1]");
  if (!(opt.age_shift >= 0.0)) fail_config("age shift cannot be negative");

  for (std::size_t i = 0; i < sample.members.size(); ++i) {
    Member& m = sample.members[i];
    const double ego_age = PersonRef(m.attrs).attr(opt.age_attr);

    std::vector<std::size_t> loose;
    for (std::size_t a = 0; a < m.alters.size(); ++a) {
      const auto it = m.alters[a].find("in_sample");
      if (it == m.alters[a].end() || it->second != 1.0) loose.push_back(a);
    }

    auto eng = rng.child(i).engine();
    std::vector<int> labels(loose.size(), 0);
    const long keep = std::lround((1.0 - opt.convert) * static_cast<double>(loose.size()));
    std::fill(labels.begin(), labels.begin() + std::min<std::size_t>(labels.size(), keep), 1);
    std::shuffle(labels.begin(), labels.end(), eng);

    for (std::size_t t = 0; t < loose.size(); ++t) {
      AttrValues& a = m.alters[loose[t]];
      const double old_gender = PersonRef(a).attr(opt.gender_attr);
      const auto z_it = a.find("z");
      if (z_it != a.end() && opt.gender_attr != "z") {
        if (z_it->second != old_gender)
          fail_data("alter outcome copy does not mirror the gender attribute at row " +
                    std::to_string(i));
        z_it->second = static_cast<double>(labels[t]);
      }
      a[opt.gender_attr] = static_cast<double>(labels[t]);

      const double age = PersonRef(a).attr(opt.age_attr);
      const double gap = std::abs(age - ego_age);
      const double shrunk = std::max(0.0, gap - opt.age_shift);
      a[opt.age_attr] = age >= ego_age ? ego_age + shrunk : ego_age - shrunk;
    }
  }
  return sample;
}

}  // namespace rdsmdr
