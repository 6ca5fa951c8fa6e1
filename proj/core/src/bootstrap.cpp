#include "rdsmdr/bootstrap.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <random>

#include "rdsmdr/error.hpp"
#include "rdsmdr/math.hpp"
#include "rdsmdr/parallel.hpp"

namespace rdsmdr {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<int> member_status(const RDSSample& sample) {
  std::vector<int> z;
  z.reserve(sample.members.size());
  for (std::size_t i = 0; i < sample.members.size(); ++i) {
    const int v = sample.members[i].z;
    if (v != 0 && v != 1)
      fail_data("infection status is not 0/1 for the member at row " + std::to_string(i));
    z.push_back(v);
  }
  return z;
}

// Turn a chain of member rows into a replicate view.
Replicate chain_replicate(std::span<const int> chain, std::span<const int> z, std::size_t n) {
  Replicate rep;
  rep.mult.assign(n, 0.0);
  rep.z_events.reserve(chain.empty() ? 0 : chain.size() - 1);
  for (std::size_t t = 0; t < chain.size(); ++t) {
    rep.mult[static_cast<std::size_t>(chain[t])] += 1.0;
    if (t > 0)
      rep.z_events.emplace_back(z[static_cast<std::size_t>(chain[t - 1])],
                                z[static_cast<std::size_t>(chain[t])]);
  }
  rep.n_b = static_cast<int>(chain.size());
  return rep;
}

double to_estimate(const EstimateValue& v) { return v.defined() ? *v.value : kNaN; }

}  // namespace

const char* bootstrap_method_name(BootstrapMethod m) {
  switch (m) {
    case BootstrapMethod::salganik: return "salganik";
    case BootstrapMethod::lu: return "lu";
    case BootstrapMethod::dr: return "dr";
    case BootstrapMethod::nb: return "nb";
    case BootstrapMethod::nb_fixed: return "nb-fixed";
  }
  return "?";
}

std::optional<BootstrapMethod> parse_bootstrap_method(const std::string& name) {
  if (name == "salganik") return BootstrapMethod::salganik;
  if (name == "lu") return BootstrapMethod::lu;
  if (name == "dr") return BootstrapMethod::dr;
  if (name == "nb") return BootstrapMethod::nb;
  if (name == "nb-fixed") return BootstrapMethod::nb_fixed;
  return std::nullopt;
}

void BootstrapConfig::validate() const {
  if (replicates < 2) fail_config("need at least two replicates");
  if (!(alpha > 0.0 && alpha < 1.0)) fail_config("alpha must lie strictly between 0 and 1");
  if (threads < 0) fail_config("thread count cannot be negative");
}

std::vector<double> salganik_bootstrap(const RDSSample& sample, int B, RngStream rng,
                                       const ReplicateEval& eval, int* restarts_out) {
  const std::size_t n = sample.members.size();
  if (n == 0) fail_data("cannot resample an empty sample");
  const std::vector<int> z = member_status(sample);

  // Class k holds the members who were recruited by a status-k recruiter.
  std::vector<int> cls[2];
  for (std::size_t j = 0; j < n; ++j) {
    const int r = sample.members[j].recruiter;
    if (r >= 0) cls[z[static_cast<std::size_t>(r)]].push_back(static_cast<int>(j));
  }

  std::vector<double> estimates(static_cast<std::size_t>(B), kNaN);
  int restarts = 0;
  std::vector<int> chain;
  for (int b = 0; b < B; ++b) {
    auto eng = rng.child(static_cast<std::uint64_t>(b)).engine();
    for (;;) {
      chain.clear();
      chain.push_back(static_cast<int>(
          std::uniform_int_distribution<std::size_t>(0, n - 1)(eng)));
      bool stalled = false;
      while (chain.size() < n) {
        const auto& pool = cls[z[static_cast<std::size_t>(chain.back())]];
        if (pool.empty()) {
          stalled = true;
          break;
        }
        chain.push_back(pool[std::uniform_int_distribution<std::size_t>(0, pool.size() - 1)(eng)]);
      }
      if (!stalled) break;
      if (++restarts > B)
        fail_numeric(
            "recruiter-class resampling restarted more often than it completed; a needed "
            "recruiter class is empty or nearly so");
    }
    estimates[static_cast<std::size_t>(b)] = to_estimate(eval(chain_replicate(chain, z, n)));
  }
  if (restarts_out != nullptr) *restarts_out = restarts;
  return estimates;
}

std::vector<double> lu_bootstrap(const RDSSample& sample, int B, RngStream rng,
                                 const ReplicateEval& eval) {
  const std::size_t n = sample.members.size();
  if (n == 0) fail_data("cannot resample an empty sample");
  const std::vector<int> z = member_status(sample);
  const SampleStats stats = SampleStats::from(sample);
  const MixingStats mix = mixing_stats(stats, degree_weights(sample), MixingMethod::ego);

  std::vector<int> grp[2];
  for (std::size_t i = 0; i < n; ++i) grp[z[i]].push_back(static_cast<int>(i));
  const double cross[2] = {mix.c01, mix.c10};

  std::vector<double> estimates(static_cast<std::size_t>(B), kNaN);
  std::vector<int> chain;
  for (int b = 0; b < B; ++b) {
    auto eng = rng.child(static_cast<std::uint64_t>(b)).engine();
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    chain.clear();
    chain.push_back(
        static_cast<int>(std::uniform_int_distribution<std::size_t>(0, n - 1)(eng)));
    while (chain.size() < n) {
      const int k = z[static_cast<std::size_t>(chain.back())];
      const int l = unit(eng) < cross[k] ? 1 - k : k;
      const auto& pool = grp[l];
      chain.push_back(pool[std::uniform_int_distribution<std::size_t>(0, pool.size() - 1)(eng)]);
    }
    estimates[static_cast<std::size_t>(b)] = to_estimate(eval(chain_replicate(chain, z, n)));
  }
  return estimates;
}

std::vector<double> dr_bootstrap(const RDSSample& sample, double phi, const std::string& attr,
                                 int B, RngStream rng, const ReplicateEval& eval) {
  const std::size_t n = sample.members.size();
  if (n == 0) fail_data("cannot resample an empty sample");
  if (!(phi > 0.0)) fail_config("preference ratio must be positive");
  const std::vector<int> z = member_status(sample);

  std::vector<int> grp[2];
  std::vector<int> u(n);
  double ties[2][2] = {{0.0, 0.0}, {0.0, 0.0}};
  for (std::size_t i = 0; i < n; ++i) {
    const Member& m = sample.members[i];
    const double v = PersonRef(m.attrs).attr(attr);
    if (v != 0.0 && v != 1.0)
      fail_data("attribute '" + attr + "' is not 0/1 for the member at row " + std::to_string(i));
    u[i] = static_cast<int>(v);
    grp[u[i]].push_back(static_cast<int>(i));
    for (const AttrValues& a : m.alters) {
      const double av = PersonRef(a).attr(attr);
      if (av != 0.0 && av != 1.0)
        fail_data("attribute '" + attr + "' is not 0/1 in the alter report at row " +
                  std::to_string(i));
      ties[u[i]][static_cast<int>(av)] += 1.0;
    }
  }
  if (grp[0].empty() || grp[1].empty())
    fail_data("attribute '" + attr + "' has an empty group; the group chain is undefined");

  // Row k: jump to group l with probability proportional to ties[k][l] phi^l.
  double jump[2];
  for (int k = 0; k < 2; ++k) {
    const double w0 = ties[k][0], w1 = ties[k][1] * phi;
    if (w0 + w1 <= 0.0)
      fail_data("group " + std::to_string(k) + " reports no alters; the group chain is undefined");
    jump[k] = w1 / (w0 + w1);  // probability of landing in group 1
  }

  std::vector<double> estimates(static_cast<std::size_t>(B), kNaN);
  std::vector<int> chain;
  for (int b = 0; b < B; ++b) {
    auto eng = rng.child(static_cast<std::uint64_t>(b)).engine();
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    chain.clear();
    chain.push_back(
        static_cast<int>(std::uniform_int_distribution<std::size_t>(0, n - 1)(eng)));
    while (chain.size() < n) {
      const int k = u[static_cast<std::size_t>(chain.back())];
      const int l = unit(eng) < jump[k] ? 1 : 0;
      const auto& pool = grp[l];
      chain.push_back(pool[std::uniform_int_distribution<std::size_t>(0, pool.size() - 1)(eng)]);
    }
    estimates[static_cast<std::size_t>(b)] = to_estimate(eval(chain_replicate(chain, z, n)));
  }
  return estimates;
}

namespace {

// Recruiter rows and their recruit rows; the sampling pool for the cluster
// procedures.
struct ClusterPool {
  std::vector<int> heads;
  std::vector<std::vector<int>> children;
  std::vector<int> event_of_member;  // member row -> choice-event index, -1 for seeds
  std::vector<int> z;
  std::size_t n = 0;

  static ClusterPool from(const RDSSample& sample) {
    ClusterPool p;
    p.n = sample.members.size();
    p.z = member_status(sample);
    p.event_of_member.assign(p.n, -1);
    std::vector<std::vector<int>> kids(p.n);
    int event = 0;
    for (std::size_t j = 0; j < p.n; ++j) {
      const int r = sample.members[j].recruiter;
      if (r < 0) continue;
      kids[static_cast<std::size_t>(r)].push_back(static_cast<int>(j));
      p.event_of_member[j] = event++;
    }
    for (std::size_t i = 0; i < p.n; ++i)
      if (!kids[i].empty()) {
        p.heads.push_back(static_cast<int>(i));
        p.children.push_back(std::move(kids[i]));
      }
    if (p.heads.empty()) fail_data("sample has no recruiters; cluster resampling is undefined");
    return p;
  }

  int n_events() const {
    int c = 0;
    for (const auto& k : children) c += static_cast<int>(k.size());
    return c;
  }
};

Replicate finish_cluster_replicate(const ClusterPool& pool, std::vector<Replicate::Cluster> cl,
                                   int n_events) {
  Replicate rep;
  rep.mult.assign(pool.n, 0.0);
  rep.event_mult.assign(static_cast<std::size_t>(n_events), 0.0);
  rep.n_b = 0;
  for (const auto& c : cl) {
    rep.mult[static_cast<std::size_t>(c.head)] += 1.0;
    ++rep.n_b;
    for (int child : c.children) {
      rep.mult[static_cast<std::size_t>(child)] += 1.0;
      rep.event_mult[static_cast<std::size_t>(pool.event_of_member[static_cast<std::size_t>(child)])] +=
          1.0;
      rep.z_events.emplace_back(pool.z[static_cast<std::size_t>(c.head)],
                                pool.z[static_cast<std::size_t>(child)]);
      ++rep.n_b;
    }
  }
  rep.clusters = std::move(cl);
  return rep;
}

Replicate nb_replicate(const ClusterPool& pool, std::mt19937_64& eng) {
  std::uniform_int_distribution<std::size_t> pick(0, pool.heads.size() - 1);
  std::vector<Replicate::Cluster> cl;
  cl.reserve(pool.heads.size());
  for (std::size_t r = 0; r < pool.heads.size(); ++r) {
    const std::size_t h = pick(eng);
    cl.push_back({pool.heads[h], pool.children[h]});
  }
  return finish_cluster_replicate(pool, std::move(cl), pool.n_events());
}

Replicate nb_fixed_replicate_impl(const ClusterPool& pool, int n, int coupons,
                                  std::mt19937_64& eng) {
  std::uniform_int_distribution<std::size_t> pick(0, pool.heads.size() - 1);
  const int per_cluster = 1 + coupons;

  for (int attempt = 0; attempt < 100; ++attempt) {
    std::vector<Replicate::Cluster> cl;
    int size = 0;
    auto draw = [&](int count) {
      for (int i = 0; i < count; ++i) {
        const std::size_t h = pick(eng);
        cl.push_back({pool.heads[h], pool.children[h]});
        size += 1 + static_cast<int>(pool.children[h].size());
      }
    };

    draw((n + per_cluster - 1) / per_cluster);
    while (size < n) draw((n - size + per_cluster - 1) / per_cluster);

    int surplus = size - n;
    if (surplus == 0) return finish_cluster_replicate(pool, std::move(cl), pool.n_events());

    // First choice: prune individual recruits, uniformly among the recruits
    // of clusters that would still keep one.
    int capacity = 0;
    for (const auto& c : cl) capacity += std::max(0, static_cast<int>(c.children.size()) - 1);
    if (capacity >= surplus) {
      while (surplus > 0) {
        int eligible = 0;
        for (const auto& c : cl)
          if (c.children.size() >= 2) eligible += static_cast<int>(c.children.size());
        int slot = static_cast<int>(
            std::uniform_int_distribution<int>(0, eligible - 1)(eng));
        for (auto& c : cl) {
          if (c.children.size() < 2) continue;
          if (slot < static_cast<int>(c.children.size())) {
            c.children.erase(c.children.begin() + slot);
            break;
          }
          slot -= static_cast<int>(c.children.size());
        }
        --surplus;
      }
      return finish_cluster_replicate(pool, std::move(cl), pool.n_events());
    }

    // Fallback: drop one whole cluster of exactly the surplus size.
    std::vector<std::size_t> fits;
    for (std::size_t i = 0; i < cl.size(); ++i)
      if (1 + static_cast<int>(cl[i].children.size()) == surplus) fits.push_back(i);
    if (!fits.empty()) {
      const std::size_t victim =
          fits[std::uniform_int_distribution<std::size_t>(0, fits.size() - 1)(eng)];
      cl.erase(cl.begin() + static_cast<std::ptrdiff_t>(victim));
      return finish_cluster_replicate(pool, std::move(cl), pool.n_events());
    }
  }
  fail_numeric("could not build a fixed-size replicate in 100 attempts");
}

std::vector<double> run_cluster_bootstrap(const RDSSample& sample, int B, RngStream rng,
                                          const ReplicateEval& eval, int threads, bool fixed) {
  const ClusterPool pool = ClusterPool::from(sample);
  const int n = sample.size();
  std::vector<double> estimates(static_cast<std::size_t>(B), kNaN);
  parallel_for(B, threads, [&](int b) {
    auto eng = rng.child(static_cast<std::uint64_t>(b)).engine();
    const Replicate rep = fixed ? nb_fixed_replicate_impl(pool, n, sample.coupons, eng)
                                : nb_replicate(pool, eng);
    estimates[static_cast<std::size_t>(b)] = to_estimate(eval(rep));
  });
  return estimates;
}

}  // namespace

std::vector<double> nb_bootstrap(const RDSSample& sample, int B, RngStream rng,
                                 const ReplicateEval& eval, int threads) {
  return run_cluster_bootstrap(sample, B, rng, eval, threads, false);
}

std::vector<double> nb_fixed_bootstrap(const RDSSample& sample, int B, RngStream rng,
                                       const ReplicateEval& eval, int threads) {
  return run_cluster_bootstrap(sample, B, rng, eval, threads, true);
}

Replicate nb_fixed_replicate(const RDSSample& sample, RngStream rng) {
  const ClusterPool pool = ClusterPool::from(sample);
  auto eng = rng.engine();
  return nb_fixed_replicate_impl(pool, sample.size(), sample.coupons, eng);
}

NormalCI normal_ci(std::span<const double> estimates, double point, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) fail_config("alpha must lie strictly between 0 and 1");
  std::vector<double> defined;
  defined.reserve(estimates.size());
  for (double e : estimates)
    if (!std::isnan(e)) defined.push_back(e);

  NormalCI ci;
  ci.used = static_cast<int>(defined.size());
  ci.dropped = static_cast<int>(estimates.size()) - ci.used;
  if (ci.used < 2) fail_numeric("fewer than two defined replicate estimates; no variance");

  ci.se = sample_sd(defined);
  const double zq = normal_quantile(1.0 - alpha / 2.0);
  ci.lo = point - zq * ci.se;
  ci.hi = point + zq * ci.se;
  if (ci.lo < 0.0 || ci.hi > 1.0) {
    ci.clamped = true;
    ci.lo = std::max(0.0, ci.lo);
    ci.hi = std::min(1.0, ci.hi);
  }
  return ci;
}

const char* estimator_name(EstimatorKind k) {
  switch (k) {
    case EstimatorKind::vh: return "vh";
    case EstimatorKind::sh: return "sh";
    case EstimatorKind::lu: return "lu";
    case EstimatorKind::dr_ii: return "dr-ii";
    case EstimatorKind::dr_ego: return "dr-ego";
    case EstimatorKind::mdr_ii: return "mdr-ii";
    case EstimatorKind::mdr_ego: return "mdr-ego";
  }
  return "?";
}

std::optional<EstimatorKind> parse_estimator(const std::string& name) {
  if (name == "vh") return EstimatorKind::vh;
  if (name == "sh") return EstimatorKind::sh;
  if (name == "lu") return EstimatorKind::lu;
  if (name == "dr-ii") return EstimatorKind::dr_ii;
  if (name == "dr-ego") return EstimatorKind::dr_ego;
  if (name == "mdr-ii") return EstimatorKind::mdr_ii;
  if (name == "mdr-ego") return EstimatorKind::mdr_ego;
  return std::nullopt;
}

BootstrapMethod default_method(EstimatorKind k) {
  switch (k) {
    case EstimatorKind::vh:
    case EstimatorKind::sh: return BootstrapMethod::salganik;
    case EstimatorKind::lu: return BootstrapMethod::lu;
    case EstimatorKind::dr_ii:
    case EstimatorKind::dr_ego: return BootstrapMethod::dr;
    case EstimatorKind::mdr_ii:
    case EstimatorKind::mdr_ego: return BootstrapMethod::nb_fixed;
  }
  return BootstrapMethod::salganik;
}

BootstrapResult bootstrap_ci(const RDSSample& sample, const EstimatorSpec& estimator,
                             const FitResult* fit, const BootstrapConfig& config) {
  config.validate();
  const EstimatorKind kind = estimator.kind;
  const bool model_based = kind == EstimatorKind::dr_ii || kind == EstimatorKind::dr_ego ||
                           kind == EstimatorKind::mdr_ii || kind == EstimatorKind::mdr_ego;
  const bool ii_form = kind == EstimatorKind::vh || kind == EstimatorKind::dr_ii ||
                       kind == EstimatorKind::mdr_ii;
  if (model_based && fit == nullptr)
    fail_config(std::string(estimator_name(kind)) + " needs the fitted recruitment model");

  const SampleStats stats = SampleStats::from(sample);

  // The covariate list behind the member weights (and any refits).
  std::vector<CovariateSpec> covs;
  if (kind == EstimatorKind::dr_ii || kind == EstimatorKind::dr_ego) {
    if (estimator.attr.empty()) fail_config("differential estimators need an attribute name");
    covs = {CovariateSpec::recruit_attribute(estimator.attr)};
  } else if (kind == EstimatorKind::mdr_ii || kind == EstimatorKind::mdr_ego) {
    if (estimator.covariates.empty())
      fail_config("model-based estimators need a covariate list");
    covs = estimator.covariates;
  }

  std::optional<MdrWeightCache> wcache;
  Weights weights;  // weights behind the point estimate
  if (model_based) {
    if (fit->beta_hat.size() != covs.size())
      fail_config("fit dimension does not match the covariate list");
    wcache = MdrWeightCache::from(sample, covs);
    weights = wcache->weights(fit->beta_hat);
  } else if (kind != EstimatorKind::sh) {
    weights = degree_weights(sample);
  }

  BootstrapResult result;
  result.method = config.method;
  result.B = config.replicates;

  switch (kind) {
    case EstimatorKind::sh: result.point = sh_core(stats); break;
    case EstimatorKind::vh:
    case EstimatorKind::dr_ii:
    case EstimatorKind::mdr_ii: result.point = vh_core(stats, weights); break;
    default: result.point = ego_core(stats, weights); break;
  }
  if (!result.point.defined())
    fail_data("point estimate is undefined (" + result.point.note + "); nothing to resample");

  const bool cluster_method =
      config.method == BootstrapMethod::nb || config.method == BootstrapMethod::nb_fixed;
  const bool refit = cluster_method && model_based;

  std::optional<ChoiceData> choice;
  if (refit) choice.emplace(build_choice_data(sample, covs));

  std::atomic<int> refit_failures{0};
  const ReplicateEval eval = [&](const Replicate& rep) -> EstimateValue {
    const EstimatorView view{rep.mult, rep.z_events};
    if (kind == EstimatorKind::sh) return sh_core(stats, view);

    const Weights* w = &weights;
    Weights replicate_w;
    if (refit) {
      FitOptions fo;
      fo.max_iter = 200;
      fo.init = fit->beta_hat;
      FitResult fr;
      try {
        fr = fit_mdr(*choice, rep.event_mult, fo);
      } catch (const Error& e) {
        if (e.kind() == ErrorKind::numeric) {
          refit_failures.fetch_add(1, std::memory_order_relaxed);
          return EstimateValue::none("replicate refit failed");
        }
        throw;
      }
      const bool finite = std::isfinite(fr.log_lik) &&
                          std::all_of(fr.beta_hat.begin(), fr.beta_hat.end(),
                                      [](double v) { return std::isfinite(v); });
      if (!finite) {
        refit_failures.fetch_add(1, std::memory_order_relaxed);
        return EstimateValue::none("replicate refit diverged");
      }
      if (!fr.converged) refit_failures.fetch_add(1, std::memory_order_relaxed);
      replicate_w = wcache->weights(fr.beta_hat);
      w = &replicate_w;
    }
    return ii_form ? vh_core(stats, *w, view) : ego_core(stats, *w, view);
  };

  switch (config.method) {
    case BootstrapMethod::salganik:
      result.replicate_estimates =
          salganik_bootstrap(sample, config.replicates, RngStream(config.rng_seed), eval,
                             &result.restarts);
      break;
    case BootstrapMethod::lu:
      result.replicate_estimates =
          lu_bootstrap(sample, config.replicates, RngStream(config.rng_seed), eval);
      break;
    case BootstrapMethod::dr: {
      if (fit == nullptr)
        fail_config("the group-chain resampler needs the fitted recruitment model");
      const std::string attr = estimator.attr.empty() ? std::string("z") : estimator.attr;
      result.replicate_estimates = dr_bootstrap(sample, fit->phi(), attr, config.replicates,
                                                RngStream(config.rng_seed), eval);
      break;
    }
    case BootstrapMethod::nb:
      result.replicate_estimates = nb_bootstrap(sample, config.replicates,
                                                RngStream(config.rng_seed), eval, config.threads);
      break;
    case BootstrapMethod::nb_fixed:
      result.replicate_estimates = nb_fixed_bootstrap(
          sample, config.replicates, RngStream(config.rng_seed), eval, config.threads);
      break;
  }

  result.refit_failures = refit_failures.load();
  result.ci = normal_ci(result.replicate_estimates, *result.point.value, config.alpha);
  return result;
}

}  // namespace rdsmdr
