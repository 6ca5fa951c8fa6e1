// Command-line front end. Every subcommand loads/stores files through the io
// module and maps library errors onto exit codes: 2 config, 3 data, 4 numeric.

#include <cmath>
#include <cstdint>
#include <iostream>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "rdsmdr/bootstrap.hpp"
#include "rdsmdr/error.hpp"
#include "rdsmdr/harness.hpp"
#include "rdsmdr/inference.hpp"
#include "rdsmdr/io.hpp"
#include "rdsmdr/netgen.hpp"
#include "rdsmdr/rng.hpp"

namespace {

using namespace rdsmdr;
using nlohmann::json;

void emit(const std::string& text, const std::string& out_path) {
  if (out_path.empty())
    std::cout << text;
  else
    write_text_file(out_path, text);
}

// ---------------------------------------------------------------------------
// generate
// ---------------------------------------------------------------------------

struct GenerateArgs {
  std::string recipe_path;
  std::string nodes_path;
  std::string edges_path;
  std::uint64_t seed = 0;
  std::size_t n_override = 0;
};

int cmd_generate(const GenerateArgs& a) {
  PopulationRecipe recipe;
  if (!a.recipe_path.empty()) recipe = recipe_from_json(read_text_file(a.recipe_path));
  if (a.n_override > 0) recipe.n = a.n_override;

  const Population pop = draw_population(recipe, RngStream(a.seed));
  write_population(pop, a.nodes_path, a.edges_path);

  std::size_t ties = 0;
  for (std::size_t i = 0; i < pop.size(); ++i)
    ties += pop.neighbors(static_cast<NodeId>(i)).size();
  json summary;
  summary["n"] = pop.size();
  summary["mean_degree"] = static_cast<double>(ties) / static_cast<double>(pop.size());
  summary["tau_hat"] = estimate_tau(pop);
  summary["prevalence"] = pop.true_prevalence();
  summary["nodes"] = a.nodes_path;
  summary["edges"] = a.edges_path;
  std::cout << summary.dump(2) << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// sample
// ---------------------------------------------------------------------------

struct SampleArgs {
  std::string nodes_path;
  std::string edges_path;
  std::string model_path;
  std::string members_path;
  std::string alters_path;
  SamplingDesign design;
  std::uint64_t seed = 0;
};

int cmd_sample(const SampleArgs& a) {
  const Population pop = read_population(a.nodes_path, a.edges_path);
  MDRModel model;  // no covariates: degree-proportional recruitment
  if (!a.model_path.empty()) model = model_from_json(read_text_file(a.model_path));
  a.design.validate();

  const RDSSample sample = run_rds(pop, model, a.design, RngStream(a.seed));
  write_sample(sample, a.members_path, a.alters_path);

  int max_wave = 0;
  for (const Member& m : sample.members) max_wave = std::max(max_wave, m.wave);
  json summary;
  summary["members"] = sample.size();
  summary["seeds"] = sample.seed_rows().size();
  summary["recruits"] = sample.recruit_count();
  summary["max_wave"] = max_wave;
  std::cout << summary.dump(2) << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// fit
// ---------------------------------------------------------------------------

struct FitArgs {
  std::string members_path;
  std::string alters_path;
  std::string model_path;
  std::string dr_attr;
  std::string out_path;
  int max_iter = 500;
};

int cmd_fit(const FitArgs& a) {
  if (a.model_path.empty() == a.dr_attr.empty())
    fail_config("fit needs exactly one of --model or --dr");
  const RDSSample sample = read_sample(a.members_path, a.alters_path);
  FitOptions options;
  options.max_iter = a.max_iter;
  FitResult fit;
  if (!a.dr_attr.empty()) {
    fit = fit_dr(sample, a.dr_attr, options);
  } else {
    const MDRModel model = model_from_json(read_text_file(a.model_path));
    fit = fit_mdr(sample, model.covariates, options);
  }
  emit(fit_to_json(fit), a.out_path);
  return 0;
}

// ---------------------------------------------------------------------------
// estimate / bootstrap (shared plumbing)
// ---------------------------------------------------------------------------

struct TargetArgs {
  std::string members_path;
  std::string alters_path;
  std::string estimator = "vh";
  std::string fit_path;
  std::string model_path;
  std::string attr = "z";
};

struct ResolvedTarget {
  RDSSample sample;
  EstimatorSpec spec;
  std::optional<FitResult> fit;
};

bool model_based(EstimatorKind k) {
  return k == EstimatorKind::dr_ii || k == EstimatorKind::dr_ego ||
         k == EstimatorKind::mdr_ii || k == EstimatorKind::mdr_ego;
}

ResolvedTarget resolve_target(const TargetArgs& a) {
  ResolvedTarget t;
  const auto kind = parse_estimator(a.estimator);
  if (!kind) fail_config("unknown estimator '" + a.estimator + "'");
  t.spec.kind = *kind;
  t.sample = read_sample(a.members_path, a.alters_path);

  if (*kind == EstimatorKind::dr_ii || *kind == EstimatorKind::dr_ego) {
    t.spec.attr = a.attr;
  } else if (*kind == EstimatorKind::mdr_ii || *kind == EstimatorKind::mdr_ego) {
    if (a.model_path.empty())
      fail_config("estimator '" + a.estimator + "' needs --model for its covariates");
    t.spec.covariates = model_from_json(read_text_file(a.model_path)).covariates;
  }

  if (model_based(*kind)) {
    if (!a.fit_path.empty())
      t.fit = fit_from_json(read_text_file(a.fit_path));
    else if (t.spec.covariates.empty())
      t.fit = fit_dr(t.sample, t.spec.attr);
    else
      t.fit = fit_mdr(t.sample, t.spec.covariates);
  }
  return t;
}

EstimateValue point_of(const ResolvedTarget& t) {
  switch (t.spec.kind) {
    case EstimatorKind::vh: return vh(t.sample);
    case EstimatorKind::sh: return sh(t.sample);
    case EstimatorKind::lu: return lu(t.sample);
    case EstimatorKind::dr_ii: return dr_ii(t.sample, *t.fit, t.spec.attr);
    case EstimatorKind::dr_ego: return dr_ego(t.sample, *t.fit, t.spec.attr);
    case EstimatorKind::mdr_ii: return mdr_ii(t.sample, *t.fit, t.spec.covariates);
    case EstimatorKind::mdr_ego: return mdr_ego(t.sample, *t.fit, t.spec.covariates);
  }
  fail_config("unknown estimator kind");
}

const char* weight_source_of(EstimatorKind k) {
  switch (k) {
    case EstimatorKind::vh:
    case EstimatorKind::lu: return "degree";
    case EstimatorKind::sh: return "none";
    case EstimatorKind::dr_ii:
    case EstimatorKind::dr_ego: return "dr_stationary";
    case EstimatorKind::mdr_ii:
    case EstimatorKind::mdr_ego: return "mdr_stationary";
  }
  return "?";
}

struct EstimateArgs {
  TargetArgs target;
  std::string format = "json";
  std::string out_path;
};

int cmd_estimate(const EstimateArgs& a) {
  const ResolvedTarget t = resolve_target(a.target);
  EstimateReport report;
  report.estimator = estimator_name(t.spec.kind);
  report.value = point_of(t);
  report.weight_source = weight_source_of(t.spec.kind);
  report.data_mode = sample_data_mode(t.sample);

  if (a.format == "csv") {
    std::string row = "estimator,estimate,status\n";
    row += report.estimator;
    row += ',';
    if (report.value.defined()) row += format_double(*report.value.value);
    row += ',';
    row += report.value.status == EstimateStatus::ok ? "ok"
           : report.value.status == EstimateStatus::degenerate_limit ? "degenerate_limit"
                                                                     : "undefined";
    row += '\n';
    emit(row, a.out_path);
  } else {
    emit(estimate_report_to_json(report), a.out_path);
  }
  return 0;
}

struct BootstrapArgs {
  TargetArgs target;
  std::string method;
  int replicates = 200;
  double alpha = 0.05;
  std::uint64_t seed = 0;
  int threads = 1;
  std::string format = "json";
  std::string out_path;
};

int cmd_bootstrap(const BootstrapArgs& a) {
  const ResolvedTarget t = resolve_target(a.target);
  BootstrapConfig config;
  config.method = default_method(t.spec.kind);
  if (!a.method.empty()) {
    const auto m = parse_bootstrap_method(a.method);
    if (!m) fail_config("unknown bootstrap method '" + a.method + "'");
    config.method = *m;
  }
  config.replicates = a.replicates;
  config.alpha = a.alpha;
  config.rng_seed = a.seed;
  config.threads = a.threads;

  const BootstrapResult result =
      bootstrap_ci(t.sample, t.spec, t.fit ? &*t.fit : nullptr, config);

  if (a.format == "csv") {
    std::string row = "estimator,method,point,se,lower,upper,replicates,used,dropped\n";
    row += estimator_name(t.spec.kind);
    row += std::string(",") + bootstrap_method_name(result.method);
    row += ',' + format_double(*result.point.value);
    row += ',' + format_double(result.ci.se);
    row += ',' + format_double(result.ci.lo);
    row += ',' + format_double(result.ci.hi);
    row += ',' + std::to_string(result.B);
    row += ',' + std::to_string(result.ci.used);
    row += ',' + std::to_string(result.ci.dropped);
    row += '\n';
    emit(row, a.out_path);
  } else {
    emit(bootstrap_report_to_json(result, estimator_name(t.spec.kind), a.alpha), a.out_path);
  }
  return 0;
}

// ---------------------------------------------------------------------------
// scenario
// ---------------------------------------------------------------------------

struct ScenarioArgs {
  std::string config_path;
  std::string homophily = "none";
  std::string mdr = "none";
  bool all = false;
  bool full_scale = false;
  bool no_ci = false;
  int networks = -1;          // -1: keep default
  int samples = -1;           // -1: keep default
  int replicates = -1;        // -1: keep default
  std::uint64_t seed = 0;
  int threads = 1;
  std::string format = "json";
  std::string out_dir;
  std::string out_path;
};

ScenarioConfig base_scenario_config(const ScenarioArgs& a) {
  ScenarioConfig config;
  if (!a.config_path.empty()) config = scenario_config_from_json(read_text_file(a.config_path));
  if (a.full_scale) {
    config.networks = 15;
    config.samples_per_network = 80;
  }
  if (a.networks >= 0) config.networks = a.networks;
  if (a.samples >= 0) config.samples_per_network = a.samples;
  if (a.replicates >= 0) config.bootstrap.replicates = a.replicates;
  if (a.no_ci) config.with_ci = false;
  config.root_seed = a.seed;
  config.threads = a.threads;
  config.validate();
  return config;
}

Level parse_level_arg(const std::string& name) {
  const auto lv = parse_level(name);
  if (!lv) fail_config("unknown scenario level '" + name + "'");
  return *lv;
}

int cmd_scenario(const ScenarioArgs& a) {
  if (!a.all) {
    ScenarioConfig config = base_scenario_config(a);
    if (a.config_path.empty()) {
      config.homophily = parse_level_arg(a.homophily);
      config.mdr = parse_level_arg(a.mdr);
    }
    const ScenarioResult result = run_scenario(config);
    if (a.format == "csv") {
      const ScenarioResult grid[] = {result};
      std::string out;
      out += "metric: bias\n" + scenario_table_csv(grid, ScenarioMetric::bias);
      out += "metric: sd\n" + scenario_table_csv(grid, ScenarioMetric::sd);
      out += "metric: rmse\n" + scenario_table_csv(grid, ScenarioMetric::rmse);
      out += "metric: coverage\n" + scenario_table_csv(grid, ScenarioMetric::coverage);
      emit(out, a.out_path);
    } else {
      emit(scenario_result_to_json(result), a.out_path);
    }
    return 0;
  }

  // Full grid: one cell per (homophily, mdr) pair, homophily outer, per-cell
  // seeds split from the root so cells are independent and reproducible.
  const std::string dir = a.out_dir.empty() ? "." : a.out_dir;
  const Level levels[] = {Level::none, Level::moderate, Level::high};
  RngStream root(a.seed);
  std::vector<ScenarioResult> results;
  int cell = 0;
  for (Level h : levels)
    for (Level m : levels) {
      ScenarioConfig config = base_scenario_config(a);
      config.homophily = h;
      config.mdr = m;
      config.root_seed = root.child(static_cast<std::uint64_t>(cell)).key();
      results.push_back(run_scenario(config));
      const std::string name =
          std::string("cell_") + level_name(h) + "_" + level_name(m) + ".json";
      write_text_file(dir + "/" + name, scenario_result_to_json(results.back()));
      std::cerr << "cell (" << level_name(h) << "," << level_name(m) << ") done\n";
      ++cell;
    }
  write_text_file(dir + "/bias.csv", scenario_table_csv(results, ScenarioMetric::bias));
  write_text_file(dir + "/sd.csv", scenario_table_csv(results, ScenarioMetric::sd));
  write_text_file(dir + "/rmse.csv", scenario_table_csv(results, ScenarioMetric::rmse));
  write_text_file(dir + "/coverage.csv", scenario_table_csv(results, ScenarioMetric::coverage));
  std::cout << scenario_table_csv(results, ScenarioMetric::rmse);
  return 0;
}

// ---------------------------------------------------------------------------
// ingest
// ---------------------------------------------------------------------------

struct IngestArgs {
  std::string survey_path;
  std::string members_path;
  std::string alters_path;
  std::string audit_path;
  double same_gender_prob = std::numeric_limits<double>::quiet_NaN();
  double age_cap = 90.0;
  bool sensitivity = false;
  double convert = 0.7;
  double age_shift = 3.0;
  std::uint64_t seed = 0;
};

int cmd_ingest(const IngestArgs& a) {
  std::vector<RawRecord> records = read_survey(a.survey_path);
  IngestOptions opt;
  opt.same_gender_prob = a.same_gender_prob;
  opt.open_age_cap = a.age_cap;
  RngStream root(a.seed);
  IngestResult result = ingest_survey(std::move(records), opt, root.child(0));
  if (a.sensitivity) {
    SensitivityOptions sopt;
    sopt.convert = a.convert;
    sopt.age_shift = a.age_shift;
    result.sample = sensitivity_transform(std::move(result.sample), sopt, root.child(1));
    result.audit.notes.push_back("sensitivity transform applied to reconstructed alters");
  }
  write_sample(result.sample, a.members_path, a.alters_path);
  emit(repair_audit_to_json(result.audit), a.audit_path);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Respondent-driven sampling toolkit: synthetic populations, "
               "recruitment simulation, prevalence estimators, bootstrap intervals"};
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* g = app.add_subcommand("generate", "Draw a synthetic population and write node/edge tables");
  g->add_option("--recipe", gen.recipe_path, "Population recipe JSON (defaults when omitted)");
  g->add_option("--nodes", gen.nodes_path, "Output node table")->required();
  g->add_option("--edges", gen.edges_path, "Output edge table")->required();
  g->add_option("--seed", gen.seed, "Root RNG seed");
  g->add_option("--n", gen.n_override, "Override the recipe's population size");

  SampleArgs smp;
  auto* s = app.add_subcommand("sample", "Simulate one recruitment sample from a population");
  s->add_option("--nodes", smp.nodes_path, "Population node table")->required();
  s->add_option("--edges", smp.edges_path, "Population edge table")->required();
  s->add_option("--model", smp.model_path, "Recruitment model JSON (degree-proportional when omitted)");
  s->add_option("--members", smp.members_path, "Output member table")->required();
  s->add_option("--alters", smp.alters_path, "Output alter table")->required();
  s->add_option("--n", smp.design.n_target, "Target sample size");
  s->add_option("--seeds", smp.design.n_seeds, "Number of seeds");
  s->add_option("--coupons", smp.design.coupons, "Coupon cap per member");
  s->add_option("--seed", smp.seed, "Root RNG seed");

  FitArgs fit;
  auto* f = app.add_subcommand("fit", "Estimate recruitment coefficients from a sample");
  f->add_option("--members", fit.members_path, "Member table")->required();
  f->add_option("--alters", fit.alters_path, "Alter table")->required();
  f->add_option("--model", fit.model_path, "Model JSON naming the covariates");
  f->add_option("--dr", fit.dr_attr, "Fit the one-attribute model on this binary attribute");
  f->add_option("--out", fit.out_path, "Output path (stdout when omitted)");
  f->add_option("--max-iter", fit.max_iter, "Iteration cap");

  EstimateArgs est;
  auto* e = app.add_subcommand("estimate", "Compute one prevalence estimate");
  e->add_option("--members", est.target.members_path, "Member table")->required();
  e->add_option("--alters", est.target.alters_path, "Alter table")->required();
  e->add_option("--estimator", est.target.estimator,
                "One of vh, sh, lu, dr-ii, dr-ego, mdr-ii, mdr-ego");
  e->add_option("--fit", est.target.fit_path, "Coefficient fit JSON (fitted on the fly when omitted)");
  e->add_option("--model", est.target.model_path, "Model JSON (covariates for mdr estimators)");
  e->add_option("--attr", est.target.attr, "Attribute for dr estimators");
  e->add_option("--format", est.format, "json or csv")->check(CLI::IsMember({"json", "csv"}));
  e->add_option("--out", est.out_path, "Output path (stdout when omitted)");

  BootstrapArgs bs;
  auto* b = app.add_subcommand("bootstrap", "Bootstrap interval for one estimator");
  b->add_option("--members", bs.target.members_path, "Member table")->required();
  b->add_option("--alters", bs.target.alters_path, "Alter table")->required();
  b->add_option("--estimator", bs.target.estimator,
                "One of vh, sh, lu, dr-ii, dr-ego, mdr-ii, mdr-ego");
  b->add_option("--fit", bs.target.fit_path, "Coefficient fit JSON (fitted on the fly when omitted)");
  b->add_option("--model", bs.target.model_path, "Model JSON (covariates for mdr estimators)");
  b->add_option("--attr", bs.target.attr, "Attribute for dr estimators");
  b->add_option("--method", bs.method,
                "salganik, lu, dr, nb or nb-fixed (estimator default when omitted)");
  b->add_option("-B,--replicates", bs.replicates, "Bootstrap replicates");
  b->add_option("--alpha", bs.alpha, "Interval level");
  b->add_option("--seed", bs.seed, "Root RNG seed");
  b->add_option("--threads", bs.threads, "Worker threads for refitting resamplers");
  b->add_option("--format", bs.format, "json or csv")->check(CLI::IsMember({"json", "csv"}));
  b->add_option("--out", bs.out_path, "Output path (stdout when omitted)");

  ScenarioArgs sc;
  auto* c = app.add_subcommand("scenario", "Run one simulation-study cell or the full grid");
  c->add_option("--config", sc.config_path, "Scenario config JSON");
  c->add_option("--homophily", sc.homophily, "none, moderate or high");
  c->add_option("--mdr", sc.mdr, "none, moderate or high");
  c->add_flag("--all", sc.all, "Run all nine cells and write summary tables");
  c->add_flag("--full-scale", sc.full_scale, "15 networks x 80 samples instead of 5 x 40");
  c->add_flag("--no-ci", sc.no_ci, "Skip bootstrap intervals");
  c->add_option("--networks", sc.networks, "Networks per cell");
  c->add_option("--samples", sc.samples, "Samples per network");
  c->add_option("-B,--replicates", sc.replicates, "Bootstrap replicates per interval");
  c->add_option("--seed", sc.seed, "Root RNG seed");
  c->add_option("--threads", sc.threads, "Worker threads");
  c->add_option("--format", sc.format, "json or csv")->check(CLI::IsMember({"json", "csv"}));
  c->add_option("--out-dir", sc.out_dir, "Directory for per-cell outputs (with --all)");
  c->add_option("--out", sc.out_path, "Output path (stdout when omitted)");

  IngestArgs ing;
  auto* i = app.add_subcommand("ingest", "Repair a raw survey table into sample files");
  i->add_option("--survey", ing.survey_path, "Raw survey CSV")->required();
  i->add_option("--members", ing.members_path, "Output member table")->required();
  i->add_option("--alters", ing.alters_path, "Output alter table")->required();
  i->add_option("--audit", ing.audit_path, "Repair audit JSON path (stdout when omitted)");
  i->add_option("--same-gender-prob", ing.same_gender_prob,
                "Same-gender recruitment probability (estimated from the data when omitted)");
  i->add_option("--age-cap", ing.age_cap, "Upper age for the open-ended bracket");
  i->add_flag("--sensitivity", ing.sensitivity, "Apply the reconstructed-alter sensitivity transform");
  i->add_option("--convert", ing.convert, "Fraction of reconstructed male alters converted");
  i->add_option("--age-shift", ing.age_shift, "Years to shrink reconstructed age gaps by");
  i->add_option("--seed", ing.seed, "Root RNG seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*g) return cmd_generate(gen);
    if (*s) return cmd_sample(smp);
    if (*f) return cmd_fit(fit);
    if (*e) return cmd_estimate(est);
    if (*b) return cmd_bootstrap(bs);
    if (*c) return cmd_scenario(sc);
    if (*i) return cmd_ingest(ing);
  } catch (const rdsmdr::Error& err) {
    std::cerr << "error: " << err.what() << "\n";
    switch (err.kind()) {
      case ErrorKind::config: return 2;
      case ErrorKind::data: return 3;
      case ErrorKind::numeric: return 4;
    }
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  }
  return 0;
}
