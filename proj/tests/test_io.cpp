#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "rdsmdr/harness.hpp"
#include "rdsmdr/io.hpp"
#include "oracles.hpp"

using namespace rdsmdr;

namespace {

std::string tmp_path(const std::string& name) {
  static const std::filesystem::path dir = [] {
    const auto d = std::filesystem::temp_directory_path() / "rdsmdr_io_tests";
    std::filesystem::create_directories(d);
    return d;
  }();
  return (dir / name).string();
}

bool contains(const std::string& hay, const std::string& needle) {
  return hay.find(needle) != std::string::npos;
}

bool same_bits(double a, double b) {
  if (std::isnan(a) || std::isnan(b)) return std::isnan(a) && std::isnan(b);
  return a == b && std::signbit(a) == std::signbit(b);
}

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

TEST_CASE("doubles print in their shortest exact form") {
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(1.0) == "1");
  CHECK(format_double(-0.0) == "-0");
  CHECK(format_double(kNaN) == "nan");
  CHECK(format_double(kInf) == "inf");
  CHECK(format_double(-kInf) == "-inf");

  const std::vector<double> gnarly = {0.1,
                                      0.1 + 0.2,
                                      1.0 / 3.0,
                                      -0.0,
                                      5e-324,
                                      std::numeric_limits<double>::max(),
                                      std::numeric_limits<double>::min(),
                                      -123456.789e-30,
                                      2.5e17,
                                      kInf,
                                      -kInf,
                                      kNaN};
  for (double v : gnarly) {
    const double back = parse_double(format_double(v), "probe");
    CHECK(same_bits(back, v));
  }
}

TEST_CASE("numeric parsing is strict") {
  CHECK(parse_double("inf", "x") == kInf);
  CHECK(std::isnan(parse_double("nan", "x")));
  CHECK(oracle::throws_kind(ErrorKind::data, [] { parse_double("1.5x", "rate"); }));
  CHECK(oracle::throws_kind(ErrorKind::data, [] { parse_double("", "rate"); }));
  CHECK(oracle::throws_kind(ErrorKind::data, [] { parse_double(" 1", "rate"); }));
  try {
    parse_double("z9", "growth rate");
    FAIL("expected a parse error");
  } catch (const Error& e) {
    CHECK(contains(e.what(), "growth rate"));
    CHECK(contains(e.what(), "z9"));
  }
}

TEST_CASE("population files round trip byte for byte") {
  std::map<std::string, std::vector<double>> numeric;
  numeric["score"] = {1.0 / 3.0, -0.0, 2.5e-17, 1e18};
  CategoricalAttr city;
  city.levels = {"plain", "a,b", "say \"hi\""};
  city.codes = {0, 1, 2, 0};
  std::map<std::string, CategoricalAttr> categorical;
  categorical["city"] = city;

  const Population pop = Population::from_edges(
      4, {{0, 1}, {1, 2}, {2, 3}, {0, 3}}, {18.5, 0.1 + 0.2, 42.0, 77.7}, {0, 1, 0, 1},
      numeric, categorical);

  const std::string n1 = tmp_path("pop_nodes_1.csv");
  const std::string e1 = tmp_path("pop_edges_1.csv");
  write_population(pop, n1, e1);
  const Population back = read_population(n1, e1);

  REQUIRE(back.size() == 4);
  CHECK(back.tie_count() == 4);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(same_bits(back.ages()[i], pop.ages()[i]));
    CHECK(back.infection()[i] == pop.infection()[i]);
  }
  REQUIRE(back.numeric_attrs().count("score") == 1);
  for (std::size_t i = 0; i < 4; ++i)
    CHECK(same_bits(back.numeric_attrs().at("score")[i], numeric["score"][i]));
  REQUIRE(back.categorical_attrs().count("city") == 1);
  CHECK(back.categorical_attrs().at("city").levels == city.levels);
  CHECK(back.categorical_attrs().at("city").codes == city.codes);

  const std::string n2 = tmp_path("pop_nodes_2.csv");
  const std::string e2 = tmp_path("pop_edges_2.csv");
  write_population(back, n2, e2);
  CHECK(read_text_file(n1) == read_text_file(n2));
  CHECK(read_text_file(e1) == read_text_file(e2));
}

TEST_CASE("population readers reject malformed tables") {
  const std::string nodes = tmp_path("bad_nodes.csv");
  const std::string edges = tmp_path("bad_edges.csv");
  write_text_file(edges, "src,dst\n");

  write_text_file(nodes, "id,years,z\n0,20,0\n");
  CHECK(oracle::throws_kind(ErrorKind::data, [&] { read_population(nodes, edges); }));

  write_text_file(nodes, "id,age,z\n0,20,2\n");
  CHECK(oracle::throws_kind(ErrorKind::data, [&] { read_population(nodes, edges); }));

  write_text_file(nodes, "id,age,z\n0,20,0\n0,25,1\n");
  CHECK(oracle::throws_kind(ErrorKind::data, [&] { read_population(nodes, edges); }));

  write_text_file(nodes, "id,age,z\n0,20\n");
  CHECK(oracle::throws_kind(ErrorKind::data, [&] { read_population(nodes, edges); }));

  write_text_file(nodes, "");
  CHECK(oracle::throws_kind(ErrorKind::data, [&] { read_population(nodes, edges); }));

  write_text_file(nodes, "id,age,z\n0,20,0\n1,25,1\n");
  write_text_file(edges, "from,to\n");
  CHECK(oracle::throws_kind(ErrorKind::data, [&] { read_population(nodes, edges); }));

  write_text_file(edges, "src,dst\n0,7\n");
  CHECK(oracle::throws_kind(ErrorKind::data, [&] { read_population(nodes, edges); }));

  write_text_file(edges, "src,dst\n0,0\n");
  CHECK(oracle::throws_kind(ErrorKind::data, [&] { read_population(nodes, edges); }));

  write_text_file(edges, "src,dst\n0,1\n1,0\n");
  CHECK(oracle::throws_kind(ErrorKind::data, [&] { read_population(nodes, edges); }));
}

TEST_CASE("extra node columns are typed by their cells") {
  const std::string nodes = tmp_path("typed_nodes.csv");
  const std::string edges = tmp_path("typed_edges.csv");
  write_text_file(nodes,
                  "id,age,z,grp,score\n"
                  "n0,20,0,7,1.5\n"
                  "n1,30,1,x,2\n"
                  "n2,40,0,\"a,b\",2.5\n");
  write_text_file(edges, "src,dst\nn0,n1\n");

  const Population pop = read_population(nodes, edges);
  REQUIRE(pop.size() == 3);
  // Every score cell parses, so the column is numeric.
  REQUIRE(pop.numeric_attrs().count("score") == 1);
  CHECK(pop.numeric_attrs().at("score")[2] == 2.5);
  // grp mixes digits and text, so it is categorical with levels in order of
  // first appearance; node_value surfaces the level code.
  REQUIRE(pop.categorical_attrs().count("grp") == 1);
  CHECK(pop.categorical_attrs().at("grp").levels ==
        std::vector<std::string>{"7", "x", "a,b"});
  CHECK(pop.node_value(1, "grp") == 1.0);
  CHECK(pop.node_value(2, "grp") == 2.0);
}

TEST_CASE("attribute names may not shadow fixed node columns") {
  std::map<std::string, std::vector<double>> numeric;
  numeric["id"] = {1.0, 2.0};
  const Population pop =
      Population::from_edges(2, {{0, 1}}, {20.0, 30.0}, {0, 1}, numeric, {});
  const std::string nodes = tmp_path("shadow_nodes.csv");
  const std::string edges = tmp_path("shadow_edges.csv");
  CHECK(oracle::throws_kind(ErrorKind::data, [&] { write_population(pop, nodes, edges); }));
}

TEST_CASE("recipes round trip through json") {
  PopulationRecipe r;
  r.n = 321;
  r.age_shape = 19.5;
  r.age_rate = 0.75;
  r.infect_intercept = -3.25;
  r.infect_slope = 0.07;
  r.ergm.eta1 = -3.6;
  r.ergm.eta2 = -0.19;
  r.max_retries = 44;

  const PopulationRecipe back = recipe_from_json(recipe_to_json(r));
  CHECK(back.n == r.n);
  CHECK(back.age_shape == r.age_shape);
  CHECK(back.age_rate == r.age_rate);
  CHECK(back.infect_intercept == r.infect_intercept);
  CHECK(back.infect_slope == r.infect_slope);
  CHECK(back.ergm.eta1 == r.ergm.eta1);
  CHECK(back.ergm.eta2 == r.ergm.eta2);
  CHECK(back.max_retries == r.max_retries);

  // Absent keys keep their defaults.
  const PopulationRecipe partial = recipe_from_json("{\"n\": 50}");
  CHECK(partial.n == 50);
  CHECK(partial.age_shape == PopulationRecipe{}.age_shape);
}

TEST_CASE("recipe documents reject unknown keys and bad types") {
  CHECK(oracle::throws_kind(ErrorKind::config, [] { recipe_from_json("{\"m\": 1}"); }));
  CHECK(oracle::throws_kind(ErrorKind::config, [] { recipe_from_json("{\"n\": \"x\"}"); }));
  CHECK(oracle::throws_kind(ErrorKind::config, [] { recipe_from_json("{"); }));
  CHECK(oracle::throws_kind(ErrorKind::config,
                            [] { recipe_from_json("{\"ergm\": {\"eta3\": 1}}"); }));
  CHECK(oracle::throws_kind(ErrorKind::config, [] { recipe_from_json("[1, 2]"); }));
}

TEST_CASE("recruitment models round trip through json") {
  const auto table = std::make_shared<TieTable>(TieTable::from_entries(
      std::vector<TieTable::Entry>{{0, 1, 0.5}, {1, 2, -1.25}}));
  MDRModel model;
  model.covariates = {CovariateSpec::recruit_attribute("age"),
                      CovariateSpec::recruit_product({"age", "z"}),
                      CovariateSpec::age_gap(),
                      CovariateSpec::same_attribute("z"),
                      CovariateSpec::dyad_table("pref", table)};
  model.beta = {0.1 + 0.2, -1.0 / 3.0, 0.0, 1.5, -2.0};
  model.validate();

  const std::string text = model_to_json(model);
  const MDRModel back = model_from_json(text);
  REQUIRE(back.covariates.size() == 5);
  CHECK(back.beta == model.beta);
  for (std::size_t k = 0; k < 5; ++k) {
    CHECK(back.covariates[k].name == model.covariates[k].name);
    CHECK(back.covariates[k].fn == model.covariates[k].fn);
    CHECK(back.covariates[k].attrs == model.covariates[k].attrs);
  }
  REQUIRE(back.covariates[4].table != nullptr);
  CHECK(back.covariates[4].table->value(0, 1) == 0.5);
  CHECK(back.covariates[4].table->value(2, 1) == -1.25);

  // Serializing the parsed model reproduces the document exactly.
  CHECK(model_to_json(back) == text);
}

TEST_CASE("model documents are validated") {
  CHECK(oracle::throws_kind(ErrorKind::config, [] { model_from_json("{\"beta\": []}"); }));
  CHECK(oracle::throws_kind(ErrorKind::config, [] {
    model_from_json("{\"covariates\": [], \"beta\": [], \"extra\": 1}");
  }));
  CHECK(oracle::throws_kind(ErrorKind::config, [] {
    model_from_json(
        "{\"covariates\": [{\"fn\": \"nonsense\"}], \"beta\": [0]}");
  }));
  // Coefficient count must match the covariate list.
  CHECK(oracle::throws_kind(ErrorKind::config, [] {
    model_from_json(
        "{\"covariates\": [{\"fn\": \"abs_age_difference\"}], \"beta\": [0, 1]}");
  }));
  // Only dyad-table covariates carry inline tables.
  CHECK(oracle::throws_kind(ErrorKind::config, [] {
    model_from_json(
        "{\"covariates\": [{\"fn\": \"abs_age_difference\", \"table\": []}], "
        "\"beta\": [0]}");
  }));
  CHECK(oracle::throws_kind(ErrorKind::config, [] {
    model_from_json("{\"covariates\": [{\"fn\": \"custom_table\"}], \"beta\": [0]}");
  }));
  // Conflicting orientations of one dyad are corrupt data, not bad config.
  CHECK(oracle::throws_kind(ErrorKind::data, [] {
    model_from_json(
        "{\"covariates\": [{\"fn\": \"custom_table\", "
        "\"table\": [[0, 1, 0.5], [1, 0, 0.7]]}], \"beta\": [0]}");
  }));
}

TEST_CASE("dyad tables round trip as csv") {
  const TieTable table = TieTable::from_entries(
      std::vector<TieTable::Entry>{{0, 1, 0.5}, {2, 3, -1.0}, {1, 2, 0.25}});
  const std::string path = tmp_path("ties.csv");
  write_tie_table(table, path);
  const TieTable back = read_tie_table(path);
  CHECK(back.size() == table.size());
  CHECK(back.value(1, 0) == 0.5);
  CHECK(back.value(3, 2) == -1.0);
  CHECK(back.value(0, 3) == 0.0);

  write_text_file(path, "src,dst,weight\n");
  CHECK(oracle::throws_kind(ErrorKind::data, [&] { read_tie_table(path); }));
  write_text_file(path, "src,dst,value\n0,1\n");
  CHECK(oracle::throws_kind(ErrorKind::data, [&] { read_tie_table(path); }));
  write_text_file(path, "src,dst,value\n0,1,x\n");
  CHECK(oracle::throws_kind(ErrorKind::data, [&] { read_tie_table(path); }));
}

namespace {

RDSSample handmade_sample() {
  RDSSample s;
  s.coupons = 3;
  Member m0;
  m0.node = 5;
  m0.recruiter = -1;
  m0.wave = 0;
  m0.reported_degree = 4.0;
  m0.z = 1;
  m0.attrs = {{"age", 31.25}, {"z", 1.0}};
  m0.alters = {{{"age", 44.0}, {"z", 0.0}}, {{"z", 1.0}}};  // second alter lacks age
  Member m1;
  m1.node = 9;
  m1.recruiter = 0;
  m1.wave = 1;
  m1.reported_degree = 2.5;
  m1.z = 0;
  m1.attrs = {{"age", 0.1 + 0.2}, {"z", 0.0}};
  Member m2;
  m2.node = 2;
  m2.recruiter = 0;
  m2.wave = 1;
  m2.reported_degree = 7.0;
  m2.z = 0;
  m2.attrs = {{"age", 58.0}, {"z", 0.0}};
  m2.alters = {{{"age", 21.0}, {"z", 1.0}}};
  s.members = {m0, m1, m2};
  s.validate();
  return s;
}

}  // namespace

TEST_CASE("samples round trip byte for byte") {
  const RDSSample s = handmade_sample();
  const std::string mem1 = tmp_path("sample_members_1.csv");
  const std::string alt1 = tmp_path("sample_alters_1.csv");
  write_sample(s, mem1, alt1);

  const RDSSample back = read_sample(mem1, alt1);
  REQUIRE(back.members.size() == 3);
  CHECK(back.coupons == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(back.members[i].node == s.members[i].node);
    CHECK(back.members[i].recruiter == s.members[i].recruiter);
    CHECK(back.members[i].wave == s.members[i].wave);
    CHECK(back.members[i].z == s.members[i].z);
    CHECK(same_bits(back.members[i].reported_degree, s.members[i].reported_degree));
    CHECK(back.members[i].attrs == s.members[i].attrs);
    CHECK(back.members[i].alters == s.members[i].alters);
  }

  const std::string mem2 = tmp_path("sample_members_2.csv");
  const std::string alt2 = tmp_path("sample_alters_2.csv");
  write_sample(back, mem2, alt2);
  CHECK(read_text_file(mem1) == read_text_file(mem2));
  CHECK(read_text_file(alt1) == read_text_file(alt2));
}

TEST_CASE("simulated samples round trip byte for byte") {
  RngStream rng(77);
  const oracle::SimUnit unit = oracle::simulate_unit(rng);
  const std::string mem1 = tmp_path("sim_members_1.csv");
  const std::string alt1 = tmp_path("sim_alters_1.csv");
  write_sample(unit.sample, mem1, alt1);
  const RDSSample back = read_sample(mem1, alt1);
  CHECK(std::string(sample_data_mode(back)) == "simulation");

  const std::string mem2 = tmp_path("sim_members_2.csv");
  const std::string alt2 = tmp_path("sim_alters_2.csv");
  write_sample(back, mem2, alt2);
  CHECK(read_text_file(mem1) == read_text_file(mem2));
  CHECK(read_text_file(alt1) == read_text_file(alt2));
}

TEST_CASE("the coupon preamble restores the design cap") {
  const RDSSample s = handmade_sample();
  const std::string mem = tmp_path("coupon_members.csv");
  const std::string alt = tmp_path("coupon_alters.csv");
  write_sample(s, mem, alt);
  CHECK(read_text_file(mem).rfind("#coupons=3\n", 0) == 0);

  // Without the preamble the cap falls back to the observed maximum.
  write_text_file(mem,
                  "id,recruiter_id,wave,degree,z\n"
                  "s,,0,3,1\n"
                  "a,s,1,2,0\n"
                  "b,s,1,2,1\n");
  write_text_file(alt, "ego_id,alter_index\n");
  const RDSSample inferred = read_sample(mem, alt);
  CHECK(inferred.coupons == 2);
  CHECK(std::string(sample_data_mode(inferred)) == "ingestion");

  write_text_file(mem, "#coupons=0\nid,recruiter_id,wave,degree,z\ns,,0,3,1\n");
  CHECK(oracle::throws_kind(ErrorKind::data, [&] { read_sample(mem, alt); }));
}

TEST_CASE("sample readers reject malformed tables") {
  const std::string mem = tmp_path("bad_members.csv");
  const std::string alt = tmp_path("bad_alters.csv");
  write_text_file(alt, "ego_id,alter_index\n");

  // A recruiter must appear on an earlier row.
  write_text_file(mem,
                  "id,recruiter_id,wave,degree,z\n"
                  "a,b,1,3,1\n"
                  "b,,0,3,0\n");
  CHECK(oracle::throws_kind(ErrorKind::data, [&] { read_sample(mem, alt); }));

  write_text_file(mem, "id,recruiter_id,wave,degree,z\na,,0,3,2\n");
  CHECK(oracle::throws_kind(ErrorKind::data, [&] { read_sample(mem, alt); }));

  write_text_file(mem, "id,recruiter,wave,degree,z\na,,0,3,1\n");
  CHECK(oracle::throws_kind(ErrorKind::data, [&] { read_sample(mem, alt); }));

  write_text_file(mem,
                  "id,recruiter_id,wave,degree,z\n"
                  "a,,0,3,1\n"
                  "a,,0,2,0\n");
  CHECK(oracle::throws_kind(ErrorKind::data, [&] { read_sample(mem, alt); }));

  // Alter rows must be contiguous and 0-indexed per ego, with a known ego.
  write_text_file(mem, "id,recruiter_id,wave,degree,z\na,,0,3,1\n");
  write_text_file(alt, "ego_id,alter_index,age\na,1,30\n");
  CHECK(oracle::throws_kind(ErrorKind::data, [&] { read_sample(mem, alt); }));
  write_text_file(alt, "ego_id,alter_index,age\nzz,0,30\n");
  CHECK(oracle::throws_kind(ErrorKind::data, [&] { read_sample(mem, alt); }));
  write_text_file(alt, "alters\n");
  CHECK(oracle::throws_kind(ErrorKind::data, [&] { read_sample(mem, alt); }));
}

TEST_CASE("samples with contradictory attributes cannot be written") {
  RDSSample s;
  s.coupons = 1;
  Member m;
  m.recruiter = -1;
  m.wave = 0;
  m.reported_degree = 2.0;
  m.z = 1;
  m.attrs = {{"z", 0.0}};
  s.members = {m};
  const std::string mem = tmp_path("contra_members.csv");
  const std::string alt = tmp_path("contra_alters.csv");
  CHECK(oracle::throws_kind(ErrorKind::data, [&] { write_sample(s, mem, alt); }));

  s.members[0].attrs = {{"node", 3.0}};
  CHECK(oracle::throws_kind(ErrorKind::data, [&] { write_sample(s, mem, alt); }));
}

TEST_CASE("surveys round trip") {
  std::vector<RawRecord> recs(2);
  recs[0].id = "s,1";
  recs[0].recruiter_id = "";
  recs[0].age = 29.5;
  recs[0].gender = 1;
  recs[0].report.total = 3;
  recs[0].report.by_gender = {1, 2};
  recs[0].report.by_age[1] = 2;
  recs[0].report.by_age[3] = 1;
  recs[1].id = "r\"q\"";
  recs[1].recruiter_id = "s,1";
  recs[1].age = kNaN;
  recs[1].gender = -1;
  recs[1].report.total = 1;
  recs[1].report.by_gender = {0, 1};
  recs[1].report.by_age[0] = 1;

  const std::string p1 = tmp_path("survey_1.csv");
  write_survey(recs, p1);
  const auto back = read_survey(p1);
  REQUIRE(back.size() == 2);
  CHECK(back[0].id == "s,1");
  CHECK(back[1].id == "r\"q\"");
  CHECK(back[1].recruiter_id == "s,1");
  CHECK(back[0].age == 29.5);
  CHECK(std::isnan(back[1].age));
  CHECK(back[0].gender == 1);
  CHECK(back[1].gender == -1);
  CHECK(back[0].report.total == 3);
  CHECK(back[0].report.by_gender == std::array<long, 2>{1, 2});
  CHECK(back[0].report.by_age == recs[0].report.by_age);

  const std::string p2 = tmp_path("survey_2.csv");
  write_survey(back, p2);
  CHECK(read_text_file(p1) == read_text_file(p2));
}

TEST_CASE("survey readers demand the exact header") {
  const std::string path = tmp_path("bad_survey.csv");
  const std::string header =
      "id,recruiter_id,age,male,degree,deg_male,deg_nonmale,"
      "a18,a20,a25,a30,a35,a40,a45,a50,a55,a60,a65,a70,a75,a80";
  write_text_file(path, "id,recruiter_id,age,sex,degree,deg_male,deg_nonmale,"
                        "a18,a20,a25,a30,a35,a40,a45,a50,a55,a60,a65,a70,a75,a80\n");
  try {
    read_survey(path);
    FAIL("expected a header error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::data);
    CHECK(contains(e.what(), "survey header must be exactly"));
  }

  write_text_file(path, header + "\na,,30,2,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0\n");
  CHECK(oracle::throws_kind(ErrorKind::data, [&] { read_survey(path); }));
  write_text_file(path, header + "\na,,30,1,0,0\n");
  CHECK(oracle::throws_kind(ErrorKind::data, [&] { read_survey(path); }));
  write_text_file(path, "");
  CHECK(oracle::throws_kind(ErrorKind::data, [&] { read_survey(path); }));
}

TEST_CASE("fits round trip through json") {
  FitResult fit;
  fit.beta_hat = {0.1 + 0.2, -1.0 / 3.0};
  fit.log_lik = -12.5;
  fit.converged = true;
  fit.iterations = 13;
  fit.gradient_norm = kNaN;
  fit.warnings = {"first", "second"};

  const std::string text = fit_to_json(fit);
  CHECK(contains(text, "\"gradient_norm\": null"));
  const FitResult back = fit_from_json(text);
  CHECK(back.beta_hat == fit.beta_hat);
  CHECK(back.log_lik == fit.log_lik);
  CHECK(back.converged == fit.converged);
  CHECK(back.iterations == fit.iterations);
  CHECK(std::isnan(back.gradient_norm));
  CHECK(back.warnings == fit.warnings);
}

TEST_CASE("fit documents are validated") {
  CHECK(oracle::throws_kind(ErrorKind::data, [] { fit_from_json("{"); }));
  CHECK(oracle::throws_kind(ErrorKind::data, [] { fit_from_json("{\"beta_hat\": []}"); }));
  CHECK(oracle::throws_kind(ErrorKind::data, [] {
    fit_from_json(
        "{\"beta_hat\": [], \"log_lik\": 0, \"converged\": true, \"iterations\": 1, "
        "\"gradient_norm\": 0, \"warnings\": [], \"bonus\": 1}");
  }));
}

TEST_CASE("estimate reports serialize their full context") {
  EstimateReport rep;
  rep.estimator = "mdr-ego";
  rep.value = EstimateValue::of(0.31);
  rep.weight_source = "mdr_stationary";
  rep.data_mode = "simulation";
  const auto j = nlohmann::json::parse(estimate_report_to_json(rep));
  CHECK(j.at("estimator") == "mdr-ego");
  CHECK(j.at("estimate") == 0.31);
  CHECK(j.at("status") == "ok");
  CHECK(j.at("note") == "");
  CHECK(j.at("weight_source") == "mdr_stationary");
  CHECK(j.at("data_mode") == "simulation");

  rep.value = EstimateValue{};
  rep.value.status = EstimateStatus::undefined;
  rep.value.note = "no cross-group alters reported";
  const auto j2 = nlohmann::json::parse(estimate_report_to_json(rep));
  CHECK(j2.at("estimate").is_null());
  CHECK(j2.at("status") == "undefined");
  CHECK(j2.at("note") == "no cross-group alters reported");
}

TEST_CASE("bootstrap reports serialize their full context") {
  BootstrapResult br;
  br.method = BootstrapMethod::lu;
  br.B = 7;
  br.point = EstimateValue::of(0.4);
  br.ci.se = 0.05;
  br.ci.lo = 0.3;
  br.ci.hi = 0.5;
  br.ci.clamped = false;
  br.ci.used = 7;
  br.ci.dropped = 0;
  br.restarts = 2;
  br.refit_failures = 0;
  const auto j = nlohmann::json::parse(bootstrap_report_to_json(br, "lu", 0.05));
  CHECK(j.at("estimator") == "lu");
  CHECK(j.at("method") == "lu");
  CHECK(j.at("replicates") == 7);
  CHECK(j.at("point") == 0.4);
  CHECK(!j.contains("note"));
  CHECK(j.at("se") == 0.05);
  CHECK(j.at("ci").at("alpha") == 0.05);
  CHECK(j.at("ci").at("lower") == 0.3);
  CHECK(j.at("ci").at("upper") == 0.5);
  CHECK(j.at("ci").at("clamped") == false);
  CHECK(j.at("replicates_used") == 7);
  CHECK(j.at("replicates_undefined") == 0);
  CHECK(j.at("restarts") == 2);
  CHECK(j.at("refit_failures") == 0);

  br.point = EstimateValue::degenerate(1.0, "sample is entirely infected");
  const auto j2 = nlohmann::json::parse(bootstrap_report_to_json(br, "vh", 0.05));
  CHECK(j2.at("note") == "sample is entirely infected");
}

TEST_CASE("scenario configs round trip through json") {
  ScenarioConfig c;
  c.homophily = Level::high;
  c.mdr = Level::moderate;
  c.networks = 3;
  c.samples_per_network = 9;
  c.population_n = 750;
  c.design.n_target = 150;
  c.design.n_seeds = 5;
  c.design.coupons = 3;
  c.estimators = {EstimatorKind::sh, EstimatorKind::mdr_ii};
  c.bootstrap.replicates = 99;
  c.bootstrap.alpha = 0.2;
  c.with_ci = false;
  c.root_seed = 123456789;
  c.threads = 2;

  const ScenarioConfig back = scenario_config_from_json(scenario_config_to_json(c));
  CHECK(back.homophily == c.homophily);
  CHECK(back.mdr == c.mdr);
  CHECK(back.networks == c.networks);
  CHECK(back.samples_per_network == c.samples_per_network);
  CHECK(back.population_n == c.population_n);
  CHECK(back.design.n_target == c.design.n_target);
  CHECK(back.design.n_seeds == c.design.n_seeds);
  CHECK(back.design.coupons == c.design.coupons);
  CHECK(back.estimators == c.estimators);
  CHECK(back.bootstrap.replicates == c.bootstrap.replicates);
  CHECK(back.bootstrap.alpha == c.bootstrap.alpha);
  CHECK(back.with_ci == c.with_ci);
  CHECK(back.root_seed == c.root_seed);
  CHECK(back.threads == c.threads);
}

TEST_CASE("scenario config documents are validated") {
  CHECK(oracle::throws_kind(ErrorKind::config,
                            [] { scenario_config_from_json("{\"cells\": 3}"); }));
  CHECK(oracle::throws_kind(ErrorKind::config,
                            [] { scenario_config_from_json("{\"homophily\": \"extreme\"}"); }));
  CHECK(oracle::throws_kind(ErrorKind::config, [] {
    scenario_config_from_json("{\"estimators\": [\"mean\"]}");
  }));
  CHECK(oracle::throws_kind(ErrorKind::config, [] {
    scenario_config_from_json("{\"design\": {\"n\": 3}}");
  }));
  CHECK(oracle::throws_kind(ErrorKind::config, [] {
    scenario_config_from_json("{\"networks\": \"five\"}");
  }));
}

TEST_CASE("scenario results serialize with nulls for gaps") {
  ScenarioResult res;
  res.homophily = Level::none;
  res.mdr = Level::high;
  res.networks = 1;
  res.samples_per_network = 2;
  res.estimators = {EstimatorKind::vh};
  res.true_mu = {0.25};
  res.unit_network = {0, 0};
  res.estimates = {{0.3, kNaN}};
  res.ci_lo = {{kNaN, kNaN}};
  res.ci_hi = {{kNaN, kNaN}};
  EstimatorCellStats st;
  st.kind = EstimatorKind::vh;
  st.bias = 0.05;
  st.sd = 0.0;
  st.rmse = 0.05;
  st.defined = 1;
  st.undefined = 1;
  res.stats = {st};
  res.failed_units = 1;
  res.failures = {"every chain stalled at sample size 3"};

  const auto j = nlohmann::json::parse(scenario_result_to_json(res));
  CHECK(j.at("homophily") == "none");
  CHECK(j.at("mdr") == "high");
  CHECK(j.at("estimators")[0] == "vh");
  CHECK(j.at("true_mu")[0] == 0.25);
  CHECK(j.at("estimates")[0][0] == 0.3);
  CHECK(j.at("estimates")[0][1].is_null());
  CHECK(j.at("ci_lower")[0][0].is_null());
  CHECK(j.at("stats")[0].at("estimator") == "vh");
  CHECK(j.at("stats")[0].at("coverage").is_null());
  CHECK(j.at("stats")[0].at("defined") == 1);
  CHECK(j.at("failed_units") == 1);
  CHECK(j.at("failures")[0] == "every chain stalled at sample size 3");
}

TEST_CASE("scenario tables format four decimals") {
  ScenarioResult r1;
  r1.homophily = Level::none;
  r1.mdr = Level::high;
  EstimatorCellStats a;
  a.kind = EstimatorKind::vh;
  a.bias = 0.07251;
  a.coverage = kNaN;
  EstimatorCellStats b;
  b.kind = EstimatorKind::lu;
  b.bias = kNaN;
  b.coverage = 0.875;
  r1.stats = {a, b};

  ScenarioResult r2;
  r2.homophily = Level::moderate;
  r2.mdr = Level::none;
  EstimatorCellStats c = a;
  c.bias = -0.002349;
  EstimatorCellStats d = b;
  d.bias = 0.5;
  r2.stats = {c, d};

  const std::vector<ScenarioResult> rs = {r1, r2};
  CHECK(scenario_table_csv(rs, ScenarioMetric::bias) ==
        "scenario,vh,lu\n"
        "(none,high),0.0725,\n"
        "(moderate,none),-0.0023,0.5000\n");
  CHECK(scenario_table_csv(rs, ScenarioMetric::coverage) ==
        "scenario,vh,lu\n"
        "(none,high),,0.8750\n"
        "(moderate,none),,0.8750\n");
}

TEST_CASE("repair audits serialize") {
  RepairAudit audit;
  audit.members = 12;
  audit.imputed_gender = 2;
  audit.raised_to_activity = 1;
  audit.modified = 3;
  audit.same_gender_prob = 0.62;
  audit.notes = {"id 'x': reported composition adjusted to cover in-sample contacts"};
  const auto j = nlohmann::json::parse(repair_audit_to_json(audit));
  CHECK(j.at("members") == 12);
  CHECK(j.at("imputed_gender") == 2);
  CHECK(j.at("raised_to_activity") == 1);
  CHECK(j.at("modified") == 3);
  CHECK(j.at("same_gender_prob") == 0.62);
  CHECK(j.at("notes")[0] == audit.notes[0]);
}

TEST_CASE("whole-file helpers report the path") {
  try {
    read_text_file(tmp_path("does_not_exist.txt"));
    FAIL("expected an open error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::data);
    CHECK(contains(e.what(), "does_not_exist.txt"));
  }
  const std::string path = tmp_path("blob.bin");
  const std::string content = "line1\nline2\r\nraw\ttab";
  write_text_file(path, content);
  CHECK(read_text_file(path) == content);
}
