#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rdsmdr/bootstrap.hpp"
#include "rdsmdr/harness.hpp"
#include "rdsmdr/netgen.hpp"

namespace rdsmdr {

// Shortest decimal form that parses back to the same double; nan and inf
// spelled out. All numeric CSV cells go through this pair, which is what
// makes the file formats round-trip bit-exactly.
std::string format_double(double v);
// Strict full-token parse; `what` names the field in error messages.
double parse_double(std::string_view s, const std::string& what);

// Population on disk: a node table `id,age,z[,extra...]` and an edge list
// `src,dst` holding each tie once in either orientation. Extra node columns
// are numeric when every cell parses as a number and categorical otherwise.
// Self-loops and repeated ties are rejected on read.
void write_population(const Population& pop, const std::string& nodes_path,
                      const std::string& edges_path);
Population read_population(const std::string& nodes_path, const std::string& edges_path);

std::string recipe_to_json(const PopulationRecipe& recipe);
PopulationRecipe recipe_from_json(const std::string& text);

// Recruitment model as JSON: the ordered covariate list plus the coefficient
// array; dyad-table covariates carry their entries inline.
std::string model_to_json(const MDRModel& model);
MDRModel model_from_json(const std::string& text);

// Symmetric dyad table: `src,dst,value` rows.
TieTable read_tie_table(const std::string& path);
void write_tie_table(const TieTable& table, const std::string& path);

/**
 * Sample on disk: a member table and an alter table.
 *
 * Members: `id,recruiter_id,wave,degree,z[,attribute...]` with recruiter_id
 * empty for seeds, preceded by a `#coupons=c` line carrying the design's
 * coupon cap. The z column doubles as the member's z attribute, so no
 * attribute column named z is written; reading restores it. Alters:
 * `ego_id,alter_index[,attribute...]`, one row per reported alter, indexed
 * from 0 within each ego; an empty cell means the alter does not report that
 * attribute. Writing normalizes ids to row numbers.
 */
void write_sample(const RDSSample& sample, const std::string& members_path,
                  const std::string& alters_path);
RDSSample read_sample(const std::string& members_path, const std::string& alters_path);

// Wide survey table:
// `id,recruiter_id,age,male,degree,deg_male,deg_nonmale,a18,a20,...,a80`.
// The male cell may be empty (missing); the bracket columns count contacts
// per age bracket.
std::vector<RawRecord> read_survey(const std::string& path);
void write_survey(const std::vector<RawRecord>& records, const std::string& path);

std::string fit_to_json(const FitResult& fit);
FitResult fit_from_json(const std::string& text);

// Whether a sample's members carry network identities (simulated) or exist
// only through reported fields (ingested).
const char* sample_data_mode(const RDSSample& sample);

struct EstimateReport {
  std::string estimator;
  EstimateValue value;
  std::string weight_source;  // degree / dr_stationary / mdr_stationary / none
  std::string data_mode;      // simulation / ingestion
};

std::string estimate_report_to_json(const EstimateReport& report);

std::string bootstrap_report_to_json(const BootstrapResult& result, const std::string& estimator,
                                     double alpha);

std::string scenario_config_to_json(const ScenarioConfig& config);
ScenarioConfig scenario_config_from_json(const std::string& text);
std::string scenario_result_to_json(const ScenarioResult& result);

// Summary table over several cells: one row per cell, one column per
// estimator, cells formatted to four decimals.
enum class ScenarioMetric { bias, sd, rmse, coverage };
std::string scenario_table_csv(std::span<const ScenarioResult> results, ScenarioMetric metric);

std::string repair_audit_to_json(const RepairAudit& audit);

// Whole-file helpers used by the CLI; errors carry the path.
std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

}  // namespace rdsmdr
