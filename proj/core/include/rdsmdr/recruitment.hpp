#pragma once

#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rdsmdr/population.hpp"

namespace rdsmdr {

// Attribute name -> value map used wherever a person is known only through
// reported fields (sample members, reported alters) rather than a network node.
using AttrValues = std::map<std::string, double>;

// Uniform attribute access over either a population node or a reported
// attribute map, so covariate evaluation has a single code path.
class PersonRef {
 public:
  PersonRef(const Population& pop, NodeId node) : pop_(&pop), node_(node) {}
  explicit PersonRef(const AttrValues& attrs) : attrs_(&attrs) {}

  // Value of the named attribute; errors when the attribute is unknown.
  double attr(const std::string& name) const;

  // Network identity when backed by a population node.
  std::optional<NodeId> node() const {
    if (pop_ != nullptr) return node_;
    return std::nullopt;
  }

 private:
  const Population* pop_ = nullptr;
  NodeId node_ = -1;
  const AttrValues* attrs_ = nullptr;
};

// Symmetric dyad-level lookup table. Entries are stored unordered, so
// value(i, j) == value(j, i) by construction; conflicting values for the two
// orientations of the same pair are rejected at build time.
class TieTable {
 public:
  struct Entry {
    NodeId src;
    NodeId dst;
    double value;
  };

  static TieTable from_entries(std::span<const Entry> entries);

  // 0 for pairs not present in the table.
  double value(NodeId i, NodeId j) const;

  std::size_t size() const { return values_.size(); }

  // Canonical entry list (src < dst, sorted) for serialization.
  std::vector<Entry> entries() const;

 private:
  std::map<std::pair<NodeId, NodeId>, double> values_;
};

enum class CovariateKind { node_attribute, symmetric_tie_function };

// One recruitment covariate. Node covariates depend only on the potential
// recruit; tie covariates are symmetric functions of the dyad. Instances come
// from the factory functions, which pick the matching kind.
struct CovariateSpec {
  enum class Fn {
    attribute_of_recruit,           // node: named attribute of the recruit
    product_of_recruit_attributes,  // node: product of named attributes of the recruit
    abs_age_difference,             // tie: |age_i - age_j|
    indicator_same_attribute,       // tie: 1 when both persons share the named value
    custom_table,                   // tie: symmetric dyad table, needs node identities
  };

  std::string name;
  CovariateKind kind = CovariateKind::node_attribute;
  Fn fn = Fn::attribute_of_recruit;
  std::vector<std::string> attrs;
  std::shared_ptr<const TieTable> table;

  static CovariateSpec recruit_attribute(std::string attr);
  static CovariateSpec recruit_product(std::vector<std::string> attrs);
  static CovariateSpec age_gap();
  static CovariateSpec same_attribute(std::string attr);
  static CovariateSpec dyad_table(std::string name, std::shared_ptr<const TieTable> table);
};

// Evaluate one covariate for the ordered pair (recruiter, recruit). Table
// covariates require both persons to carry network identities.
double eval_covariate(const CovariateSpec& spec, const PersonRef& recruiter,
                      const PersonRef& recruit);

// Recruitment-preference model: logit of recruiting j from i is x_ij' beta,
// where x_ij stacks the node covariates of j followed by the tie covariates
// of the pair. The node-covariate prefix of beta is the alpha vector that
// enters the stationary weights.
struct MDRModel {
  std::vector<CovariateSpec> covariates;
  std::vector<double> beta;

  int k1() const;  // number of node covariates
  std::span<const double> alpha() const { return std::span(beta).first(static_cast<std::size_t>(k1())); }

  // Errors unless |beta| == |covariates| and node covariates precede tie
  // covariates.
  void validate() const;
};

// Random-walk null model: no covariates, uniform choice among alters.
MDRModel random_walk_model();

// One-attribute differential model: recruiting an alter with attr == 1 is
// phi times as likely as one with attr == 0, all else equal.
struct DRModel {
  std::string attr;
  double phi = 1.0;

  // Equivalent one-covariate model with coefficient ln(phi).
  MDRModel to_mdr() const;
};

// x_ij' beta for the ordered pair; the hot path behind transition rows.
double pair_logit(const MDRModel& model, const PersonRef& recruiter, const PersonRef& recruit);

// r' alpha: the node-covariate part of the logit, evaluated on one person.
double node_logit(const MDRModel& model, const PersonRef& person);

// Full covariate vector x_ij, mostly for fitting and tests.
std::vector<double> covariate_vector(const Population& pop, const MDRModel& model, NodeId i,
                                     NodeId j);

// Probability of each eligible neighbor being the next recruit from i,
// normalized over neighbors outside `excluded` (empty span: no exclusions,
// otherwise one flag per node). An empty result means every neighbor is
// excluded: the chain is stalled at i, which is a signal, not an error.
std::vector<std::pair<NodeId, double>> transition_row(const Population& pop,
                                                      const MDRModel& model, NodeId i,
                                                      std::span<const char> excluded = {});

// Stationary distribution of the recruitment chain in unnormalized form.
// weight[i] = exp(log_weight[i] - log_scale) keeps the exposed weights finite
// regardless of logit magnitude; normalized probabilities are weight / kappa.
struct StationaryResult {
  std::vector<double> log_weight;      // log of the unnormalized weight
  std::vector<double> weight;          // exp(log_weight - log_scale)
  double log_scale = 0.0;              // max log_weight
  double kappa = 0.0;                  // sum of weight
  std::vector<std::string> warnings;   // populated when the network is disconnected
};

// weight_i = sum over neighbors j of exp(x_ij' beta + r_i' alpha). Errors on
// isolated nodes (no stationary distribution of the walk exists) and on
// non-finite logits.
StationaryResult stationary(const Population& pop, const MDRModel& model);

// Preference-strength summary of one node: the mean of p_max/p_min over
// ordered neighbor pairs whose ratio is at least 1, so every unequal pair
// contributes once and every tied pair contributes 1 twice. Nodes with
// fewer than two neighbors score 1.
double phi_mdr_node(const Population& pop, const MDRModel& model, NodeId i);

// Network-level preference strength: mean of phi_mdr_node over all nodes.
double phi_mdr(const Population& pop, const MDRModel& model);

}  // namespace rdsmdr
