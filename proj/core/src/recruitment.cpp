#include "rdsmdr/recruitment.hpp"

#include <algorithm>
#include <cmath>

#include "rdsmdr/error.hpp"
#include "rdsmdr/math.hpp"

namespace rdsmdr {

double PersonRef::attr(const std::string& name) const {
  if (pop_ != nullptr) return pop_->node_value(node_, name);
  if (auto it = attrs_->find(name); it != attrs_->end()) return it->second;
  fail_data("missing attribute '" + name + "' in reported person data");
}

TieTable TieTable::from_entries(std::span<const Entry> entries) {
  TieTable t;
  for (const Entry& e : entries) {
    if (e.src == e.dst) fail_data("tie table entry pairs a node with itself");
    const auto key = std::minmax(e.src, e.dst);
    auto [it, inserted] = t.values_.emplace(key, e.value);
    if (!inserted && it->second != e.value)
      fail_data("tie table has conflicting values for the pair (" + std::to_string(key.first) +
                ", " + std::to_string(key.second) + ")");
  }
  return t;
}

double TieTable::value(NodeId i, NodeId j) const {
  const auto it = values_.find(std::minmax(i, j));
  return it == values_.end() ? 0.0 : it->second;
}

std::vector<TieTable::Entry> TieTable::entries() const {
  std::vector<Entry> out;
  out.reserve(values_.size());
  for (const auto& [key, v] : values_) out.push_back({key.first, key.second, v});
  return out;
}

CovariateSpec CovariateSpec::recruit_attribute(std::string attr) {
  CovariateSpec c;
  c.name = attr;
  c.kind = CovariateKind::node_attribute;
  c.fn = Fn::attribute_of_recruit;
  c.attrs = {std::move(attr)};
  return c;
}

CovariateSpec CovariateSpec::recruit_product(std::vector<std::string> attrs) {
  if (attrs.empty()) fail_config("product covariate needs at least one attribute");
  CovariateSpec c;
  for (std::size_t k = 0; k < attrs.size(); ++k) c.name += (k ? "*" : "") + attrs[k];
  c.kind = CovariateKind::node_attribute;
  c.fn = Fn::product_of_recruit_attributes;
  c.attrs = std::move(attrs);
  return c;
}

CovariateSpec CovariateSpec::age_gap() {
  CovariateSpec c;
  c.name = "age_gap";
  c.kind = CovariateKind::symmetric_tie_function;
  c.fn = Fn::abs_age_difference;
  c.attrs = {"age"};
  return c;
}

CovariateSpec CovariateSpec::same_attribute(std::string attr) {
  CovariateSpec c;
  c.name = "same_" + attr;
  c.kind = CovariateKind::symmetric_tie_function;
  c.fn = Fn::indicator_same_attribute;
  c.attrs = {std::move(attr)};
  return c;
}

CovariateSpec CovariateSpec::dyad_table(std::string name, std::shared_ptr<const TieTable> table) {
  if (!table) fail_config("table covariate needs a table");
  CovariateSpec c;
  c.name = std::move(name);
  c.kind = CovariateKind::symmetric_tie_function;
  c.fn = Fn::custom_table;
  c.table = std::move(table);
  return c;
}

double eval_covariate(const CovariateSpec& spec, const PersonRef& recruiter,
                      const PersonRef& recruit) {
  switch (spec.fn) {
    case CovariateSpec::Fn::attribute_of_recruit:
      return recruit.attr(spec.attrs[0]);
    case CovariateSpec::Fn::product_of_recruit_attributes: {
      double v = 1.0;
      for (const std::string& a : spec.attrs) v *= recruit.attr(a);
      return v;
    }
    case CovariateSpec::Fn::abs_age_difference:
      return std::abs(recruiter.attr("age") - recruit.attr("age"));
    case CovariateSpec::Fn::indicator_same_attribute:
      return recruiter.attr(spec.attrs[0]) == recruit.attr(spec.attrs[0]) ? 1.0 : 0.0;
    case CovariateSpec::Fn::custom_table: {
      const auto i = recruiter.node();
      const auto j = recruit.node();
      if (!i || !j)
        fail_data("table covariate '" + spec.name +
                  "' needs network node identities, which reported persons lack");
      return spec.table->value(*i, *j);
    }
  }
  fail_config("unknown covariate function");
}

int MDRModel::k1() const {
  int k = 0;
  while (k < static_cast<int>(covariates.size()) &&
         covariates[static_cast<std::size_t>(k)].kind == CovariateKind::node_attribute)
    ++k;
  return k;
}

void MDRModel::validate() const {
  if (beta.size() != covariates.size())
    fail_config("model has " + std::to_string(covariates.size()) + " covariates but " +
                std::to_string(beta.size()) + " coefficients");
  for (std::size_t k = static_cast<std::size_t>(k1()); k < covariates.size(); ++k)
    if (covariates[k].kind == CovariateKind::node_attribute)
      fail_config("node covariate '" + covariates[k].name + "' must precede all tie covariates");
  for (const CovariateSpec& c : covariates) {
    if (c.fn == CovariateSpec::Fn::custom_table && !c.table)
      fail_config("table covariate '" + c.name + "' has no table");
    if (c.fn != CovariateSpec::Fn::custom_table && c.fn != CovariateSpec::Fn::abs_age_difference &&
        c.attrs.empty())
      fail_config("covariate '" + c.name + "' names no attributes");
  }
}

MDRModel random_walk_model() { return {}; }

MDRModel DRModel::to_mdr() const {
  if (!(phi > 0.0)) fail_config("differential recruitment ratio must be positive");
  MDRModel m;
  m.covariates = {CovariateSpec::recruit_attribute(attr)};
  m.beta = {std::log(phi)};
  return m;
}

double pair_logit(const MDRModel& model, const PersonRef& recruiter, const PersonRef& recruit) {
  double s = 0.0;
  for (std::size_t k = 0; k < model.covariates.size(); ++k)
    s += model.beta[k] * eval_covariate(model.covariates[k], recruiter, recruit);
  return s;
}

double node_logit(const MDRModel& model, const PersonRef& person) {
  double s = 0.0;
  const int k1 = model.k1();
  for (int k = 0; k < k1; ++k)
    s += model.beta[static_cast<std::size_t>(k)] *
         eval_covariate(model.covariates[static_cast<std::size_t>(k)], person, person);
  return s;
}

std::vector<double> covariate_vector(const Population& pop, const MDRModel& model, NodeId i,
                                     NodeId j) {
  model.validate();
  if (i == j) fail_config("covariate vector needs two distinct nodes");
  const PersonRef pi(pop, i), pj(pop, j);
  std::vector<double> x(model.covariates.size());
  for (std::size_t k = 0; k < model.covariates.size(); ++k)
    x[k] = eval_covariate(model.covariates[k], pi, pj);
  return x;
}

std::vector<std::pair<NodeId, double>> transition_row(const Population& pop,
                                                      const MDRModel& model, NodeId i,
                                                      std::span<const char> excluded) {
  model.validate();
  if (!excluded.empty() && excluded.size() != static_cast<std::size_t>(pop.size()))
    fail_config("exclusion flags must cover every node");

  const PersonRef pi(pop, i);
  std::vector<std::pair<NodeId, double>> row;
  std::vector<double> logits;
  for (NodeId j : pop.neighbors(i)) {
    if (!excluded.empty() && excluded[static_cast<std::size_t>(j)]) continue;
    row.emplace_back(j, 0.0);
    logits.push_back(pair_logit(model, pi, PersonRef(pop, j)));
  }
  if (row.empty()) return row;

  const double lse = log_sum_exp(logits);
  if (!std::isfinite(lse)) fail_numeric("recruitment logits overflowed");
  for (std::size_t k = 0; k < row.size(); ++k) row[k].second = std::exp(logits[k] - lse);
  return row;
}

StationaryResult stationary(const Population& pop, const MDRModel& model) {
  model.validate();
  const int n = pop.size();
  StationaryResult out;
  out.log_weight.resize(static_cast<std::size_t>(n));
  out.weight.resize(static_cast<std::size_t>(n));

  std::vector<double> logits;
  for (NodeId i = 0; i < n; ++i) {
    const auto nb = pop.neighbors(i);
    if (nb.empty())
      fail_data("node " + std::to_string(i) + " has no ties, so the walk has no stationary law");
    const PersonRef pi(pop, i);
    logits.clear();
    for (NodeId j : nb) logits.push_back(pair_logit(model, pi, PersonRef(pop, j)));
    const double lw = node_logit(model, pi) + log_sum_exp(logits);
    if (!std::isfinite(lw)) fail_numeric("stationary weight overflowed at node " + std::to_string(i));
    out.log_weight[static_cast<std::size_t>(i)] = lw;
  }

  out.log_scale = *std::max_element(out.log_weight.begin(), out.log_weight.end());
  KahanSum total;
  for (std::size_t i = 0; i < out.weight.size(); ++i) {
    out.weight[i] = std::exp(out.log_weight[i] - out.log_scale);
    total.add(out.weight[i]);
  }
  out.kappa = total.value();

  if (!pop.is_connected())
    out.warnings.push_back(
        "network is disconnected; the stationary law is unique only within each component");
  return out;
}

double phi_mdr_node(const Population& pop, const MDRModel& model, NodeId i) {
  const auto nb = pop.neighbors(i);
  if (nb.size() < 2) return 1.0;
  const PersonRef pi(pop, i);
  std::vector<double> logits;
  logits.reserve(nb.size());
  for (NodeId j : nb) logits.push_back(pair_logit(model, pi, PersonRef(pop, j)));

  // Ordered pairs with ratio >= 1: unequal pairs count once, tied pairs twice.
  KahanSum sum;
  std::size_t count = 0;
  for (std::size_t a = 0; a < logits.size(); ++a)
    for (std::size_t b = 0; b < logits.size(); ++b) {
      if (a == b || logits[a] < logits[b]) continue;
      sum.add(std::exp(logits[a] - logits[b]));
      ++count;
    }
  return sum.value() / static_cast<double>(count);
}

double phi_mdr(const Population& pop, const MDRModel& model) {
  model.validate();
  KahanSum sum;
  for (NodeId i = 0; i < pop.size(); ++i) sum.add(phi_mdr_node(pop, model, i));
  return sum.value() / static_cast<double>(pop.size());
}

}  // namespace rdsmdr
