#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "rdsmdr/error.hpp"

namespace rdsmdr {

using NodeId = std::int32_t;

// Categorical column: per-node small-integer codes plus the level table.
struct CategoricalAttr {
  std::vector<std::int32_t> codes;
  std::vector<std::string> levels;
};

// Per-node tie counts into the level groups of one categorical attribute.
struct GroupDegrees {
  std::string attr;
  std::vector<long> counts;  // indexed by level code
  long total() const {
    long t = 0;
    for (long c : counts) t += c;
    return t;
  }
};

/**
 * Undirected social network with per-node attributes.
 *
 * Immutable after construction. Neighbor lists are sorted, deduplicated and
 * symmetric (j in neighbors(i) iff i in neighbors(j)); self-ties are
 * rejected. Node indices are dense 0-based; external string ids are mapped
 * at CSV ingestion and never stored here.
 *
 * Attributes: every node has an age (> 0) and an infection indicator
 * z in {0,1}; arbitrary extra numeric and categorical columns may ride
 * along. node_value() exposes any of them as a double (categorical columns
 * yield their level code), which is the access path used by recruitment
 * covariates.
 */
class Population {
public:
  static Population build(std::vector<std::vector<NodeId>> adjacency, std::vector<double> ages,
                          std::vector<std::int8_t> infection,
                          std::map<std::string, std::vector<double>> numeric_attrs = {},
                          std::map<std::string, CategoricalAttr> categorical_attrs = {});

  static Population from_edges(std::size_t n, const std::vector<std::pair<NodeId, NodeId>>& edges,
                               std::vector<double> ages, std::vector<std::int8_t> infection,
                               std::map<std::string, std::vector<double>> numeric_attrs = {},
                               std::map<std::string, CategoricalAttr> categorical_attrs = {});

  std::size_t size() const noexcept { return adj_.size(); }
  const std::vector<NodeId>& neighbors(NodeId i) const;
  long degree(NodeId i) const;
  long tie_count() const noexcept { return ties_; }
  double mean_degree() const noexcept;

  const std::vector<double>& ages() const noexcept { return ages_; }
  const std::vector<std::int8_t>& infection() const noexcept { return z_; }

  double true_prevalence() const;

  // Tie counts of node i into the groups of a categorical attribute ("z" or
  // an extra categorical column).
  GroupDegrees group_degrees(NodeId i, const std::string& attr) const;

  // (t01, t10): ties counted from uninfected to infected endpoints and the
  // reverse, each over ordered pairs. Computed independently; symmetry of the
  // tie relation makes them equal.
  std::pair<long, long> cross_group_ties() const;

  bool has_attr(const std::string& name) const;
  // Value of "age", "z", or an extra column as a double; categorical columns
  // yield the level code.
  double node_value(NodeId i, const std::string& name) const;

  const std::map<std::string, std::vector<double>>& numeric_attrs() const noexcept { return numeric_attrs_; }
  const std::map<std::string, CategoricalAttr>& categorical_attrs() const noexcept { return categorical_attrs_; }

  bool has_tie(NodeId i, NodeId j) const;
  std::vector<NodeId> isolated_nodes() const;
  bool is_connected() const;

  // Dense 0/1 adjacency for small-network test oracles only.
  std::vector<std::vector<std::int8_t>> dense_adjacency() const;

private:
  Population() = default;
  void check_node(NodeId i) const;

  std::vector<std::vector<NodeId>> adj_;
  std::vector<double> ages_;
  std::vector<std::int8_t> z_;
  std::map<std::string, std::vector<double>> numeric_attrs_;
  std::map<std::string, CategoricalAttr> categorical_attrs_;
  long ties_ = 0;
};

}  // namespace rdsmdr
