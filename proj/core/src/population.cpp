#include "rdsmdr/population.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

namespace rdsmdr {

void Population::check_node(NodeId i) const {
  if (i < 0 || static_cast<std::size_t>(i) >= adj_.size())
    fail_data("node index " + std::to_string(i) + " out of range [0," + std::to_string(adj_.size()) + ")");
}

Population Population::build(std::vector<std::vector<NodeId>> adjacency, std::vector<double> ages,
                             std::vector<std::int8_t> infection,
                             std::map<std::string, std::vector<double>> numeric_attrs,
                             std::map<std::string, CategoricalAttr> categorical_attrs) {
  const std::size_t n = adjacency.size();
  if (ages.size() != n || infection.size() != n)
    fail_data("attribute column length does not match node count");
  for (std::size_t i = 0; i < n; ++i) {
    if (!(ages[i] > 0.0) || !std::isfinite(ages[i]))
      fail_data("age of node " + std::to_string(i) + " must be a positive real");
    if (infection[i] != 0 && infection[i] != 1)
      fail_data("infection status of node " + std::to_string(i) + " must be 0 or 1");
  }
  for (const auto& [name, col] : numeric_attrs)
    if (col.size() != n) fail_data("numeric attribute '" + name + "' has wrong length");
  for (const auto& [name, col] : categorical_attrs) {
    if (col.codes.size() != n) fail_data("categorical attribute '" + name + "' has wrong length");
    for (auto code : col.codes)
      if (code < 0 || static_cast<std::size_t>(code) >= col.levels.size())
        fail_data("categorical attribute '" + name + "' has a code outside its level table");
  }

  long directed = 0;
  for (std::size_t i = 0; i < n; ++i) {
    auto& row = adjacency[i];
    std::sort(row.begin(), row.end());
    if (std::adjacent_find(row.begin(), row.end()) != row.end())
      fail_data("duplicate tie in neighbor list of node " + std::to_string(i));
    for (NodeId j : row) {
      if (j < 0 || static_cast<std::size_t>(j) >= n) fail_data("tie endpoint out of range");
      if (j == static_cast<NodeId>(i)) fail_data("self-tie at node " + std::to_string(i));
    }
    directed += static_cast<long>(row.size());
  }
  // symmetry: every (i,j) must appear in both rows
  for (std::size_t i = 0; i < n; ++i)
    for (NodeId j : adjacency[i])
      if (!std::binary_search(adjacency[j].begin(), adjacency[j].end(), static_cast<NodeId>(i)))
        fail_data("asymmetric tie " + std::to_string(i) + "-" + std::to_string(j));

  Population p;
  p.adj_ = std::move(adjacency);
  p.ages_ = std::move(ages);
  p.z_ = std::move(infection);
  p.numeric_attrs_ = std::move(numeric_attrs);
  p.categorical_attrs_ = std::move(categorical_attrs);
  p.ties_ = directed / 2;
  return p;
}

Population Population::from_edges(std::size_t n, const std::vector<std::pair<NodeId, NodeId>>& edges,
                                  std::vector<double> ages, std::vector<std::int8_t> infection,
                                  std::map<std::string, std::vector<double>> numeric_attrs,
                                  std::map<std::string, CategoricalAttr> categorical_attrs) {
  std::vector<std::vector<NodeId>> adj(n);
  for (auto [a, b] : edges) {
    if (a < 0 || b < 0 || static_cast<std::size_t>(a) >= n || static_cast<std::size_t>(b) >= n)
      fail_data("edge endpoint out of range");
    if (a == b) fail_data("self-tie at node " + std::to_string(a));
    adj[a].push_back(b);
    adj[b].push_back(a);
  }
  return build(std::move(adj), std::move(ages), std::move(infection), std::move(numeric_attrs),
               std::move(categorical_attrs));
}

const std::vector<NodeId>& Population::neighbors(NodeId i) const {
  check_node(i);
  return adj_[i];
}

long Population::degree(NodeId i) const {
  check_node(i);
  return static_cast<long>(adj_[i].size());
}

double Population::mean_degree() const noexcept {
  if (adj_.empty()) return 0.0;
  return 2.0 * static_cast<double>(ties_) / static_cast<double>(adj_.size());
}

double Population::true_prevalence() const {
  if (z_.empty()) return 0.0;
  long s = 0;
  for (auto v : z_) s += v;
  return static_cast<double>(s) / static_cast<double>(z_.size());
}

GroupDegrees Population::group_degrees(NodeId i, const std::string& attr) const {
  check_node(i);
  GroupDegrees g;
  g.attr = attr;
  if (attr == "z") {
    g.counts.assign(2, 0);
    for (NodeId j : adj_[i]) ++g.counts[static_cast<std::size_t>(z_[j])];
    return g;
  }
  auto it = categorical_attrs_.find(attr);
  if (it == categorical_attrs_.end())
    fail_data("attribute '" + attr + "' is unknown or not categorical");
  g.counts.assign(it->second.levels.size(), 0);
  for (NodeId j : adj_[i]) ++g.counts[static_cast<std::size_t>(it->second.codes[j])];
  return g;
}

std::pair<long, long> Population::cross_group_ties() const {
  long t01 = 0, t10 = 0;
  for (std::size_t i = 0; i < adj_.size(); ++i) {
    if (z_[i] == 0) {
      for (NodeId j : adj_[i]) t01 += z_[j];
    } else {
      for (NodeId j : adj_[i]) t10 += 1 - z_[j];
    }
  }
  return {t01, t10};
}

bool Population::has_attr(const std::string& name) const {
  return name == "age" || name == "z" || numeric_attrs_.count(name) > 0 ||
         categorical_attrs_.count(name) > 0;
}

double Population::node_value(NodeId i, const std::string& name) const {
  check_node(i);
  if (name == "age") return ages_[i];
  if (name == "z") return static_cast<double>(z_[i]);
  if (auto it = numeric_attrs_.find(name); it != numeric_attrs_.end()) return it->second[i];
  if (auto it = categorical_attrs_.find(name); it != categorical_attrs_.end())
    return static_cast<double>(it->second.codes[i]);
  fail_data("unknown node attribute '" + name + "'");
}

bool Population::has_tie(NodeId i, NodeId j) const {
  check_node(i);
  check_node(j);
  return std::binary_search(adj_[i].begin(), adj_[i].end(), j);
}

std::vector<NodeId> Population::isolated_nodes() const {
  std::vector<NodeId> out;
  for (std::size_t i = 0; i < adj_.size(); ++i)
    if (adj_[i].empty()) out.push_back(static_cast<NodeId>(i));
  return out;
}

bool Population::is_connected() const {
  if (adj_.empty()) return true;
  std::vector<char> seen(adj_.size(), 0);
  std::deque<NodeId> queue{0};
  seen[0] = 1;
  std::size_t visited = 1;
  while (!queue.empty()) {
    const NodeId v = queue.front();
    queue.pop_front();
    for (NodeId w : adj_[v]) {
      if (!seen[w]) {
        seen[w] = 1;
        ++visited;
        queue.push_back(w);
      }
    }
  }
  return visited == adj_.size();
}

std::vector<std::vector<std::int8_t>> Population::dense_adjacency() const {
  if (adj_.size() > 200)
    fail_config("dense adjacency view is restricted to networks of at most 200 nodes");
  std::vector<std::vector<std::int8_t>> m(adj_.size(), std::vector<std::int8_t>(adj_.size(), 0));
  for (std::size_t i = 0; i < adj_.size(); ++i)
    for (NodeId j : adj_[i]) m[i][static_cast<std::size_t>(j)] = 1;
  return m;
}

}  // namespace rdsmdr
