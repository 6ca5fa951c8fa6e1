#include "rdsmdr/sampler.hpp"

#include <algorithm>
#include <deque>
#include <random>
#include <string>

#include "rdsmdr/error.hpp"

namespace rdsmdr {

int RDSSample::recruit_count() const {
  int c = 0;
  for (const Member& m : members) c += m.recruiter >= 0;
  return c;
}

std::vector<int> RDSSample::seed_rows() const {
  std::vector<int> rows;
  for (int i = 0; i < size(); ++i)
    if (members[static_cast<std::size_t>(i)].recruiter < 0) rows.push_back(i);
  return rows;
}

void RDSSample::validate() const {
  if (coupons < 1) fail_data("sample records a coupon cap below 1");
  std::vector<int> recruits_of(members.size(), 0);
  for (std::size_t j = 0; j < members.size(); ++j) {
    const Member& m = members[j];
    if (m.recruiter < 0) {
      if (m.wave != 0) fail_data("seed at row " + std::to_string(j) + " has nonzero wave");
      continue;
    }
    if (m.recruiter >= static_cast<int>(j))
      fail_data("recruit at row " + std::to_string(j) + " precedes its recruiter");
    const Member& r = members[static_cast<std::size_t>(m.recruiter)];
    if (m.wave != r.wave + 1)
      fail_data("recruit at row " + std::to_string(j) + " skips a wave");
    if (++recruits_of[static_cast<std::size_t>(m.recruiter)] > coupons)
      fail_data("recruiter at row " + std::to_string(m.recruiter) + " exceeds the coupon cap");
  }
}

void SamplingDesign::validate() const {
  if (n_seeds < 1) fail_config("need at least one seed");
  if (coupons < 1) fail_config("need at least one coupon");
  if (n_target < n_seeds) fail_config("target size is below the seed count");
  if (seed_rule == SeedRule::fixed_list && static_cast<int>(fixed_seeds.size()) < n_seeds)
    fail_config("fixed seed list is shorter than the seed count");
}

namespace {

// One weighted draw over nodes with taken[i] == 0; weights are positive.
NodeId draw_weighted_free(const std::vector<double>& weight, const std::vector<char>& taken,
                          std::mt19937_64& eng) {
  double total = 0.0;
  for (std::size_t i = 0; i < weight.size(); ++i)
    if (!taken[i]) total += weight[i];
  if (total <= 0.0) fail_numeric("no eligible node left to draw");
  double u = std::uniform_real_distribution<double>(0.0, total)(eng);
  for (std::size_t i = 0; i < weight.size(); ++i) {
    if (taken[i]) continue;
    u -= weight[i];
    if (u <= 0.0) return static_cast<NodeId>(i);
  }
  for (std::size_t i = weight.size(); i-- > 0;)
    if (!taken[i]) return static_cast<NodeId>(i);
  fail_numeric("no eligible node left to draw");
}

Member make_member(const Population& pop, NodeId node, int recruiter, int wave) {
  Member m;
  m.node = node;
  m.recruiter = recruiter;
  m.wave = wave;
  m.reported_degree = static_cast<double>(pop.degree(node));
  m.z = pop.infection()[static_cast<std::size_t>(node)];

  auto fill = [&pop](AttrValues& out, NodeId v) {
    out["age"] = pop.ages()[static_cast<std::size_t>(v)];
    out["z"] = static_cast<double>(pop.infection()[static_cast<std::size_t>(v)]);
    for (const auto& [name, col] : pop.numeric_attrs()) out[name] = col[static_cast<std::size_t>(v)];
    for (const auto& [name, attr] : pop.categorical_attrs())
      out[name] = static_cast<double>(attr.codes[static_cast<std::size_t>(v)]);
  };
  fill(m.attrs, node);
  m.alters.reserve(pop.neighbors(node).size());
  for (NodeId j : pop.neighbors(node)) fill(m.alters.emplace_back(), j);
  return m;
}

}  // namespace

std::vector<NodeId> draw_seeds(const Population& pop, const MDRModel& model, int k,
                               RngStream rng) {
  if (k < 0 || k > pop.size())
    fail_config("seed count " + std::to_string(k) + " is outside [0, population size]");
  const StationaryResult st = stationary(pop, model);
  auto eng = rng.engine();
  std::vector<char> taken(static_cast<std::size_t>(pop.size()), 0);
  std::vector<NodeId> seeds;
  seeds.reserve(static_cast<std::size_t>(k));
  for (int s = 0; s < k; ++s) {
    const NodeId i = draw_weighted_free(st.weight, taken, eng);
    taken[static_cast<std::size_t>(i)] = 1;
    seeds.push_back(i);
  }
  return seeds;
}

RDSSample run_rds(const Population& pop, const MDRModel& model, const SamplingDesign& design,
                  RngStream rng) {
  design.validate();
  model.validate();
  if (design.n_target > pop.size()) fail_config("target size exceeds the population");

  auto eng = rng.engine();
  const StationaryResult st = stationary(pop, model);

  RDSSample sample;
  sample.coupons = design.coupons;
  sample.members.reserve(static_cast<std::size_t>(design.n_target));
  std::vector<char> sampled(static_cast<std::size_t>(pop.size()), 0);
  std::deque<int> queue;

  auto admit = [&](NodeId node, int recruiter, int wave) {
    sampled[static_cast<std::size_t>(node)] = 1;
    sample.members.push_back(make_member(pop, node, recruiter, wave));
    queue.push_back(sample.size() - 1);
  };

  switch (design.seed_rule) {
    case SeedRule::stationary:
      for (int s = 0; s < design.n_seeds; ++s)
        admit(draw_weighted_free(st.weight, sampled, eng), -1, 0);
      break;
    case SeedRule::uniform: {
      std::vector<NodeId> ids(static_cast<std::size_t>(pop.size()));
      for (NodeId i = 0; i < pop.size(); ++i) ids[static_cast<std::size_t>(i)] = i;
      for (int s = 0; s < design.n_seeds; ++s) {
        const auto r = std::uniform_int_distribution<std::size_t>(
            static_cast<std::size_t>(s), ids.size() - 1)(eng);
        std::swap(ids[static_cast<std::size_t>(s)], ids[r]);
        admit(ids[static_cast<std::size_t>(s)], -1, 0);
      }
      break;
    }
    case SeedRule::fixed_list:
      for (int s = 0; s < design.n_seeds; ++s) {
        const NodeId node = design.fixed_seeds[static_cast<std::size_t>(s)];
        if (node < 0 || node >= pop.size()) fail_config("fixed seed outside the population");
        if (sampled[static_cast<std::size_t>(node)]) fail_config("fixed seed listed twice");
        admit(node, -1, 0);
      }
      break;
  }

  while (sample.size() < design.n_target) {
    if (queue.empty()) {
      if (design.stall_rule == StallRule::abort)
        fail_numeric("every chain stalled at sample size " + std::to_string(sample.size()));
      admit(draw_weighted_free(st.weight, sampled, eng), -1, 0);
      continue;
    }
    const int row = queue.front();
    queue.pop_front();
    const NodeId recruiter = sample.members[static_cast<std::size_t>(row)].node;
    const int wave = sample.members[static_cast<std::size_t>(row)].wave;
    for (int c = 0; c < design.coupons && sample.size() < design.n_target; ++c) {
      const auto choices = transition_row(pop, model, recruiter, sampled);
      if (choices.empty()) break;
      double u = std::uniform_real_distribution<double>(0.0, 1.0)(eng);
      NodeId pick = choices.back().first;
      for (const auto& [node, p] : choices) {
        u -= p;
        if (u <= 0.0) {
          pick = node;
          break;
        }
      }
      admit(pick, row, wave + 1);
    }
  }
  return sample;
}

}  // namespace rdsmdr
