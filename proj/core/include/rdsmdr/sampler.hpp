#pragma once

#include <vector>

#include "rdsmdr/recruitment.hpp"
#include "rdsmdr/rng.hpp"

namespace rdsmdr {

/**
 * One sampled participant. Simulated members carry the population node index;
 * members read from files have node == -1 and exist only through their
 * reported fields. `alters` is the member's ego report: the attributes of
 * each network alter, which for simulated members is the full true neighbor
 * list and for ingested data whatever the survey reconstructed.
 */
struct Member {
  NodeId node = -1;
  int recruiter = -1;  // row index of the recruiter, -1 for seeds
  int wave = 0;
  double reported_degree = 0.0;
  int z = 0;
  AttrValues attrs;
  std::vector<AttrValues> alters;
};

// A recruitment sample in recruitment order: recruiters precede their
// recruits, seeds open their trees at wave 0.
struct RDSSample {
  std::vector<Member> members;
  int coupons = 2;  // coupon cap c of the design that produced the sample

  int size() const { return static_cast<int>(members.size()); }
  int recruit_count() const;
  std::vector<int> seed_rows() const;

  // Structural invariants: recruiter rows precede recruit rows, waves
  // increment along each tree, nobody exceeds the coupon cap. Errors on the
  // first violation.
  void validate() const;
};

enum class SeedRule { stationary, uniform, fixed_list };

// What to do when every pending recruiter has run out of eligible neighbors
// before the sample is full.
enum class StallRule { replace_seed, abort };

struct SamplingDesign {
  int n_target = 200;
  int n_seeds = 7;
  int coupons = 2;
  SeedRule seed_rule = SeedRule::stationary;
  StallRule stall_rule = StallRule::replace_seed;
  std::vector<NodeId> fixed_seeds;  // consulted only when seed_rule == fixed_list

  void validate() const;
};

// k distinct seeds, drawn without replacement with probability proportional
// to the stationary weight of the recruitment chain.
std::vector<NodeId> draw_seeds(const Population& pop, const MDRModel& model, int k,
                               RngStream rng);

/**
 * Simulate one recruitment sample of exactly n_target members.
 *
 * Members are dequeued in arrival order; each attempts `coupons` recruitments
 * via the transition row restricted to still-unsampled neighbors, so the walk
 * is without replacement even though the model's transition law is not. When
 * the queue drains early, replace_seed draws a fresh wave-0 seed from the
 * stationary law over unsampled nodes; abort raises an error naming the size
 * reached.
 */
RDSSample run_rds(const Population& pop, const MDRModel& model, const SamplingDesign& design,
                  RngStream rng);

}  // namespace rdsmdr
