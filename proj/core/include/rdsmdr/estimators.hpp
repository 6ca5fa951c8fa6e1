#pragma once

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rdsmdr/inference.hpp"
#include "rdsmdr/sampler.hpp"

namespace rdsmdr {

/**
 * Outcome of a prevalence estimator. Estimators on degenerate samples do not
 * throw: a sample whose members all share one infection status pins the
 * estimate to that status (degenerate_limit), and a sample with no usable
 * cross-group information yields no value at all (undefined). Resampling
 * procedures drop undefined replicates and report the drop count.
 */
enum class EstimateStatus { ok, degenerate_limit, undefined };

struct EstimateValue {
  std::optional<double> value;
  EstimateStatus status = EstimateStatus::ok;
  std::string note;

  bool defined() const { return value.has_value(); }

  static EstimateValue of(double v) { return {v, EstimateStatus::ok, {}}; }
  static EstimateValue degenerate(double v, std::string note) {
    return {v, EstimateStatus::degenerate_limit, std::move(note)};
  }
  static EstimateValue none(std::string note) {
    return {std::nullopt, EstimateStatus::undefined, std::move(note)};
  }
};

// Per-member inclusion weights, stored in the log domain because model-based
// weights are products of exponentials. Only ratios of weights ever matter,
// so every consumer is invariant to a constant shift of log_w.
enum class WeightSource { degree, dr_stationary, mdr_stationary };

struct Weights {
  std::vector<double> log_w;
  WeightSource source = WeightSource::degree;
};

// Reported degrees as weights; errors unless every degree is positive.
Weights degree_weights(const RDSSample& sample);

// One-attribute stationary weights: phi^{u_i} (phi d1_i + d0_i), where d1/d0
// count the member's reported alters by the attribute. Errors when a member
// has no reported alters or a non-0/1 attribute value.
Weights dr_weights(const RDSSample& sample, const std::string& attr, double phi);

// Model-based stationary weights: sum over reported alters of
// exp(x' beta + r' alpha). Errors when a member has no reported alters.
Weights mdr_weights(const RDSSample& sample, const MDRModel& model);

/**
 * Covariate rows cached per member so the model-based weights can be
 * recomputed cheaply under many coefficient vectors, as resampled refits
 * require. The covariate list must put node covariates first.
 */
class MdrWeightCache {
 public:
  static MdrWeightCache from(const RDSSample& sample,
                             const std::vector<CovariateSpec>& covariates);
  Weights weights(std::span<const double> beta) const;

 private:
  int k_ = 0;
  int k1_ = 0;
  std::vector<double> node_x_;   // per member: node-covariate row
  std::vector<double> alter_x_;  // per reported alter: full covariate row
  std::vector<int> begin_;       // member -> alter row offsets, size n + 1
};

/**
 * Per-member facts every estimator consumes, extracted once per sample.
 * alters_z0/alters_z1 count reported alters by infection status and are NaN
 * for members whose alter reports lack it; estimators that need the counts
 * reject such members, the others ignore the columns.
 */
struct SampleStats {
  std::vector<int> z;
  std::vector<double> degree;
  std::vector<double> alters_z0;
  std::vector<double> alters_z1;
  std::vector<std::pair<int, int>> events;  // (recruiter row, recruit row)

  static SampleStats from(const RDSSample& sample);
  int size() const { return static_cast<int>(z.size()); }
};

/**
 * Multiplicity view used by resampling: mult[i] is how many times member i
 * occurs in the replicate (empty span: the original sample, all ones).
 * z_events optionally replaces the sample's own recruitment transitions with
 * synthetic (recruiter z, recruit z) pairs, which chain-style resamplers
 * generate instead of member links.
 */
struct EstimatorView {
  std::span<const double> mult = {};
  std::span<const std::pair<int, int>> z_events = {};
};

// Ratio estimator sum(v_i m_i / w_i) / sum(m_i / w_i); invariant to scaling
// the weights.
EstimateValue hajek_core(std::span<const double> values, const Weights& weights,
                         std::span<const double> mult = {});

// Group mixing summary: c01/c10 are cross-group tie (or recruitment)
// proportions, d0/d1 weighted group mean degrees.
enum class MixingMethod { sh, ego, ego_dr, ego_mdr };

struct MixingStats {
  double c01 = 0.0, c10 = 0.0;
  double d0 = 0.0, d1 = 0.0;
  MixingMethod method = MixingMethod::ego;
};

// Weighted tie-share mixing from alter reports; errors when either group is
// absent from the (multiplicity-weighted) sample.
MixingStats mixing_stats(const SampleStats& stats, const Weights& weights, MixingMethod label,
                         std::span<const double> mult = {});

// Core estimator forms shared by the sample-level wrappers and the
// resampling procedures.
EstimateValue vh_core(const SampleStats& stats, const Weights& degree_w,
                      const EstimatorView& view = {});
EstimateValue sh_core(const SampleStats& stats, const EstimatorView& view = {});
EstimateValue ego_core(const SampleStats& stats, const Weights& weights,
                       const EstimatorView& view = {});
EstimateValue result2_core(const SampleStats& stats, const Weights& weights,
                           std::span<const double> mult = {});

// The seven prevalence estimators. Estimates lie in [0,1] whenever defined.
EstimateValue hajek(const RDSSample& sample, std::span<const double> values,
                    const Weights& weights);
EstimateValue vh(const RDSSample& sample);
EstimateValue sh(const RDSSample& sample);
EstimateValue lu(const RDSSample& sample);
EstimateValue dr_ii(const RDSSample& sample, const FitResult& fit, const std::string& attr);
EstimateValue dr_ego(const RDSSample& sample, const FitResult& fit, const std::string& attr);
EstimateValue mdr_ii(const RDSSample& sample, const FitResult& fit,
                     const std::vector<CovariateSpec>& covariates);
EstimateValue mdr_ego(const RDSSample& sample, const FitResult& fit,
                      const std::vector<CovariateSpec>& covariates);

/**
 * Scaling constant c linking the two weight-sharing estimator families:
 * c = [sum z_i d_{i0}/w_i] / [sum (1-z_i) d_{i1}/w_i], where d_{ik} counts
 * alters with status k. For any weights, ego = ii / (ii + (1 - ii) c).
 */
EstimateValue result2_constant(const RDSSample& sample, const Weights& weights);

}  // namespace rdsmdr
