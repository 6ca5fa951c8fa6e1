#pragma once

#include <span>
#include <string>
#include <vector>

#include "rdsmdr/sampler.hpp"

namespace rdsmdr {

/**
 * Choice sets extracted from a sample, one event per non-seed recruit: the
 * covariate vector of the realized recruit plus the covariate rows of every
 * alter the recruiter reported. Built once and reused across likelihood
 * evaluations, refits, and resampled refits.
 *
 * Rows are flattened k-wide; alter rows of member m occupy row indices
 * [member_alter_begin[m], member_alter_begin[m + 1]).
 */
struct ChoiceData {
  int k = 0;
  int n_events = 0;
  std::vector<double> recruit_x;        // n_events rows
  std::vector<int> event_recruiter;     // member row of each event's recruiter
  std::vector<int> event_recruit;       // member row of each event's recruit
  std::vector<double> alter_x;          // one row per reported alter, all members
  std::vector<int> member_alter_begin;  // size() + 1 offsets
  std::vector<std::string> identifiability_warnings;
};

// Errors when a non-seed member's recruiter reports no alters, or when an
// attribute a covariate needs is missing.
ChoiceData build_choice_data(const RDSSample& sample,
                             const std::vector<CovariateSpec>& covariates);

/**
 * Conditional-choice log-likelihood: the sum over recruitment events of the
 * log-probability that the recruiter picked the realized recruit out of the
 * reported alter set under coefficient vector beta. Seeds contribute nothing.
 * event_weight, when non-empty, weights each event's term (used by resampled
 * refits); it must have n_events entries.
 */
double log_likelihood(const ChoiceData& data, std::span<const double> beta,
                      std::span<const double> event_weight = {});

// Score vector of the same objective; exactly 0 in any coordinate whose
// covariate never varies within a choice set.
std::vector<double> log_likelihood_gradient(const ChoiceData& data, std::span<const double> beta,
                                            std::span<const double> event_weight = {});

// Convenience forms that build the choice data on the fly.
double log_likelihood(const RDSSample& sample, const std::vector<CovariateSpec>& covariates,
                      std::span<const double> beta);
std::vector<double> log_likelihood_gradient(const RDSSample& sample,
                                            const std::vector<CovariateSpec>& covariates,
                                            std::span<const double> beta);

struct FitOptions {
  int max_iter = 500;
  double grad_tol = 1e-8;     // L-infinity of the score
  double rel_ll_tol = 1e-12;  // relative log-likelihood change
  std::vector<double> init;   // empty: start from the all-zeros null
  bool standardize = false;   // fit on scaled columns, report back-transformed
};

struct FitResult {
  std::vector<double> beta_hat;
  double log_lik = 0.0;
  bool converged = false;
  int iterations = 0;
  double gradient_norm = 0.0;  // L-infinity of the score at beta_hat
  std::vector<std::string> warnings;

  // Preference ratio exp(beta_hat[0]); valid only for one-coefficient fits.
  double phi() const;
};

/**
 * Maximize the choice log-likelihood by quasi-Newton ascent with analytic
 * score and backtracking line search, from beta = 0 unless options say
 * otherwise. Three consecutive line-search failures hand the point to a
 * derivative-free simplex polish. Convergence: score L-infinity below
 * grad_tol, or relative log-likelihood change below rel_ll_tol.
 */
FitResult fit_mdr(const ChoiceData& data, const FitOptions& options = {});
FitResult fit_mdr(const RDSSample& sample, const std::vector<CovariateSpec>& covariates,
                  const FitOptions& options = {});

// Weighted form: maximizes the event_weight-weighted log-likelihood, which
// resampling procedures use to refit on a replicate without rebuilding the
// choice data.
FitResult fit_mdr(const ChoiceData& data, std::span<const double> event_weight,
                  const FitOptions& options = {});

// One-covariate fit on a binary attribute, reported as the preference ratio
// phi = exp(beta). Errors unless the attribute is 0/1 on every member and
// every reported alter.
FitResult fit_dr(const RDSSample& sample, const std::string& attr,
                 const FitOptions& options = {});

}  // namespace rdsmdr
