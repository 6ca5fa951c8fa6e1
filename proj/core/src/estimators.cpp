#include "rdsmdr/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "rdsmdr/error.hpp"
#include "rdsmdr/math.hpp"

namespace rdsmdr {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// s_i = 1/w_i rescaled so the largest entry is 1; every consumer is a ratio,
// so the common factor drops out while the exponentials stay in range.
std::vector<double> inverse_weights(const Weights& w) {
  double lo = std::numeric_limits<double>::infinity();
  for (double lw : w.log_w) {
    if (!std::isfinite(lw)) fail_data("every member weight must be positive and finite");
    lo = std::min(lo, lw);
  }
  std::vector<double> s(w.log_w.size());
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = std::exp(lo - w.log_w[i]);
  return s;
}

double mult_at(std::span<const double> mult, std::size_t i) {
  return mult.empty() ? 1.0 : mult[i];
}

void check_mult(std::span<const double> mult, std::size_t n) {
  if (!mult.empty() && mult.size() != n)
    fail_config("multiplicity vector must cover every member");
}

void need_alter_counts(const SampleStats& stats, std::span<const double> mult) {
  for (std::size_t i = 0; i < stats.alters_z0.size(); ++i)
    if (mult_at(mult, i) > 0.0 && std::isnan(stats.alters_z0[i]))
      fail_data("member at row " + std::to_string(i) +
                " lacks alter infection reports, which this estimator needs");
}

}  // namespace

Weights degree_weights(const RDSSample& sample) {
  Weights w;
  w.source = WeightSource::degree;
  w.log_w.reserve(sample.members.size());
  for (std::size_t i = 0; i < sample.members.size(); ++i) {
    const double d = sample.members[i].reported_degree;
    if (!(d > 0.0))
      fail_data("member at row " + std::to_string(i) + " has nonpositive degree");
    w.log_w.push_back(std::log(d));
  }
  return w;
}

Weights dr_weights(const RDSSample& sample, const std::string& attr, double phi) {
  if (!(phi > 0.0)) fail_config("preference ratio must be positive");
  Weights w;
  w.source = WeightSource::dr_stationary;
  w.log_w.reserve(sample.members.size());
  for (std::size_t i = 0; i < sample.members.size(); ++i) {
    const Member& m = sample.members[i];
    const double u = PersonRef(m.attrs).attr(attr);
    if (u != 0.0 && u != 1.0)
      fail_data("attribute '" + attr + "' is not 0/1 for the member at row " + std::to_string(i));
    if (m.alters.empty())
      fail_data("member at row " + std::to_string(i) +
                " reports no alters; stationary weight undefined");
    double d0 = 0.0, d1 = 0.0;
    for (const AttrValues& a : m.alters) {
      const double v = PersonRef(a).attr(attr);
      if (v != 0.0 && v != 1.0)
        fail_data("attribute '" + attr + "' is not 0/1 in the alter report at row " +
                  std::to_string(i));
      (v == 1.0 ? d1 : d0) += 1.0;
    }
    w.log_w.push_back(u * std::log(phi) + std::log(phi * d1 + d0));
  }
  return w;
}

MdrWeightCache MdrWeightCache::from(const RDSSample& sample,
                                    const std::vector<CovariateSpec>& covariates) {
  MDRModel probe;
  probe.covariates = covariates;
  probe.beta.assign(covariates.size(), 0.0);
  probe.validate();

  MdrWeightCache c;
  c.k_ = static_cast<int>(covariates.size());
  c.k1_ = probe.k1();
  c.begin_.push_back(0);
  for (std::size_t i = 0; i < sample.members.size(); ++i) {
    const Member& m = sample.members[i];
    if (m.alters.empty())
      fail_data("member at row " + std::to_string(i) +
                " reports no alters; stationary weight undefined");
    const PersonRef self(m.attrs);
    for (int k = 0; k < c.k1_; ++k)
      c.node_x_.push_back(eval_covariate(covariates[static_cast<std::size_t>(k)], self, self));
    for (const AttrValues& a : m.alters) {
      const PersonRef other(a);
      for (const CovariateSpec& cov : covariates)
        c.alter_x_.push_back(eval_covariate(cov, self, other));
    }
    c.begin_.push_back(c.begin_.back() + static_cast<int>(m.alters.size()));
  }
  return c;
}

Weights MdrWeightCache::weights(std::span<const double> beta) const {
  if (static_cast<int>(beta.size()) != k_)
    fail_config("coefficient vector has the wrong dimension");
  const std::size_t n = begin_.size() - 1;
  Weights w;
  w.source = WeightSource::mdr_stationary;
  w.log_w.resize(n);
  std::vector<double> logits;
  for (std::size_t i = 0; i < n; ++i) {
    double nl = 0.0;
    for (int k = 0; k < k1_; ++k)
      nl += node_x_[i * static_cast<std::size_t>(k1_) + static_cast<std::size_t>(k)] *
            beta[static_cast<std::size_t>(k)];
    logits.clear();
    for (int r = begin_[i]; r < begin_[i + 1]; ++r) {
      double s = 0.0;
      for (int k = 0; k < k_; ++k)
        s += alter_x_[static_cast<std::size_t>(r) * static_cast<std::size_t>(k_) +
                      static_cast<std::size_t>(k)] *
             beta[static_cast<std::size_t>(k)];
      logits.push_back(s);
    }
    const double lw = nl + log_sum_exp(logits);
    if (std::isnan(lw)) fail_numeric("stationary weight is not a number");
    w.log_w[i] = lw;
  }
  return w;
}

Weights mdr_weights(const RDSSample& sample, const MDRModel& model) {
  model.validate();
  return MdrWeightCache::from(sample, model.covariates).weights(model.beta);
}

SampleStats SampleStats::from(const RDSSample& sample) {
  SampleStats s;
  const std::size_t n = sample.members.size();
  s.z.reserve(n);
  s.degree.reserve(n);
  s.alters_z0.reserve(n);
  s.alters_z1.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Member& m = sample.members[i];
    if (m.z != 0 && m.z != 1)
      fail_data("infection status is not 0/1 for the member at row " + std::to_string(i));
    s.z.push_back(m.z);
    s.degree.push_back(m.reported_degree);
    double c0 = 0.0, c1 = 0.0;
    bool known = true;
    for (const AttrValues& a : m.alters) {
      const auto it = a.find("z");
      if (it == a.end()) {
        known = false;
        break;
      }
      if (it->second != 0.0 && it->second != 1.0)
        fail_data("alter infection status is not 0/1 at row " + std::to_string(i));
      (it->second == 1.0 ? c1 : c0) += 1.0;
    }
    s.alters_z0.push_back(known ? c0 : kNaN);
    s.alters_z1.push_back(known ? c1 : kNaN);
    if (m.recruiter >= 0) s.events.emplace_back(m.recruiter, static_cast<int>(i));
  }
  return s;
}

EstimateValue hajek_core(std::span<const double> values, const Weights& weights,
                         std::span<const double> mult) {
  const std::size_t n = weights.log_w.size();
  if (values.size() != n) fail_config("value vector must cover every member");
  check_mult(mult, n);
  const std::vector<double> s = inverse_weights(weights);
  KahanSum num, den;
  for (std::size_t i = 0; i < n; ++i) {
    const double m = mult_at(mult, i);
    num.add(m * values[i] * s[i]);
    den.add(m * s[i]);
  }
  if (den.value() <= 0.0) return EstimateValue::none("replicate selects no members");
  return EstimateValue::of(num.value() / den.value());
}

MixingStats mixing_stats(const SampleStats& stats, const Weights& weights, MixingMethod label,
                         std::span<const double> mult) {
  const std::size_t n = stats.z.size();
  if (weights.log_w.size() != n) fail_config("weights must cover every member");
  check_mult(mult, n);
  need_alter_counts(stats, mult);
  const std::vector<double> s = inverse_weights(weights);

  // Per group: total mass, cross alters, total alters, degree mass.
  KahanSum mass[2], cross[2], ties[2], deg[2];
  for (std::size_t i = 0; i < n; ++i) {
    const double m = mult_at(mult, i);
    if (m <= 0.0) continue;
    const int g = stats.z[i];
    mass[g].add(m * s[i]);
    cross[g].add(m * s[i] * (g == 0 ? stats.alters_z1[i] : stats.alters_z0[i]));
    ties[g].add(m * s[i] * (stats.alters_z0[i] + stats.alters_z1[i]));
    deg[g].add(m * s[i] * stats.degree[i]);
  }
  if (mass[0].value() <= 0.0) fail_data("no uninfected members sampled; mixing undefined");
  if (mass[1].value() <= 0.0) fail_data("no infected members sampled; mixing undefined");
  if (ties[0].value() <= 0.0 || ties[1].value() <= 0.0)
    fail_data("a group reports no alters at all; mixing undefined");

  MixingStats out;
  out.method = label;
  out.c01 = cross[0].value() / ties[0].value();
  out.c10 = cross[1].value() / ties[1].value();
  out.d0 = deg[0].value() / mass[0].value();
  out.d1 = deg[1].value() / mass[1].value();
  return out;
}

EstimateValue vh_core(const SampleStats& stats, const Weights& degree_w,
                      const EstimatorView& view) {
  const std::size_t n = stats.z.size();
  check_mult(view.mult, n);
  double n0 = 0.0, n1 = 0.0;
  for (std::size_t i = 0; i < n; ++i) (stats.z[i] == 1 ? n1 : n0) += mult_at(view.mult, i);
  if (n0 + n1 <= 0.0) return EstimateValue::none("replicate selects no members");
  if (n1 <= 0.0) return EstimateValue::degenerate(0.0, "sample is entirely uninfected");
  if (n0 <= 0.0) return EstimateValue::degenerate(1.0, "sample is entirely infected");

  std::vector<double> values(stats.z.begin(), stats.z.end());
  return hajek_core(values, degree_w, view.mult);
}

EstimateValue sh_core(const SampleStats& stats, const EstimatorView& view) {
  const std::size_t n = stats.z.size();
  check_mult(view.mult, n);

  double n0 = 0.0, n1 = 0.0;
  for (std::size_t i = 0; i < n; ++i) (stats.z[i] == 1 ? n1 : n0) += mult_at(view.mult, i);
  if (n0 + n1 <= 0.0) return EstimateValue::none("replicate selects no members");
  if (n1 <= 0.0) return EstimateValue::degenerate(0.0, "sample is entirely uninfected");
  if (n0 <= 0.0) return EstimateValue::degenerate(1.0, "sample is entirely infected");

  if (!view.mult.empty() && view.z_events.empty())
    fail_config("member-resampled view needs explicit recruitment transitions");

  double from[2] = {0.0, 0.0}, crossed[2] = {0.0, 0.0};
  if (!view.z_events.empty()) {
    for (const auto& [zf, zt] : view.z_events) {
      from[zf] += 1.0;
      if (zt != zf) crossed[zf] += 1.0;
    }
  } else {
    for (const auto& [r, j] : stats.events) {
      const int zf = stats.z[static_cast<std::size_t>(r)];
      from[zf] += 1.0;
      if (stats.z[static_cast<std::size_t>(j)] != zf) crossed[zf] += 1.0;
    }
  }
  if (from[0] <= 0.0) return EstimateValue::none("no recruitments made by uninfected members");
  if (from[1] <= 0.0) return EstimateValue::none("no recruitments made by infected members");
  const double c01 = crossed[0] / from[0];
  const double c10 = crossed[1] / from[1];

  KahanSum inv0, inv1;
  for (std::size_t i = 0; i < n; ++i) {
    const double m = mult_at(view.mult, i);
    if (m <= 0.0) continue;
    if (!(stats.degree[i] > 0.0))
      fail_data("member at row " + std::to_string(i) + " has nonpositive degree");
    (stats.z[i] == 1 ? inv1 : inv0).add(m / stats.degree[i]);
  }
  const double d0 = n0 / inv0.value();
  const double d1 = n1 / inv1.value();

  const double den = c01 * d0 + c10 * d1;
  if (den <= 0.0) return EstimateValue::none("no cross-group recruitments observed");
  return EstimateValue::of(c01 * d0 / den);
}

EstimateValue ego_core(const SampleStats& stats, const Weights& weights,
                       const EstimatorView& view) {
  const std::size_t n = stats.z.size();
  if (weights.log_w.size() != n) fail_config("weights must cover every member");
  check_mult(view.mult, n);

  double n0 = 0.0, n1 = 0.0;
  for (std::size_t i = 0; i < n; ++i) (stats.z[i] == 1 ? n1 : n0) += mult_at(view.mult, i);
  if (n0 + n1 <= 0.0) return EstimateValue::none("replicate selects no members");
  if (n1 <= 0.0) return EstimateValue::degenerate(0.0, "sample is entirely uninfected");
  if (n0 <= 0.0) return EstimateValue::degenerate(1.0, "sample is entirely infected");

  need_alter_counts(stats, view.mult);
  const std::vector<double> s = inverse_weights(weights);

  KahanSum cross0, mass0, cross1, mass1;
  for (std::size_t i = 0; i < n; ++i) {
    const double m = mult_at(view.mult, i);
    if (m <= 0.0) continue;
    if (stats.z[i] == 0) {
      cross0.add(m * s[i] * stats.alters_z1[i]);
      mass0.add(m * s[i]);
    } else {
      cross1.add(m * s[i] * stats.alters_z0[i]);
      mass1.add(m * s[i]);
    }
  }
  const double a0 = cross0.value() / mass0.value();
  const double a1 = cross1.value() / mass1.value();
  if (a0 <= 0.0 && a1 <= 0.0) return EstimateValue::none("no cross-group alters reported");
  return EstimateValue::of(a0 / (a0 + a1));
}

EstimateValue result2_core(const SampleStats& stats, const Weights& weights,
                           std::span<const double> mult) {
  const std::size_t n = stats.z.size();
  if (weights.log_w.size() != n) fail_config("weights must cover every member");
  check_mult(mult, n);
  need_alter_counts(stats, mult);
  const std::vector<double> s = inverse_weights(weights);

  KahanSum num, den;
  for (std::size_t i = 0; i < n; ++i) {
    const double m = mult_at(mult, i);
    if (m <= 0.0) continue;
    if (stats.z[i] == 1)
      num.add(m * s[i] * stats.alters_z0[i]);
    else
      den.add(m * s[i] * stats.alters_z1[i]);
  }
  if (den.value() <= 0.0)
    return EstimateValue::none("no uninfected member reports an infected alter");
  return EstimateValue::of(num.value() / den.value());
}

EstimateValue hajek(const RDSSample& sample, std::span<const double> values,
                    const Weights& weights) {
  if (values.size() != sample.members.size())
    fail_config("value vector must cover every member");
  return hajek_core(values, weights);
}

EstimateValue vh(const RDSSample& sample) {
  return vh_core(SampleStats::from(sample), degree_weights(sample));
}

EstimateValue sh(const RDSSample& sample) { return sh_core(SampleStats::from(sample)); }

EstimateValue lu(const RDSSample& sample) {
  return ego_core(SampleStats::from(sample), degree_weights(sample));
}

EstimateValue dr_ii(const RDSSample& sample, const FitResult& fit, const std::string& attr) {
  return vh_core(SampleStats::from(sample), dr_weights(sample, attr, fit.phi()));
}

EstimateValue dr_ego(const RDSSample& sample, const FitResult& fit, const std::string& attr) {
  return ego_core(SampleStats::from(sample), dr_weights(sample, attr, fit.phi()));
}

namespace {

MDRModel fitted_model(const FitResult& fit, const std::vector<CovariateSpec>& covariates) {
  MDRModel m;
  m.covariates = covariates;
  m.beta = fit.beta_hat;
  m.validate();
  return m;
}

}  // namespace

EstimateValue mdr_ii(const RDSSample& sample, const FitResult& fit,
                     const std::vector<CovariateSpec>& covariates) {
  return vh_core(SampleStats::from(sample), mdr_weights(sample, fitted_model(fit, covariates)));
}

EstimateValue mdr_ego(const RDSSample& sample, const FitResult& fit,
                      const std::vector<CovariateSpec>& covariates) {
  return ego_core(SampleStats::from(sample), mdr_weights(sample, fitted_model(fit, covariates)));
}

EstimateValue result2_constant(const RDSSample& sample, const Weights& weights) {
  return result2_core(SampleStats::from(sample), weights);
}

}  // namespace rdsmdr
