#include "rdsmdr/inference.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "rdsmdr/error.hpp"
#include "rdsmdr/math.hpp"

namespace rdsmdr {

namespace {

double dot_row(const std::vector<double>& flat, int row, std::span<const double> beta) {
  const std::size_t base = static_cast<std::size_t>(row) * beta.size();
  double s = 0.0;
  for (std::size_t k = 0; k < beta.size(); ++k) s += flat[base + k] * beta[k];
  return s;
}

void check_eval_args(const ChoiceData& d, std::span<const double> beta,
                     std::span<const double> w) {
  if (static_cast<int>(beta.size()) != d.k)
    fail_config("coefficient vector has " + std::to_string(beta.size()) + " entries, expected " +
                std::to_string(d.k));
  if (!w.empty() && static_cast<int>(w.size()) != d.n_events)
    fail_config("event weights must cover every event");
}

}  // namespace

ChoiceData build_choice_data(const RDSSample& sample,
                             const std::vector<CovariateSpec>& covariates) {
  ChoiceData d;
  d.k = static_cast<int>(covariates.size());
  const std::size_t k = covariates.size();

  d.member_alter_begin.reserve(sample.members.size() + 1);
  d.member_alter_begin.push_back(0);
  for (const Member& m : sample.members) {
    const PersonRef ego(m.attrs);
    for (const AttrValues& alter : m.alters) {
      const PersonRef other(alter);
      for (const CovariateSpec& c : covariates) d.alter_x.push_back(eval_covariate(c, ego, other));
    }
    d.member_alter_begin.push_back(d.member_alter_begin.back() +
                                   static_cast<int>(m.alters.size()));
  }

  for (std::size_t j = 0; j < sample.members.size(); ++j) {
    const Member& m = sample.members[j];
    if (m.recruiter < 0) continue;
    const Member& rec = sample.members[static_cast<std::size_t>(m.recruiter)];
    if (rec.alters.empty())
      fail_data("recruiter at row " + std::to_string(m.recruiter) +
                " reports no alters, so the choice of recruit at row " + std::to_string(j) +
                " has no denominator");
    const PersonRef ego(rec.attrs), other(m.attrs);
    for (const CovariateSpec& c : covariates) d.recruit_x.push_back(eval_covariate(c, ego, other));
    d.event_recruiter.push_back(m.recruiter);
    d.event_recruit.push_back(static_cast<int>(j));
  }
  d.n_events = static_cast<int>(d.event_recruiter.size());

  // A coefficient is identified only if its covariate separates the realized
  // recruit from at least one alternative somewhere in the data.
  for (std::size_t c = 0; c < k; ++c) {
    bool varies = false;
    for (int e = 0; e < d.n_events && !varies; ++e) {
      const double ref = d.recruit_x[static_cast<std::size_t>(e) * k + c];
      const int m = d.event_recruiter[static_cast<std::size_t>(e)];
      const int begin = d.member_alter_begin[static_cast<std::size_t>(m)];
      const int end = d.member_alter_begin[static_cast<std::size_t>(m) + 1];
      for (int r = begin; r < end; ++r)
        if (d.alter_x[static_cast<std::size_t>(r) * k + c] != ref) {
          varies = true;
          break;
        }
    }
    if (!varies)
      d.identifiability_warnings.push_back("covariate '" + covariates[c].name +
                                           "' never varies within a choice set; its "
                                           "coefficient is not identified");
  }
  return d;
}

double log_likelihood(const ChoiceData& d, std::span<const double> beta,
                      std::span<const double> event_weight) {
  check_eval_args(d, beta, event_weight);
  KahanSum ll;
  std::vector<double> logits;
  for (int e = 0; e < d.n_events; ++e) {
    const int m = d.event_recruiter[static_cast<std::size_t>(e)];
    const int begin = d.member_alter_begin[static_cast<std::size_t>(m)];
    const int end = d.member_alter_begin[static_cast<std::size_t>(m) + 1];
    logits.clear();
    for (int r = begin; r < end; ++r) logits.push_back(dot_row(d.alter_x, r, beta));
    const double term = dot_row(d.recruit_x, e, beta) - log_sum_exp(logits);
    ll.add((event_weight.empty() ? 1.0 : event_weight[static_cast<std::size_t>(e)]) * term);
  }
  return ll.value();
}

std::vector<double> log_likelihood_gradient(const ChoiceData& d, std::span<const double> beta,
                                            std::span<const double> event_weight) {
  check_eval_args(d, beta, event_weight);
  const std::size_t k = static_cast<std::size_t>(d.k);
  std::vector<KahanSum> grad(k);
  std::vector<double> logits;
  for (int e = 0; e < d.n_events; ++e) {
    const int m = d.event_recruiter[static_cast<std::size_t>(e)];
    const int begin = d.member_alter_begin[static_cast<std::size_t>(m)];
    const int end = d.member_alter_begin[static_cast<std::size_t>(m) + 1];
    logits.clear();
    for (int r = begin; r < end; ++r) logits.push_back(dot_row(d.alter_x, r, beta));
    const double lse = log_sum_exp(logits);
    const double we = event_weight.empty() ? 1.0 : event_weight[static_cast<std::size_t>(e)];
    // Sum softmax-weighted differences so a covariate that is constant within
    // the choice set contributes an exact 0.
    for (int r = begin; r < end; ++r) {
      const double s = we * std::exp(logits[static_cast<std::size_t>(r - begin)] - lse);
      const std::size_t xe = static_cast<std::size_t>(e) * k;
      const std::size_t xr = static_cast<std::size_t>(r) * k;
      for (std::size_t c = 0; c < k; ++c) grad[c].add(s * (d.recruit_x[xe + c] - d.alter_x[xr + c]));
    }
  }
  std::vector<double> out(k);
  for (std::size_t c = 0; c < k; ++c) out[c] = grad[c].value();
  return out;
}

double log_likelihood(const RDSSample& sample, const std::vector<CovariateSpec>& covariates,
                      std::span<const double> beta) {
  return log_likelihood(build_choice_data(sample, covariates), beta);
}

std::vector<double> log_likelihood_gradient(const RDSSample& sample,
                                            const std::vector<CovariateSpec>& covariates,
                                            std::span<const double> beta) {
  return log_likelihood_gradient(build_choice_data(sample, covariates), beta);
}

double FitResult::phi() const {
  if (beta_hat.size() != 1)
    fail_config("preference ratio is defined only for one-coefficient fits");
  return std::exp(beta_hat[0]);
}

namespace {

double linf(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

// Derivative-free simplex descent used when the line search gives up.
// Returns true when the simplex collapsed to the tolerance.
bool nelder_mead(const std::function<double(std::span<const double>)>& f,
                 std::vector<double>& x, double& fx, int max_iter) {
  const std::size_t k = x.size();
  std::vector<std::vector<double>> pts(k + 1, x);
  std::vector<double> fv(k + 1);
  for (std::size_t i = 0; i < k; ++i) pts[i + 1][i] += 0.1 * std::max(1.0, std::abs(x[i]));
  for (std::size_t i = 0; i <= k; ++i) fv[i] = f(pts[i]);

  std::vector<std::size_t> order(k + 1);
  std::vector<double> centroid(k), cand(k);
  for (int it = 0; it < max_iter; ++it) {
    for (std::size_t i = 0; i <= k; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return fv[a] < fv[b]; });
    const std::size_t best = order[0], worst = order[k], second = order[k - 1];

    double spread = 0.0;
    for (std::size_t i = 0; i <= k; ++i) spread = std::max(spread, std::abs(fv[i] - fv[best]));
    if (spread <= 1e-13 * (1.0 + std::abs(fv[best]))) {
      x = pts[best];
      fx = fv[best];
      return true;
    }

    std::fill(centroid.begin(), centroid.end(), 0.0);
    for (std::size_t i = 0; i <= k; ++i) {
      if (i == worst) continue;
      for (std::size_t c = 0; c < k; ++c) centroid[c] += pts[i][c] / static_cast<double>(k);
    }

    auto blend = [&](double t) {
      for (std::size_t c = 0; c < k; ++c) cand[c] = centroid[c] + t * (pts[worst][c] - centroid[c]);
      return f(cand);
    };

    const double fr = blend(-1.0);
    if (fr < fv[best]) {
      const double fe = blend(-2.0);
      if (fe < fr) {
        pts[worst] = cand;
        fv[worst] = fe;
        continue;
      }
      for (std::size_t c = 0; c < k; ++c) cand[c] = centroid[c] - (pts[worst][c] - centroid[c]);
      pts[worst] = cand;
      fv[worst] = fr;
      continue;
    }
    if (fr < fv[second]) {
      for (std::size_t c = 0; c < k; ++c) cand[c] = centroid[c] - (pts[worst][c] - centroid[c]);
      pts[worst] = cand;
      fv[worst] = fr;
      continue;
    }
    const double fc = blend(fr < fv[worst] ? -0.5 : 0.5);
    if (fc < std::min(fr, fv[worst])) {
      pts[worst] = cand;
      fv[worst] = fc;
      continue;
    }
    for (std::size_t i = 0; i <= k; ++i) {
      if (i == best) continue;
      for (std::size_t c = 0; c < k; ++c) pts[i][c] = pts[best][c] + 0.5 * (pts[i][c] - pts[best][c]);
      fv[i] = f(pts[i]);
    }
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i <= k; ++i)
    if (fv[i] < fv[best]) best = i;
  x = pts[best];
  fx = fv[best];
  return false;
}

FitResult fit_core(const ChoiceData& d, std::span<const double> event_weight,
                   const FitOptions& opt) {
  if (d.n_events == 0) fail_data("no recruitment events to fit");
  const std::size_t k = static_cast<std::size_t>(d.k);

  std::vector<double> beta(k, 0.0);
  if (!opt.init.empty()) {
    if (opt.init.size() != k) fail_config("starting point has the wrong dimension");
    beta = opt.init;
  }

  // Minimize the negated log-likelihood.
  auto value = [&](std::span<const double> b) { return -log_likelihood(d, b, event_weight); };
  auto grad_at = [&](std::span<const double> b) {
    auto g = log_likelihood_gradient(d, b, event_weight);
    for (double& v : g) v = -v;
    return g;
  };

  double f = value(beta);
  if (!std::isfinite(f)) fail_numeric("log-likelihood is not finite at the starting point");
  std::vector<double> g = grad_at(beta);

  FitResult res;
  res.warnings = d.identifiability_warnings;

  // Inverse-curvature approximation, identity to start.
  std::vector<double> B(k * k, 0.0);
  auto reset_B = [&] {
    std::fill(B.begin(), B.end(), 0.0);
    for (std::size_t i = 0; i < k; ++i) B[i * k + i] = 1.0;
  };
  reset_B();

  std::vector<double> p(k), bnew(k), gnew(k), s(k), y(k), By(k);
  int ls_failures = 0;
  bool simplex_used = false, simplex_collapsed = false;

  int it = 0;
  for (; it < opt.max_iter; ++it) {
    if (linf(g) < opt.grad_tol) {
      res.converged = true;
      break;
    }

    for (std::size_t i = 0; i < k; ++i) {
      double v = 0.0;
      for (std::size_t j = 0; j < k; ++j) v += B[i * k + j] * g[j];
      p[i] = -v;
    }
    double gp = 0.0;
    for (std::size_t i = 0; i < k; ++i) gp += g[i] * p[i];
    if (gp >= 0.0) {
      reset_B();
      for (std::size_t i = 0; i < k; ++i) p[i] = -g[i];
      gp = 0.0;
      for (std::size_t i = 0; i < k; ++i) gp -= g[i] * g[i];
    }

    double t = 1.0, fnew = f;
    bool accepted = false;
    for (int h = 0; h < 60; ++h) {
      for (std::size_t i = 0; i < k; ++i) bnew[i] = beta[i] + t * p[i];
      fnew = value(bnew);
      if (std::isfinite(fnew) && fnew <= f + 1e-4 * t * gp) {
        accepted = true;
        break;
      }
      t *= 0.5;
    }

    if (!accepted) {
      if (++ls_failures >= 3) {
        simplex_used = true;
        simplex_collapsed = nelder_mead(
            [&](std::span<const double> b) { return value(b); }, beta, f, 500);
        g = grad_at(beta);
        break;
      }
      reset_B();
      continue;
    }
    ls_failures = 0;

    gnew = grad_at(bnew);
    const bool small_change = std::abs(fnew - f) <= opt.rel_ll_tol * std::max(1.0, std::abs(fnew));

    double sy = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      s[i] = t * p[i];
      y[i] = gnew[i] - g[i];
      sy += s[i] * y[i];
    }
    beta = bnew;
    f = fnew;
    g = gnew;
    if (small_change) {
      res.converged = true;
      ++it;
      break;
    }

    if (sy > 1e-12) {
      // B <- (I - s y'/sy) B (I - y s'/sy) + s s'/sy
      const double rho = 1.0 / sy;
      for (std::size_t i = 0; i < k; ++i) {
        double v = 0.0;
        for (std::size_t j = 0; j < k; ++j) v += B[i * k + j] * y[j];
        By[i] = v;
      }
      double yBy = 0.0;
      for (std::size_t i = 0; i < k; ++i) yBy += y[i] * By[i];
      for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j < k; ++j)
          B[i * k + j] += rho * ((1.0 + rho * yBy) * s[i] * s[j] - By[i] * s[j] - s[i] * By[j]);
    }
  }

  if (simplex_used) {
    res.warnings.push_back("line search stalled; finished with a simplex polish");
    res.converged = linf(g) < opt.grad_tol || simplex_collapsed;
  } else if (it == opt.max_iter) {
    res.converged = linf(g) < opt.grad_tol;
  }

  res.beta_hat = beta;
  res.log_lik = -f;
  res.iterations = it;
  res.gradient_norm = linf(g);
  return res;
}

// Column scales over every row the objective touches; zero-spread columns
// keep scale 1 so the transform is invertible.
void column_stats(const ChoiceData& d, std::vector<double>& mean, std::vector<double>& scale) {
  const std::size_t k = static_cast<std::size_t>(d.k);
  const std::size_t rows = d.alter_x.size() / std::max<std::size_t>(k, 1);
  const std::size_t erows = static_cast<std::size_t>(d.n_events);
  mean.assign(k, 0.0);
  scale.assign(k, 1.0);
  if (k == 0 || rows + erows == 0) return;
  for (std::size_t c = 0; c < k; ++c) {
    KahanSum sum;
    for (std::size_t r = 0; r < rows; ++r) sum.add(d.alter_x[r * k + c]);
    for (std::size_t e = 0; e < erows; ++e) sum.add(d.recruit_x[e * k + c]);
    mean[c] = sum.value() / static_cast<double>(rows + erows);
    KahanSum sq;
    for (std::size_t r = 0; r < rows; ++r) sq.add((d.alter_x[r * k + c] - mean[c]) * (d.alter_x[r * k + c] - mean[c]));
    for (std::size_t e = 0; e < erows; ++e) sq.add((d.recruit_x[e * k + c] - mean[c]) * (d.recruit_x[e * k + c] - mean[c]));
    const double sd = std::sqrt(sq.value() / static_cast<double>(rows + erows));
    if (sd > 0.0) scale[c] = sd;
  }
}

}  // namespace

FitResult fit_mdr(const ChoiceData& data, std::span<const double> event_weight,
                  const FitOptions& options) {
  if (!options.standardize) return fit_core(data, event_weight, options);

  std::vector<double> mean, scale;
  column_stats(data, mean, scale);
  const std::size_t k = static_cast<std::size_t>(data.k);

  ChoiceData scaled = data;
  for (std::size_t r = 0; r * k < scaled.alter_x.size(); ++r)
    for (std::size_t c = 0; c < k; ++c)
      scaled.alter_x[r * k + c] = (scaled.alter_x[r * k + c] - mean[c]) / scale[c];
  for (std::size_t e = 0; e < static_cast<std::size_t>(scaled.n_events); ++e)
    for (std::size_t c = 0; c < k; ++c)
      scaled.recruit_x[e * k + c] = (scaled.recruit_x[e * k + c] - mean[c]) / scale[c];

  FitOptions scaled_opt = options;
  if (!scaled_opt.init.empty())
    for (std::size_t c = 0; c < k; ++c) scaled_opt.init[c] *= scale[c];

  FitResult res = fit_core(scaled, event_weight, scaled_opt);
  for (std::size_t c = 0; c < k; ++c) res.beta_hat[c] /= scale[c];
  res.log_lik = log_likelihood(data, res.beta_hat, event_weight);
  res.gradient_norm = linf(log_likelihood_gradient(data, res.beta_hat, event_weight));
  return res;
}

FitResult fit_mdr(const ChoiceData& data, const FitOptions& options) {
  return fit_mdr(data, std::span<const double>{}, options);
}

FitResult fit_mdr(const RDSSample& sample, const std::vector<CovariateSpec>& covariates,
                  const FitOptions& options) {
  return fit_mdr(build_choice_data(sample, covariates), options);
}

FitResult fit_dr(const RDSSample& sample, const std::string& attr, const FitOptions& options) {
  auto binary = [&](double v) { return v == 0.0 || v == 1.0; };
  for (std::size_t j = 0; j < sample.members.size(); ++j) {
    const Member& m = sample.members[j];
    const PersonRef self(m.attrs);
    if (!binary(self.attr(attr)))
      fail_data("attribute '" + attr + "' is not 0/1 for the member at row " + std::to_string(j));
    for (const AttrValues& a : m.alters)
      if (!binary(PersonRef(a).attr(attr)))
        fail_data("attribute '" + attr + "' is not 0/1 in the alter report at row " +
                  std::to_string(j));
  }
  const std::vector<CovariateSpec> covs = {CovariateSpec::recruit_attribute(attr)};
  return fit_mdr(sample, covs, options);
}

}  // namespace rdsmdr
