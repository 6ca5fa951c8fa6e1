#include <doctest.h>

#include <cmath>
#include <set>
#include <vector>

#include <rdsmdr/bootstrap.hpp>
#include <rdsmdr/inference.hpp>
#include <rdsmdr/math.hpp>

#include "oracles.hpp"

using namespace rdsmdr;

namespace {

// Perfect binary recruitment forest: `seeds` wave-0 members, then children
// row by row until n members, so parents fill their two coupons in order.
RDSSample binary_forest(int n, int seeds, int coupons = 2) {
  RDSSample s;
  s.coupons = coupons;
  for (int r = 0; r < n; ++r) {
    const int recruiter = r < seeds ? -1 : (r - seeds) / coupons;
    const int wave = recruiter < 0 ? 0 : s.members[static_cast<std::size_t>(recruiter)].wave + 1;
    std::vector<AttrValues> alters{{{"z", 1.0}}, {{"z", 0.0}}, {{"z", static_cast<double>(r % 2)}}};
    s.members.push_back(oracle::member(recruiter, wave, 3, r % 2, {}, std::move(alters)));
  }
  s.validate();
  return s;
}

EstimateValue half(const Replicate&) { return EstimateValue::of(0.5); }

}  // namespace

TEST_SUITE("bootstrap") {
  TEST_CASE("recruiter-status chain resamples to the sample size") {
    const auto s = binary_forest(30, 2);
    int seen = 0;
    const auto out = salganik_bootstrap(s, 50, RngStream(1), [&](const Replicate& rep) {
      ++seen;
      CHECK(rep.n_b == s.size());
      CHECK(static_cast<int>(rep.z_events.size()) == s.size() - 1);
      double total = 0.0;
      for (double m : rep.mult) total += m;
      CHECK(total == doctest::Approx(static_cast<double>(s.size())));
      return half(rep);
    });
    CHECK(seen == 50);
    CHECK(out.size() == 50);
  }

  TEST_CASE("a strictly alternating chain crosses on every draw") {
    // Seed 0 recruits 1, 1 recruits 2, 2 recruits 3 with statuses 0,1,0,1:
    // both recruiter classes hold only opposite-status members, so every
    // resampled transition crosses.
    RDSSample s;
    s.coupons = 1;
    for (int r = 0; r < 4; ++r)
      s.members.push_back(oracle::member(r - 1, r, 2, r % 2, {},
                                         {{{"z", 0.0}}, {{"z", 1.0}}}));
    (void)salganik_bootstrap(s, 40, RngStream(2), [&](const Replicate& rep) {
      for (const auto& [zf, zt] : rep.z_events) CHECK(zf != zt);
      return half(rep);
    });
  }

  TEST_CASE("an unreachable recruiter class exhausts the restart budget") {
    // The only recruiter is infected, so the uninfected class is empty yet
    // every replicate needs it.
    RDSSample s;
    s.coupons = 2;
    s.members.push_back(oracle::member(-1, 0, 2, 1, {}, {{{"z", 0.0}}, {{"z", 0.0}}}));
    s.members.push_back(oracle::member(0, 1, 2, 0, {}, {{{"z", 1.0}}}));
    s.members.push_back(oracle::member(0, 1, 2, 0, {}, {{{"z", 1.0}}}));
    int restarts = 0;
    CHECK(oracle::throws_kind(ErrorKind::numeric, [&] {
      (void)salganik_bootstrap(s, 100, RngStream(3), half, &restarts);
    }));
  }

  TEST_CASE("chains that never need an empty class never restart") {
    const auto s = binary_forest(30, 2);
    int restarts = -1;
    (void)salganik_bootstrap(s, 60, RngStream(4), half, &restarts);
    CHECK(restarts == 0);
  }

  TEST_CASE("group-chain replicates draw members inside the target group") {
    const auto unit = oracle::simulate_unit(RngStream(5), 120, 200, 60, 4, 2);
    const auto stats = SampleStats::from(unit.sample);
    (void)lu_bootstrap(unit.sample, 30, RngStream(6), [&](const Replicate& rep) {
      CHECK(rep.n_b == unit.sample.size());
      CHECK(rep.z_events.size() + 1 == static_cast<std::size_t>(rep.n_b));
      double total = 0.0;
      for (double m : rep.mult) total += m;
      CHECK(total == doctest::Approx(static_cast<double>(rep.n_b)));
      return half(rep);
    });
  }

  TEST_CASE("group-chain transition shares follow the alter mixing") {
    const auto unit = oracle::simulate_unit(RngStream(7), 150, 250, 80, 4, 2);
    const auto stats = SampleStats::from(unit.sample);
    const auto mix = mixing_stats(stats, degree_weights(unit.sample), MixingMethod::ego);

    double from0 = 0.0, cross0 = 0.0, from1 = 0.0, cross1 = 0.0;
    (void)lu_bootstrap(unit.sample, 400, RngStream(8), [&](const Replicate& rep) {
      for (const auto& [zf, zt] : rep.z_events) {
        if (zf == 0) {
          from0 += 1.0;
          cross0 += zt == 1 ? 1.0 : 0.0;
        } else {
          from1 += 1.0;
          cross1 += zt == 0 ? 1.0 : 0.0;
        }
      }
      return half(rep);
    });
    CHECK(cross0 / from0 == doctest::Approx(mix.c01).epsilon(0.08));
    CHECK(cross1 / from1 == doctest::Approx(mix.c10).epsilon(0.08));
  }

  TEST_CASE("group chains need both infection groups") {
    const auto s = binary_forest(12, 2);
    RDSSample flat = s;
    for (auto& m : flat.members) {
      m.z = 1;
      m.attrs["z"] = 1.0;
    }
    CHECK(oracle::throws_kind(ErrorKind::data, [&] {
      (void)lu_bootstrap(flat, 10, RngStream(9), half);
    }));
  }

  TEST_CASE("attribute-chain jumps follow the scaled tie counts") {
    // phi = 1 reduces the jump law to the reported tie shares.
    const auto unit = oracle::simulate_unit(RngStream(10), 150, 250, 80, 4, 2);

    double t[2][2] = {{0, 0}, {0, 0}};
    for (const auto& m : unit.sample.members)
      for (const auto& a : m.alters)
        t[m.z][static_cast<int>(a.at("z"))] += 1.0;

    double from0 = 0.0, cross0 = 0.0, from1 = 0.0, cross1 = 0.0;
    (void)dr_bootstrap(unit.sample, 1.0, "z", 400, RngStream(11), [&](const Replicate& rep) {
      for (const auto& [zf, zt] : rep.z_events) {
        if (zf == 0) {
          from0 += 1.0;
          cross0 += zt == 1 ? 1.0 : 0.0;
        } else {
          from1 += 1.0;
          cross1 += zt == 0 ? 1.0 : 0.0;
        }
      }
      return half(rep);
    });
    CHECK(cross0 / from0 == doctest::Approx(t[0][1] / (t[0][0] + t[0][1])).epsilon(0.08));
    CHECK(cross1 / from1 == doctest::Approx(t[1][0] / (t[1][0] + t[1][1])).epsilon(0.08));
  }

  TEST_CASE("cluster replicates carry whole recruiter trees") {
    const auto s = binary_forest(30, 2);
    (void)nb_bootstrap(s, 60, RngStream(12), [&](const Replicate& rep) {
      CHECK_FALSE(rep.clusters.empty());
      int total = 0;
      int children = 0;
      for (const auto& c : rep.clusters) {
        CHECK(s.members[static_cast<std::size_t>(c.head)].alters.size() == 3);
        // A plain cluster draw keeps every recruit of the drawn head.
        int kids = 0;
        for (const auto& m : s.members)
          if (m.recruiter == c.head) ++kids;
        CHECK(static_cast<int>(c.children.size()) == kids);
        total += 1 + static_cast<int>(c.children.size());
        children += static_cast<int>(c.children.size());
      }
      CHECK(total == rep.n_b);
      // Each kept child contributes its recruitment transition.
      CHECK(static_cast<int>(rep.z_events.size()) == children);
      double mass = 0.0;
      for (double m : rep.mult) mass += m;
      CHECK(mass == doctest::Approx(static_cast<double>(rep.n_b)));
      return half(rep);
    });
  }

  TEST_CASE("uniform full clusters pin the plain cluster size") {
    // Two seeds, each with exactly two recruits and nothing deeper: every
    // replicate draws 2 of the 2 recruiters and lands on 2 * 3 == 6 exactly.
    const auto s = binary_forest(6, 2);
    (void)nb_bootstrap(s, 40, RngStream(13), [&](const Replicate& rep) {
      CHECK(rep.n_b == 6);
      CHECK(rep.clusters.size() == 2);
      return half(rep);
    });
  }

  TEST_CASE("the mean plain-cluster size is recruiters plus recruits") {
    const auto unit = oracle::simulate_unit(RngStream(14), 150, 250, 80, 4, 2);
    int recruiters = 0;
    std::set<int> heads;
    for (const auto& m : unit.sample.members)
      if (m.recruiter >= 0) heads.insert(m.recruiter);
    recruiters = static_cast<int>(heads.size());
    const double expected = recruiters + unit.sample.recruit_count();

    double total = 0.0;
    const int B = 2000;
    (void)nb_bootstrap(unit.sample, B, RngStream(15), [&](const Replicate& rep) {
      total += rep.n_b;
      return half(rep);
    });
    CHECK(total / B == doctest::Approx(expected).epsilon(0.03));
  }

  TEST_CASE("fixed-size replicates hold the sample size exactly") {
    const auto unit = oracle::simulate_unit(RngStream(16), 150, 250, 80, 4, 2);
    auto rng = RngStream(17);
    for (int t = 0; t < 500; ++t) {
      const auto rep = nb_fixed_replicate(unit.sample, rng.child(static_cast<std::uint64_t>(t)));
      CHECK(rep.n_b == unit.sample.size());
      double mass = 0.0;
      for (double m : rep.mult) mass += m;
      CHECK(mass == doctest::Approx(static_cast<double>(rep.n_b)));
      for (const auto& c : rep.clusters) CHECK(c.children.size() >= 1);
    }
  }

  TEST_CASE("the fixed-size draw starts from the ceiling rule") {
    // 200 members, every recruiter filling both coupons: clusters are all
    // size 3, so the initial draw of ceil(200 / 3) == 67 clusters already
    // covers the target and exactly one recruit is shed.
    const auto s = binary_forest(200, 2);
    auto rng = RngStream(18);
    for (int t = 0; t < 300; ++t) {
      const auto rep = nb_fixed_replicate(s, rng.child(static_cast<std::uint64_t>(t)));
      CHECK(rep.n_b == 200);
      CHECK(rep.clusters.size() == 67);
      for (const auto& c : rep.clusters) CHECK(c.children.size() >= 1);
    }
  }

  TEST_CASE("event multiplicities mirror the kept recruits") {
    const auto s = binary_forest(30, 2);
    const auto data = build_choice_data(s, {CovariateSpec::recruit_attribute("z")});
    (void)nb_fixed_bootstrap(s, 30, RngStream(19), [&](const Replicate& rep) {
      REQUIRE(rep.event_mult.size() == static_cast<std::size_t>(data.n_events));
      double kept = 0.0;
      for (const auto& c : rep.clusters) kept += static_cast<double>(c.children.size());
      double weighted = 0.0;
      for (double w : rep.event_mult) weighted += w;
      CHECK(weighted == doctest::Approx(kept));
      return half(rep);
    });
  }

  TEST_CASE("normal interval of three replicates by hand") {
    const std::vector<double> reps{0.4, 0.5, 0.6};
    const auto ci = normal_ci(reps, 0.5, 0.05);
    CHECK(ci.se == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(normal_quantile(0.975) == doctest::Approx(1.959964).epsilon(1e-6 / 1.96));
    CHECK(ci.lo == doctest::Approx(0.304).epsilon(1e-3));
    CHECK(ci.hi == doctest::Approx(0.696).epsilon(1e-3));
    CHECK(ci.used == 3);
    CHECK(ci.dropped == 0);
    CHECK_FALSE(ci.clamped);
  }

  TEST_CASE("normal intervals drop undefined replicates and clamp to the unit interval") {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    const std::vector<double> reps{0.4, nan, 0.6, nan};
    const auto ci = normal_ci(reps, 0.5, 0.05);
    CHECK(ci.used == 2);
    CHECK(ci.dropped == 2);

    const std::vector<double> wide{0.01, 0.3, 0.6};
    const auto clamped = normal_ci(wide, 0.05, 0.05);
    CHECK(clamped.clamped);
    CHECK(clamped.lo == 0.0);

    const std::vector<double> lone{0.4, nan};
    CHECK(oracle::throws_kind(ErrorKind::numeric, [&] { (void)normal_ci(lone, 0.4, 0.05); }));
  }

  TEST_CASE("a constant-status sample has zero bootstrap variance") {
    auto s = binary_forest(16, 2);
    for (auto& m : s.members) {
      m.z = 1;
      m.attrs["z"] = 1.0;
    }
    EstimatorSpec spec;
    spec.kind = EstimatorKind::vh;
    BootstrapConfig config;
    config.replicates = 50;
    config.rng_seed = 20;
    const auto out = bootstrap_ci(s, spec, nullptr, config);
    CHECK(out.point.status == EstimateStatus::degenerate_limit);
    CHECK(out.point.value == doctest::Approx(1.0));
    CHECK(out.ci.se == doctest::Approx(0.0));
    CHECK(out.ci.lo == doctest::Approx(1.0));
    CHECK(out.ci.hi == doctest::Approx(1.0));
    for (double r : out.replicate_estimates) CHECK(r == doctest::Approx(1.0));
  }

  TEST_CASE("bootstrap intervals reproduce under a fixed seed") {
    const auto unit = oracle::simulate_unit(RngStream(21), 150, 250, 80, 4, 2);
    EstimatorSpec spec;
    spec.kind = EstimatorKind::vh;
    BootstrapConfig config;
    config.replicates = 80;
    config.rng_seed = 22;
    const auto a = bootstrap_ci(unit.sample, spec, nullptr, config);
    const auto b = bootstrap_ci(unit.sample, spec, nullptr, config);
    CHECK(a.replicate_estimates == b.replicate_estimates);
    CHECK(a.ci.lo == b.ci.lo);
    CHECK(a.ci.hi == b.ci.hi);

    config.rng_seed = 23;
    const auto c = bootstrap_ci(unit.sample, spec, nullptr, config);
    CHECK(a.replicate_estimates != c.replicate_estimates);
  }

  TEST_CASE("worker threads leave the replicate stream unchanged") {
    const auto unit = oracle::simulate_unit(RngStream(24), 150, 250, 80, 4, 2);
    const auto fit = fit_mdr(unit.sample, oracle::standard_covariates());
    EstimatorSpec spec;
    spec.kind = EstimatorKind::mdr_ego;
    spec.covariates = oracle::standard_covariates();
    BootstrapConfig config;
    config.method = BootstrapMethod::nb_fixed;
    config.replicates = 24;
    config.rng_seed = 25;
    config.threads = 1;
    const auto a = bootstrap_ci(unit.sample, spec, &fit, config);
    config.threads = 3;
    const auto b = bootstrap_ci(unit.sample, spec, &fit, config);
    CHECK(a.replicate_estimates == b.replicate_estimates);

    // Per-replicate refits actually move: the estimates are not all equal.
    const std::set<double> distinct(a.replicate_estimates.begin(), a.replicate_estimates.end());
    CHECK(distinct.size() > 1);
    CHECK(a.refit_failures == 0);
    CHECK(a.method == BootstrapMethod::nb_fixed);
    CHECK(a.B == 24);
  }

  TEST_CASE("model-based estimators demand their fit") {
    const auto unit = oracle::simulate_unit(RngStream(26), 100, 150, 40, 4, 2);
    EstimatorSpec spec;
    spec.kind = EstimatorKind::mdr_ego;
    spec.covariates = oracle::standard_covariates();
    BootstrapConfig config;
    config.replicates = 10;
    CHECK(oracle::throws_kind(ErrorKind::config, [&] {
      (void)bootstrap_ci(unit.sample, spec, nullptr, config);
    }));
  }

  TEST_CASE("names and default pairings") {
    CHECK(parse_estimator("vh") == EstimatorKind::vh);
    CHECK(parse_estimator("mdr-ego") == EstimatorKind::mdr_ego);
    CHECK_FALSE(parse_estimator("mean").has_value());
    for (const auto kind : {EstimatorKind::vh, EstimatorKind::sh, EstimatorKind::lu,
                            EstimatorKind::dr_ii, EstimatorKind::dr_ego, EstimatorKind::mdr_ii,
                            EstimatorKind::mdr_ego})
      CHECK(parse_estimator(estimator_name(kind)) == kind);

    CHECK(default_method(EstimatorKind::vh) == BootstrapMethod::salganik);
    CHECK(default_method(EstimatorKind::sh) == BootstrapMethod::salganik);
    CHECK(default_method(EstimatorKind::lu) == BootstrapMethod::lu);
    CHECK(default_method(EstimatorKind::dr_ii) == BootstrapMethod::dr);
    CHECK(default_method(EstimatorKind::dr_ego) == BootstrapMethod::dr);
    CHECK(default_method(EstimatorKind::mdr_ii) == BootstrapMethod::nb_fixed);
    CHECK(default_method(EstimatorKind::mdr_ego) == BootstrapMethod::nb_fixed);

    for (const auto m : {BootstrapMethod::salganik, BootstrapMethod::lu, BootstrapMethod::dr,
                         BootstrapMethod::nb, BootstrapMethod::nb_fixed})
      CHECK(parse_bootstrap_method(bootstrap_method_name(m)) == m);

    BootstrapConfig config;
    config.replicates = 1;
    CHECK(oracle::throws_kind(ErrorKind::config, [&] { config.validate(); }));
    config.replicates = 100;
    config.alpha = 0.0;
    CHECK(oracle::throws_kind(ErrorKind::config, [&] { config.validate(); }));
  }
}
