#include <cmath>
#include <vector>

#include "doctest.h"
#include "mephd/errors.hpp"
#include "mephd/montecarlo.hpp"
#include "mephd/rng.hpp"

using namespace mephd;

TEST_CASE("builtin scenarios") {
    auto a = builtin_scenario("example1a");
    CHECK(a.theta0 == 0.0);
    CHECK(a.sizes == std::vector<int>{25, 50, 75, 100});
    CHECK(a.reps == 1000);
    auto b2 = builtin_scenario("example2b");
    CHECK(b2.kind == Contamination::inlier_cut);
    CHECK(b2.sizes == std::vector<int>{50, 100, 150, 200});
    CHECK_THROWS_AS(builtin_scenario("example9z"), Error);
}

TEST_CASE("clean draws pass the CLT sanity check") {
    auto cfg = builtin_scenario("example1a");
    auto s = generate_sample(cfg, 1000000, 0);
    REQUIRE(s.n == 1000000);
    double mean = 0.0;
    for (int i = 0; i < s.n; ++i) mean += s.row(i)[0];
    mean /= s.n;
    CHECK(std::fabs(mean) <= 0.004);
}

TEST_CASE("point-mass contamination hits its frequency") {
    auto cfg = builtin_scenario("example2a");
    auto s = generate_sample(cfg, 1000000, 1);
    int hits = 0;
    for (int i = 0; i < s.n; ++i)
        if (s.row(i)[0] == 5.0) ++hits;
    const double frac = static_cast<double>(hits) / s.n;
    CHECK(frac >= 0.148);
    CHECK(frac <= 0.152);
}

TEST_CASE("inlier cut removes without replacement") {
    auto cfg = builtin_scenario("example2b");
    auto s = generate_sample(cfg, 20000, 2);
    CHECK(s.n < 20000); // cancelled observations shrink the sample
    for (int i = 0; i < s.n; ++i) {
        CHECK((s.row(i)[0] < 4.0 || s.row(i)[0] > 5.0));
    }
}

TEST_CASE("pmle solves the normal-link score") {
    SUBCASE("agrees with an independent bisection root") {
        auto cfg = builtin_scenario("example1b");
        auto s = generate_sample(cfg, 500, 7);
        const double theta = pmle_normal_link(s);
        // independent score evaluation + bisection
        auto score = [&](double th) {
            const double s2 = th * th + 1.0;
            double acc = 0.0;
            for (int i = 0; i < s.n; ++i) {
                const double x = s.row(i)[0];
                acc += (x - th) / s2 - th / s2 + th * (x - th) * (x - th) / (s2 * s2);
            }
            return acc;
        };
        double lo = theta - 0.5, hi = theta + 0.5;
        REQUIRE(score(lo) * score(hi) < 0.0);
        for (int k = 0; k < 200; ++k) {
            const double mid = 0.5 * (lo + hi);
            if (score(lo) * score(mid) <= 0.0) hi = mid;
            else lo = mid;
        }
        CHECK(theta == doctest::Approx(0.5 * (lo + hi)).epsilon(1e-8));
        CHECK(std::fabs(theta - 1.0) <= 3.0 * std::sqrt(0.0107 * 100.0 / s.n));
    }
    SUBCASE("sample mean comparator is exact") {
        auto s = sample_from_values({1.0, 2.0, 6.0});
        CHECK(sample_mean_estimate(s) == doctest::Approx(3.0));
    }
}

TEST_CASE("scenario runs are deterministic for any worker count") {
    ScenarioConfig cfg = builtin_scenario("example1b");
    cfg.reps = 8;
    cfg.sizes = {25};
    cfg.divergences = {"hellinger", "chi2"};
    auto r1 = run_scenario(cfg, 1);
    auto r2 = run_scenario(cfg, 2);
    auto r3 = run_scenario(cfg, 1);
    REQUIRE(r1.rows.size() == r2.rows.size());
    for (std::size_t i = 0; i < r1.rows.size(); ++i) {
        CHECK(r1.rows[i].estimator == r2.rows[i].estimator);
        CHECK(r1.rows[i].mean == r2.rows[i].mean); // bit identical
        CHECK(r1.rows[i].var == r2.rows[i].var);
        CHECK(r1.rows[i].mse == r2.rows[i].mse);
        CHECK(r1.rows[i].failures == r2.rows[i].failures);
        CHECK(r1.rows[i].mean == r3.rows[i].mean);
    }
}

TEST_CASE("seed changes draws but not the aggregate beyond noise") {
    ScenarioConfig a = builtin_scenario("example1b");
    a.reps = 150;
    a.sizes = {50};
    a.divergences = {"hellinger"};
    ScenarioConfig b = a;
    b.seed = a.seed + 1;

    auto sa = generate_sample(a, 50, 0);
    auto sb = generate_sample(b, 50, 0);
    bool same = true;
    for (int i = 0; i < 50 && same; ++i) same = sa.row(i)[0] == sb.row(i)[0];
    CHECK_FALSE(same);

    auto ra = run_scenario(a, 2);
    auto rb = run_scenario(b, 2);
    const auto& rowa = ra.rows[0];
    const auto& rowb = rb.rows[0];
    const double se = std::sqrt(rowa.var / a.reps + rowb.var / b.reps);
    CHECK(std::fabs(rowa.mean - rowb.mean) <= 3.0 * se);
}

TEST_CASE("failure accounting never aborts a scenario") {
    // tiny samples make the restricted-domain divergences fail regularly
    ScenarioConfig cfg = builtin_scenario("example1a");
    cfg.reps = 30;
    cfg.sizes = {5};
    cfg.divergences = {"klm"};
    auto rep = run_scenario(cfg, 1);
    REQUIRE(rep.rows.size() == 3); // klm, SME, PMLE
    CHECK(rep.rows[0].failures >= 0);
    CHECK(rep.rows[1].failures == 0); // the sample mean never fails
    const auto csv = report_csv(rep);
    CHECK(csv.find("klm mean") != std::string::npos);
}
