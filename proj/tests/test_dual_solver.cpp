#include <cmath>
#include <vector>

#include "doctest.h"
#include "mephd/divergence.hpp"
#include "mephd/dual_solver.hpp"
#include "mephd/errors.hpp"
#include "mephd/model.hpp"
#include "mephd/rng.hpp"

using namespace mephd;

namespace {

const std::vector<std::string> kDivNames = {"chi2m", "klm", "hellinger", "kl", "chi2"};

Sample normal_sample(int n, double mean, double sd, std::uint64_t seed) {
    SplitMix64 rng(seed);
    std::vector<double> v(n);
    for (auto& x : v) x = mean + sd * rng.normal();
    return sample_from_values(std::move(v));
}

// Small random t that keeps every t^T gbar_i well inside Im(phi'), far
// enough from finite boundaries that finite-difference probes stay accurate
// (the conjugate's higher derivatives blow up at the edges).
std::vector<double> random_feasible_t(const MomentModel& model, const Divergence& spec,
                                      const Sample& sample, const std::vector<double>& theta,
                                      SplitMix64& rng) {
    const int m = model.l + 1;
    double scale = 0.05;
    for (int attempt = 0; attempt < 400; ++attempt) {
        if (attempt > 0 && attempt % 40 == 0) scale *= 0.5;
        std::vector<double> t(m);
        for (auto& v : t) v = scale * (2.0 * rng.uniform() - 1.0);
        bool ok = true;
        for (int i = 0; i < sample.n && ok; ++i) {
            auto gb = gbar_eval(model, sample.row(i), theta);
            double u = 0.0;
            for (int j = 0; j < m; ++j) u += t[j] * gb[j];
            if (std::isfinite(spec.prime_hi)) ok = ok && u < spec.prime_hi - 0.1;
            if (std::isfinite(spec.prime_lo)) ok = ok && u > spec.prime_lo + 0.1;
            ok = ok && std::fabs(u) < 3.0;
        }
        if (ok) return t;
    }
    return std::vector<double>(m, 0.0);
}

} // namespace

TEST_CASE("dual objective at t = 0") {
    auto m = builtin_model("qinlawless");
    auto spec = divergence_by_name("hellinger");
    auto s = normal_sample(40, 1.0, std::sqrt(2.0), 11);
    std::vector<double> theta = {0.8};
    auto obj = dual_objective(m, spec, s, theta, {0.0, 0.0, 0.0});
    CHECK(obj.value == doctest::Approx(0.0));
    // gradient = e0 - P_n gbar = (0, -P_n g)
    double pg1 = 0.0, pg2 = 0.0;
    double g[2];
    for (int i = 0; i < s.n; ++i) {
        m.g(s.row(i), theta.data(), g);
        pg1 += g[0];
        pg2 += g[1];
    }
    pg1 /= s.n;
    pg2 /= s.n;
    CHECK(obj.gradient[0] == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(obj.gradient[1] == doctest::Approx(-pg1));
    CHECK(obj.gradient[2] == doctest::Approx(-pg2));
    // hessian = -P_n gbar gbar^T; spot-check the unit entry
    CHECK(obj.hessian(0, 0) == doctest::Approx(-1.0));
}

TEST_CASE("klm dual objective reduces to t0 + mean log(1 - t^T gbar)") {
    auto m = builtin_model("mean1");
    auto spec = divergence_by_name("klm");
    auto s = sample_from_values({-1.2, 0.3, 0.9, 2.0, -0.4});
    std::vector<double> theta = {0.2};
    std::vector<double> t = {0.05, -0.1};
    auto obj = dual_objective(m, spec, s, theta, t);
    double expect = t[0];
    double acc = 0.0;
    for (int i = 0; i < s.n; ++i) {
        const double u = t[0] + t[1] * (s.row(i)[0] - theta[0]);
        acc += std::log(1.0 - u);
    }
    expect += acc / s.n;
    CHECK(obj.value == doctest::Approx(expect).epsilon(1e-13));
}

TEST_CASE("dual objective hand value for chi2 on two points") {
    auto m = builtin_model("mean1");
    auto spec = divergence_by_name("chi2");
    auto s = sample_from_values({-1.0, 1.0});
    auto obj = dual_objective(m, spec, s, {0.0}, {0.0, 0.5});
    CHECK(obj.value == doctest::Approx(-0.125));
}

TEST_CASE("dual objective derivatives match finite differences") {
    auto m = builtin_model("qinlawless");
    auto s = normal_sample(25, 0.7, 1.3, 5150);
    std::vector<double> theta = {0.7};
    for (const auto& name : kDivNames) {
        auto spec = divergence_by_name(name);
        CAPTURE(name);
        SplitMix64 rng(1000 + name.size());
        for (int trial = 0; trial < 100; ++trial) {
            auto t = random_feasible_t(m, spec, s, theta, rng);
            auto obj = dual_objective(m, spec, s, theta, t);
            for (std::size_t j = 0; j < t.size(); ++j) {
                const double h = 1e-6;
                auto tp = t, tm = t;
                tp[j] += h;
                tm[j] -= h;
                const double vp = dual_objective(m, spec, s, theta, tp).value;
                const double vm = dual_objective(m, spec, s, theta, tm).value;
                const double fd = (vp - vm) / (2.0 * h);
                CHECK(std::fabs(fd - obj.gradient[j]) <=
                      1e-6 * (1.0 + std::fabs(obj.gradient[j])));
                auto gp = dual_objective(m, spec, s, theta, tp).gradient;
                auto gm = dual_objective(m, spec, s, theta, tm).gradient;
                for (std::size_t k = 0; k < t.size(); ++k) {
                    const double fdh = (gp[k] - gm[k]) / (2.0 * h);
                    CHECK(std::fabs(fdh - obj.hessian(j, k)) <=
                          1e-6 * (1.0 + std::fabs(obj.hessian(j, k))));
                }
            }
        }
    }
}

TEST_CASE("dual objective domain error") {
    auto m = builtin_model("mean1");
    auto spec = divergence_by_name("klm");
    auto s = sample_from_values({-1.0, 0.0, 1.0, 2.0});
    CHECK_THROWS_AS(dual_objective(m, spec, s, {0.0}, {0.0, 5.0}), DomainError);
}

TEST_CASE("solve_inner is immediate at the estimating-equation root") {
    auto m = builtin_model("mean1");
    auto s = sample_from_values({-0.5, 0.25, 1.0, 1.25});
    double mean = 0.0;
    for (int i = 0; i < s.n; ++i) mean += s.row(i)[0];
    mean /= s.n;
    for (const auto& name : kDivNames) {
        auto spec = divergence_by_name(name);
        auto sol = solve_inner(m, spec, s, {mean});
        CHECK(sol.converged);
        CHECK(sol.iterations == 0);
        CHECK(sol.value == doctest::Approx(0.0).epsilon(1e-12));
        for (double c : sol.c) CHECK(std::fabs(c) <= 1e-12);
        for (double w : sol.weights) CHECK(w == doctest::Approx(1.0 / s.n));
    }
}

TEST_CASE("converged solutions satisfy the constraints") {
    auto m = builtin_model("qinlawless");
    auto s = normal_sample(60, 1.0, std::sqrt(2.0), 99);
    for (const auto& name : kDivNames) {
        auto spec = divergence_by_name(name);
        CAPTURE(name);
        auto sol = solve_inner(m, spec, s, {1.1});
        REQUIRE(sol.converged);
        double wsum = 0.0, c1 = 0.0, c2 = 0.0;
        double g[2];
        const double th = 1.1;
        for (int i = 0; i < s.n; ++i) {
            wsum += sol.weights[i];
            m.g(s.row(i), &th, g);
            c1 += sol.weights[i] * g[0];
            c2 += sol.weights[i] * g[1];
        }
        CHECK(std::fabs(wsum - 1.0) <= 1e-8);
        CHECK(std::fabs(c1) <= 1e-8);
        CHECK(std::fabs(c2) <= 1e-8);
        CHECK(sol.value >= -1e-10);
        // multipliers keep every argument strictly inside Im(phi')
        for (int i = 0; i < s.n; ++i) {
            auto gb = gbar_eval(m, s.row(i), {1.1});
            double u = 0.0;
            for (int j = 0; j < 3; ++j) u += sol.c[j] * gb[j];
            CHECK(u > spec.prime_lo);
            CHECK(u < spec.prime_hi);
        }
    }
}

TEST_CASE("klm mass multiplier vanishes at the optimum") {
    auto m = builtin_model("qinlawless");
    auto spec = divergence_by_name("klm");
    SplitMix64 seeds(321);
    int done = 0;
    for (int k = 0; k < 40 && done < 20; ++k) {
        auto s = normal_sample(35, 0.5, std::sqrt(1.25), 7000 + k);
        auto sol = solve_inner(m, spec, s, {0.5});
        if (!sol.converged) continue;
        ++done;
        CHECK(std::fabs(sol.c[0]) <= 1e-10);
    }
    CHECK(done >= 15);
}

TEST_CASE("unbounded dual is classified as such") {
    auto m = builtin_model("mean1");
    auto spec = divergence_by_name("klm");
    auto s = sample_from_values({1.0, 2.0, 3.0});
    auto sol = solve_inner(m, spec, s, {5.0});
    CHECK_FALSE(sol.converged);
    CHECK(sol.status == SolveStatus::dual_unbounded);
}

TEST_CASE("feasibility probe tri-state on the mean model") {
    auto m = builtin_model("mean1");
    auto spec = divergence_by_name("klm");
    auto s = sample_from_values({1.0, 2.0, 3.0});
    CHECK(feasibility_probe(m, s, {2.0}, spec).status == Feasibility::interior);
    CHECK(feasibility_probe(m, s, {3.0}, spec).status == Feasibility::boundary);
    CHECK(feasibility_probe(m, s, {5.0}, spec).status == Feasibility::infeasible);
}

TEST_CASE("feasibility probe flags separated hulls for l = 2") {
    auto m = builtin_model("qinlawless");
    auto spec = divergence_by_name("klm");
    auto s = normal_sample(30, 1.0, std::sqrt(2.0), 2024);
    CHECK(feasibility_probe(m, s, {1.0}, spec).status == Feasibility::interior);
    // theta far out: x^2 - 2 theta^2 - 1 < 0 for every observation
    CHECK(feasibility_probe(m, s, {8.0}, spec).status == Feasibility::infeasible);
}

TEST_CASE("dual objective is concave along feasible segments") {
    auto m = builtin_model("qinlawless");
    auto s = normal_sample(20, 0.4, 1.1, 808);
    std::vector<double> theta = {0.4};
    for (const auto& name : kDivNames) {
        auto spec = divergence_by_name(name);
        SplitMix64 rng(17 + name.size());
        for (int k = 0; k < 50; ++k) {
            auto ta = random_feasible_t(m, spec, s, theta, rng);
            auto tb = random_feasible_t(m, spec, s, theta, rng);
            std::vector<double> mid(ta.size());
            for (std::size_t j = 0; j < ta.size(); ++j) mid[j] = 0.5 * (ta[j] + tb[j]);
            const double va = dual_objective(m, spec, s, theta, ta).value;
            const double vb = dual_objective(m, spec, s, theta, tb).value;
            const double vm = dual_objective(m, spec, s, theta, mid).value;
            CHECK(vm >= 0.5 * (va + vb) - 1e-12);
        }
    }
}

TEST_CASE("rescaling one constraint leaves value and weights invariant") {
    auto base = builtin_model("qinlawless");
    const double scale = 37.5;
    MomentModel scaled = base;
    scaled.g = [scale](const double* x, const double* th, double* out) {
        out[0] = x[0] - th[0];
        out[1] = scale * (x[0] * x[0] - 2.0 * th[0] * th[0] - 1.0);
    };
    scaled.g_jac = [scale](const double*, const double* th, double* out) {
        out[0] = -1.0;
        out[1] = scale * (-4.0 * th[0]);
    };
    auto s = normal_sample(45, 1.0, std::sqrt(2.0), 5005);
    for (const auto& name : kDivNames) {
        auto spec = divergence_by_name(name);
        CAPTURE(name);
        auto a = solve_inner(base, spec, s, {0.9});
        auto b = solve_inner(scaled, spec, s, {0.9});
        REQUIRE(a.converged);
        REQUIRE(b.converged);
        CHECK(std::fabs(a.value - b.value) <= 1e-8);
        for (int i = 0; i < s.n; ++i)
            CHECK(std::fabs(a.weights[i] - b.weights[i]) <= 1e-8);
        CHECK(b.c[2] == doctest::Approx(a.c[2] / scale).epsilon(1e-6));
    }
}
