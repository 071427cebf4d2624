#include "mephd/montecarlo.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <sstream>
#include <thread>

#include "mephd/divergence.hpp"
#include "mephd/errors.hpp"
#include "mephd/estimator.hpp"
#include "mephd/rng.hpp"

namespace mephd {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// PMLE score of N(theta, theta^2+1) and its derivative.
void pmle_score(const Sample& s, double theta, double& score, double& dscore) {
    const int n = s.n;
    const double s2 = theta * theta + 1.0;
    double a = 0.0, b = 0.0;
    for (int i = 0; i < n; ++i) {
        const double r = s.row(i)[0] - theta;
        a += r;
        b += r * r;
    }
    score = a / s2 - n * theta / s2 + theta * b / (s2 * s2);
    dscore = -2.0 * n / s2 + (2.0 * n * theta * theta - 4.0 * theta * a + b) / (s2 * s2) -
             4.0 * theta * theta * b / (s2 * s2 * s2);
}

} // namespace

ScenarioConfig builtin_scenario(const std::string& name) {
    ScenarioConfig c;
    c.name = name;
    if (name == "example1a") {
        c.theta0 = 0.0;
        c.sizes = {25, 50, 75, 100};
        return c;
    }
    if (name == "example1b") {
        c.theta0 = 1.0;
        c.sizes = {25, 50, 75, 100};
        return c;
    }
    if (name == "example2a") {
        c.theta0 = 2.0;
        c.sizes = {25, 50, 75, 100};
        c.kind = Contamination::point_mass;
        c.eps = 0.15;
        c.atom = 5.0;
        return c;
    }
    if (name == "example2b") {
        c.theta0 = 2.0;
        c.sizes = {50, 100, 150, 200};
        c.kind = Contamination::inlier_cut;
        c.cut_lo = 4.0;
        c.cut_hi = 5.0;
        return c;
    }
    throw Error("unknown scenario: " + name +
                " (expected example1a|example1b|example2a|example2b)");
}

Sample generate_sample(const ScenarioConfig& config, int n, int rep_index) {
    SplitMix64 rng(stream_seed(config.seed, static_cast<std::uint64_t>(n),
                               static_cast<std::uint64_t>(rep_index)));
    const double sd = std::sqrt(config.theta0 * config.theta0 + 1.0);
    std::vector<double> xs;
    xs.reserve(n);
    for (int i = 0; i < n; ++i) {
        // fixed consumption order keeps draws index-stable across scenarios
        const double u = rng.uniform();
        const double z = rng.normal();
        double x = config.theta0 + sd * z;
        switch (config.kind) {
            case Contamination::none:
                break;
            case Contamination::point_mass:
                if (u < config.eps) x = config.atom;
                break;
            case Contamination::inlier_cut:
                if (x >= config.cut_lo && x <= config.cut_hi) continue; // cancelled
                break;
        }
        xs.push_back(x);
    }
    return sample_from_values(std::move(xs));
}

double sample_mean_estimate(const Sample& sample) {
    double m = 0.0;
    for (int i = 0; i < sample.n; ++i) m += sample.row(i)[0];
    return m / sample.n;
}

double pmle_normal_link(const Sample& sample) {
    if (sample.n < 1) throw DomainError("pmle: empty sample");
    double theta = sample_mean_estimate(sample);
    double score, dscore;
    for (int it = 0; it < 100; ++it) {
        pmle_score(sample, theta, score, dscore);
        if (std::fabs(score) <= 1e-12 * sample.n) return theta;
        if (dscore >= -1e-300 && dscore <= 1e-300) break;
        const double next = theta - score / dscore;
        if (!std::isfinite(next) || std::fabs(next - theta) > 5.0) break;
        if (std::fabs(next - theta) <= 1e-12 * (1.0 + std::fabs(theta))) return next;
        theta = next;
    }
    // Bisection fallback on an expanding bracket around the sample mean.
    const double center = sample_mean_estimate(sample);
    double lo = center - 1.0, hi = center + 1.0;
    double flo, fhi, dummy;
    pmle_score(sample, lo, flo, dummy);
    pmle_score(sample, hi, fhi, dummy);
    for (int k = 0; k < 60 && flo * fhi > 0.0; ++k) {
        lo -= 0.5 * (hi - lo);
        hi += 0.5 * (hi - lo);
        pmle_score(sample, lo, flo, dummy);
        pmle_score(sample, hi, fhi, dummy);
    }
    if (flo * fhi > 0.0)
        throw NotConvergedError("pmle: no score sign change bracketed", 100,
                                std::fabs(flo));
    for (int k = 0; k < 200; ++k) {
        const double mid = 0.5 * (lo + hi);
        double fm;
        pmle_score(sample, mid, fm, dummy);
        if (flo * fm <= 0.0) {
            hi = mid;
            fhi = fm;
        } else {
            lo = mid;
            flo = fm;
        }
        if (hi - lo <= 1e-12 * (1.0 + std::fabs(mid))) return mid;
    }
    return 0.5 * (lo + hi);
}

ScenarioReport run_scenario(const ScenarioConfig& config, int jobs) {
    if (config.reps < 1) throw DomainError("reps must be >= 1");
    if (config.kind == Contamination::point_mass &&
        !(config.eps >= 0.0 && config.eps < 1.0))
        throw DomainError("contamination probability must lie in [0,1)");
    if (config.kind == Contamination::inlier_cut && !(config.cut_lo < config.cut_hi))
        throw DomainError("inlier cut interval must be nonempty");
    if (config.sizes.empty()) throw DomainError("at least one sample size is required");
    const MomentModel model = builtin_model("qinlawless");
    std::vector<Divergence> specs;
    specs.reserve(config.divergences.size());
    for (const auto& name : config.divergences) specs.push_back(divergence_by_name(name));

    std::vector<std::string> estimators = config.divergences;
    estimators.push_back("SME");
    estimators.push_back("PMLE");
    const int ne = static_cast<int>(estimators.size());

    ScenarioReport report;
    report.config = config;

    for (int n : config.sizes) {
        // results[rep * ne + e]; NaN marks a failed estimator for that rep
        std::vector<double> results(static_cast<std::size_t>(config.reps) * ne, kNaN);

        auto run_rep = [&](int rep) {
            const Sample s = generate_sample(config, n, rep);
            if (s.n < model.l + 2) return; // all estimators fail for this rep
            double* out = &results[static_cast<std::size_t>(rep) * ne];
            for (std::size_t k = 0; k < specs.size(); ++k) {
                try {
                    EstimationResult est = estimate(model, specs[k], s);
                    out[k] = est.theta_hat[0];
                } catch (const Error&) {
                    // leave NaN
                }
            }
            out[specs.size()] = sample_mean_estimate(s);
            try {
                out[specs.size() + 1] = pmle_normal_link(s);
            } catch (const Error&) {
            }
        };

        const int workers = std::max(1, jobs);
        if (workers == 1) {
            for (int rep = 0; rep < config.reps; ++rep) run_rep(rep);
        } else {
            std::vector<std::thread> pool;
            std::atomic<int> next{0};
            for (int w = 0; w < workers; ++w)
                pool.emplace_back([&]() {
                    for (;;) {
                        const int rep = next.fetch_add(1);
                        if (rep >= config.reps) return;
                        run_rep(rep);
                    }
                });
            for (auto& t : pool) t.join();
        }

        // Aggregation in fixed estimator-major order.
        for (int e = 0; e < ne; ++e) {
            EstimatorStats st;
            st.estimator = estimators[e];
            st.n = n;
            double s1 = 0.0, s2 = 0.0, se = 0.0;
            int cnt = 0;
            for (int rep = 0; rep < config.reps; ++rep) {
                const double v = results[static_cast<std::size_t>(rep) * ne + e];
                if (std::isnan(v)) continue;
                ++cnt;
                s1 += v;
                s2 += v * v;
                se += (v - config.theta0) * (v - config.theta0);
            }
            st.failures = config.reps - cnt;
            if (cnt > 0) {
                st.mean = s1 / cnt;
                st.mse = se / cnt;
                st.var = (cnt > 1) ? (s2 - s1 * s1 / cnt) / (cnt - 1) : 0.0;
            }
            report.rows.push_back(st);
        }
    }
    return report;
}

std::string report_csv(const ScenarioReport& report) {
    std::vector<std::string> estimators = report.config.divergences;
    estimators.push_back("SME");
    estimators.push_back("PMLE");
    std::ostringstream os;
    os.precision(6);
    os << "n";
    for (const auto& e : estimators) os << "," << e << " mean," << e << " var";
    os << "\n";
    for (int n : report.config.sizes) {
        os << n;
        for (const auto& e : estimators) {
            const EstimatorStats* found = nullptr;
            for (const auto& row : report.rows)
                if (row.n == n && row.estimator == e) found = &row;
            if (found) os << "," << found->mean << "," << found->var;
            else os << ",,";
        }
        os << "\n";
    }
    return os.str();
}

} // namespace mephd
