#include "mephd/inference.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <thread>

#include "mephd/errors.hpp"

namespace mephd {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Regularized lower incomplete gamma P(a, x): series expansion below the
// diagonal x < a+1, modified Lentz continued fraction above.
double gamma_p(double a, double x) {
    if (x < 0.0 || a <= 0.0) throw DomainError("gamma_p: bad arguments");
    if (x == 0.0) return 0.0;
    const double lg = std::lgamma(a);
    if (x < a + 1.0) {
        double ap = a;
        double sum = 1.0 / a;
        double del = sum;
        for (int i = 0; i < 1000; ++i) {
            ap += 1.0;
            del *= x / ap;
            sum += del;
            if (std::fabs(del) < std::fabs(sum) * 1e-16)
                return sum * std::exp(-x + a * std::log(x) - lg);
        }
        throw Error("gamma_p: series failed to converge");
    }
    // Lentz's algorithm for the continued fraction of Q(a, x).
    const double tiny = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i <= 1000; ++i) {
        const double an = -static_cast<double>(i) * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::fabs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::fabs(delta - 1.0) < 1e-16)
            return 1.0 - std::exp(-x + a * std::log(x) - lg) * h;
    }
    throw Error("gamma_p: continued fraction failed to converge");
}

double chi2_pdf(int df, double x) {
    const double a = 0.5 * df;
    if (x <= 0.0) return 0.0;
    return std::exp((a - 1.0) * std::log(x) - 0.5 * x - a * std::log(2.0) - std::lgamma(a));
}

double divergence_value_or_throw(const DualSolution& sol) {
    if (!sol.converged)
        throw NotConvergedError("inner solve failed: " + to_string(sol.status),
                                sol.iterations, sol.grad_norm);
    return sol.value;
}

// P_n m^2 - (P_n m)^2 with m(x) = c_0 - phi*(c^T gbar(x, theta)).
double h1_variance(const MomentModel& model, const Divergence& spec, const Sample& sample,
                   const std::vector<double>& theta, const std::vector<double>& c) {
    double s1 = 0.0, s2 = 0.0;
    std::vector<double> gb(model.l + 1);
    for (int i = 0; i < sample.n; ++i) {
        gbar_eval(model, sample.row(i), theta, gb.data());
        double u = 0.0;
        for (int j = 0; j <= model.l; ++j) u += c[j] * gb[j];
        const double mi = c[0] - conjugate_eval(spec, u).value;
        s1 += mi;
        s2 += mi * mi;
    }
    s1 /= sample.n;
    s2 /= sample.n;
    return s2 - s1 * s1;
}

TestReport make_report(double statistic, int df, double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("alpha must lie in (0,1)");
    TestReport r;
    r.statistic = statistic;
    r.df = df;
    r.alpha = alpha;
    r.p_value = 1.0 - chi2_cdf(df, statistic);
    r.critical_value = chi2_quantile(df, 1.0 - alpha);
    r.reject = statistic > r.critical_value;
    return r;
}

} // namespace

double chi2_cdf(int df, double x) {
    if (df < 1) throw DomainError("chi2_cdf: df must be >= 1");
    if (x < 0.0) throw DomainError("chi2_cdf: x must be nonnegative");
    if (x == 0.0) return 0.0;
    return gamma_p(0.5 * df, 0.5 * x);
}

double chi2_quantile(int df, double p) {
    if (df < 1) throw DomainError("chi2_quantile: df must be >= 1");
    if (!(p > 0.0 && p < 1.0)) throw DomainError("chi2_quantile: p must lie in (0,1)");
    // Wilson-Hilferty start, then Newton safeguarded by a bracket.
    double lo = 0.0, hi = std::max(4.0 * df, 10.0);
    while (chi2_cdf(df, hi) < p) {
        lo = hi;
        hi *= 2.0;
        if (hi > 1e12) throw Error("chi2_quantile: bracket expansion failed");
    }
    double x = df * std::pow(1.0 - 2.0 / (9.0 * df), 3.0);
    if (!(x > lo && x < hi)) x = 0.5 * (lo + hi);
    for (int it = 0; it < 200; ++it) {
        const double f = chi2_cdf(df, x) - p;
        if (f > 0.0) hi = x;
        else lo = x;
        const double dens = chi2_pdf(df, x);
        double next = (dens > 1e-300) ? x - f / dens : 0.5 * (lo + hi);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (std::fabs(next - x) <= 1e-10 * std::max(1.0, std::fabs(x))) return next;
        x = next;
    }
    return x;
}

TestReport fit_statistic_at_theta(const MomentModel& model, const Divergence& spec,
                                  const Sample& sample, const std::vector<double>& theta,
                                  double alpha, const SolverConfig& config) {
    DualSolution sol = solve_inner(model, spec, sample, theta, config);
    const double value = divergence_value_or_throw(sol);
    const double scale = 2.0 * sample.n / spec.phi_second_at_one;
    TestReport r = make_report(scale * value, model.l, alpha);
    r.h1_sigma2 = h1_variance(model, spec, sample, theta, sol.c);
    return r;
}

TestReport model_test(const MomentModel& model, const Divergence& spec,
                      const Sample& sample, double alpha, const SolverConfig& config) {
    if (model.l <= model.d)
        throw DegreesOfFreedomError("model test needs more constraints than parameters");
    EstimationResult est = estimate(model, spec, sample, config);
    const double scale = 2.0 * sample.n / spec.phi_second_at_one;
    TestReport r = make_report(scale * est.value, model.l - model.d, alpha);
    r.h1_sigma2 = h1_variance(model, spec, sample, est.theta_hat, est.c_hat);
    return r;
}

TestReport simple_test(const MomentModel& model, const Divergence& spec,
                       const Sample& sample, const std::vector<double>& theta1,
                       double alpha, const SolverConfig& config) {
    DualSolution at_theta1 = solve_inner(model, spec, sample, theta1, config);
    const double v1 = divergence_value_or_throw(at_theta1);
    EstimationResult est = estimate(model, spec, sample, config);
    double gap = v1 - est.value;
    if (gap < 0.0) gap = 0.0; // numerical negatives only, never below -1e-10
    const double scale = 2.0 * sample.n / spec.phi_second_at_one;
    TestReport r = make_report(scale * gap, model.d, alpha);
    r.h1_sigma2 = h1_variance(model, spec, sample, theta1, at_theta1.c);
    return r;
}

TestReport composite_test(const MomentModel& model, const Divergence& spec,
                          const Sample& sample, const CompositeHypothesis& hyp,
                          double alpha, const SolverConfig& config, bool raw_statistic) {
    const int d = model.d;
    const int dim_beta = static_cast<int>(hyp.beta_box.size());
    const int k = d - dim_beta; // number of restrictions
    if (d < 2 || k <= 0 || k >= d)
        throw DegreesOfFreedomError("composite test needs 0 < k < d restrictions");

    // Restricted model over beta: g(x, f(beta)) with chain-rule Jacobian.
    MomentModel restricted = model;
    restricted.d = dim_beta;
    restricted.theta_box = hyp.beta_box;
    auto f = hyp.f;
    auto fjac = hyp.f_jac;
    restricted.g = [f, &model, dim_beta](const double* x, const double* beta, double* out) {
        std::vector<double> theta = f(std::vector<double>(beta, beta + dim_beta));
        model.g(x, theta.data(), out);
    };
    restricted.g_jac = [f, fjac, &model, dim_beta](const double* x, const double* beta,
                                                   double* out) {
        const std::vector<double> bvec(beta, beta + dim_beta);
        const std::vector<double> theta = f(bvec);
        la::Mat jf(model.d, dim_beta);
        if (fjac) {
            jf = fjac(bvec);
        } else {
            for (int kk = 0; kk < dim_beta; ++kk) {
                const double h = 1e-6 * (1.0 + std::fabs(bvec[kk]));
                auto bp = bvec, bm = bvec;
                bp[kk] += h;
                bm[kk] -= h;
                const auto tp = f(bp), tm = f(bm);
                for (int a = 0; a < model.d; ++a)
                    jf(a, kk) = (tp[a] - tm[a]) / (2.0 * h);
            }
        }
        std::vector<double> jg(model.l * model.d);
        model.g_jac(x, theta.data(), jg.data());
        for (int a = 0; a < model.l; ++a)
            for (int kk = 0; kk < dim_beta; ++kk) {
                double acc = 0.0;
                for (int c = 0; c < model.d; ++c) acc += jg[a * model.d + c] * jf(c, kk);
                out[a * dim_beta + kk] = acc;
            }
    };

    EstimationResult rest = estimate(restricted, spec, sample, config);
    EstimationResult full = estimate(model, spec, sample, config);
    double gap = rest.value - full.value;
    if (gap < 0.0) gap = 0.0;
    const double scale =
        raw_statistic ? 1.0 : 2.0 * sample.n / spec.phi_second_at_one;
    TestReport r = make_report(scale * gap, d - k, alpha);
    const std::vector<double> theta_star = f(rest.theta_hat);
    r.h1_sigma2 = h1_variance(model, spec, sample, theta_star, rest.c_hat);
    return r;
}

ConfidenceRegion confidence_region(const MomentModel& model, const Divergence& spec,
                                   const Sample& sample, double level,
                                   const GridSpec& grid, const SolverConfig& config,
                                   int jobs) {
    if (!(level > 0.0 && level < 1.0)) throw DomainError("level must lie in (0,1)");
    const int d = model.d;
    if (d > 2 || static_cast<int>(grid.lo.size()) != d ||
        static_cast<int>(grid.hi.size()) != d || static_cast<int>(grid.steps.size()) != d)
        throw DimensionMismatchError("confidence_region: grid must match d in {1,2}");
    for (int k = 0; k < d; ++k)
        if (grid.steps[k] < 2 || !(grid.lo[k] < grid.hi[k]))
            throw DomainError("confidence_region: bad grid axis");

    ConfidenceRegion cr;
    cr.level = level;
    const double q = chi2_quantile(model.l, level);
    const double scale = 2.0 * sample.n / spec.phi_second_at_one;

    auto stat_at = [&](const std::vector<double>& th) -> double {
        DualSolution sol = solve_inner(model, spec, sample, th, config);
        return sol.converged ? scale * sol.value : kInf;
    };
    auto eval_grid = [&](const std::vector<std::vector<double>>& pts) {
        std::vector<double> stats(pts.size());
        const int workers = std::max(1, jobs);
        if (workers == 1) {
            for (std::size_t i = 0; i < pts.size(); ++i) stats[i] = stat_at(pts[i]);
        } else {
            std::atomic<std::size_t> next{0};
            std::vector<std::thread> pool;
            for (int w = 0; w < workers; ++w)
                pool.emplace_back([&]() {
                    for (;;) {
                        const std::size_t i = next.fetch_add(1);
                        if (i >= pts.size()) return;
                        stats[i] = stat_at(pts[i]);
                    }
                });
            for (auto& t : pool) t.join();
        }
        return stats;
    };

    if (d == 1) {
        const int steps = grid.steps[0];
        for (int i = 0; i < steps; ++i) {
            const double th = grid.lo[0] + (grid.hi[0] - grid.lo[0]) * i / (steps - 1.0);
            cr.theta_grid.push_back({th});
        }
        const std::vector<double> stats = eval_grid(cr.theta_grid);
        for (int i = 0; i < steps; ++i) {
            cr.solver_failed.push_back(!std::isfinite(stats[i]));
            cr.inside.push_back(stats[i] <= q);
        }
        // Interval extraction with bisection-refined crossings.
        auto refine = [&](double in_th, double out_th) {
            for (int it = 0; it < 60 && std::fabs(out_th - in_th) > 1e-6; ++it) {
                const double mid = 0.5 * (in_th + out_th);
                if (stat_at({mid}) <= q) in_th = mid;
                else out_th = mid;
            }
            return 0.5 * (in_th + out_th);
        };
        int i = 0;
        while (i < steps) {
            if (!cr.inside[i]) {
                ++i;
                continue;
            }
            int j = i;
            while (j + 1 < steps && cr.inside[j + 1]) ++j;
            double left = cr.theta_grid[i][0];
            double right = cr.theta_grid[j][0];
            if (i > 0) left = refine(left, cr.theta_grid[i - 1][0]);
            if (j + 1 < steps) right = refine(right, cr.theta_grid[j + 1][0]);
            cr.intervals.emplace_back(left, right);
            i = j + 1;
        }
        return cr;
    }

    for (int i = 0; i < grid.steps[0]; ++i)
        for (int j = 0; j < grid.steps[1]; ++j) {
            const double a = grid.lo[0] + (grid.hi[0] - grid.lo[0]) * i / (grid.steps[0] - 1.0);
            const double b = grid.lo[1] + (grid.hi[1] - grid.lo[1]) * j / (grid.steps[1] - 1.0);
            cr.theta_grid.push_back({a, b});
        }
    const std::vector<double> stats = eval_grid(cr.theta_grid);
    for (double s : stats) {
        cr.solver_failed.push_back(!std::isfinite(s));
        cr.inside.push_back(s <= q);
    }
    return cr;
}

} // namespace mephd
