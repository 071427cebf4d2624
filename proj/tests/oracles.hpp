// Test-only reference implementations, kept independent of the library's
// dual-solver path:
//  - the classical empirical-likelihood inner problem in its tau
//    parameterization, maximize sum_i log(1 + tau^T g_i),
//  - its profile statistic and confidence interval for scalar theta.

#ifndef MEPHD_TESTS_ORACLES_HPP
#define MEPHD_TESTS_ORACLES_HPP

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "mephd/linalg.hpp"
#include "mephd/model.hpp"

namespace mephd::testing {

struct ElInner {
    bool ok = false;
    double loglik = 0.0; // sum_i log(1 + tau^T g_i)
    la::Vec tau;
};

// Damped Newton on the strictly concave tau objective with a
// fraction-to-boundary cap on 1 + tau^T g_i > 0.
inline ElInner el_inner(const MomentModel& model, const Sample& sample,
                        const std::vector<double>& theta) {
    const int n = sample.n, l = model.l;
    la::Mat g(n, l);
    for (int i = 0; i < n; ++i)
        model.eval_g(sample.row(i), theta, &g.a[static_cast<std::size_t>(i) * l]);

    ElInner res;
    res.tau.assign(l, 0.0);
    la::Vec w(n, 1.0); // 1 + tau^T g_i
    auto value = [&](const la::Vec& tau, la::Vec& wr) -> double {
        double v = 0.0;
        for (int i = 0; i < n; ++i) {
            double s = 1.0;
            for (int j = 0; j < l; ++j) s += tau[j] * g(i, j);
            if (s <= 0.0) return -std::numeric_limits<double>::infinity();
            wr[i] = s;
            v += std::log(s);
        }
        return v;
    };
    double f = 0.0;
    la::Vec w_try(n);
    for (int it = 0; it < 400; ++it) {
        la::Vec grad(l, 0.0);
        la::Mat hess(l, l);
        for (int i = 0; i < n; ++i) {
            const double inv = 1.0 / w[i];
            for (int j = 0; j < l; ++j) {
                grad[j] += g(i, j) * inv;
                for (int k = j; k < l; ++k) hess(j, k) += g(i, j) * g(i, k) * inv * inv;
            }
        }
        double gn = la::inf_norm(grad);
        if (gn <= 1e-12 * n) {
            res.ok = true;
            res.loglik = f;
            return res;
        }
        for (int j = 0; j < l; ++j) {
            for (int k = 0; k < j; ++k) hess(j, k) = hess(k, j);
            hess(j, j) += 1e-12 * std::max(1.0, la::inf_norm(hess));
        }
        la::Vec step;
        try {
            step = la::lu_solve(std::move(hess), grad);
        } catch (const std::exception&) {
            return res;
        }
        double alpha = 1.0;
        for (int i = 0; i < n; ++i) {
            double ds = 0.0;
            for (int j = 0; j < l; ++j) ds += step[j] * g(i, j);
            if (ds < 0.0) alpha = std::min(alpha, 0.99 * w[i] / (-ds));
        }
        bool accepted = false;
        while (alpha > 1e-16) {
            la::Vec tau_try(l);
            for (int j = 0; j < l; ++j) tau_try[j] = res.tau[j] + alpha * step[j];
            const double f_try = value(tau_try, w_try);
            if (f_try >= f - 1e-13 * (1.0 + std::fabs(f))) {
                res.tau = tau_try;
                w = w_try;
                f = f_try;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if (!accepted) return res;
    }
    return res;
}

// min over theta of the EL log-likelihood ratio, by scan + golden section on
// a window around the center value (scalar theta only).
inline double el_profile_min(const MomentModel& model, const Sample& sample, double center,
                             double halfwidth) {
    auto eval = [&](double th) -> double {
        const ElInner r = el_inner(model, sample, {th});
        return r.ok ? r.loglik : std::numeric_limits<double>::infinity();
    };
    const int grid = 81;
    double best = std::numeric_limits<double>::infinity();
    int ibest = 0;
    std::vector<double> ths(grid);
    for (int i = 0; i < grid; ++i) {
        ths[i] = center - halfwidth + 2.0 * halfwidth * i / (grid - 1.0);
        const double v = eval(ths[i]);
        if (v < best) {
            best = v;
            ibest = i;
        }
    }
    double a = ths[std::max(0, ibest - 1)];
    double b = ths[std::min(grid - 1, ibest + 1)];
    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
    double f1 = eval(x1), f2 = eval(x2);
    while (b - a > 1e-10) {
        if (f1 <= f2) {
            b = x2; x2 = x1; f2 = f1;
            x1 = b - gr * (b - a);
            f1 = eval(x1);
        } else {
            a = x1; x1 = x2; f1 = f2;
            x2 = a + gr * (b - a);
            f2 = eval(x2);
        }
    }
    return std::min(std::min(f1, f2), best);
}

// 2 [ L(theta1) - min_theta L(theta) ]: the classical EL ratio statistic.
inline double el_ratio_statistic(const MomentModel& model, const Sample& sample,
                                 double theta1, double center, double halfwidth) {
    const ElInner at1 = el_inner(model, sample, {theta1});
    if (!at1.ok) throw std::runtime_error("el oracle: infeasible theta1");
    const double lmin = el_profile_min(model, sample, center, halfwidth);
    return 2.0 * (at1.loglik - lmin);
}

// EL confidence interval for the mean model: { theta : 2 L(theta) <= q }.
inline std::pair<double, double> el_mean_interval(const MomentModel& model,
                                                  const Sample& sample, double q) {
    double mean = 0.0, mn = 1e300, mx = -1e300;
    for (int i = 0; i < sample.n; ++i) {
        mean += sample.row(i)[0];
        mn = std::min(mn, sample.row(i)[0]);
        mx = std::max(mx, sample.row(i)[0]);
    }
    mean /= sample.n;
    auto stat = [&](double th) -> double {
        const ElInner r = el_inner(model, sample, {th});
        return r.ok ? 2.0 * r.loglik : std::numeric_limits<double>::infinity();
    };
    auto edge = [&](double inside, double outside) {
        for (int it = 0; it < 80; ++it) {
            const double mid = 0.5 * (inside + outside);
            if (stat(mid) <= q) inside = mid;
            else outside = mid;
            if (std::fabs(outside - inside) <= 1e-10) break;
        }
        return 0.5 * (inside + outside);
    };
    return {edge(mean, mn), edge(mean, mx)};
}

} // namespace mephd::testing

#endif
