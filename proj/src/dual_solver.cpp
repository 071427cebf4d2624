#include "mephd/dual_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mephd/errors.hpp"
#include "mephd/rng.hpp"

namespace mephd {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

la::Mat build_gbar(const MomentModel& model, const Sample& sample,
                   const std::vector<double>& theta) {
    if (sample.obs_dim != model.obs_dim)
        throw DimensionMismatchError("sample obs_dim does not match model");
    if (static_cast<int>(theta.size()) != model.d)
        throw DimensionMismatchError("theta dimension does not match model");
    const int m = model.l + 1;
    la::Mat g(sample.n, m);
    for (int i = 0; i < sample.n; ++i)
        gbar_eval(model, sample.row(i), theta, &g.a[static_cast<std::size_t>(i) * m]);
    return g;
}

bool feasible_u(const Divergence& spec, double u) {
    return u > spec.prime_lo && u < spec.prime_hi;
}

// Value-only evaluation; returns false if some u_i leaves Im(phi').
bool eval_value(const Divergence& spec, const la::Mat& gbar, const la::Vec& t,
                double& value, la::Vec& u) {
    const int n = gbar.rows, m = gbar.cols;
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
        const double* row = &gbar.a[static_cast<std::size_t>(i) * m];
        double ui = 0.0;
        for (int j = 0; j < m; ++j) ui += t[j] * row[j];
        if (!feasible_u(spec, ui)) return false;
        u[i] = ui;
        acc += conjugate_eval(spec, ui).value;
    }
    value = t[0] - acc / n;
    return std::isfinite(value);
}

struct FullEval {
    double value = 0.0;
    la::Vec grad;
    la::Mat hess;
};

bool eval_full(const Divergence& spec, const la::Mat& gbar, const la::Vec& t,
               FullEval& out, la::Vec& u) {
    const int n = gbar.rows, m = gbar.cols;
    out.grad.assign(m, 0.0);
    out.hess = la::Mat(m, m);
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
        const double* row = &gbar.a[static_cast<std::size_t>(i) * m];
        double ui = 0.0;
        for (int j = 0; j < m; ++j) ui += t[j] * row[j];
        if (!feasible_u(spec, ui)) return false;
        u[i] = ui;
        const ConjEval c = conjugate_eval(spec, ui);
        acc += c.value;
        for (int j = 0; j < m; ++j) out.grad[j] -= c.first * row[j];
        for (int j = 0; j < m; ++j)
            for (int k = j; k < m; ++k) out.hess(j, k) -= c.second * row[j] * row[k];
    }
    const double inv_n = 1.0 / n;
    out.value = t[0] - acc * inv_n;
    for (int j = 0; j < m; ++j) out.grad[j] *= inv_n;
    out.grad[0] += 1.0;
    for (int j = 0; j < m; ++j)
        for (int k = j; k < m; ++k) {
            out.hess(j, k) *= inv_n;
            out.hess(k, j) = out.hess(j, k);
        }
    return std::isfinite(out.value);
}

// Largest step scale keeping every u_i at least (1 - margin) of its current
// gap away from a finite Im(phi') boundary.
double boundary_cap(const Divergence& spec, const la::Mat& gbar, const la::Vec& u,
                    const la::Vec& dir, double margin) {
    const int n = gbar.rows, m = gbar.cols;
    double cap = 1.0;
    for (int i = 0; i < n; ++i) {
        const double* row = &gbar.a[static_cast<std::size_t>(i) * m];
        double di = 0.0;
        for (int j = 0; j < m; ++j) di += dir[j] * row[j];
        if (di > 0.0 && std::isfinite(spec.prime_hi))
            cap = std::min(cap, margin * (spec.prime_hi - u[i]) / di);
        else if (di < 0.0 && std::isfinite(spec.prime_lo))
            cap = std::min(cap, margin * (u[i] - spec.prime_lo) / (-di));
    }
    return cap;
}

} // namespace

std::string to_string(SolveStatus s) {
    switch (s) {
        case SolveStatus::converged: return "converged";
        case SolveStatus::max_iter: return "max-iter";
        case SolveStatus::dual_unbounded: return "dual-unbounded";
        case SolveStatus::singular_hessian: return "singular-hessian";
    }
    return "unknown";
}

DualObjective dual_objective(const MomentModel& model, const Divergence& spec,
                             const Sample& sample, const std::vector<double>& theta,
                             const std::vector<double>& t) {
    const la::Mat gbar = build_gbar(model, sample, theta);
    if (static_cast<int>(t.size()) != model.l + 1)
        throw DimensionMismatchError("dual vector must have length l+1");
    FullEval fe;
    la::Vec u(sample.n);
    if (!eval_full(spec, gbar, t, fe, u))
        throw DomainError("dual_objective: t^T gbar leaves Im(phi')");
    return {fe.value, std::move(fe.grad), std::move(fe.hess)};
}

DualSolution solve_inner(const MomentModel& model, const Divergence& spec,
                         const Sample& sample, const std::vector<double>& theta,
                         const SolverConfig& config,
                         const std::vector<double>* warm_start) {
    const int m = model.l + 1;
    if (sample.n < model.l + 2)
        throw DimensionMismatchError("need n >= l+2 observations");
    const la::Mat gbar = build_gbar(model, sample, theta);

    DualSolution sol;
    sol.theta = theta;
    sol.status = SolveStatus::max_iter;

    la::Vec t(m, 0.0);
    la::Vec u(sample.n, 0.0);
    FullEval fe;
    if (warm_start && static_cast<int>(warm_start->size()) == m) {
        t = *warm_start;
        if (!eval_full(spec, gbar, t, fe, u)) {
            std::fill(t.begin(), t.end(), 0.0);
            eval_full(spec, gbar, t, fe, u);
        }
    } else {
        eval_full(spec, gbar, t, fe, u); // t = 0 is always feasible
    }

    la::Vec u_try(sample.n);
    la::Vec t_try(m);
    double value_mid = fe.value;
    double tnorm_mid = la::inf_norm(t);
    const int mid_iter = std::max(1, config.max_iter / 2);

    int iter = 0;
    bool unbounded = false, singular = false;
    while (true) {
        sol.grad_norm = la::inf_norm(fe.grad);
        if (sol.grad_norm <= config.grad_tol) {
            sol.converged = true;
            sol.status = SolveStatus::converged;
            break;
        }
        if (iter >= config.max_iter) break;
        if (iter == mid_iter) {
            value_mid = fe.value;
            tnorm_mid = la::inf_norm(t);
        }

        // Ascent system (-H + r I) step = grad.
        la::Mat hreg = fe.hess;
        const double r = config.ridge * std::max(1.0, la::inf_norm(fe.hess));
        for (int j = 0; j < m; ++j) {
            for (int k = 0; k < m; ++k) hreg(j, k) = -hreg(j, k);
            hreg(j, j) += r;
        }
        la::Vec step;
        try {
            step = la::lu_solve(std::move(hreg), fe.grad);
        } catch (const SingularMatrixError&) {
            singular = true;
            break;
        }

        double alpha = boundary_cap(spec, gbar, u, step, config.domain_margin);
        bool accepted = false;
        double value_try = 0.0;
        while (alpha > 1e-16) {
            for (int j = 0; j < m; ++j) t_try[j] = t[j] + alpha * step[j];
            if (eval_value(spec, gbar, t_try, value_try, u_try) &&
                value_try >= fe.value - 1e-14 * (1.0 + std::fabs(fe.value))) {
                accepted = true;
                break;
            }
            alpha *= config.backtrack_shrink;
        }
        if (!accepted) break; // numerically stuck; report last iterate

        t = t_try;
        eval_full(spec, gbar, t, fe, u);
        ++iter;

        double umax = 0.0;
        for (int i = 0; i < sample.n; ++i) umax = std::max(umax, std::fabs(u[i]));
        if (umax > 1e8 || la::inf_norm(t) > 1e10) {
            unbounded = true;
            break;
        }
    }
    sol.iterations = iter;

    if (sol.converged) {
        // Polish: a couple of extra capped Newton steps push the first-order
        // residual from ~grad_tol toward machine precision.
        for (int p = 0; p < 2 && sol.grad_norm > 1e-15; ++p) {
            la::Mat hreg = fe.hess;
            const double r = config.ridge * std::max(1.0, la::inf_norm(fe.hess));
            for (int j = 0; j < m; ++j) {
                for (int k = 0; k < m; ++k) hreg(j, k) = -hreg(j, k);
                hreg(j, j) += r;
            }
            la::Vec step;
            try {
                step = la::lu_solve(std::move(hreg), fe.grad);
            } catch (const SingularMatrixError&) {
                break;
            }
            const double alpha = boundary_cap(spec, gbar, u, step, config.domain_margin);
            for (int j = 0; j < m; ++j) t_try[j] = t[j] + alpha * step[j];
            FullEval fe_try;
            if (!eval_full(spec, gbar, t_try, fe_try, u_try)) break;
            if (la::inf_norm(fe_try.grad) >= sol.grad_norm) break;
            t = t_try;
            u = u_try;
            fe = fe_try;
            sol.grad_norm = la::inf_norm(fe.grad);
        }
    } else if (singular) {
        sol.status = SolveStatus::singular_hessian;
    } else if (unbounded) {
        sol.status = SolveStatus::dual_unbounded;
    } else if (iter >= config.max_iter) {
        // A steadily rising objective with a growing iterate is the usual
        // signature of an unbounded dual (0 outside the constraint hull).
        const double tnorm = la::inf_norm(t);
        if (fe.value > value_mid + 1e-10 * (1.0 + std::fabs(fe.value)) &&
            tnorm > 2.0 * std::max(tnorm_mid, 1e-12))
            sol.status = SolveStatus::dual_unbounded;
        else
            sol.status = SolveStatus::max_iter;
    }

    sol.c = t;
    sol.value = fe.value;
    sol.weights.resize(sample.n);
    const double inv_n = 1.0 / sample.n;
    for (int i = 0; i < sample.n; ++i)
        sol.weights[i] = inv_n * phi_prime_inverse(spec, u[i]);
    return sol;
}

FeasibilityReport feasibility_probe(const MomentModel& model, const Sample& sample,
                                    const std::vector<double>& theta,
                                    const Divergence& spec) {
    (void)spec; // hull geometry does not depend on the divergence
    const int n = sample.n, l = model.l;
    la::Mat g(n, l);
    for (int i = 0; i < n; ++i)
        model.eval_g(sample.row(i), theta, &g.a[static_cast<std::size_t>(i) * l]);

    FeasibilityReport rep;
    double scale = 0.0;
    for (double v : g.a) scale = std::max(scale, std::fabs(v));
    const double tol = 1e-12 * std::max(1.0, scale);

    auto straddle = [&](const la::Vec& dir, double& mn, double& mx) {
        mn = kInf;
        mx = -kInf;
        for (int i = 0; i < n; ++i) {
            double p = 0.0;
            for (int j = 0; j < l; ++j) p += g(i, j) * dir[j];
            mn = std::min(mn, p);
            mx = std::max(mx, p);
        }
    };

    if (l == 1) {
        double mn, mx;
        straddle({1.0}, mn, mx);
        if (mn > tol || mx < -tol) {
            rep.status = Feasibility::infeasible;
            rep.detail = "all constraint values on one side of zero";
        } else if (mn < -tol && mx > tol) {
            rep.status = Feasibility::interior;
            rep.margin = std::min(-mn, mx) / std::max(1.0, scale);
        } else {
            rep.status = Feasibility::boundary;
            rep.detail = "zero attained on the hull boundary";
        }
        return rep;
    }

    // Probe directions: coordinate axes, the least-squares direction v
    // maximizing agreement with g_i^T v = 1 (a separating direction when the
    // hull misses the origin), and a fixed battery of pseudo-random
    // directions. Any direction with one-sided constraint values certifies
    // that 0 lies outside the hull.
    std::vector<la::Vec> dirs;
    for (int j = 0; j < l; ++j) {
        la::Vec e(l, 0.0);
        e[j] = 1.0;
        dirs.push_back(e);
    }
    la::Mat gtg(l, l);
    la::Vec gt1(l, 0.0);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < l; ++j) {
            gt1[j] += g(i, j);
            for (int k = j; k < l; ++k) gtg(j, k) += g(i, j) * g(i, k);
        }
    for (int j = 0; j < l; ++j)
        for (int k = 0; k < j; ++k) gtg(j, k) = gtg(k, j);
    for (int j = 0; j < l; ++j) gtg(j, j) += 1e-10 * std::max(1.0, scale * scale);
    try {
        dirs.push_back(la::lu_solve(std::move(gtg), gt1));
    } catch (const SingularMatrixError&) {
        // fall back to the axes only
    }
    {
        // Per-coordinate whitening keeps the random directions informative
        // when the g_j live on very different scales.
        la::Vec col_scale(l, 1.0);
        for (int j = 0; j < l; ++j) {
            double cs = 0.0;
            for (int i = 0; i < n; ++i) cs = std::max(cs, std::fabs(g(i, j)));
            col_scale[j] = (cs > 0.0) ? 1.0 / cs : 1.0;
        }
        SplitMix64 rng(0x5eedf00dULL);
        for (int k = 0; k < 64; ++k) {
            la::Vec d(l);
            for (int j = 0; j < l; ++j)
                d[j] = (2.0 * rng.uniform() - 1.0) * col_scale[j];
            dirs.push_back(std::move(d));
        }
    }

    bool boundary_seen = false;
    double min_margin = kInf;
    for (const auto& dir : dirs) {
        double dn = la::inf_norm(dir);
        if (dn <= 0.0) continue;
        double mn, mx;
        straddle(dir, mn, mx);
        const double dtol = tol * dn;
        if (mn > dtol || mx < -dtol) {
            rep.status = Feasibility::infeasible;
            rep.detail = "separating direction found";
            return rep;
        }
        if (mn >= -dtol || mx <= dtol) {
            boundary_seen = true;
            continue;
        }
        min_margin = std::min(min_margin, std::min(-mn, mx) / (dn * std::max(1.0, scale)));
    }
    if (boundary_seen) {
        rep.status = Feasibility::boundary;
        rep.detail = "zero on or near the hull boundary along a probe direction";
    } else {
        rep.status = Feasibility::interior;
        rep.margin = std::isfinite(min_margin) ? min_margin : 0.0;
    }
    return rep;
}

} // namespace mephd
