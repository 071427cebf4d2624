#include "mephd/primal_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mephd/dual_solver.hpp"
#include "mephd/errors.hpp"
#include "mephd/linalg.hpp"

namespace mephd {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// z(y) = z_base + Z y, with z = n q the scaled weights the phi terms see.
struct ReducedProblem {
    la::Mat constraints; // k x n: row 0 all ones, rows 1..l the g_j values
    la::QR qr;           // QR of constraints^T
    la::Mat null_basis;  // n x (n-k)
    la::Vec z_base;      // a feasible point (C z = n e_0)
    int n = 0;
    int k = 0;
};

ReducedProblem build_reduced(const MomentModel& model, const Sample& sample,
                             const std::vector<double>& theta) {
    ReducedProblem rp;
    rp.n = sample.n;
    rp.k = model.l + 1;
    if (rp.n < rp.k + 1)
        throw DimensionMismatchError("primal oracle needs n >= l+2 observations");
    rp.constraints = la::Mat(rp.k, rp.n);
    std::vector<double> gi(model.l);
    for (int i = 0; i < rp.n; ++i) {
        rp.constraints(0, i) = 1.0;
        model.eval_g(sample.row(i), theta, gi.data());
        for (int j = 0; j < model.l; ++j) rp.constraints(j + 1, i) = gi[j];
    }
    rp.qr = la::qr_factor(la::transpose(rp.constraints));
    rp.null_basis = la::qr_null_space(rp.qr);
    la::Vec rhs(rp.k, 0.0);
    rhs[0] = static_cast<double>(rp.n);
    rp.z_base = la::qr_min_norm(rp.qr, rhs);
    return rp;
}

la::Vec assemble(const ReducedProblem& rp, const la::Vec& base, const la::Vec& y) {
    la::Vec z = base;
    const int r = rp.null_basis.cols;
    for (int i = 0; i < rp.n; ++i) {
        double acc = z[i];
        for (int j = 0; j < r; ++j) acc += rp.null_basis(i, j) * y[j];
        z[i] = acc;
    }
    return z;
}

// Phase 1: pull every z_i above `margin` inside the affine set by
// Gauss-Newton on the hinge residuals max(0, margin - z_i).
bool interiorize(const ReducedProblem& rp, la::Vec& base, double margin) {
    const int r = rp.null_basis.cols;
    la::Vec y(r, 0.0);
    la::Vec z = base;
    auto pen = [&](const la::Vec& zz) {
        double p = 0.0;
        for (double v : zz) {
            const double h = margin - v;
            if (h > 0.0) p += h * h;
        }
        return 0.5 * p;
    };
    double p = pen(z);
    for (int it = 0; it < 60 && p > 0.0; ++it) {
        la::Vec grad(r, 0.0);
        la::Mat hess(r, r);
        for (int i = 0; i < rp.n; ++i) {
            const double h = margin - z[i];
            if (h <= 0.0) continue;
            for (int a = 0; a < r; ++a) {
                grad[a] -= h * rp.null_basis(i, a);
                for (int b = a; b < r; ++b)
                    hess(a, b) += rp.null_basis(i, a) * rp.null_basis(i, b);
            }
        }
        for (int a = 0; a < r; ++a) {
            for (int b = 0; b < a; ++b) hess(a, b) = hess(b, a);
            hess(a, a) += 1e-10;
        }
        la::Vec step;
        try {
            step = la::lu_solve(std::move(hess), grad);
        } catch (const SingularMatrixError&) {
            return false;
        }
        double alpha = 1.0;
        bool ok = false;
        while (alpha > 1e-12) {
            la::Vec y_try(r);
            for (int a = 0; a < r; ++a) y_try[a] = y[a] - alpha * step[a];
            la::Vec z_try = assemble(rp, base, y_try);
            const double p_try = pen(z_try);
            if (p_try < p) {
                y = y_try;
                z = std::move(z_try);
                p = p_try;
                ok = true;
                break;
            }
            alpha *= 0.5;
        }
        if (!ok) break;
    }
    if (p > 0.0) return false;
    base = z;
    return true;
}

} // namespace

PrimalSolution primal_project(const MomentModel& model, const Divergence& spec,
                              const Sample& sample, const std::vector<double>& theta,
                              double tol, const std::vector<double>* start_weights) {
    if (sample.n > 200)
        throw Error("primal oracle is restricted to n <= 200");
    ReducedProblem rp = build_reduced(model, sample, theta);
    const int n = rp.n, r = rp.null_basis.cols;

    la::Vec base = rp.z_base;
    if (start_weights) {
        if (static_cast<int>(start_weights->size()) != n)
            throw DimensionMismatchError("start_weights size mismatch");
        // Project n*q_start onto the feasible affine set.
        la::Vec z0(n);
        for (int i = 0; i < n; ++i) z0[i] = n * (*start_weights)[i];
        la::Vec resid(rp.k, 0.0);
        resid[0] = static_cast<double>(n);
        for (int j = 0; j < rp.k; ++j)
            for (int i = 0; i < n; ++i) resid[j] -= rp.constraints(j, i) * z0[i];
        la::Vec corr = la::qr_min_norm(rp.qr, resid);
        for (int i = 0; i < n; ++i) z0[i] += corr[i];
        base = std::move(z0);
    }

    // Divergences with a left-bounded domain need z strictly above a; the
    // signed-measure members (a = -inf) can start anywhere.
    const double lo = spec.domain_lo;
    if (std::isfinite(lo)) {
        bool ok = false;
        for (double margin : {1e-2, 1e-4, 1e-6}) {
            la::Vec attempt = base;
            if (interiorize(rp, attempt, lo + margin)) {
                base = std::move(attempt);
                ok = true;
                break;
            }
        }
        if (!ok)
            throw NoInteriorPointError(
                "no strictly interior feasible point found for this theta");
    }

    la::Vec y(r, 0.0);
    la::Vec z = base;
    auto objective = [&](const la::Vec& zz, bool& feasible) {
        double f = 0.0;
        feasible = true;
        for (double v : zz) {
            if (!(v > spec.domain_lo && v < spec.domain_hi)) {
                feasible = false;
                return kInf;
            }
            f += phi_eval(spec, v).value;
        }
        return f / n;
    };
    bool feas = true;
    double f = objective(z, feas);
    if (!feas) throw NoInteriorPointError("start point infeasible");

    const double grad_tol = std::min(tol, 1e-9);
    double gn = kInf;
    bool converged = false;
    for (int it = 0; it < 200; ++it) {
        la::Vec grad(r, 0.0);
        la::Mat hess(r, r);
        la::Vec phi1(n), phi2(n);
        for (int i = 0; i < n; ++i) {
            const PhiEval pe = phi_eval(spec, z[i]);
            phi1[i] = pe.first;
            phi2[i] = pe.second;
        }
        for (int i = 0; i < n; ++i)
            for (int a = 0; a < r; ++a) {
                grad[a] += phi1[i] * rp.null_basis(i, a);
                for (int b = a; b < r; ++b)
                    hess(a, b) += phi2[i] * rp.null_basis(i, a) * rp.null_basis(i, b);
            }
        for (int a = 0; a < r; ++a) {
            grad[a] /= n;
            for (int b = a; b < r; ++b) {
                hess(a, b) /= n;
                hess(b, a) = hess(a, b);
            }
        }
        gn = la::inf_norm(grad);
        if (gn <= grad_tol) {
            converged = true;
            break;
        }
        const double ridge = 1e-12 * std::max(1.0, la::inf_norm(hess));
        for (int a = 0; a < r; ++a) hess(a, a) += ridge;
        la::Vec step;
        try {
            step = la::lu_solve(std::move(hess), grad);
        } catch (const SingularMatrixError&) {
            throw NotConvergedError("primal oracle: singular reduced Hessian", it, gn);
        }
        // Descent direction is -step; cap against the domain's left edge.
        double alpha = 1.0;
        if (std::isfinite(lo)) {
            for (int i = 0; i < n; ++i) {
                double di = 0.0;
                for (int a = 0; a < r; ++a) di -= rp.null_basis(i, a) * step[a];
                if (di < 0.0) alpha = std::min(alpha, 0.99 * (z[i] - lo) / (-di));
            }
        }
        bool accepted = false;
        while (alpha > 1e-16) {
            la::Vec y_try(r);
            for (int a = 0; a < r; ++a) y_try[a] = y[a] - alpha * step[a];
            la::Vec z_try = assemble(rp, base, y_try);
            bool ok = true;
            const double f_try = objective(z_try, ok);
            if (ok && f_try <= f + 1e-14 * (1.0 + std::fabs(f))) {
                y = y_try;
                z = std::move(z_try);
                f = f_try;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if (!accepted)
            throw NotConvergedError("primal oracle: line search failed", it, gn);
    }
    if (!converged)
        throw NotConvergedError("primal oracle: iteration limit", 200, gn);

    PrimalSolution sol;
    sol.weights.resize(n);
    for (int i = 0; i < n; ++i) sol.weights[i] = z[i] / n;
    sol.value = f;

    // KKT: phi'(z) must lie in the row space of the constraints; the
    // least-squares multipliers come from the same QR factors.
    la::Vec phi1(n);
    for (int i = 0; i < n; ++i) phi1[i] = phi_eval(spec, z[i]).first;
    la::Vec qtp = phi1;
    rp.qr.apply_qt(qtp);
    la::Vec proj(n, 0.0);
    for (int i = 0; i < rp.k; ++i) proj[i] = qtp[i];
    rp.qr.apply_q(proj); // projection of phi'(z) onto the row space
    double kkt = 0.0;
    for (int i = 0; i < n; ++i) kkt = std::max(kkt, std::fabs(phi1[i] - proj[i]));
    // Constraint residual (should be ~machine epsilon by construction).
    la::Vec cz = la::matvec(rp.constraints, z);
    cz[0] -= n;
    kkt = std::max(kkt, la::inf_norm(cz) / n);
    sol.kkt_residual = kkt;
    return sol;
}

double lagrange_residual(const MomentModel& model, const Divergence& spec,
                         const Sample& sample, const std::vector<double>& theta,
                         const std::vector<double>& c) {
    // The system residual is exactly the negated gradient of the dual
    // objective at c.
    const DualObjective obj = dual_objective(model, spec, sample, theta, c);
    return la::inf_norm(obj.gradient);
}

} // namespace mephd
