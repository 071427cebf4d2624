#include "mephd/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mephd/errors.hpp"

namespace mephd {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr int kGridPoints = 41;
constexpr double kRefineTol = 1e-8;

struct ProfileEval {
    // Best solution seen so far and the full evaluation log.
    std::vector<ProfilePoint> trace;
    DualSolution best;
    bool have_best = false;

    const MomentModel* model;
    const Divergence* spec;
    const Sample* sample;
    SolverConfig config;
    std::vector<double> warm;

    double operator()(const std::vector<double>& theta) {
        const std::vector<double>* start = warm.empty() ? nullptr : &warm;
        DualSolution sol = solve_inner(*model, *spec, *sample, theta, config, start);
        const double v = sol.converged ? sol.value : kInf;
        trace.push_back({theta, v, sol.converged});
        if (sol.converged) {
            warm = sol.c;
            if (!have_best || sol.value < best.value) {
                best = std::move(sol);
                have_best = true;
            }
        }
        return v;
    }
};

// Moment matrices at theta: J = P_n dg/dtheta (l x d), Omega = P_n g g^T.
void moment_matrices(const MomentModel& model, const Sample& sample,
                     const std::vector<double>& theta, la::Mat& jbar, la::Mat& omega) {
    const int l = model.l, d = model.d;
    jbar = la::Mat(l, d);
    omega = la::Mat(l, l);
    std::vector<double> g(l), jac(l * d);
    for (int i = 0; i < sample.n; ++i) {
        model.eval_g(sample.row(i), theta, g.data());
        model.g_jac(sample.row(i), theta.data(), jac.data());
        for (int a = 0; a < l; ++a) {
            for (int b = 0; b < d; ++b) jbar(a, b) += jac[a * d + b];
            for (int b = a; b < l; ++b) omega(a, b) += g[a] * g[b];
        }
    }
    const double inv_n = 1.0 / sample.n;
    for (int a = 0; a < l; ++a)
        for (int b = 0; b < d; ++b) jbar(a, b) *= inv_n;
    for (int a = 0; a < l; ++a)
        for (int b = a; b < l; ++b) {
            omega(a, b) *= inv_n;
            omega(b, a) = omega(a, b);
        }
}

void symmetrize(la::Mat& m) {
    for (int i = 0; i < m.rows; ++i)
        for (int j = i + 1; j < m.cols; ++j) {
            const double v = 0.5 * (m(i, j) + m(j, i));
            m(i, j) = v;
            m(j, i) = v;
        }
}

// P_n dm/dtheta at (theta, c): -(1/n) sum_i phi*'(u_i) jac_i^T c_{1:l}.
std::vector<double> profile_gradient(const MomentModel& model, const Divergence& spec,
                                     const Sample& sample, const std::vector<double>& theta,
                                     const std::vector<double>& c) {
    const int l = model.l, d = model.d;
    std::vector<double> grad(d, 0.0), g(l), jac(l * d);
    for (int i = 0; i < sample.n; ++i) {
        model.eval_g(sample.row(i), theta, g.data());
        model.g_jac(sample.row(i), theta.data(), jac.data());
        double u = c[0];
        for (int j = 0; j < l; ++j) u += c[j + 1] * g[j];
        const double slope = conjugate_eval(spec, u).first;
        for (int k = 0; k < d; ++k) {
            double du = 0.0;
            for (int j = 0; j < l; ++j) du += c[j + 1] * jac[j * d + k];
            grad[k] -= slope * du;
        }
    }
    for (auto& v : grad) v /= sample.n;
    return grad;
}

EstimationResult finalize(const MomentModel& model, const Divergence& spec,
                          const Sample& sample, ProfileEval& prof) {
    if (!prof.have_best)
        throw NoFeasibleThetaError(
            "no theta admitted a convergent projection (empty feasible set for this divergence)");
    EstimationResult res;
    res.theta_hat = prof.best.theta;
    res.c_hat = prof.best.c;
    res.value = prof.best.value;
    res.weights = prof.best.weights;
    res.profile_trace = std::move(prof.trace);
    try {
        res.variance_theta = variance_theta(model, sample, res.theta_hat);
        res.variance_c = variance_c(model, sample, res.theta_hat);
    } catch (const SingularMatrixError&) {
        // degenerate data (e.g. a point mass); the estimate stands, the
        // plug-in covariances stay empty
        res.variance_theta = la::Mat();
        res.variance_c = la::Mat();
    }
    res.profile_grad = profile_gradient(model, spec, sample, res.theta_hat, res.c_hat);
    return res;
}

void check_box(const MomentModel& model) {
    if (static_cast<int>(model.theta_box.size()) != model.d)
        throw DimensionMismatchError("theta_box size must equal d");
}

} // namespace

std::vector<double> default_theta_init(const MomentModel& model, const Sample& sample) {
    double mean = 0.0, sq = 0.0;
    for (int i = 0; i < sample.n; ++i) {
        mean += sample.row(i)[0];
        sq += sample.row(i)[0] * sample.row(i)[0];
    }
    mean /= sample.n;
    sq /= sample.n;
    if (model.d == 2) return {mean, std::max(sq - mean * mean, 1e-4)};
    std::vector<double> init(model.d, mean);
    return init;
}

EstimationResult estimate(const MomentModel& model, const Divergence& spec,
                          const Sample& sample, const SolverConfig& config,
                          const std::vector<double>* theta_init) {
    check_box(model);
    ProfileEval prof{{}, {}, false, &model, &spec, &sample, config, {}};

    std::vector<double> init =
        theta_init ? *theta_init : default_theta_init(model, sample);
    for (int k = 0; k < model.d; ++k)
        init[k] = std::clamp(init[k], model.theta_box[k].first, model.theta_box[k].second);

    if (model.d == 1) {
        const double lo = model.theta_box[0].first;
        const double hi = model.theta_box[0].second;
        // Coarse scan; the init point joins as an extra candidate.
        std::vector<double> candidates;
        candidates.reserve(kGridPoints + 1);
        for (int k = 0; k < kGridPoints; ++k)
            candidates.push_back(lo + (hi - lo) * k / (kGridPoints - 1.0));
        candidates.push_back(init[0]);
        std::sort(candidates.begin(), candidates.end());

        std::vector<double> values(candidates.size());
        for (std::size_t k = 0; k < candidates.size(); ++k)
            values[k] = prof({candidates[k]});
        if (!prof.have_best)
            throw NoFeasibleThetaError("inner solve failed at every grid point");

        std::size_t ibest = 0;
        for (std::size_t k = 1; k < candidates.size(); ++k)
            if (values[k] < values[ibest]) ibest = k;
        double a = (ibest == 0) ? candidates[0] : candidates[ibest - 1];
        double b = (ibest + 1 == candidates.size()) ? candidates.back()
                                                    : candidates[ibest + 1];

        // Golden-section on [a, b]; failed evaluations behave as +inf.
        const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
        double x1 = b - gr * (b - a);
        double x2 = a + gr * (b - a);
        double f1 = prof({x1});
        double f2 = prof({x2});
        int guard = 0;
        while (b - a > kRefineTol && ++guard < 200) {
            if (f1 <= f2) {
                b = x2;
                x2 = x1;
                f2 = f1;
                x1 = b - gr * (b - a);
                f1 = prof({x1});
            } else {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = a + gr * (b - a);
                f2 = prof({x2});
            }
        }
        return finalize(model, spec, sample, prof);
    }

    // d >= 2: Nelder-Mead with +inf outside the box or on failed solves.
    const int d = model.d;
    auto boxed = [&](const std::vector<double>& th) {
        for (int k = 0; k < d; ++k)
            if (th[k] < model.theta_box[k].first || th[k] > model.theta_box[k].second)
                return false;
        return true;
    };
    auto feval = [&](const std::vector<double>& th) {
        return boxed(th) ? prof(th) : kInf;
    };

    std::vector<std::vector<double>> simplex(d + 1, init);
    std::vector<double> fv(d + 1);
    for (int k = 0; k < d; ++k) {
        double step = 0.1 * (1.0 + std::fabs(init[k]));
        if (init[k] + step > model.theta_box[k].second) step = -step;
        simplex[k + 1][k] += step;
    }
    for (int v = 0; v <= d; ++v) fv[v] = feval(simplex[v]);

    for (int it = 0; it < 500; ++it) {
        // order vertices
        std::vector<int> ord(d + 1);
        for (int v = 0; v <= d; ++v) ord[v] = v;
        std::sort(ord.begin(), ord.end(), [&](int u, int v) { return fv[u] < fv[v]; });
        std::vector<std::vector<double>> sx(d + 1);
        std::vector<double> sf(d + 1);
        for (int v = 0; v <= d; ++v) {
            sx[v] = simplex[ord[v]];
            sf[v] = fv[ord[v]];
        }
        simplex = sx;
        fv = sf;

        double diam = 0.0;
        for (int v = 1; v <= d; ++v)
            for (int k = 0; k < d; ++k)
                diam = std::max(diam, std::fabs(simplex[v][k] - simplex[0][k]));
        if (diam <= kRefineTol && std::isfinite(fv[0])) break;

        std::vector<double> centroid(d, 0.0);
        for (int v = 0; v < d; ++v)
            for (int k = 0; k < d; ++k) centroid[k] += simplex[v][k] / d;

        auto blend = [&](double coef) {
            std::vector<double> p(d);
            for (int k = 0; k < d; ++k)
                p[k] = centroid[k] + coef * (centroid[k] - simplex[d][k]);
            return p;
        };

        auto xr = blend(1.0);
        const double fr = feval(xr);
        if (fr < fv[0]) {
            auto xe = blend(2.0);
            const double fe = feval(xe);
            if (fe < fr) {
                simplex[d] = xe;
                fv[d] = fe;
            } else {
                simplex[d] = xr;
                fv[d] = fr;
            }
        } else if (fr < fv[d - 1]) {
            simplex[d] = xr;
            fv[d] = fr;
        } else {
            auto xc = blend(fr < fv[d] ? 0.5 : -0.5);
            const double fc = feval(xc);
            if (fc < std::min(fr, fv[d])) {
                simplex[d] = xc;
                fv[d] = fc;
            } else {
                for (int v = 1; v <= d; ++v) {
                    for (int k = 0; k < d; ++k)
                        simplex[v][k] = 0.5 * (simplex[v][k] + simplex[0][k]);
                    fv[v] = feval(simplex[v]);
                }
            }
        }
    }
    return finalize(model, spec, sample, prof);
}

la::Mat variance_theta(const MomentModel& model, const Sample& sample,
                       const std::vector<double>& theta_hat) {
    la::Mat jbar, omega;
    moment_matrices(model, sample, theta_hat, jbar, omega);
    la::Mat oinv_j = la::lu_solve_multi(omega, jbar);          // Omega^{-1} J
    la::Mat info = la::matmul(la::transpose(jbar), oinv_j);    // J^T Omega^{-1} J
    la::Mat v = la::inverse(info);
    symmetrize(v);
    return v;
}

la::Mat variance_c(const MomentModel& model, const Sample& sample,
                   const std::vector<double>& theta_hat) {
    const int l = model.l;
    la::Mat jbar, omega;
    moment_matrices(model, sample, theta_hat, jbar, omega);
    la::Mat oinv = la::inverse(omega);
    la::Mat v = variance_theta(model, sample, theta_hat);

    // A = Omega^{-1} J V J^T Omega^{-1}: the correction block.
    la::Mat oj = la::matmul(oinv, jbar);                 // l x d
    la::Mat corr = la::matmul(oj, la::matmul(v, la::transpose(oj)));

    la::Mat u(l + 1, l + 1);
    for (int a = 0; a < l; ++a)
        for (int b = 0; b < l; ++b) u(a + 1, b + 1) = oinv(a, b) - corr(a, b);
    symmetrize(u);
    return u;
}

la::Mat misspec_covariance(const MomentModel& model, const Divergence& spec,
                           const Sample& sample, const std::vector<double>& theta_hat,
                           const std::vector<double>& c_hat) {
    const int l = model.l, d = model.d, m = l + 1;
    const int dim = m + d;

    la::Mat s(dim, dim);
    la::Mat mm(dim, dim);
    std::vector<double> gb(m), jac(l * d), du(d), score(dim);
    for (int i = 0; i < sample.n; ++i) {
        gbar_eval(model, sample.row(i), theta_hat, gb.data());
        model.g_jac(sample.row(i), theta_hat.data(), jac.data());
        double u = 0.0;
        for (int j = 0; j < m; ++j) u += c_hat[j] * gb[j];
        const ConjEval ce = conjugate_eval(spec, u);
        for (int k = 0; k < d; ++k) {
            du[k] = 0.0;
            for (int j = 0; j < l; ++j) du[k] += c_hat[j + 1] * jac[j * d + k];
        }
        // first derivatives of m
        for (int j = 0; j < m; ++j) score[j] = (j == 0 ? 1.0 : 0.0) - ce.first * gb[j];
        for (int k = 0; k < d; ++k) score[m + k] = -ce.first * du[k];
        for (int a = 0; a < dim; ++a)
            for (int b = a; b < dim; ++b) mm(a, b) += score[a] * score[b];
        // d2m/dt2 block
        for (int a = 0; a < m; ++a)
            for (int b = a; b < m; ++b) s(a, b) -= ce.second * gb[a] * gb[b];
        // mixed block: -(phi*'' gbar du^T + phi*' dgbar/dtheta)
        for (int a = 0; a < m; ++a)
            for (int k = 0; k < d; ++k) {
                double mixed = ce.second * gb[a] * du[k];
                if (a >= 1) mixed += ce.first * jac[(a - 1) * d + k];
                s(a, m + k) -= mixed;
            }
    }
    const double inv_n = 1.0 / sample.n;
    for (int a = 0; a < dim; ++a)
        for (int b = a; b < dim; ++b) {
            s(a, b) *= inv_n;
            mm(a, b) *= inv_n;
            s(b, a) = s(a, b);
            mm(b, a) = mm(a, b);
        }

    // theta-theta block by central differences of the analytic theta
    // gradient; the model interface only carries first derivatives of g.
    for (int k = 0; k < d; ++k) {
        const double h = 1e-5 * (1.0 + std::fabs(theta_hat[k]));
        std::vector<double> tp = theta_hat, tm = theta_hat;
        tp[k] += h;
        tm[k] -= h;
        const auto gp = profile_gradient(model, spec, sample, tp, c_hat);
        const auto gm = profile_gradient(model, spec, sample, tm, c_hat);
        for (int a = 0; a < d; ++a) {
            const double v = (gp[a] - gm[a]) / (2.0 * h);
            s(m + a, m + k) = 0.0;
            s(m + k, m + a) = 0.0;
            s(m + a, m + k) = v;
        }
    }
    // enforce symmetry of the FD block
    for (int a = 0; a < d; ++a)
        for (int k = a + 1; k < d; ++k) {
            const double v = 0.5 * (s(m + a, m + k) + s(m + k, m + a));
            s(m + a, m + k) = v;
            s(m + k, m + a) = v;
        }

    la::Mat sinv_m = la::lu_solve_multi(s, mm);
    la::Mat w = la::transpose(la::lu_solve_multi(s, la::transpose(sinv_m)));
    symmetrize(w);
    return w;
}

std::vector<CdfEstimate> cdf_estimate(const MomentModel& model,
                                      const EstimationResult& result,
                                      const Sample& sample,
                                      const std::vector<double>& xs) {
    if (model.obs_dim != 1)
        throw DimensionMismatchError("cdf_estimate requires scalar observations");
    if (result.variance_theta.rows != model.d)
        throw Error("estimation result carries no plug-in covariances (degenerate fit)");
    const int l = model.l;
    la::Mat jbar, omega;
    moment_matrices(model, sample, result.theta_hat, jbar, omega);
    la::Mat oinv = la::inverse(omega);
    la::Mat oj = la::matmul(oinv, jbar); // l x d
    la::Mat gamma = oinv;                // Gamma = Omega^{-1} - Omega^{-1} J V J^T Omega^{-1}
    {
        la::Mat corr = la::matmul(oj, la::matmul(result.variance_theta, la::transpose(oj)));
        for (int a = 0; a < l; ++a)
            for (int b = 0; b < l; ++b) gamma(a, b) -= corr(a, b);
    }

    std::vector<CdfEstimate> out;
    out.reserve(xs.size());
    std::vector<double> g(l);
    for (double x : xs) {
        double fhat = 0.0, fn = 0.0;
        std::vector<double> b(l, 0.0);
        for (int i = 0; i < sample.n; ++i) {
            if (sample.row(i)[0] <= x) {
                fhat += result.weights[i];
                fn += 1.0;
                model.eval_g(sample.row(i), result.theta_hat, g.data());
                for (int j = 0; j < l; ++j) b[j] += g[j];
            }
        }
        fn /= sample.n;
        for (auto& v : b) v /= sample.n;
        double quad = 0.0;
        for (int a = 0; a < l; ++a)
            for (int c = 0; c < l; ++c) quad += b[a] * gamma(a, c) * b[c];
        out.push_back({x, fhat, fn * (1.0 - fn) - quad, fn});
    }
    return out;
}

} // namespace mephd
