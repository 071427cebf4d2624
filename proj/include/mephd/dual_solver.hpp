// Inner (fixed-theta) solver. The constrained projection of the empirical
// measure onto { Q : sum Q = 1, sum Q g(X_i,theta) = 0 } is computed through
// its dual: maximize over t in R^{l+1}
//
//     P_n m(theta, t) = t_0 - (1/n) sum_i phi*( t^T gbar(X_i, theta) )
//
// by damped Newton ascent from t = 0, with a fraction-to-the-boundary rule
// keeping every t^T gbar(X_i) strictly inside Im(phi'). The maximizer c
// yields the projection weights w_i = (1/n) phi'^{-1}(c^T gbar(X_i)) and the
// optimum equals the projected divergence value.

#ifndef MEPHD_DUAL_SOLVER_HPP
#define MEPHD_DUAL_SOLVER_HPP

#include <string>
#include <vector>

#include "mephd/divergence.hpp"
#include "mephd/linalg.hpp"
#include "mephd/model.hpp"

namespace mephd {

struct SolverConfig {
    double grad_tol = 1e-10;
    int max_iter = 100;
    double backtrack_shrink = 0.5;
    double domain_margin = 0.99; // fraction of the gap to Im(phi') boundary a step may consume
    double ridge = 1e-12;        // Hessian regularization, scaled by ||H||_inf
};

enum class SolveStatus {
    converged,
    max_iter,
    dual_unbounded,    // empirical constraint qualification fails at this theta
    singular_hessian,
};

std::string to_string(SolveStatus s);

struct DualSolution {
    std::vector<double> theta;
    std::vector<double> c;        // l+1 multipliers, c[0] is the mass multiplier
    double value = 0.0;           // P_n m(theta, c)
    std::vector<double> weights;  // n projection weights, sum to 1 when converged
    bool converged = false;
    SolveStatus status = SolveStatus::max_iter;
    int iterations = 0;
    double grad_norm = 0.0;
};

struct DualObjective {
    double value;
    la::Vec gradient;  // l+1
    la::Mat hessian;   // (l+1) x (l+1), symmetric negative semidefinite
};

// Value, gradient and Hessian of t -> P_n m(theta, t). Throws DomainError
// when some t^T gbar(X_i) leaves Im(phi').
DualObjective dual_objective(const MomentModel& model, const Divergence& spec,
                             const Sample& sample, const std::vector<double>& theta,
                             const std::vector<double>& t);

// Newton ascent for the dual. `warm_start`, when given and feasible, replaces
// the default start t = 0. Never throws on non-convergence: inspect
// `converged` / `status`.
DualSolution solve_inner(const MomentModel& model, const Divergence& spec,
                         const Sample& sample, const std::vector<double>& theta,
                         const SolverConfig& config = {},
                         const std::vector<double>* warm_start = nullptr);

enum class Feasibility { interior, boundary, infeasible };

struct FeasibilityReport {
    Feasibility status = Feasibility::infeasible;
    // Smallest straddle margin seen over the probe directions, scaled by the
    // spread of the constraint values; crude but cheap.
    double margin = 0.0;
    std::string detail;
};

// Reports whether 0 appears to lie strictly inside the convex hull of
// { g(X_i, theta) }. Exact for l = 1; a least-squares direction heuristic
// with coordinate certificates otherwise ("infeasible" then means
// infeasible-or-unknown). Relevant for divergences whose domain excludes
// negative weights.
FeasibilityReport feasibility_probe(const MomentModel& model, const Sample& sample,
                                    const std::vector<double>& theta,
                                    const Divergence& spec);

} // namespace mephd

#endif
