// Brute-force reference solver for the constrained primal problem
//
//     minimize (1/n) sum_i phi(n q_i)   over   sum q_i = 1, sum q_i g(X_i,theta) = 0
//
// used to certify the dual path on small samples. The feasible affine set is
// parameterized through an orthonormal null-space basis of the constraint
// matrix (Householder QR), and damped Newton runs in the reduced coordinates.
// Deliberately shares nothing with the Lagrange/dual route.

#ifndef MEPHD_PRIMAL_ORACLE_HPP
#define MEPHD_PRIMAL_ORACLE_HPP

#include <vector>

#include "mephd/divergence.hpp"
#include "mephd/model.hpp"

namespace mephd {

struct PrimalSolution {
    std::vector<double> weights; // n entries, sum to 1
    double value = 0.0;
    double kkt_residual = 0.0;
};

// Solves the primal on a small sample (n <= 200). `start_weights`, when
// given, is projected onto the feasible affine set and used as the starting
// point (useful for probing uniqueness). Throws NoInteriorPointError when no
// strictly interior start can be constructed and NotConvergedError when
// Newton stalls.
PrimalSolution primal_project(const MomentModel& model, const Divergence& spec,
                              const Sample& sample, const std::vector<double>& theta,
                              double tol = 1e-10,
                              const std::vector<double>* start_weights = nullptr);

// Max-norm residual of the first-order system characterizing the projection:
//   P_n phi'^{-1}(c^T gbar) = 1   and   P_n g_j phi'^{-1}(c^T gbar) = 0.
double lagrange_residual(const MomentModel& model, const Divergence& spec,
                         const Sample& sample, const std::vector<double>& theta,
                         const std::vector<double>& c);

} // namespace mephd

#endif
