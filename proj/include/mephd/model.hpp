// Moment-condition models: l constraint functions g(x, theta) indexed by a
// d-dimensional parameter, the augmented map gbar = (1, g_1, ..., g_l)^T,
// builtin model registry and CSV sample ingestion.

#ifndef MEPHD_MODEL_HPP
#define MEPHD_MODEL_HPP

#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace mephd {

struct Sample {
    int n = 0;
    int obs_dim = 1;
    std::vector<double> data; // row-major, n x obs_dim

    const double* row(int i) const { return data.data() + static_cast<std::size_t>(i) * obs_dim; }
};

struct MomentModel {
    std::string name;
    int d = 1;       // parameter dimension
    int l = 1;       // number of constraints (l >= d for over-identified tests)
    int obs_dim = 1;
    // g writes l values, g_jac writes the l x d matrix dg/dtheta row-major.
    std::function<void(const double* x, const double* theta, double* out)> g;
    std::function<void(const double* x, const double* theta, double* out)> g_jac;
    std::vector<std::pair<double, double>> theta_box;

    void eval_g(const double* x, const std::vector<double>& theta, double* out) const {
        g(x, theta.data(), out);
    }
};

// Builtins:
//   qinlawless : obs_dim=1, d=1, l=2, g = (x - theta, x^2 - 2 theta^2 - 1)
//   mean1      : obs_dim=1, d=1, l=1, g = x - theta
//   normal2    : obs_dim=1, d=2, l=3, theta = (mu, v),
//                g = (x - mu, x^2 - mu^2 - v, x^3 - mu^3 - 3 mu v)
// Throws UnknownModelError otherwise.
MomentModel builtin_model(const std::string& name);

// gbar(x, theta) = (1, g_1(x,theta), ..., g_l(x,theta))^T.
void gbar_eval(const MomentModel& model, const double* x,
               const std::vector<double>& theta, double* out);
std::vector<double> gbar_eval(const MomentModel& model, const double* x,
                              const std::vector<double>& theta);

// Numeric CSV, one observation per row, obs_dim columns; a single header row
// is skipped when its first field is not numeric. Throws ParseError /
// DimensionMismatchError.
Sample load_sample(const std::string& path, int obs_dim);
Sample sample_from_values(std::vector<double> values); // obs_dim = 1

} // namespace mephd

#endif
