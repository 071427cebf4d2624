#include "mephd/model.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "mephd/errors.hpp"

namespace mephd {

MomentModel builtin_model(const std::string& name) {
    MomentModel m;
    m.name = name;
    if (name == "qinlawless") {
        m.d = 1;
        m.l = 2;
        m.obs_dim = 1;
        m.g = [](const double* x, const double* th, double* out) {
            out[0] = x[0] - th[0];
            out[1] = x[0] * x[0] - 2.0 * th[0] * th[0] - 1.0;
        };
        m.g_jac = [](const double*, const double* th, double* out) {
            out[0] = -1.0;
            out[1] = -4.0 * th[0];
        };
        m.theta_box = {{-10.0, 10.0}};
        return m;
    }
    if (name == "mean1") {
        m.d = 1;
        m.l = 1;
        m.obs_dim = 1;
        m.g = [](const double* x, const double* th, double* out) { out[0] = x[0] - th[0]; };
        m.g_jac = [](const double*, const double*, double* out) { out[0] = -1.0; };
        m.theta_box = {{-10.0, 10.0}};
        return m;
    }
    if (name == "normal2") {
        // theta = (mu, v); the three lowest normal moment identities.
        m.d = 2;
        m.l = 3;
        m.obs_dim = 1;
        m.g = [](const double* x, const double* th, double* out) {
            const double mu = th[0], v = th[1], t = x[0];
            out[0] = t - mu;
            out[1] = t * t - mu * mu - v;
            out[2] = t * t * t - mu * mu * mu - 3.0 * mu * v;
        };
        m.g_jac = [](const double*, const double* th, double* out) {
            const double mu = th[0], v = th[1];
            // rows: dg_j/dmu, dg_j/dv
            out[0] = -1.0;                  out[1] = 0.0;
            out[2] = -2.0 * mu;             out[3] = -1.0;
            out[4] = -3.0 * mu * mu - 3.0 * v; out[5] = -3.0 * mu;
        };
        m.theta_box = {{-10.0, 10.0}, {1e-4, 100.0}};
        return m;
    }
    throw UnknownModelError(name);
}

void gbar_eval(const MomentModel& model, const double* x,
               const std::vector<double>& theta, double* out) {
    out[0] = 1.0;
    model.g(x, theta.data(), out + 1);
}

std::vector<double> gbar_eval(const MomentModel& model, const double* x,
                              const std::vector<double>& theta) {
    std::vector<double> out(model.l + 1);
    gbar_eval(model, x, theta, out.data());
    return out;
}

namespace {

bool parse_field(const std::string& field, double& out) {
    const char* s = field.c_str();
    char* end = nullptr;
    out = std::strtod(s, &end);
    if (end == s) return false;
    while (*end == ' ' || *end == '\t' || *end == '\r') ++end;
    return *end == '\0';
}

std::vector<std::string> split_row(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    fields.push_back(cur);
    // Trim leading whitespace per field; trailing is handled by the parser.
    for (auto& f : fields) {
        std::size_t i = 0;
        while (i < f.size() && (f[i] == ' ' || f[i] == '\t')) ++i;
        f.erase(0, i);
    }
    return fields;
}

bool blank(const std::string& line) {
    for (char c : line)
        if (c != ' ' && c != '\t' && c != '\r') return false;
    return true;
}

} // namespace

Sample load_sample(const std::string& path, int obs_dim) {
    if (obs_dim < 1) throw DimensionMismatchError("obs_dim must be positive");
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path, 0, 0);

    Sample s;
    s.obs_dim = obs_dim;
    std::string line;
    std::size_t rowno = 0;
    bool first_data_row = true;
    while (std::getline(in, line)) {
        ++rowno;
        if (blank(line)) continue;
        const auto fields = split_row(line);
        double v;
        if (first_data_row && !parse_field(fields[0], v)) {
            // Header row: skip once.
            first_data_row = false;
            continue;
        }
        first_data_row = false;
        if (static_cast<int>(fields.size()) != obs_dim)
            throw DimensionMismatchError(
                "row " + std::to_string(rowno) + " has " + std::to_string(fields.size()) +
                " columns, expected " + std::to_string(obs_dim));
        for (std::size_t c = 0; c < fields.size(); ++c) {
            if (!parse_field(fields[c], v))
                throw ParseError("non-numeric field '" + fields[c] + "'", rowno, c + 1);
            s.data.push_back(v);
        }
        ++s.n;
    }
    if (s.n == 0) throw ParseError("no data rows in " + path, rowno, 0);
    return s;
}

Sample sample_from_values(std::vector<double> values) {
    Sample s;
    s.obs_dim = 1;
    s.n = static_cast<int>(values.size());
    s.data = std::move(values);
    return s;
}

} // namespace mephd
