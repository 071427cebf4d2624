#include "mephd/linalg.hpp"

#include <algorithm>
#include <cmath>

#include "mephd/errors.hpp"

namespace mephd::la {

Mat Mat::identity(int n) {
    Mat m(n, n);
    for (int i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Vec matvec(const Mat& m, const Vec& x) {
    Vec y(m.rows, 0.0);
    for (int i = 0; i < m.rows; ++i) {
        double s = 0.0;
        for (int j = 0; j < m.cols; ++j) s += m(i, j) * x[j];
        y[i] = s;
    }
    return y;
}

Vec matvec_t(const Mat& m, const Vec& x) {
    Vec y(m.cols, 0.0);
    for (int i = 0; i < m.rows; ++i) {
        const double xi = x[i];
        for (int j = 0; j < m.cols; ++j) y[j] += m(i, j) * xi;
    }
    return y;
}

Mat matmul(const Mat& a, const Mat& b) {
    Mat c(a.rows, b.cols);
    for (int i = 0; i < a.rows; ++i)
        for (int k = 0; k < a.cols; ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            for (int j = 0; j < b.cols; ++j) c(i, j) += aik * b(k, j);
        }
    return c;
}

Mat transpose(const Mat& m) {
    Mat t(m.cols, m.rows);
    for (int i = 0; i < m.rows; ++i)
        for (int j = 0; j < m.cols; ++j) t(j, i) = m(i, j);
    return t;
}

double inf_norm(const Vec& v) {
    double n = 0.0;
    for (double x : v) n = std::max(n, std::fabs(x));
    return n;
}

double inf_norm(const Mat& m) {
    double n = 0.0;
    for (int i = 0; i < m.rows; ++i) {
        double row = 0.0;
        for (int j = 0; j < m.cols; ++j) row += std::fabs(m(i, j));
        n = std::max(n, row);
    }
    return n;
}

namespace {

// In-place LU with partial pivoting; perm holds row swaps.
void lu_factor(Mat& a, std::vector<int>& perm) {
    const int n = a.rows;
    perm.resize(n);
    double scale = inf_norm(a);
    if (scale == 0.0) throw SingularMatrixError("zero matrix in LU factorization");
    const double tol = 1e-13 * scale;
    for (int k = 0; k < n; ++k) {
        int p = k;
        double best = std::fabs(a(k, k));
        for (int i = k + 1; i < n; ++i) {
            const double v = std::fabs(a(i, k));
            if (v > best) { best = v; p = i; }
        }
        if (best <= tol) throw SingularMatrixError("numerically singular matrix");
        perm[k] = p;
        if (p != k)
            for (int j = 0; j < n; ++j) std::swap(a(k, j), a(p, j));
        const double piv = a(k, k);
        for (int i = k + 1; i < n; ++i) {
            const double f = a(i, k) / piv;
            a(i, k) = f;
            for (int j = k + 1; j < n; ++j) a(i, j) -= f * a(k, j);
        }
    }
}

void lu_apply(const Mat& a, const std::vector<int>& perm, Vec& b) {
    const int n = a.rows;
    for (int k = 0; k < n; ++k)
        if (perm[k] != k) std::swap(b[k], b[perm[k]]);
    for (int i = 1; i < n; ++i) {
        double s = b[i];
        for (int j = 0; j < i; ++j) s -= a(i, j) * b[j];
        b[i] = s;
    }
    for (int i = n - 1; i >= 0; --i) {
        double s = b[i];
        for (int j = i + 1; j < n; ++j) s -= a(i, j) * b[j];
        b[i] = s / a(i, i);
    }
}

} // namespace

Vec lu_solve(Mat a, Vec b) {
    if (a.rows != a.cols || static_cast<int>(b.size()) != a.rows)
        throw DimensionMismatchError("lu_solve: shape mismatch");
    std::vector<int> perm;
    lu_factor(a, perm);
    lu_apply(a, perm, b);
    return b;
}

Mat lu_solve_multi(Mat a, Mat b) {
    if (a.rows != a.cols || b.rows != a.rows)
        throw DimensionMismatchError("lu_solve_multi: shape mismatch");
    std::vector<int> perm;
    lu_factor(a, perm);
    Vec col(b.rows);
    for (int j = 0; j < b.cols; ++j) {
        for (int i = 0; i < b.rows; ++i) col[i] = b(i, j);
        lu_apply(a, perm, col);
        for (int i = 0; i < b.rows; ++i) b(i, j) = col[i];
    }
    return b;
}

Mat inverse(const Mat& a) {
    return lu_solve_multi(a, Mat::identity(a.rows));
}

QR qr_factor(const Mat& a) {
    QR qr;
    qr.m = a.rows;
    qr.n = a.cols;
    qr.v = Mat(a.rows, a.cols);
    qr.beta.assign(a.cols, 0.0);
    Mat work = a;
    const double scale = std::max(inf_norm(a), 1.0);
    const double tol = 1e-13 * scale;
    for (int k = 0; k < a.cols; ++k) {
        // Householder vector annihilating work(k+1..m-1, k).
        double norm = 0.0;
        for (int i = k; i < a.rows; ++i) norm += work(i, k) * work(i, k);
        norm = std::sqrt(norm);
        const double akk = work(k, k);
        double alpha = (akk >= 0.0) ? -norm : norm;
        if (norm > tol) ++qr.rank;
        Vec v(a.rows, 0.0);
        v[k] = akk - alpha;
        for (int i = k + 1; i < a.rows; ++i) v[i] = work(i, k);
        double vtv = 0.0;
        for (int i = k; i < a.rows; ++i) vtv += v[i] * v[i];
        const double beta = (vtv > 0.0) ? 2.0 / vtv : 0.0;
        for (int i = 0; i < a.rows; ++i) qr.v(i, k) = v[i];
        qr.beta[k] = beta;
        // Apply reflector to the remaining columns.
        for (int j = k; j < a.cols; ++j) {
            double s = 0.0;
            for (int i = k; i < a.rows; ++i) s += v[i] * work(i, j);
            s *= beta;
            for (int i = k; i < a.rows; ++i) work(i, j) -= s * v[i];
        }
    }
    qr.r = Mat(a.cols, a.cols);
    for (int i = 0; i < a.cols; ++i)
        for (int j = i; j < a.cols; ++j) qr.r(i, j) = work(i, j);
    return qr;
}

void QR::apply_qt(Vec& x) const {
    for (int k = 0; k < n; ++k) {
        double s = 0.0;
        for (int i = k; i < m; ++i) s += v(i, k) * x[i];
        s *= beta[k];
        for (int i = k; i < m; ++i) x[i] -= s * v(i, k);
    }
}

void QR::apply_q(Vec& x) const {
    for (int k = n - 1; k >= 0; --k) {
        double s = 0.0;
        for (int i = k; i < m; ++i) s += v(i, k) * x[i];
        s *= beta[k];
        for (int i = k; i < m; ++i) x[i] -= s * v(i, k);
    }
}

Vec qr_min_norm(const QR& qr, const Vec& b) {
    const int k = qr.n;
    if (static_cast<int>(b.size()) != k)
        throw DimensionMismatchError("qr_min_norm: rhs size mismatch");
    // Forward-substitute R^T z = b.
    Vec z(k, 0.0);
    for (int i = 0; i < k; ++i) {
        double s = b[i];
        for (int j = 0; j < i; ++j) s -= qr.r(j, i) * z[j];
        const double d = qr.r(i, i);
        if (std::fabs(d) <= 1e-13 * std::max(1.0, inf_norm(qr.r)))
            throw SingularMatrixError("rank-deficient constraint matrix");
        z[i] = s / d;
    }
    Vec q(qr.m, 0.0);
    for (int i = 0; i < k; ++i) q[i] = z[i];
    qr.apply_q(q);
    return q;
}

Mat qr_null_space(const QR& qr) {
    const int k = qr.n;
    Mat z(qr.m, qr.m - k);
    Vec e(qr.m, 0.0);
    for (int j = 0; j < qr.m - k; ++j) {
        std::fill(e.begin(), e.end(), 0.0);
        e[k + j] = 1.0;
        qr.apply_q(e);
        for (int i = 0; i < qr.m; ++i) z(i, j) = e[i];
    }
    return z;
}

double sym_eig_min(Mat a) {
    const int n = a.rows;
    if (n == 0) return 0.0;
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (int p = 0; p < n; ++p)
            for (int q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
        if (off < 1e-24 * std::max(1.0, inf_norm(a))) break;
        for (int p = 0; p < n; ++p)
            for (int q = p + 1; q < n; ++q) {
                if (std::fabs(a(p, q)) < 1e-300) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (int i = 0; i < n; ++i) {
                    const double aip = a(i, p), aiq = a(i, q);
                    a(i, p) = c * aip - s * aiq;
                    a(i, q) = s * aip + c * aiq;
                }
                for (int i = 0; i < n; ++i) {
                    const double api = a(p, i), aqi = a(q, i);
                    a(p, i) = c * api - s * aqi;
                    a(q, i) = s * api + c * aqi;
                }
            }
    }
    double mn = a(0, 0);
    for (int i = 1; i < n; ++i) mn = std::min(mn, a(i, i));
    return mn;
}

} // namespace mephd::la
