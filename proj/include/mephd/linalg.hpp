// Small dense linear algebra: row-major matrices, LU solves, Householder QR
// (min-norm solutions and null-space bases), and a Jacobi eigenvalue routine
// for symmetric matrices. Dimensions in this project are small (constraint
// systems of size l+1 <= 6, reduced Newton systems up to ~200), so plain
// O(n^3) dense algorithms are used throughout.

#ifndef MEPHD_LINALG_HPP
#define MEPHD_LINALG_HPP

#include <cstddef>
#include <vector>

namespace mephd::la {

using Vec = std::vector<double>;

struct Mat {
    int rows = 0;
    int cols = 0;
    Vec a;

    Mat() = default;
    Mat(int r, int c) : rows(r), cols(c), a(static_cast<std::size_t>(r) * c, 0.0) {}

    double& operator()(int i, int j) { return a[static_cast<std::size_t>(i) * cols + j]; }
    double operator()(int i, int j) const { return a[static_cast<std::size_t>(i) * cols + j]; }

    static Mat identity(int n);
};

Vec matvec(const Mat& m, const Vec& x);
Vec matvec_t(const Mat& m, const Vec& x); // m^T x
Mat matmul(const Mat& a, const Mat& b);
Mat transpose(const Mat& m);

double inf_norm(const Vec& v);
double inf_norm(const Mat& m);

// Solve A x = b by LU with partial pivoting. Throws SingularMatrixError.
Vec lu_solve(Mat a, Vec b);
// Solve A X = B column-wise (shares one factorization).
Mat lu_solve_multi(Mat a, Mat b);
Mat inverse(const Mat& a);

// Householder QR of an m x n matrix with m >= n. Stores the reflectors
// compactly; apply_q / apply_qt act on length-m vectors in place.
struct QR {
    int m = 0;
    int n = 0;
    Mat v;     // reflector columns (m x n)
    Vec beta;  // reflector scales
    Mat r;     // n x n upper triangular
    int rank = 0;

    void apply_q(Vec& x) const;  // x <- Q x
    void apply_qt(Vec& x) const; // x <- Q^T x
};

QR qr_factor(const Mat& a);

// Given the QR of C^T (C is k x m, k < m, full row rank), the minimum-norm
// solution of C q = b is Q [R^{-T} b; 0].
Vec qr_min_norm(const QR& qr, const Vec& b);

// Columns k..m-1 of Q: an orthonormal basis of the null space of C.
Mat qr_null_space(const QR& qr);

// Smallest eigenvalue of a symmetric matrix (cyclic Jacobi).
double sym_eig_min(Mat a);

} // namespace mephd::la

#endif
