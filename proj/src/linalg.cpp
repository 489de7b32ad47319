#include "sdebridge/linalg.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <stdexcept>

namespace sdebridge {

namespace {

Mat pade_eval(const Mat& A, const double* b, int degree) {
    const Eigen::Index n = A.rows();
    const Mat I = Mat::Identity(n, n);
    const Mat A2 = A * A;
    Mat U, V;
    if (degree == 13) {
        const Mat A4 = A2 * A2;
        const Mat A6 = A4 * A2;
        U = A * (A6 * (b[13] * A6 + b[11] * A4 + b[9] * A2) +
                 b[7] * A6 + b[5] * A4 + b[3] * A2 + b[1] * I);
        V = A6 * (b[12] * A6 + b[10] * A4 + b[8] * A2) +
            b[6] * A6 + b[4] * A4 + b[2] * A2 + b[0] * I;
    } else {
        Mat Apow = I;
        U = Mat::Zero(n, n);
        V = Mat::Zero(n, n);
        // U = A * sum b[2k+1] A^{2k}, V = sum b[2k] A^{2k}
        for (int k = 0; 2 * k <= degree; ++k) {
            V += b[2 * k] * Apow;
            if (2 * k + 1 <= degree) U += b[2 * k + 1] * Apow;
            if (2 * (k + 1) <= degree) Apow = Apow * A2;
        }
        U = A * U;
    }
    // (V - U)^{-1} (V + U)
    return (V - U).partialPivLu().solve(V + U);
}

}  // namespace

Mat expm(const Mat& A) {
    if (A.rows() != A.cols()) throw std::invalid_argument("expm: matrix must be square");
    if (A.rows() == 0) return A;
    if (!A.allFinite()) throw std::invalid_argument("expm: non-finite entries");
    if (A.rows() == 1) return (Mat(1, 1) << std::exp(A(0, 0))).finished();

    static const double b3[] = {120, 60, 12, 1};
    static const double b5[] = {30240, 15120, 3360, 420, 30, 1};
    static const double b7[] = {17297280, 8648640, 1995840, 277200, 25200, 1512, 56, 1};
    static const double b9[] = {17643225600., 8821612800., 2075673600., 302702400.,
                                30270240., 2162160., 110880., 3960., 90., 1.};
    static const double b13[] = {64764752532480000., 32382376266240000., 7771770303897600.,
                                 1187353796428800., 129060195264000., 10559470521600.,
                                 670442572800., 33522128640., 1323241920., 40840800.,
                                 960960., 16380., 182., 1.};

    const double nrm = A.cwiseAbs().colwise().sum().maxCoeff();  // 1-norm
    if (nrm <= 1.495585217958292e-2) return pade_eval(A, b3, 3);
    if (nrm <= 2.539398330063230e-1) return pade_eval(A, b5, 5);
    if (nrm <= 9.504178996162932e-1) return pade_eval(A, b7, 7);
    if (nrm <= 2.097847961257068) return pade_eval(A, b9, 9);

    const double theta13 = 5.371920351148152;
    int s = 0;
    double scaled = nrm;
    while (scaled > theta13) {
        scaled *= 0.5;
        ++s;
    }
    Mat E = pade_eval(A / std::pow(2.0, s), b13, 13);
    for (int i = 0; i < s; ++i) E = E * E;
    return E;
}

bool lyapunov_solvable(const Mat& B) {
    const Eigen::Index n = B.rows();
    Mat M = Mat::Zero(n * n, n * n);
    const Mat I = Mat::Identity(n, n);
    // vec(B X + X B') = (I (+) B + B (+) I) vec(X)
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            for (Eigen::Index k = 0; k < n; ++k) {
                M(j * n + i, j * n + k) += B(i, k);
                M(j * n + i, k * n + i) += B(j, k);
            }
    Eigen::FullPivLU<Mat> lu(M);
    lu.setThreshold(1e-10);
    return lu.isInvertible();
}

Mat solve_lyapunov(const Mat& B, const Mat& C) {
    if (B.rows() != B.cols() || C.rows() != C.cols() || B.rows() != C.rows())
        throw std::invalid_argument("solve_lyapunov: dimension mismatch");
    const Eigen::Index n = B.rows();
    Mat M = Mat::Zero(n * n, n * n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            for (Eigen::Index k = 0; k < n; ++k) {
                M(j * n + i, j * n + k) += B(i, k);
                M(j * n + i, k * n + i) += B(j, k);
            }
    Eigen::FullPivLU<Mat> lu(M);
    lu.setThreshold(1e-10);
    if (!lu.isInvertible())
        throw std::runtime_error("solve_lyapunov: operator singular (eigenvalue pair sums to zero)");
    Vec rhs(n * n);
    for (Eigen::Index j = 0; j < n; ++j) rhs.segment(j * n, n) = -C.col(j);
    const Vec x = lu.solve(rhs);
    Mat X(n, n);
    for (Eigen::Index j = 0; j < n; ++j) X.col(j) = x.segment(j * n, n);
    const double res = (B * X + X * B.transpose() + C).norm();
    if (!(res <= 1e-8 * (1.0 + C.norm())))
        throw std::runtime_error("solve_lyapunov: residual too large, operator near-singular");
    return 0.5 * (X + X.transpose());
}

const GaussLegendre& gauss_legendre(int n) {
    static std::map<int, GaussLegendre> cache;
    static std::mutex mu;
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(n);
    if (it != cache.end()) return it->second;

    GaussLegendre gl;
    gl.nodes.resize(n);
    gl.weights.resize(n);
    for (int i = 0; i < n; ++i) {
        // Chebyshev initial guess, Newton refinement on P_n.
        double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
        double dp = 0;
        for (int it2 = 0; it2 < 100; ++it2) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                const double p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-15) break;
        }
        gl.nodes(i) = x;
        gl.weights(i) = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    return cache.emplace(n, std::move(gl)).first->second;
}

namespace {

template <typename T>
T gl_panels(const std::function<T(double)>& f, double a, double b, int panels, const T& zero) {
    const GaussLegendre& gl = gauss_legendre(16);
    T acc = zero;
    const double w = (b - a) / panels;
    for (int p = 0; p < panels; ++p) {
        const double lo = a + p * w;
        const double mid = lo + 0.5 * w;
        for (int i = 0; i < 16; ++i)
            acc += (0.5 * w * gl.weights(i)) * f(mid + 0.5 * w * gl.nodes(i));
    }
    return acc;
}

template <typename T>
T integrate_adaptive(const std::function<T(double)>& f, double a, double b, double tol,
                     int max_nodes, const T& zero) {
    T prev = gl_panels(f, a, b, 1, zero);
    for (int panels = 2; panels * 16 <= max_nodes; panels *= 2) {
        T cur = gl_panels(f, a, b, panels, zero);
        if ((cur - prev).norm() <= tol * (1.0 + cur.norm())) return cur;
        prev = std::move(cur);
    }
    return prev;
}

}  // namespace

Mat integrate_matrix(const std::function<Mat(double)>& f, double a, double b, double tol,
                     int max_nodes) {
    const Mat probe = f(a);
    return integrate_adaptive<Mat>(f, a, b, tol, max_nodes,
                                   Mat::Zero(probe.rows(), probe.cols()));
}

Vec integrate_vector(const std::function<Vec(double)>& f, double a, double b, double tol,
                     int max_nodes) {
    const Vec probe = f(a);
    return integrate_adaptive<Vec>(f, a, b, tol, max_nodes, Vec::Zero(probe.size()));
}

Mat spd_solve(const Mat& S, const Mat& rhs, const std::string& context) {
    Eigen::LLT<Mat> llt(S);
    if (llt.info() != Eigen::Success)
        throw std::runtime_error(context + ": matrix not positive definite");
    return llt.solve(rhs);
}

double spd_logdet(const Mat& S, const std::string& context) {
    Eigen::LLT<Mat> llt(S);
    if (llt.info() != Eigen::Success)
        throw std::runtime_error(context + ": matrix not positive definite");
    return 2.0 * Mat(llt.matrixL()).diagonal().array().log().sum();
}

double gaussian_logpdf(const Vec& x, const Vec& mean, const Mat& S, const std::string& context) {
    const Eigen::Index d = x.size();
    Eigen::LLT<Mat> llt(S);
    if (llt.info() != Eigen::Success)
        throw std::runtime_error(context + ": covariance not positive definite");
    const Vec r = x - mean;
    const Vec half = llt.matrixL().solve(r);
    const double logdet = 2.0 * Mat(llt.matrixL()).diagonal().array().log().sum();
    return -0.5 * (d * std::log(2.0 * M_PI) + logdet + half.squaredNorm());
}

}  // namespace sdebridge
