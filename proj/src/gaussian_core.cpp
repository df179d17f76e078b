#include "cvqkd/gaussian_core.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace cvqkd {

namespace {

constexpr double kLn2 = 0.6931471805599453;

std::string matrix_to_string(const Eigen::MatrixXd& m) {
    std::ostringstream os;
    os << m;
    return os.str();
}

void check_mode_index(const CovarianceMatrix& v, int mode, const char* who) {
    if (mode < 0 || mode >= v.n_modes())
        throw std::invalid_argument(std::string(who) + ": mode index " +
                                    std::to_string(mode) + " out of range for " +
                                    std::to_string(v.n_modes()) + " modes");
}

// Indices of all quadratures except those of `mode`.
std::vector<int> kept_indices(int n_modes, int mode) {
    std::vector<int> keep;
    keep.reserve(2 * (n_modes - 1));
    for (int m = 0; m < n_modes; ++m) {
        if (m == mode) continue;
        keep.push_back(2 * m);
        keep.push_back(2 * m + 1);
    }
    return keep;
}

}  // namespace

CovarianceMatrix::CovarianceMatrix(Eigen::MatrixXd m) : m_(std::move(m)) {
    if (m_.rows() != m_.cols())
        throw std::invalid_argument("covariance matrix must be square, got " +
                                    std::to_string(m_.rows()) + "x" + std::to_string(m_.cols()));
    if (m_.rows() < 2 || m_.rows() % 2 != 0)
        throw std::invalid_argument("covariance matrix dimension must be even and >= 2, got " +
                                    std::to_string(m_.rows()));
    const double scale = std::max(1.0, m_.cwiseAbs().maxCoeff());
    const double asym = (m_ - m_.transpose()).cwiseAbs().maxCoeff();
    if (!(asym <= 1e-12 * scale))
        throw std::invalid_argument("covariance matrix not symmetric: relative asymmetry " +
                                    std::to_string(asym / scale));
    m_ = ((m_ + m_.transpose()) / 2.0).eval();
    n_ = static_cast<int>(m_.rows()) / 2;
}

double SymplecticSpectrum::min() const {
    if (values.empty()) throw std::logic_error("empty symplectic spectrum");
    return values.front();
}

double SymplecticSpectrum::product() const {
    double p = 1.0;
    for (double nu : values) p *= nu;
    return p;
}

CovarianceMatrix make_tmsv(double mu) {
    if (!(mu >= 1.0))
        throw std::domain_error("make_tmsv: mu must be >= 1, got " + std::to_string(mu));
    const double c = std::sqrt(mu * mu - 1.0);
    Eigen::MatrixXd v = Eigen::MatrixXd::Zero(4, 4);
    v.diagonal().setConstant(mu);
    v(0, 2) = v(2, 0) = c;
    v(1, 3) = v(3, 1) = -c;
    return CovarianceMatrix(std::move(v));
}

CovarianceMatrix make_eve_cm(double omega, double g, double gp) {
    if (!(omega >= 1.0))
        throw std::domain_error("make_eve_cm: omega must be >= 1, got " + std::to_string(omega));
    Eigen::MatrixXd v = Eigen::MatrixXd::Zero(4, 4);
    v.diagonal().setConstant(omega);
    v(0, 2) = v(2, 0) = g;
    v(1, 3) = v(3, 1) = gp;
    return CovarianceMatrix(std::move(v));
}

CovarianceMatrix apply_beamsplitter(const CovarianceMatrix& v, double T, int i, int j) {
    check_mode_index(v, i, "apply_beamsplitter");
    check_mode_index(v, j, "apply_beamsplitter");
    if (i == j)
        throw std::invalid_argument("apply_beamsplitter: modes must differ");
    if (!(T > 0.0 && T < 1.0))
        throw std::domain_error("apply_beamsplitter: T must lie in (0,1), got " + std::to_string(T));
    const double t = std::sqrt(T), r = std::sqrt(1.0 - T);
    Eigen::MatrixXd s = Eigen::MatrixXd::Identity(2 * v.n_modes(), 2 * v.n_modes());
    for (int k = 0; k < 2; ++k) {
        s(2 * i + k, 2 * i + k) = t;
        s(2 * i + k, 2 * j + k) = r;
        s(2 * j + k, 2 * j + k) = t;
        s(2 * j + k, 2 * i + k) = -r;
    }
    return CovarianceMatrix(s * v.mat() * s.transpose());
}

CovarianceMatrix append_vacuum_mode(const CovarianceMatrix& v) {
    const int d = 2 * v.n_modes();
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(d + 2, d + 2);
    out.topLeftCorner(d, d) = v.mat();
    out(d, d) = 1.0;
    out(d + 1, d + 1) = 1.0;
    return CovarianceMatrix(std::move(out));
}

SymplecticSpectrum symplectic_spectrum(const CovarianceMatrix& v) {
    const int n = v.n_modes();
    // Omega V, with Omega the direct sum of [[0,1],[-1,0]] blocks.
    Eigen::MatrixXd m(2 * n, 2 * n);
    for (int k = 0; k < n; ++k) {
        m.row(2 * k) = v.mat().row(2 * k + 1);
        m.row(2 * k + 1) = -v.mat().row(2 * k);
    }
    Eigen::EigenSolver<Eigen::MatrixXd> es(m, /*computeEigenvectors=*/false);
    if (es.info() != Eigen::Success)
        throw std::runtime_error("symplectic_spectrum: eigensolver failed on\n" +
                                 matrix_to_string(v.mat()));
    std::vector<double> mags(2 * n);
    for (int k = 0; k < 2 * n; ++k) mags[k] = std::abs(es.eigenvalues()[k]);
    std::sort(mags.begin(), mags.end());
    SymplecticSpectrum spec;
    spec.values.resize(n);
    for (int k = 0; k < n; ++k) {
        const double lo = mags[2 * k], hi = mags[2 * k + 1];
        if (hi - lo > 1e-9 * std::max(1.0, hi))
            throw std::runtime_error(
                "symplectic_spectrum: eigenvalue moduli do not pair (" + std::to_string(lo) +
                " vs " + std::to_string(hi) + ") for\n" + matrix_to_string(v.mat()));
        spec.values[k] = 0.5 * (lo + hi);
    }
    return spec;
}

double entropy_h(double nu) {
    if (!(nu >= 1.0 - kNuSlack))
        throw std::domain_error("entropy_h: nu must be >= 1, got " + std::to_string(nu));
    if (nu <= 1.0) return 0.0;
    if (nu >= 1e3) {
        // h(nu) = log2(e nu / 2) - [1/(24 m^2) + 1/(320 m^4)]/ln2,  m = nu/2.
        // The direct difference below cancels ~9 digits out here; the series
        // truncation error is O(m^-6).
        const double minv = 2.0 / nu;
        const double tail = (minv * minv / 24.0 + minv * minv * minv * minv / 320.0) / kLn2;
        return std::log2(nu / 2.0) + 1.0 / kLn2 - tail;
    }
    const double a = 0.5 * (nu + 1.0), b = 0.5 * (nu - 1.0);
    return a * std::log2(a) - b * std::log2(b);
}

double von_neumann_entropy(const CovarianceMatrix& v) {
    const auto values = symplectic_spectrum(v).values;
    // The solver's absolute error on a unit eigenvalue grows with the largest
    // eigenvalue present; widen the roundoff band accordingly before
    // rejecting a value as unphysical.
    const double slack = kNuSlack + 1e-12 * values.back();
    double s = 0.0;
    for (double nu : values) {
        if (!(nu >= 1.0 - slack))
            throw std::domain_error("von_neumann_entropy: symplectic eigenvalue " +
                                    std::to_string(nu) + " below 1");
        s += entropy_h(std::max(nu, 1.0));
    }
    return s;
}

CovarianceMatrix condition_heterodyne(const CovarianceMatrix& v, int mode) {
    check_mode_index(v, mode, "condition_heterodyne");
    if (v.n_modes() < 2)
        throw std::invalid_argument("condition_heterodyne: nothing left after measuring the only mode");
    const auto keep = kept_indices(v.n_modes(), mode);
    const int d = static_cast<int>(keep.size());
    Eigen::MatrixXd a(d, d), c(d, 2);
    Eigen::Matrix2d b;
    for (int r = 0; r < d; ++r) {
        for (int col = 0; col < d; ++col) a(r, col) = v(keep[r], keep[col]);
        c(r, 0) = v(keep[r], 2 * mode);
        c(r, 1) = v(keep[r], 2 * mode + 1);
    }
    b << v(2 * mode, 2 * mode) + 1.0, v(2 * mode, 2 * mode + 1),
         v(2 * mode + 1, 2 * mode), v(2 * mode + 1, 2 * mode + 1) + 1.0;
    Eigen::MatrixXd out = a - c * b.inverse() * c.transpose();
    return CovarianceMatrix(((out + out.transpose()) / 2.0).eval());
}

CovarianceMatrix condition_homodyne(const CovarianceMatrix& v, int mode, Quadrature quad) {
    check_mode_index(v, mode, "condition_homodyne");
    if (v.n_modes() < 2)
        throw std::invalid_argument("condition_homodyne: nothing left after measuring the only mode");
    const int k = 2 * mode + (quad == Quadrature::p ? 1 : 0);
    const double b = v(k, k);
    if (!(b > 1e-12))
        throw std::domain_error("condition_homodyne: measured variance is numerically zero (" +
                                std::to_string(b) + ")");
    const auto keep = kept_indices(v.n_modes(), mode);
    const int d = static_cast<int>(keep.size());
    Eigen::MatrixXd a(d, d);
    Eigen::VectorXd c(d);
    for (int r = 0; r < d; ++r) {
        for (int col = 0; col < d; ++col) a(r, col) = v(keep[r], keep[col]);
        c(r) = v(keep[r], k);
    }
    Eigen::MatrixXd out = a - (c * c.transpose()) / b;
    return CovarianceMatrix(((out + out.transpose()) / 2.0).eval());
}

PhysicalityReport check_physical(const CovarianceMatrix& v) {
    // |eig(Omega V)| >= 1 alone does not certify physicality: for an
    // indefinite V those eigenvalues turn real and their moduli can still
    // exceed 1.  Require V > 0 (up to roundoff) before reading the spectrum.
    const Eigen::VectorXd ev =
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(v.mat(), Eigen::EigenvaluesOnly)
            .eigenvalues();
    const double scale = std::max(1.0, std::max(std::abs(ev(0)), ev(ev.size() - 1)));
    if (ev(0) < -kNuSlack * scale) return {false, 0.0};
    const auto spec = symplectic_spectrum(v);
    const double slack = kNuSlack + 1e-12 * spec.values.back();
    const double min_nu = spec.min();
    return {min_nu >= 1.0 - slack, min_nu};
}

}  // namespace cvqkd
