#pragma once

// Gaussian-state covariance matrices and the handful of symplectic
// operations the key-rate machinery needs.  Conventions, used everywhere:
//   * shot-noise units, vacuum variance = 1
//   * quadrature ordering (q1, p1, q2, p2, ..., qn, pn)
//   * a state is physical iff every symplectic eigenvalue nu >= 1

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <vector>

namespace cvqkd {

// Symplectic eigenvalues below 1 by less than this slack are treated as 1
// (eigensolver roundoff), below that the state is unphysical.
inline constexpr double kNuSlack = 1e-9;

enum class Quadrature { q, p };

// Real symmetric 2n x 2n matrix wrapper.  The constructor enforces shape and
// symmetry (relative infinity-norm asymmetry <= 1e-12), then symmetrizes
// exactly so downstream algebra never reintroduces the roundoff.
class CovarianceMatrix {
public:
    explicit CovarianceMatrix(Eigen::MatrixXd m);

    int n_modes() const { return n_; }
    const Eigen::MatrixXd& mat() const { return m_; }
    double operator()(int r, int c) const { return m_(r, c); }

private:
    Eigen::MatrixXd m_;
    int n_;
};

// One value per mode, sorted ascending.
struct SymplecticSpectrum {
    std::vector<double> values;

    double min() const;
    double product() const;  // equals sqrt(det V) for a valid spectrum
};

struct PhysicalityReport {
    bool physical;   // min_nu >= 1 minus the roundoff band (see check_physical)
    double min_nu;
};

// Two-mode squeezed vacuum with thermal variance mu >= 1 per arm:
//   V = [[mu I, sqrt(mu^2-1) Z], [sqrt(mu^2-1) Z, mu I]],  Z = diag(1,-1).
CovarianceMatrix make_tmsv(double mu);

// Eve's two ancillas: variance omega each, q-correlation g, p-correlation g'.
//   V = [[omega I, G], [G, omega I]],  G = diag(g, g').
// No physicality requirement is imposed here beyond omega >= 1; use
// attack_model::validate for the full constraint.
CovarianceMatrix make_eve_cm(double omega, double g, double gp);

// Mix modes i and j on a beam splitter of transmissivity T in (0,1):
//   out_i = sqrt(T) in_i + sqrt(1-T) in_j
//   out_j = sqrt(T) in_j - sqrt(1-T) in_i
CovarianceMatrix apply_beamsplitter(const CovarianceMatrix& v, double T, int i, int j);

// Tensor a vacuum mode onto the end (index n_modes of the result).
CovarianceMatrix append_vacuum_mode(const CovarianceMatrix& v);

// |eigenvalues(i Omega V)| paired and averaged.  Throws std::runtime_error
// if the eigensolver fails or a pair disagrees by more than 1e-9 relative.
SymplecticSpectrum symplectic_spectrum(const CovarianceMatrix& v);

// Entropy of one bosonic mode with symplectic eigenvalue nu, in bits:
//   h(nu) = ((nu+1)/2) log2((nu+1)/2) - ((nu-1)/2) log2((nu-1)/2).
// Values in [1 - kNuSlack, 1) clamp to 1 (h = 0); below that throws
// std::domain_error.  Large nu switches to an asymptotic series so the
// result stays accurate where the direct difference loses digits.
double entropy_h(double nu);

// Sum of entropy_h over the symplectic spectrum, in bits.  Eigenvalues below
// 1 by at most kNuSlack + 1e-12 * (largest eigenvalue) count as 1: the
// solver's absolute error on a unit eigenvalue scales with the largest one,
// so the fixed entropy_h band alone would reject physical states whose
// spectrum spans many orders of magnitude.
double von_neumann_entropy(const CovarianceMatrix& v);

// State of the remaining modes after an ideal heterodyne measurement of
// `mode`:  A - C (B + I)^{-1} C^T on the 2x2 block decomposition.
CovarianceMatrix condition_heterodyne(const CovarianceMatrix& v, int mode);

// State of the remaining modes after an ideal homodyne measurement of one
// quadrature of `mode`:  A - c c^T / b with b the measured diagonal entry.
// Throws std::domain_error if b is numerically zero.
CovarianceMatrix condition_homodyne(const CovarianceMatrix& v, int mode, Quadrature quad);

// Physical iff V > 0 (up to roundoff) and min_nu >= 1 - (kNuSlack + 1e-12 *
// largest symplectic eigenvalue); the widening mirrors von_neumann_entropy.
// For an indefinite V the symplectic spectrum is meaningless and min_nu is
// reported as 0.
PhysicalityReport check_physical(const CovarianceMatrix& v);

}  // namespace cvqkd
