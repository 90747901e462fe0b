#pragma once

// Independent reference computations used to pin engine results. Everything
// in this header is derived from textbook matching/quadrature arguments with
// plain complex arithmetic, deliberately sharing no code with the engine.

#include <cmath>
#include <complex>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

using complex = std::complex<double>;

/// Complex sinc-like helpers valid for complex wavenumbers.
inline complex cos_qz(complex q, double z) { return std::cos(q * z); }
inline complex sinc_qz(complex q, double z) {
    // sin(q z) / q, finite at q -> 0
    if (std::abs(q) * std::abs(z) < 1e-8) return z * (1.0 - q * q * z * z / 6.0);
    return std::sin(q * z) / q;
}

/// Global transmission/reflection amplitudes of a square barrier of height v0
/// on [0, L] for a wave with energy E = hbar * k_t, from 2x2 wavefunction
/// matching. Conventions: incoming exp(i k z), reflected r exp(-i k z),
/// transmitted t exp(i k z) with z-anchored (global) phases.
struct BarrierAmplitudes {
    complex t;
    complex r;
};

inline BarrierAmplitudes square_barrier(double k_t, double v0, double length,
                                        double hbar = 1.0, double mass = 1.0) {
    const double e = hbar * k_t;
    const double k = std::sqrt(2.0 * mass * e) / hbar;  // assumes open channel
    const complex q = std::sqrt(complex(2.0 * mass * (e - v0), 0.0)) / hbar;

    // Propagation of (psi, psi') across the interior of the barrier.
    Eigen::Matrix2cd p;
    p << cos_qz(q, length), sinc_qz(q, length), -q * q * sinc_qz(q, length), cos_qz(q, length);

    // Plane-wave basis (psi, psi') = M (A e^{ikz}, B e^{-ikz}) at z = 0.
    const complex i(0.0, 1.0);
    Eigen::Matrix2cd m, minv;
    m << 1, 1, i * k, -i * k;
    minv = m.inverse();
    const Eigen::Matrix2cd w = minv * p * m;  // (C', D') at local z=L from (A, B)

    // Incoming A = 1 from the left, nothing incoming from the right (D = 0).
    const complex b = -w(1, 0) / w(1, 1);
    const complex c_local = w(0, 0) + w(0, 1) * b;
    BarrierAmplitudes out;
    out.r = b;                                        // e^{-ikz} is z-anchored at 0
    out.t = c_local * std::exp(-i * k * length);      // re-anchor e^{ik(z-L)} -> e^{ikz}
    return out;
}

/// Closed-form transmitted intensity of the square barrier for E < v0:
///     |t|^2 = 1 / (1 + v0^2 sinh^2(kappa L) / (4 E (v0 - E)))
inline double square_barrier_intensity(double k_t, double v0, double length,
                                       double hbar = 1.0, double mass = 1.0) {
    const double e = hbar * k_t;
    const double kappa = std::sqrt(2.0 * mass * (v0 - e)) / hbar;
    const double s = std::sinh(kappa * length);
    return 1.0 / (1.0 + v0 * v0 * s * s / (4.0 * e * (v0 - e)));
}

/// Frozen reference point: v0 = 1, L = 1, E = v0/2, hbar = m = 1 gives
/// kappa = 1 and |t|^2 = 1 / cosh^2(1).
inline constexpr double kBarrierHalfHeightIntensity = 0.41997434161402614;

/// Free-space component transfer matrix of one channel over dz:
///     psi'' = -disc psi  with p = -(hbar^2 / 2m) psi' .
inline Eigen::Matrix2cd free_transfer(double disc, double dz, double hbar, double mass) {
    const complex q = std::sqrt(complex(disc, 0.0));
    Eigen::Matrix2cd u;
    const complex c = cos_qz(q, dz);
    const complex s = sinc_qz(q, dz);  // sin(q dz)/q
    u(0, 0) = c;
    u(0, 1) = -(2.0 * mass / (hbar * hbar)) * s;
    u(1, 0) = (hbar * hbar / (2.0 * mass)) * q * q * s;
    u(1, 1) = c;
    return u;
}

/// Stationary-phase transmission delay: d(arg t)/dk_t by central differences
/// (phases unwrapped) plus the free traversal between the slab faces.
inline double stationary_phase_delay(double k_t, double v0, double length,
                                     double z1, double z2, double dk,
                                     double hbar = 1.0, double mass = 1.0) {
    const complex tp = square_barrier(k_t + dk, v0, length, hbar, mass).t;
    const complex tm = square_barrier(k_t - dk, v0, length, hbar, mass).t;
    double dphi = std::arg(tp) - std::arg(tm);
    while (dphi > M_PI) dphi -= 2.0 * M_PI;
    while (dphi < -M_PI) dphi += 2.0 * M_PI;
    const double kz = std::sqrt(2.0 * mass * hbar * k_t) / hbar;
    return dphi / (2.0 * dk) + mass * (z2 - z1) / (hbar * kz);
}

/// Composite-trapezoid reference on explicit samples.
inline double trapezoid(const std::vector<double>& f, double h) {
    double sum = 0.0;
    for (std::size_t i = 0; i + 1 < f.size(); ++i) sum += 0.5 * h * (f[i] + f[i + 1]);
    return sum;
}

} // namespace oracle
