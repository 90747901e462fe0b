#pragma once

#include <array>
#include <cmath>
#include <complex>

#include <Eigen/Dense>

#include "zscat/errors.hpp"
#include "zscat/grid.hpp"

namespace zscat {

/// Value of a two-component state at one plane: the wavefunction component
/// psi and its conjugate momentum p = -(hbar^2 / 2m) dpsi/dz.
struct TwoComponentValue {
    complex psi{0.0, 0.0};
    complex p{0.0, 0.0};
};

/// Direction label of a mode: Forward moves (or decays) toward larger z.
enum class Direction { Forward, Backward };

/// Metric signature attached to a direction: +1 forward, -1 backward.
[[nodiscard]] inline double sigma(Direction d) {
    return d == Direction::Forward ? 1.0 : -1.0;
}

/// The indefinite 2x2 metric [[0, i], [-i, 0]] of the two-component space.
/// It is involutive (M^2 = I), so M^{-1} = M.
[[nodiscard]] inline Eigen::Matrix2cd metric() {
    Eigen::Matrix2cd m;
    const complex i(0.0, 1.0);
    m << complex(0.0, 0.0), i, -i, complex(0.0, 0.0);
    return m;
}

/// Indefinite inner product of two state values,
///     (a; b) = hbar^{-1} [ i conj(a.psi) b.p - i conj(a.p) b.psi ].
/// For a = b this is the probability flux carried through the plane.
[[nodiscard]] inline complex metric_pairing(const TwoComponentValue& a,
                                            const TwoComponentValue& b,
                                            const Units& units) {
    const complex i(0.0, 1.0);
    return (i * std::conj(a.psi) * b.p - i * std::conj(a.p) * b.psi) / units.hbar;
}

/// Oscillating mode of an open channel, flux-normalized:
///     psi = sqrt(m / (hbar k_z)) e^{ sigma i k_z z }
///     p   = -sigma (i/2) sqrt(hbar^3 k_z / m) e^{ sigma i k_z z }
/// Pairing table: (zeta'; zeta) = sigma(zeta) delta_{zeta' zeta}.
[[nodiscard]] inline TwoComponentValue open_mode(const Channel& ch, Direction d,
                                                 double z, const Units& units) {
    if (ch.kind != ChannelKind::Open)
        throw NotOpen("open_mode: channel is not open");
    const double s = sigma(d);
    const complex i(0.0, 1.0);
    const complex phase = std::exp(i * (s * ch.k_z * z));
    TwoComponentValue v;
    v.psi = std::sqrt(units.mass / (units.hbar * ch.k_z)) * phase;
    v.p = -s * 0.5 * i *
          std::sqrt(units.hbar * units.hbar * units.hbar * ch.k_z / units.mass) * phase;
    return v;
}

/// Evanescent mode of a closed channel:
///     X^zeta = [ sqrt(m / (hbar kappa)) ; sigma (1/2) sqrt(hbar^3 kappa / m) ]
///              * e^{ -sigma (i pi/4 + kappa z) }
/// Forward decays toward +z, Backward toward -z. Pairing table is purely
/// off-diagonal: (F; B) = (B; F) = 1, diagonal entries vanish.
[[nodiscard]] inline TwoComponentValue closed_mode(const Channel& ch, Direction d,
                                                   double z, const Units& units) {
    if (ch.kind != ChannelKind::Closed)
        throw NotClosed("closed_mode: channel is not closed");
    const double s = sigma(d);
    const complex i(0.0, 1.0);
    const complex factor = std::exp(-s * (i * (M_PI / 4.0) + ch.kappa * z));
    TwoComponentValue v;
    v.psi = std::sqrt(units.mass / (units.hbar * ch.kappa)) * factor;
    v.p = s * 0.5 *
          std::sqrt(units.hbar * units.hbar * units.hbar * ch.kappa / units.mass) * factor;
    return v;
}

/// Degenerate dipole pair spanning a channel exactly at threshold:
///     X1 = [ sqrt(m rho / hbar) ; 0 ]
///     X2 = [ sqrt(m / (rho hbar)) 2 i z ; -i sqrt(hbar^3 / (m rho)) ]
/// The pairing matrix is antidiagonal with unit entries; rho is a free
/// positive scale of the pair.
[[nodiscard]] inline std::array<TwoComponentValue, 2>
ghost_pair(const Channel& ch, double z, const Units& units, double rho = 1.0) {
    if (ch.kind != ChannelKind::Intermediate)
        throw NotIntermediate("ghost_pair: channel is not at threshold");
    if (!(rho > 0.0))
        throw ConfigError("ghost_pair: scale rho must be positive");
    const complex i(0.0, 1.0);
    TwoComponentValue x1, x2;
    x1.psi = std::sqrt(units.mass * rho / units.hbar);
    x1.p = 0.0;
    x2.psi = std::sqrt(units.mass / (rho * units.hbar)) * 2.0 * i * z;
    x2.p = -i * std::sqrt(units.hbar * units.hbar * units.hbar / (units.mass * rho));
    return {x1, x2};
}

/// Pseudo-adjoint with respect to the indefinite metric: W^# = M W^dagger M.
[[nodiscard]] inline Eigen::Matrix2cd pseudo_adjoint(const Eigen::Matrix2cd& w) {
    const Eigen::Matrix2cd m = metric();
    return m * w.adjoint() * m;
}

/// Max-norm distance from pseudo-Hermiticity, |W^# - W|.
[[nodiscard]] inline double pseudo_hermiticity_defect(const Eigen::Matrix2cd& w) {
    return (pseudo_adjoint(w) - w).cwiseAbs().maxCoeff();
}

/// Max-norm distance from pseudo-unitarity, |W^# W - I|.
[[nodiscard]] inline double pseudo_unitarity_defect(const Eigen::Matrix2cd& w) {
    return (pseudo_adjoint(w) * w - Eigen::Matrix2cd::Identity()).cwiseAbs().maxCoeff();
}

/// Plane-crossing time kernels of one propagating channel at plane z:
///     K[zeta'][zeta] = hbar^{-1} X^{zeta'}(z)^dagger M (1/i) d X^{zeta}(z) / d k_t ,
/// the sesquilinear kernel through which a plane set's amplitudes produce the
/// crossing-time moment. Indexing is [bra][ket] with F first.
///
/// Open channel (group-velocity structure, 1/k_z^2 interference terms):
///     K_FF = K_BB = m z / (hbar k_z)
///     K_FB = +(i m / (2 hbar k_z^2)) e^{-2 i k_z z}
///     K_BF = -(i m / (2 hbar k_z^2)) e^{+2 i k_z z}
/// Closed channel:
///     K_FF = -(m / (2 hbar kappa^2)) e^{-2 kappa z}
///     K_BB = +(m / (2 hbar kappa^2)) e^{+2 kappa z}
///     K_FB = +i m z / (hbar kappa)
///     K_BF = -i m z / (hbar kappa)
struct CrossingKernels {
    complex ff, fb, bf, bb;

    [[nodiscard]] complex at(Direction bra, Direction ket) const {
        if (bra == Direction::Forward)
            return ket == Direction::Forward ? ff : fb;
        return ket == Direction::Forward ? bf : bb;
    }
};

[[nodiscard]] inline CrossingKernels crossing_kernels(const Channel& ch, double z,
                                                      const Units& units) {
    const complex i(0.0, 1.0);
    CrossingKernels k;
    if (ch.kind == ChannelKind::Open) {
        const double kz = ch.k_z;
        const double diag = units.mass * z / (units.hbar * kz);
        const double mag = units.mass / (2.0 * units.hbar * kz * kz);
        k.ff = diag;
        k.bb = diag;
        k.fb = i * mag * std::exp(-2.0 * i * kz * z);
        k.bf = -i * mag * std::exp(2.0 * i * kz * z);
    } else if (ch.kind == ChannelKind::Closed) {
        const double ka = ch.kappa;
        const double mag = units.mass / (2.0 * units.hbar * ka * ka);
        k.ff = -mag * std::exp(-2.0 * ka * z);
        k.bb = mag * std::exp(2.0 * ka * z);
        k.fb = i * units.mass * z / (units.hbar * ka);
        k.bf = -i * units.mass * z / (units.hbar * ka);
    } else {
        throw NotPropagating("crossing_kernels: channel sits inside the threshold window");
    }
    return k;
}

} // namespace zscat
