#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "zscat/errors.hpp"
#include "zscat/grid.hpp"
#include "zscat/modes.hpp"
#include "zscat/potential.hpp"

namespace zscat {

/// Two-component field sampled on the channel grid at one plane.
struct PlaneState {
    double z = 0.0;
    Eigen::VectorXcd psi;  ///< wavefunction components, one per channel
    Eigen::VectorXcd p;    ///< momentum components, -(hbar^2/2m) dpsi/dz
};

/// Linear map of stacked components [psi; p] from plane z_a to plane z_b.
struct TransferMatrix {
    double z_a = 0.0;
    double z_b = 0.0;
    Eigen::MatrixXcd u;  ///< 2N x 2N, component ordering [psi(0..N-1); p(0..N-1)]
};

/// Scattering form of a segment: mode-coefficient maps over all channels.
/// Inputs are forward coefficients at z_a and backward coefficients at z_b;
/// outputs are forward at z_b and backward at z_a. Coefficients refer to the
/// globally normalized modes, so a free segment is exactly the identity.
struct SegmentScattering {
    double z_a = 0.0;
    double z_b = 0.0;
    Eigen::MatrixXcd t_ff;  ///< forward out  <- forward in
    Eigen::MatrixXcd r_fb;  ///< forward out  <- backward in
    Eigen::MatrixXcd r_bf;  ///< backward out <- forward in
    Eigen::MatrixXcd t_bb;  ///< backward out <- backward in
};

/// Knobs of the propagation core.
struct PropagationOptions {
    double tolerance = 1e-11;   ///< Richardson target for transfer entries
    double kappa_cap = 5.0;     ///< max allowed kappa * segment length
    int initial_steps = 8;      ///< starting step count of the halving loop
    long max_steps = 1L << 20;  ///< per-segment step budget
};

namespace detail {

/// Right-hand-side applier for the channel-space evolution
///     dpsi_i/dz = -(2m/hbar^2) p_i
///     dp_i/dz   = (hbar^2/2m) disc_i psi_i - sum_j Vt_ij(z) psi_j
/// where Vt is the quadrature-dressed coupling
///     Vt_ij = sqrt(w_j / w_i) V_ij .
/// The dressing makes the discrete weighted pairing an exact invariant of the
/// flow (it is the plain coupling expressed in sqrt(w)-scaled variables); for
/// uniform interior weights it coincides with the plain potential matrix.
class RhsApplier {
public:
    RhsApplier(const ChannelGrid& grid, const PotentialModel& model)
        : grid_(grid), model_(model) {
        model_.validate();
        const int n = grid_.size();
        const double pref = grid_.units.hbar * grid_.units.hbar / (2.0 * grid_.units.mass);
        disc_coef_.resize(n);
        for (int i = 0; i < n; ++i) disc_coef_(i) = pref * grid_.channels[i].disc;
        psi_coef_ = -2.0 * grid_.units.mass / (grid_.units.hbar * grid_.units.hbar);

        if (!model_.driven()) return;
        const int steps = frequency_steps(model_, grid_);
        const int max_lattice = grid_.lattice_index.back();
        std::vector<int> at_lattice(static_cast<std::size_t>(max_lattice) + 1, -1);
        for (int i = 0; i < n; ++i) at_lattice[grid_.lattice_index[i]] = i;
        bands_.reserve(model_.harmonics.size());
        for (const auto& h : model_.harmonics) {
            Band band;
            band.harmonic = &h;
            const int offset = h.n * steps;
            for (int i = 0; i < n; ++i) {
                const int j_lattice = grid_.lattice_index[i] - offset;
                if (j_lattice < 0 || j_lattice > max_lattice) continue;
                const int j = at_lattice[j_lattice];
                if (j < 0) continue;
                BandEntry e;
                e.i = i;
                e.j = j;
                e.dress_ij = std::sqrt(grid_.weights[j] / grid_.weights[i]);
                e.dress_ji = 1.0 / e.dress_ij;
                band.entries.push_back(e);
            }
            bands_.push_back(std::move(band));
        }
    }

    [[nodiscard]] const ChannelGrid& grid() const { return grid_; }

    /// out = d/dz [top; bot] for a block of stacked column states (2N x m).
    void apply(double z, const Eigen::MatrixXcd& x, Eigen::MatrixXcd& out) const {
        const int n = grid_.size();
        const auto x_top = x.topRows(n);
        const auto x_bot = x.bottomRows(n);
        out.resize(x.rows(), x.cols());
        out.topRows(n) = psi_coef_ * x_bot;
        const double vs = model_.static_part.evaluate(z);
        out.bottomRows(n) = (disc_coef_.array() - vs).matrix().asDiagonal() * x_top;
        for (const auto& band : bands_) {
            const complex coeff = band.harmonic->profile.evaluate(z) *
                                  std::exp(complex(0.0, band.harmonic->phase));
            if (coeff == complex(0.0, 0.0)) continue;
            const complex conj_coeff = std::conj(coeff);
            for (const auto& e : band.entries) {
                out.row(n + e.i) -= coeff * e.dress_ij * x_top.row(e.j);
                out.row(n + e.j) -= conj_coeff * e.dress_ji * x_top.row(e.i);
            }
        }
    }

private:
    struct BandEntry {
        int i, j;
        double dress_ij, dress_ji;
    };
    struct Band {
        const Harmonic* harmonic;
        std::vector<BandEntry> entries;
    };

    ChannelGrid grid_;
    PotentialModel model_;
    Eigen::VectorXd disc_coef_;
    double psi_coef_ = 0.0;
    std::vector<Band> bands_;
};

/// Classic RK4 over [z_a, z_b] with n equal steps applied to a block of
/// stacked states. Potential samples are nudged half an ulp into the interval
/// so that one-sided limits at profile edges are taken from the correct side.
inline void rk4_block(const RhsApplier& rhs, double z_a, double z_b, long n_steps,
                      Eigen::MatrixXcd& x) {
    const double h = (z_b - z_a) / static_cast<double>(n_steps);
    const double lo = std::nextafter(z_a, z_b);
    const double hi = std::nextafter(z_b, z_a);
    auto clamp_z = [&](double z) { return std::clamp(z, std::min(lo, hi), std::max(lo, hi)); };
    Eigen::MatrixXcd k1, k2, k3, k4, tmp;
    for (long s = 0; s < n_steps; ++s) {
        const double z0 = z_a + h * static_cast<double>(s);
        rhs.apply(clamp_z(z0), x, k1);
        tmp = x + (0.5 * h) * k1;
        rhs.apply(clamp_z(z0 + 0.5 * h), tmp, k2);
        tmp = x + (0.5 * h) * k2;
        rhs.apply(clamp_z(z0 + 0.5 * h), tmp, k3);
        tmp = x + h * k3;
        rhs.apply(clamp_z(z0 + h), tmp, k4);
        x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
}

/// Interior breakpoints of [z_a, z_b] at profile support edges, so every
/// integration sub-interval has a smooth potential.
inline std::vector<double> smooth_breakpoints(const PotentialModel& model,
                                              double z_a, double z_b) {
    std::vector<double> edges{model.static_part.support_min, model.static_part.support_max};
    for (const auto& h : model.harmonics) {
        edges.push_back(h.profile.support_min);
        edges.push_back(h.profile.support_max);
    }
    const double lo = std::min(z_a, z_b), hi = std::max(z_a, z_b);
    const double tol = 1e-12 * std::max(1.0, hi - lo);
    std::vector<double> cuts{z_a};
    std::sort(edges.begin(), edges.end());
    if (z_b >= z_a) {
        for (double e : edges)
            if (e > lo + tol && e < hi - tol && e > cuts.back() + tol) cuts.push_back(e);
    } else {
        std::reverse(edges.begin(), edges.end());
        for (double e : edges)
            if (e > lo + tol && e < hi - tol && e < cuts.back() - tol) cuts.push_back(e);
    }
    cuts.push_back(z_b);
    return cuts;
}

/// Adaptive fixed-step RK4 with step halving on one smooth sub-interval.
/// Convergence is declared when the Richardson error estimate
/// |x(2n) - x(n)| / 15 drops below tol (absolute, on components).
inline void integrate_smooth(const RhsApplier& rhs, double z_a, double z_b,
                             const PropagationOptions& opts, Eigen::MatrixXcd& x) {
    if (z_a == z_b) return;
    long n = std::max(2, opts.initial_steps);
    Eigen::MatrixXcd coarse = x;
    rk4_block(rhs, z_a, z_b, n, coarse);
    while (true) {
        if (2 * n > opts.max_steps)
            throw NoConvergence("propagation over [" + std::to_string(z_a) + ", " +
                                std::to_string(z_b) + "] did not reach tolerance " +
                                std::to_string(opts.tolerance) + " within the step budget");
        Eigen::MatrixXcd fine = x;
        rk4_block(rhs, z_a, z_b, 2 * n, fine);
        const double err = (fine - coarse).cwiseAbs().maxCoeff() / 15.0;
        coarse.swap(fine);
        n *= 2;
        if (err <= opts.tolerance) break;
    }
    x.swap(coarse);
}

inline void integrate_adaptive(const RhsApplier& rhs, const PotentialModel& model,
                               double z_a, double z_b, const PropagationOptions& opts,
                               Eigen::MatrixXcd& x) {
    const auto cuts = smooth_breakpoints(model, z_a, z_b);
    for (std::size_t s = 0; s + 1 < cuts.size(); ++s)
        integrate_smooth(rhs, cuts[s], cuts[s + 1], opts, x);
}

} // namespace detail

/// Spatial derivative of a plane state under the channel-space evolution (see
/// RhsApplier for the component equations and the quadrature dressing).
[[nodiscard]] inline PlaneState rhs(const ChannelGrid& grid, const PotentialModel& model,
                                    double z, const PlaneState& state) {
    const int n = grid.size();
    if (state.psi.size() != n || state.p.size() != n)
        throw GridMismatch("rhs: state component count does not match the grid");
    detail::RhsApplier applier(grid, model);
    Eigen::MatrixXcd x(2 * n, 1), out;
    x.topRows(n) = state.psi;
    x.bottomRows(n) = state.p;
    applier.apply(z, x, out);
    PlaneState d;
    d.z = z;
    d.psi = out.topRows(n);
    d.p = out.bottomRows(n);
    return d;
}

/// Raw fixed-step RK4 transfer matrix (no adaptivity, no smoothness
/// splitting). Exposed so convergence-order tests can drive the step count.
[[nodiscard]] inline Eigen::MatrixXcd rk4_transfer_fixed(const ChannelGrid& grid,
                                                         const PotentialModel& model,
                                                         double z_a, double z_b,
                                                         long n_steps) {
    detail::RhsApplier applier(grid, model);
    Eigen::MatrixXcd u = Eigen::MatrixXcd::Identity(2 * grid.size(), 2 * grid.size());
    detail::rk4_block(applier, z_a, z_b, n_steps, u);
    return u;
}

/// Pseudo-unitarity defect of a transfer matrix in the weighted block metric
/// G = [[0, i W], [-i W, 0]] with W = diag(weights):
///     defect = | G^{-1} U^dagger G U - I |_max .
/// The weighted pairing is the exact invariant of the dressed dynamics; for a
/// static potential the transfer matrix is block-diagonal per channel and the
/// defect coincides with the plain (unweighted) block-metric defect.
[[nodiscard]] inline double transfer_defect(const Eigen::MatrixXcd& u,
                                            const ChannelGrid& grid) {
    const int n = grid.size();
    if (u.rows() != 2 * n || u.cols() != 2 * n)
        throw GridMismatch("transfer_defect: matrix size does not match the grid");
    Eigen::VectorXd w(n), winv(n);
    for (int i = 0; i < n; ++i) {
        w(i) = grid.weights[i];
        winv(i) = 1.0 / grid.weights[i];
    }
    const complex im(0.0, 1.0);
    // G U: top rows = i W * (bottom of U), bottom rows = -i W * (top of U).
    Eigen::MatrixXcd gu(2 * n, 2 * n);
    gu.topRows(n) = im * (w.asDiagonal() * u.bottomRows(n));
    gu.bottomRows(n) = -im * (w.asDiagonal() * u.topRows(n));
    const Eigen::MatrixXcd m = u.adjoint() * gu;
    Eigen::MatrixXcd ginv_m(2 * n, 2 * n);
    ginv_m.topRows(n) = im * (winv.asDiagonal() * m.bottomRows(n));
    ginv_m.bottomRows(n) = -im * (winv.asDiagonal() * m.topRows(n));
    return (ginv_m - Eigen::MatrixXcd::Identity(2 * n, 2 * n)).cwiseAbs().maxCoeff();
}

/// Transfer matrix over [z_a, z_b], integrated to tolerance with step halving
/// (Richardson control on the entries). Throws SegmentTooLong if any closed
/// channel would grow by more than e^{kappa_cap} across the segment, and
/// NoConvergence if the step budget runs out.
[[nodiscard]] inline TransferMatrix transfer_matrix(const ChannelGrid& grid,
                                                    const PotentialModel& model,
                                                    double z_a, double z_b,
                                                    const PropagationOptions& opts = {}) {
    double kappa_max = 0.0;
    for (int i : grid.closed_index) kappa_max = std::max(kappa_max, grid.channels[i].kappa);
    if (kappa_max * std::abs(z_b - z_a) > opts.kappa_cap)
        throw SegmentTooLong("transfer_matrix: kappa * length = " +
                             std::to_string(kappa_max * std::abs(z_b - z_a)) +
                             " exceeds the cap " + std::to_string(opts.kappa_cap) +
                             "; split the segment");
    detail::RhsApplier applier(grid, model);
    TransferMatrix t;
    t.z_a = z_a;
    t.z_b = z_b;
    t.u = Eigen::MatrixXcd::Identity(2 * grid.size(), 2 * grid.size());
    detail::integrate_adaptive(applier, model, z_a, z_b, opts, t.u);
    return t;
}

/// Propagate a plane state to z_to with the same adaptive integrator (state
/// columns only; no evanescent-growth cap is enforced here).
[[nodiscard]] inline PlaneState propagate(const ChannelGrid& grid,
                                          const PotentialModel& model,
                                          const PlaneState& state, double z_to,
                                          const PropagationOptions& opts = {}) {
    const int n = grid.size();
    if (state.psi.size() != n || state.p.size() != n)
        throw GridMismatch("propagate: state component count does not match the grid");
    detail::RhsApplier applier(grid, model);
    Eigen::MatrixXcd x(2 * n, 1);
    x.topRows(n) = state.psi;
    x.bottomRows(n) = state.p;
    detail::integrate_adaptive(applier, model, state.z, z_to, opts, x);
    PlaneState out;
    out.z = z_to;
    out.psi = x.topRows(n);
    out.p = x.bottomRows(n);
    return out;
}

/// Per-channel mode basis at plane z: columns are the forward and backward
/// mode values [X^F(z), X^B(z)] of the channel.
[[nodiscard]] inline Eigen::Matrix2cd mode_basis(const Channel& ch, double z,
                                                 const Units& units) {
    const TwoComponentValue f = ch.kind == ChannelKind::Open
                                    ? open_mode(ch, Direction::Forward, z, units)
                                    : closed_mode(ch, Direction::Forward, z, units);
    const TwoComponentValue b = ch.kind == ChannelKind::Open
                                    ? open_mode(ch, Direction::Backward, z, units)
                                    : closed_mode(ch, Direction::Backward, z, units);
    Eigen::Matrix2cd phi;
    phi << f.psi, b.psi, f.p, b.p;
    return phi;
}

/// Convert a component transfer matrix to scattering form.
///
/// W = Phi(z_b)^{-1} U Phi(z_a) is the transfer map on mode coefficients
/// (per-channel 2x2 basis solves); the scattering blocks then follow from
/// eliminating the backward-at-a / forward-at-b unknowns:
///     t_bb = W_bb^{-1},  r_bf = -W_bb^{-1} W_bf,
///     r_fb = W_fb W_bb^{-1},  t_ff = W_ff - W_fb W_bb^{-1} W_bf .
[[nodiscard]] inline SegmentScattering segment_to_scattering(const TransferMatrix& t,
                                                             const ChannelGrid& grid) {
    const int n = grid.size();
    if (t.u.rows() != 2 * n || t.u.cols() != 2 * n)
        throw GridMismatch("segment_to_scattering: matrix size does not match the grid");

    // U * Phi(z_a): scale component columns by the mode values at z_a.
    Eigen::MatrixXcd upa(2 * n, 2 * n);
    for (int j = 0; j < n; ++j) {
        const Eigen::Matrix2cd phi = mode_basis(grid.channels[j], t.z_a, grid.units);
        upa.col(j) = phi(0, 0) * t.u.col(j) + phi(1, 0) * t.u.col(n + j);
        upa.col(n + j) = phi(0, 1) * t.u.col(j) + phi(1, 1) * t.u.col(n + j);
    }
    // Phi(z_b)^{-1} * (U Phi(z_a)): per-channel 2x2 row solves.
    Eigen::MatrixXcd w(2 * n, 2 * n);
    for (int i = 0; i < n; ++i) {
        const Eigen::Matrix2cd phi = mode_basis(grid.channels[i], t.z_b, grid.units);
        const complex det = phi(0, 0) * phi(1, 1) - phi(0, 1) * phi(1, 0);
        const double scale = std::abs(phi(0, 0) * phi(1, 1)) + std::abs(phi(0, 1) * phi(1, 0));
        if (std::abs(det) < 1e-12 * scale)
            throw SingularConversion("segment_to_scattering: mode basis of channel " +
                                     std::to_string(i) + " is numerically singular at z = " +
                                     std::to_string(t.z_b));
        w.row(i) = (phi(1, 1) * upa.row(i) - phi(0, 1) * upa.row(n + i)) / det;
        w.row(n + i) = (-phi(1, 0) * upa.row(i) + phi(0, 0) * upa.row(n + i)) / det;
    }

    const auto w_ff = w.topLeftCorner(n, n);
    const auto w_fb = w.topRightCorner(n, n);
    const auto w_bf = w.bottomLeftCorner(n, n);
    const auto w_bb = w.bottomRightCorner(n, n);

    Eigen::PartialPivLU<Eigen::MatrixXcd> lu(w_bb);
    if (lu.rcond() < 1e-13)
        throw SingularConversion("segment_to_scattering: backward-backward block is "
                                 "numerically singular (rcond = " + std::to_string(lu.rcond()) + ")");
    SegmentScattering s;
    s.z_a = t.z_a;
    s.z_b = t.z_b;
    s.t_bb = lu.solve(Eigen::MatrixXcd::Identity(n, n));
    const Eigen::MatrixXcd x = lu.solve(Eigen::MatrixXcd(w_bf));
    s.r_bf = -x;
    s.t_ff = w_ff - w_fb * x;
    s.r_fb = w_fb * s.t_bb;
    return s;
}

/// Identity scattering at a single plane (empty segment).
[[nodiscard]] inline SegmentScattering identity_scattering(const ChannelGrid& grid, double z) {
    const int n = grid.size();
    SegmentScattering s;
    s.z_a = z;
    s.z_b = z;
    s.t_ff = Eigen::MatrixXcd::Identity(n, n);
    s.t_bb = Eigen::MatrixXcd::Identity(n, n);
    s.r_fb = Eigen::MatrixXcd::Zero(n, n);
    s.r_bf = Eigen::MatrixXcd::Zero(n, n);
    return s;
}

/// Redheffer star product: compose the scattering of [a, m] with [m, b].
/// Throws IllConditioned when the interface inverse (I - r_fb1 r_bf2)^{-1}
/// cannot be trusted.
[[nodiscard]] inline SegmentScattering star_compose(const SegmentScattering& s1,
                                                    const SegmentScattering& s2) {
    if (s1.t_ff.rows() != s2.t_ff.rows())
        throw GridMismatch("star_compose: segments live on different grids");
    const double scale = std::max({1.0, std::abs(s1.z_a), std::abs(s1.z_b), std::abs(s2.z_b)});
    if (std::abs(s1.z_b - s2.z_a) > 1e-10 * scale)
        throw GridMismatch("star_compose: segments do not share an interface plane (" +
                           std::to_string(s1.z_b) + " vs " + std::to_string(s2.z_a) + ")");
    const int n = static_cast<int>(s1.t_ff.rows());
    const Eigen::MatrixXcd loop = Eigen::MatrixXcd::Identity(n, n) - s1.r_fb * s2.r_bf;
    Eigen::PartialPivLU<Eigen::MatrixXcd> lu(loop);
    if (lu.rcond() < 1e-12)
        throw IllConditioned("star_compose: interface loop inverse is ill-conditioned "
                             "(rcond = " + std::to_string(lu.rcond()) + ")");
    const Eigen::MatrixXcd g_tff = lu.solve(s1.t_ff);        // (I - r_fb1 r_bf2)^{-1} t_ff1
    const Eigen::MatrixXcd g_rfb = lu.solve(s1.r_fb);        // (I - r_fb1 r_bf2)^{-1} r_fb1
    SegmentScattering s;
    s.z_a = s1.z_a;
    s.z_b = s2.z_b;
    s.t_ff = s2.t_ff * g_tff;
    s.r_fb = s2.r_fb + s2.t_ff * g_rfb * s2.t_bb;
    s.r_bf = s1.r_bf + s1.t_bb * s2.r_bf * g_tff;
    // (I - r_bf2 r_fb1)^{-1} = I + r_bf2 (I - r_fb1 r_bf2)^{-1} r_fb1
    s.t_bb = s1.t_bb * (s2.t_bb + s2.r_bf * g_rfb * s2.t_bb);
    return s;
}

/// Scattering of the whole slab [z_a, z_b]: the slab is sliced so that no
/// single segment exceeds the evanescent cap, each slice is integrated and
/// converted, and the slices are star-composed left to right.
[[nodiscard]] inline SegmentScattering slab_scattering(const ChannelGrid& grid,
                                                       const PotentialModel& model,
                                                       double z_a, double z_b,
                                                       const PropagationOptions& opts = {}) {
    if (!(z_b > z_a))
        throw SupportViolation("slab_scattering: need z_b > z_a");
    double kappa_max = 0.0;
    for (int i : grid.closed_index) kappa_max = std::max(kappa_max, grid.channels[i].kappa);
    const int slices = std::max(1, static_cast<int>(
        std::ceil(kappa_max * (z_b - z_a) / opts.kappa_cap)));
    SegmentScattering acc = identity_scattering(grid, z_a);
    for (int s = 0; s < slices; ++s) {
        const double a = z_a + (z_b - z_a) * static_cast<double>(s) / slices;
        const double b = (s == slices - 1)
                             ? z_b
                             : z_a + (z_b - z_a) * static_cast<double>(s + 1) / slices;
        acc = star_compose(acc, segment_to_scattering(transfer_matrix(grid, model, a, b, opts), grid));
    }
    return acc;
}

} // namespace zscat
