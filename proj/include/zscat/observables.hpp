#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <sstream>
#include <string>
#include <utility>

#include <Eigen/Dense>

#include "zscat/errors.hpp"
#include "zscat/grid.hpp"
#include "zscat/modes.hpp"
#include "zscat/potential.hpp"
#include "zscat/propagator.hpp"
#include "zscat/smatrix.hpp"

namespace zscat {

/// Which face carries the incoming packet: a forward mover entering at the
/// left plane z1, or a backward mover entering at the right plane z2.
enum class PacketSide { ForwardAtZ1, BackwardAtZ2 };

/// Role of an amplitude set.  An InputPair holds the incoming data only
/// (f_F imposed at z1, f_B imposed at z2, open channels only).  A FullPlane
/// set holds the complete forward+backward content of one plane, which is
/// what the crossing-time functional operates on.
enum class SetRole { InputPair, FullPlane };

/// What to do when a delay denominator current is numerically zero:
/// refuse (throw ZeroCurrent), or record the affected entries as NaN so a
/// report can still be emitted for the branches that do carry current.
enum class ZeroCurrentPolicy { Throw, ReturnNaN };

/// Channel amplitudes over a grid.  Both arrays always run over the full
/// channel list; entries on channels a role does not populate are zero.
struct AmplitudeSet {
    ChannelGrid grid;
    Eigen::VectorXcd f_F;  ///< forward / right-decaying amplitudes
    Eigen::VectorXcd f_B;  ///< backward / left-decaying amplitudes
    double plane = 0.0;    ///< anchoring plane; meaningful for FullPlane sets
    SetRole role = SetRole::InputPair;
};

/// Gaussian wave packet in k_t: centre, spectral width, launch time offset,
/// and the face it enters through.  The support is confined to one open run
/// and tapered smoothly to zero between the run edges and centre -/+ 4 sigma.
struct PacketSpec {
    double k_center = 0.0;
    double sigma_k = 0.0;
    double t0 = 0.0;
    PacketSide side = PacketSide::ForwardAtZ1;
};

/// Scalar summary of the time observables of one scattering run.  Entries a
/// computation does not produce (or that a ZeroCurrentPolicy suppressed)
/// stay NaN.  tau_* values are mean crossing times normalized by their own
/// presence currents; the currents themselves are signed (backward movers
/// carry negative current).
struct TimeStatistics {
    double tau_in = std::numeric_limits<double>::quiet_NaN();
    double tau_out_reflect = std::numeric_limits<double>::quiet_NaN();
    double tau_out_transmit = std::numeric_limits<double>::quiet_NaN();
    double R_current = std::numeric_limits<double>::quiet_NaN();
    double T_current = std::numeric_limits<double>::quiet_NaN();
    double tau_dwell_surface = std::numeric_limits<double>::quiet_NaN();
    double tau_dwell_volume = std::numeric_limits<double>::quiet_NaN();
    double dwell_route_gap = std::numeric_limits<double>::quiet_NaN();
    double delay_transmit = std::numeric_limits<double>::quiet_NaN();
    double delay_reflect = std::numeric_limits<double>::quiet_NaN();
};

/// Reflected/transmitted presence currents of a single-sided input, with
/// their algebraic signs (a backward-moving output carries current < 0).
struct PresenceCurrents {
    double reflected = 0.0;
    double transmitted = 0.0;
};

/// Constituents of the two-plane dwell-time kernel
///     D = D1 + M D2 S_o + S_o^+ D2^+ M + S_o^+ D3 S_o + S_c^+ D4 S_c
/// split into their diagonal parts.  D1 acts on the input pair, D3 on the
/// open outputs, D4 on the closed outputs, and D2 couples input to output
/// across each face through the metric M.  The derivative stencil `deriv`
/// is shared by D1 (coefficient +i) and D3 (coefficient -i); all diagonal
/// vectors are indexed by open (d1,d2,d3) or closed (d4) ordinal.
struct TimeKernel {
    double z1 = 0.0;
    double z2 = 0.0;
    Eigen::MatrixXd deriv;
    Eigen::VectorXd d1_f, d1_b;   ///< m z / (hbar k_z) diagonals on inputs
    Eigen::VectorXcd d2_f, d2_b;  ///< face coupling diagonals, open rows
    Eigen::VectorXd d3_f, d3_b;   ///< m z / (hbar k_z) diagonals on outputs
    Eigen::VectorXd d4_f, d4_b;   ///< evanescent face diagonals, closed rows
};

namespace detail {

/// Apply a real matrix to a complex vector without promoting the matrix.
[[nodiscard]] inline Eigen::VectorXcd apply_real_matrix(const Eigen::MatrixXd& m,
                                                        const Eigen::VectorXcd& v) {
    const Eigen::VectorXd re = m * v.real();
    const Eigen::VectorXd im = m * v.imag();
    Eigen::VectorXcd out(v.size());
    out.real() = re;
    out.imag() = im;
    return out;
}

/// Open-channel time moment of a single travelling component at plane z:
///     sum_open w conj(f) [ s (1/i) d/dk_t + m z / (hbar k_z) ] f
/// with s = +1 for forward movers and s = -1 for backward movers.
[[nodiscard]] inline double time_moment(const ChannelGrid& grid, const Eigen::MatrixXd& deriv,
                                        const Eigen::VectorXcd& f, double z, double s) {
    const Eigen::VectorXcd df = apply_real_matrix(deriv, f);
    const complex mi(0.0, -1.0);
    double acc = 0.0;
    for (int idx : grid.open_index) {
        const Channel& ch = grid.channels[idx];
        const double diag = grid.units.mass * z / (grid.units.hbar * ch.k_z);
        const complex val = std::conj(f(idx)) * (s * mi * df(idx) + diag * f(idx));
        acc += grid.weights[idx] * val.real();
    }
    return acc;
}

/// Signed presence current of one travelling component: s sum_open w |f|^2.
[[nodiscard]] inline double open_current(const ChannelGrid& grid, const Eigen::VectorXcd& f,
                                         double s) {
    double acc = 0.0;
    for (int idx : grid.open_index) acc += grid.weights[idx] * std::norm(f(idx));
    return s * acc;
}

}  // namespace detail

/// Assemble the dwell-time kernel constituents for the slab [z1, z2].
[[nodiscard]] inline TimeKernel make_time_kernel(const ChannelGrid& grid, double z1, double z2,
                                                 int stencil = 9) {
    TimeKernel k;
    k.z1 = z1;
    k.z2 = z2;
    k.deriv = derivative_matrix(grid, stencil);
    const double hbar = grid.units.hbar;
    const double mass = grid.units.mass;
    const int no = grid.n_open();
    const int nc = grid.n_closed();
    k.d1_f.resize(no);
    k.d1_b.resize(no);
    k.d2_f.resize(no);
    k.d2_b.resize(no);
    k.d3_f.resize(no);
    k.d3_b.resize(no);
    k.d4_f.resize(nc);
    k.d4_b.resize(nc);
    const complex i(0.0, 1.0);
    for (int a = 0; a < no; ++a) {
        const Channel& ch = grid.channels[grid.open_index[a]];
        const double cf = mass / (hbar * ch.k_z);
        k.d1_f(a) = -z1 * cf;
        k.d1_b(a) = z2 * cf;
        k.d3_f(a) = z2 * cf;
        k.d3_b(a) = -z1 * cf;
        const double c2 = mass / (2.0 * hbar * ch.k_z * ch.k_z);
        k.d2_f(a) = c2 * std::exp(2.0 * i * ch.k_z * z2);
        k.d2_b(a) = -c2 * std::exp(-2.0 * i * ch.k_z * z1);
    }
    for (int a = 0; a < nc; ++a) {
        const Channel& ch = grid.channels[grid.closed_index[a]];
        const double c4 = mass / (2.0 * hbar * ch.kappa * ch.kappa);
        k.d4_f(a) = -c4 * std::exp(-2.0 * ch.kappa * z2);
        k.d4_b(a) = -c4 * std::exp(2.0 * ch.kappa * z1);
    }
    return k;
}

/// Build a normalized single-sided Gaussian packet on the grid.
///
/// The packet lives on the open run containing k_center.  A quintic taper
/// rises from exactly zero at each run edge to one at k_center -/+ 4 sigma_k,
/// so the amplitudes vanish at the run boundaries and stay clear of the
/// threshold window.  The profile is
///     f(k) = taper(k) exp(-(k - k_center)^2 / (4 sigma_k^2)) exp(+i k t0),
/// rescaled so that sum_j w_j (|f_F|^2 + |f_B|^2) = 1 exactly.  The +i k t0
/// phase delays every crossing time by t0: a packet launched later arrives
/// later by the same amount.
[[nodiscard]] inline AmplitudeSet build_packet(const ChannelGrid& grid, const PacketSpec& spec) {
    if (!(spec.sigma_k > 0.0) || !std::isfinite(spec.sigma_k))
        throw ConfigError("build_packet: sigma_k must be positive and finite");
    if (!std::isfinite(spec.k_center) || !std::isfinite(spec.t0))
        throw ConfigError("build_packet: k_center and t0 must be finite");

    int run_begin = -1, run_end = -1;
    for (const auto& [b, e] : grid.runs) {
        if (grid.channels[b].k_t <= spec.k_center && spec.k_center <= grid.channels[e - 1].k_t) {
            run_begin = b;
            run_end = e;
            break;
        }
    }
    if (run_begin < 0)
        throw SupportViolation("build_packet: k_center lies outside every grid run");
    if (grid.channels[run_begin].kind != ChannelKind::Open)
        throw SupportViolation("build_packet: k_center does not lie in an open run");

    const double lo_edge = grid.channels[run_begin].k_t;
    const double hi_edge = grid.channels[run_end - 1].k_t;
    const double margin_lo = (spec.k_center - 4.0 * spec.sigma_k) - lo_edge;
    const double margin_hi = hi_edge - (spec.k_center + 4.0 * spec.sigma_k);
    if (!(margin_lo > 0.0) || !(margin_hi > 0.0)) {
        std::ostringstream msg;
        msg << "build_packet: packet core closer than 4 sigma_k to a run edge"
            << " (margins " << margin_lo << ", " << margin_hi << ")";
        throw SupportViolation(msg.str());
    }

    const int n = grid.size();
    Eigen::VectorXcd f = Eigen::VectorXcd::Zero(n);
    const complex i(0.0, 1.0);
    double norm2 = 0.0;
    for (int j = run_begin; j < run_end; ++j) {
        const double k = grid.channels[j].k_t;
        const double taper = Profile::smoothstep((k - lo_edge) / margin_lo) *
                             Profile::smoothstep((hi_edge - k) / margin_hi);
        const double u = (k - spec.k_center) / spec.sigma_k;
        const double mag = taper * std::exp(-u * u / 4.0);
        f(j) = mag * std::exp(i * (k * spec.t0));
        norm2 += grid.weights[j] * mag * mag;
    }
    if (!(norm2 > 0.0))
        throw SupportViolation("build_packet: packet has zero quadrature mass on the grid");
    f /= std::sqrt(norm2);

    AmplitudeSet set;
    set.grid = grid;
    set.role = SetRole::InputPair;
    if (spec.side == PacketSide::ForwardAtZ1) {
        set.f_F = f;
        set.f_B = Eigen::VectorXcd::Zero(n);
    } else {
        set.f_F = Eigen::VectorXcd::Zero(n);
        set.f_B = f;
    }
    return set;
}

/// Indefinite-metric norm of an amplitude set:
///     sum_open w (|f_F|^2 - |f_B|^2) + sum_closed w 2 Re(conj(f_F) f_B).
/// This is the net presence current through the plane; forward movers count
/// positive, backward movers negative, and a lone evanescent component
/// carries none.
[[nodiscard]] inline double presence_norm(const AmplitudeSet& set) {
    const ChannelGrid& g = set.grid;
    if (set.f_F.size() != g.size() || set.f_B.size() != g.size())
        throw GridMismatch("presence_norm: amplitude arrays do not match the grid");
    double acc = 0.0;
    for (int idx : g.open_index)
        acc += g.weights[idx] * (std::norm(set.f_F(idx)) - std::norm(set.f_B(idx)));
    for (int idx : g.closed_index)
        acc += g.weights[idx] * 2.0 * (std::conj(set.f_F(idx)) * set.f_B(idx)).real();
    return acc;
}

/// Pair of full-plane amplitude sets produced by scattering an input pair.
struct PlanePair {
    AmplitudeSet at_z1;  ///< incoming forward + outgoing backward content
    AmplitudeSet at_z2;  ///< outgoing forward + incoming backward content
};

/// Scatter an input pair and assemble the complete amplitude content of the
/// two bounding planes.  At z1 the forward part is the input and the
/// backward part is the reflected output (plus left-decaying evanescent
/// tails); at z2 the roles swap.
[[nodiscard]] inline PlanePair output_amplitudes(const SMatrix& s, const AmplitudeSet& input) {
    if (input.role != SetRole::InputPair)
        throw ConfigError("output_amplitudes: input set must have the InputPair role");
    const ChannelGrid& g = s.grid;
    g.require_compatible(input.grid, "output_amplitudes");
    if (input.f_F.size() != g.size() || input.f_B.size() != g.size())
        throw GridMismatch("output_amplitudes: amplitude arrays do not match the grid");

    const int no = g.n_open();
    Eigen::VectorXcd fin(no), bin(no);
    for (int a = 0; a < no; ++a) {
        fin(a) = input.f_F(g.open_index[a]);
        bin(a) = input.f_B(g.open_index[a]);
    }
    auto [forward_out, backward_out] = apply_smatrix(s, fin, bin);

    PlanePair pair;
    pair.at_z1.grid = g;
    pair.at_z1.f_F = input.f_F;
    pair.at_z1.f_B = std::move(backward_out);
    pair.at_z1.plane = s.z1;
    pair.at_z1.role = SetRole::FullPlane;
    pair.at_z2.grid = g;
    pair.at_z2.f_F = std::move(forward_out);
    pair.at_z2.f_B = input.f_B;
    pair.at_z2.plane = s.z2;
    pair.at_z2.role = SetRole::FullPlane;
    return pair;
}

/// Mean time at which the state crosses the plane of a FullPlane set.
///
/// Evaluates the quadrature
///     sum_j w_j [ conj(a) K(z) a  +  derivative terms ]
/// where K(z) are the per-channel crossing kernels and the derivative terms
/// are, on open channels,
///     Re conj(a_F) (1/i) da_F/dk_t - Re conj(a_B) (1/i) da_B/dk_t
/// and on closed channels the cross pairing
///     Re (1/i) [ conj(a_F) da_B/dk_t + conj(a_B) da_F/dk_t ].
/// The kernels grow like 1/k_z^2 (or 1/kappa^2) toward threshold, so any
/// amplitude mass within ten threshold windows of a band edge in excess of
/// mass_bound (relative) is refused as divergent.
[[nodiscard]] inline double crossing_time(const AmplitudeSet& set, double mass_bound = 1e-10) {
    if (set.role != SetRole::FullPlane)
        throw ConfigError("crossing_time: requires a FullPlane amplitude set");
    const ChannelGrid& g = set.grid;
    const int n = g.size();
    if (set.f_F.size() != n || set.f_B.size() != n)
        throw GridMismatch("crossing_time: amplitude arrays do not match the grid");

    double total = 0.0, near_threshold = 0.0;
    for (int j = 0; j < n; ++j) {
        const double m = g.weights[j] * (std::norm(set.f_F(j)) + std::norm(set.f_B(j)));
        total += m;
        if (std::abs(g.channels[j].disc) <= 10.0 * g.threshold_window) near_threshold += m;
    }
    if (!(total > 0.0)) throw ConfigError("crossing_time: amplitude set carries no mass");
    if (near_threshold > mass_bound * total) {
        std::ostringstream msg;
        msg << "crossing_time: relative amplitude mass " << near_threshold / total
            << " within ten threshold windows of a band edge exceeds the bound " << mass_bound;
        throw ThresholdDivergence(msg.str());
    }

    const Eigen::MatrixXd deriv = derivative_matrix(g);
    const Eigen::VectorXcd dF = detail::apply_real_matrix(deriv, set.f_F);
    const Eigen::VectorXcd dB = detail::apply_real_matrix(deriv, set.f_B);
    const complex mi(0.0, -1.0);
    double acc = 0.0;
    for (int j = 0; j < n; ++j) {
        const Channel& ch = g.channels[j];
        const CrossingKernels kk = crossing_kernels(ch, set.plane, g.units);
        const complex aF = set.f_F(j);
        const complex aB = set.f_B(j);
        const complex quad = std::conj(aF) * (kk.ff * aF + kk.fb * aB) +
                             std::conj(aB) * (kk.bf * aF + kk.bb * aB);
        double dpart;
        if (ch.kind == ChannelKind::Open) {
            dpart = (std::conj(aF) * mi * dF(j)).real() - (std::conj(aB) * mi * dB(j)).real();
        } else {
            dpart = (mi * (std::conj(aF) * dB(j) + std::conj(aB) * dF(j))).real();
        }
        acc += g.weights[j] * (quad.real() + dpart);
    }
    return acc;
}

namespace detail {

/// Quadratic form of the assembled dwell kernel over input pair (fF, fB)
/// and outputs (hF at z2, hB at z1), all full-length vectors.
[[nodiscard]] inline double dwell_kernel_form(const TimeKernel& kern, const ChannelGrid& g,
                                              const Eigen::VectorXcd& fF,
                                              const Eigen::VectorXcd& fB,
                                              const Eigen::VectorXcd& hF,
                                              const Eigen::VectorXcd& hB) {
    const Eigen::VectorXcd dfF = apply_real_matrix(kern.deriv, fF);
    const Eigen::VectorXcd dfB = apply_real_matrix(kern.deriv, fB);
    const Eigen::VectorXcd dhF = apply_real_matrix(kern.deriv, hF);
    const Eigen::VectorXcd dhB = apply_real_matrix(kern.deriv, hB);
    const complex pi(0.0, 1.0);
    const complex mi(0.0, -1.0);
    double acc = 0.0;
    for (int a = 0; a < g.n_open(); ++a) {
        const int j = g.open_index[a];
        const double w = g.weights[j];
        // D1 on the input pair: +i d/dk_t with -m z1 (forward) / +m z2 diags.
        const complex t1 = std::conj(fF(j)) * (pi * dfF(j) + kern.d1_f(a) * fF(j)) +
                           std::conj(fB(j)) * (pi * dfB(j) + kern.d1_b(a) * fB(j));
        // Metric-coupled face terms M D2 S_o + herm. conj.: 2 Re below.
        const complex t2 = std::conj(fF(j)) * pi * kern.d2_b(a) * hB(j) +
                           std::conj(fB(j)) * mi * kern.d2_f(a) * hF(j);
        // D3 on the open outputs: -i d/dk_t with +m z2 / -m z1 diags.
        const complex t3 = std::conj(hF(j)) * (mi * dhF(j) + kern.d3_f(a) * hF(j)) +
                           std::conj(hB(j)) * (mi * dhB(j) + kern.d3_b(a) * hB(j));
        acc += w * (t1.real() + 2.0 * t2.real() + t3.real());
    }
    for (int a = 0; a < g.n_closed(); ++a) {
        const int j = g.closed_index[a];
        acc += g.weights[j] *
               (kern.d4_f(a) * std::norm(hF(j)) + kern.d4_b(a) * std::norm(hB(j)));
    }
    return acc;
}

}  // namespace detail

/// Dwell time of the input inside [z1, z2] from plane data alone: the mean
/// crossing time of the exit plane minus that of the entry plane.
///
/// The value is computed twice — (a) directly as the difference of the two
/// crossing-time quadratures and (b) through the assembled kernel
/// D = D1 + M D2 S_o + S_o^+ D2^+ M + S_o^+ D3 S_o + S_c^+ D4 S_c — and the
/// two routes must agree to internal_tol relative; a disagreement means the
/// kernel assembly and the face expansion have diverged and the result
/// cannot be trusted.  Inputs are assumed normalized to unit quadrature
/// mass, so no current division is applied.
[[nodiscard]] inline double dwell_time_surface(const SMatrix& s, const AmplitudeSet& input,
                                               double internal_tol = 1e-6,
                                               double mass_bound = 1e-10) {
    const PlanePair planes = output_amplitudes(s, input);
    const double route_a =
        crossing_time(planes.at_z2, mass_bound) - crossing_time(planes.at_z1, mass_bound);
    const TimeKernel kern = make_time_kernel(s.grid, s.z1, s.z2);
    const double route_b = detail::dwell_kernel_form(kern, s.grid, input.f_F, input.f_B,
                                                     planes.at_z2.f_F, planes.at_z1.f_B);
    const double scale = std::max({std::abs(route_a), std::abs(route_b), 1e-30});
    if (std::abs(route_a - route_b) > internal_tol * scale) {
        std::ostringstream msg;
        msg << "dwell_time_surface: crossing-difference route " << route_a
            << " and kernel route " << route_b << " disagree beyond relative tolerance "
            << internal_tol;
        throw RouteMismatch(msg.str());
    }
    return route_a;
}

/// Dwell time of the input inside [z1, z2] as a volume integral: the state
/// is reconstructed plane by plane from z1 and
///     tau_D = integral dz sum_j w_j |psi_j(z)|^2
/// is accumulated with composite Simpson quadrature on 2 z_panels intervals.
/// Closed channels make the reconstruction stiff; depths beyond
/// kappa_max (z2 - z1) > 30 lose the decaying tail to roundoff and are
/// refused.  Inputs are assumed normalized to unit quadrature mass.
[[nodiscard]] inline double dwell_time_volume(const SMatrix& s, const PotentialModel& model,
                                              const AmplitudeSet& input, int z_panels = 64,
                                              const PropagationOptions& opts = {}) {
    if (z_panels < 1) throw ConfigError("dwell_time_volume: z_panels must be at least 1");
    const ChannelGrid& g = s.grid;
    double kappa_max = 0.0;
    for (int idx : g.closed_index) kappa_max = std::max(kappa_max, g.channels[idx].kappa);
    if (kappa_max * (s.z2 - s.z1) > 30.0) {
        std::ostringstream msg;
        msg << "dwell_time_volume: evanescent depth kappa_max (z2 - z1) = "
            << kappa_max * (s.z2 - s.z1) << " exceeds 30; the decaying tail is lost to roundoff";
        throw SegmentTooLong(msg.str());
    }

    const PlanePair planes = output_amplitudes(s, input);
    const int n = g.size();
    PlaneState state;
    state.z = s.z1;
    state.psi.resize(n);
    state.p.resize(n);
    for (int j = 0; j < n; ++j) {
        const Channel& ch = g.channels[j];
        TwoComponentValue xf, xb;
        if (ch.kind == ChannelKind::Open) {
            xf = open_mode(ch, Direction::Forward, s.z1, g.units);
            xb = open_mode(ch, Direction::Backward, s.z1, g.units);
        } else {
            xf = closed_mode(ch, Direction::Forward, s.z1, g.units);
            xb = closed_mode(ch, Direction::Backward, s.z1, g.units);
        }
        const complex aF = planes.at_z1.f_F(j);
        const complex aB = planes.at_z1.f_B(j);
        state.psi(j) = aF * xf.psi + aB * xb.psi;
        state.p(j) = aF * xf.p + aB * xb.p;
    }

    const auto density = [&g](const PlaneState& st) {
        double rho = 0.0;
        for (int j = 0; j < g.size(); ++j) rho += g.weights[j] * std::norm(st.psi(j));
        return rho;
    };

    const int segments = 2 * z_panels;
    const double dz = (s.z2 - s.z1) / segments;
    double integral = density(state);
    for (int step = 1; step <= segments; ++step) {
        const double z_next = (step == segments) ? s.z2 : s.z1 + step * dz;
        state = propagate(g, model, state, z_next, opts);
        const double simpson = (step == segments) ? 1.0 : (step % 2 == 1 ? 4.0 : 2.0);
        integral += simpson * density(state);
    }
    return integral * dz / 3.0;
}

namespace detail {

/// Decide which face a single-sided input enters through.
[[nodiscard]] inline PacketSide input_side(const ChannelGrid& g, const AmplitudeSet& input,
                                           const char* where) {
    if (input.role != SetRole::InputPair)
        throw ConfigError(std::string(where) + ": input set must have the InputPair role");
    double pf = 0.0, pb = 0.0;
    for (int idx : g.open_index) {
        pf += g.weights[idx] * std::norm(input.f_F(idx));
        pb += g.weights[idx] * std::norm(input.f_B(idx));
    }
    const double total = pf + pb;
    if (!(total > 0.0)) throw ConfigError(std::string(where) + ": input carries no open mass");
    if (pf > 1e-14 * total && pb > 1e-14 * total)
        throw ConfigError(std::string(where) +
                          ": input must be single-sided (forward-only or backward-only)");
    return pf >= pb ? PacketSide::ForwardAtZ1 : PacketSide::BackwardAtZ2;
}

}  // namespace detail

/// Net outgoing presence currents of a single-sided input, with their
/// algebraic signs: a forward-moving output counts positive and a
/// backward-moving one negative, so conservation reads
///     transmitted - reflected = 1   (forward input)
///     reflected - transmitted = 1   (backward input).
[[nodiscard]] inline PresenceCurrents out_currents(const SMatrix& s, const AmplitudeSet& input) {
    const ChannelGrid& g = s.grid;
    g.require_compatible(input.grid, "out_currents");
    const PacketSide side = detail::input_side(g, input, "out_currents");
    const PlanePair planes = output_amplitudes(s, input);
    const double forward_out = detail::open_current(g, planes.at_z2.f_F, 1.0);
    const double backward_out = detail::open_current(g, planes.at_z1.f_B, -1.0);
    PresenceCurrents cur;
    if (side == PacketSide::ForwardAtZ1) {
        cur.transmitted = forward_out;
        cur.reflected = backward_out;
    } else {
        cur.transmitted = backward_out;
        cur.reflected = forward_out;
    }
    return cur;
}

/// Mean entry/exit times and delay times of a single-sided input.
///
/// Each travelling component is timed at its own face with the open-channel
/// moment sum w conj(f) [ +/- (1/i) d/dk_t + m z/(hbar k_z) ] f (sign tied
/// to the direction of motion), normalized by its signed presence current,
/// and the delays are the exit-minus-entry differences
///     delay_transmit = tau_out_transmit - tau_in
///     delay_reflect  = tau_out_reflect  - tau_in.
/// They include the traversal itself: for a free slab delay_transmit equals
/// the classical crossing duration, and a barrier shows up as the shift
/// relative to that.  Closed-channel output is not timed, and interference
/// between incoming and outgoing parts at the same face is dropped.
/// A branch whose current magnitude falls below 1e-12 has no arrival time;
/// the policy selects between refusing outright and recording NaN.
[[nodiscard]] inline TimeStatistics delay_times(const SMatrix& s, const AmplitudeSet& input,
                                                ZeroCurrentPolicy policy = ZeroCurrentPolicy::Throw) {
    const ChannelGrid& g = s.grid;
    g.require_compatible(input.grid, "delay_times");
    const PacketSide side = detail::input_side(g, input, "delay_times");
    const PlanePair planes = output_amplitudes(s, input);
    const Eigen::MatrixXd deriv = derivative_matrix(g);
    const Eigen::VectorXcd& hF = planes.at_z2.f_F;
    const Eigen::VectorXcd& hB = planes.at_z1.f_B;

    double m_in, j_in, m_tr, j_tr, m_rf, j_rf;
    if (side == PacketSide::ForwardAtZ1) {
        m_in = detail::time_moment(g, deriv, input.f_F, s.z1, 1.0);
        j_in = detail::open_current(g, input.f_F, 1.0);
        m_tr = detail::time_moment(g, deriv, hF, s.z2, 1.0);
        j_tr = detail::open_current(g, hF, 1.0);
        m_rf = detail::time_moment(g, deriv, hB, s.z1, -1.0);
        j_rf = detail::open_current(g, hB, -1.0);
    } else {
        m_in = detail::time_moment(g, deriv, input.f_B, s.z2, -1.0);
        j_in = detail::open_current(g, input.f_B, -1.0);
        m_tr = detail::time_moment(g, deriv, hB, s.z1, -1.0);
        j_tr = detail::open_current(g, hB, -1.0);
        m_rf = detail::time_moment(g, deriv, hF, s.z2, 1.0);
        j_rf = detail::open_current(g, hF, 1.0);
    }

    constexpr double kCurrentFloor = 1e-12;
    const auto timed = [policy](double moment, double current, const char* branch) {
        if (std::abs(current) < kCurrentFloor) {
            if (policy == ZeroCurrentPolicy::Throw)
                throw ZeroCurrent(std::string("delay_times: ") + branch +
                                  " current magnitude below 1e-12; no arrival to time");
            return std::numeric_limits<double>::quiet_NaN();
        }
        return moment / current;
    };

    TimeStatistics stats;
    stats.tau_in = timed(m_in, j_in, "input");
    stats.tau_out_transmit = timed(m_tr, j_tr, "transmitted");
    stats.tau_out_reflect = timed(m_rf, j_rf, "reflected");
    stats.T_current = j_tr;
    stats.R_current = j_rf;
    stats.delay_transmit = stats.tau_out_transmit - stats.tau_in;
    stats.delay_reflect = stats.tau_out_reflect - stats.tau_in;
    return stats;
}

/// Knobs of the combined time-observable computation.
struct TimeOptions {
    int z_panels = 64;          ///< Simpson panels of the volume route
    double route_tol = 1e-4;    ///< surface-vs-volume agreement demanded
    double internal_tol = 1e-6; ///< kernel-assembly self-check inside the surface route
    double mass_bound = 1e-10;  ///< near-threshold amplitude mass allowed
    ZeroCurrentPolicy zero_current = ZeroCurrentPolicy::Throw;
    PropagationOptions propagation = {};
};

/// Compute the full time-observable record of one scattering run: entry and
/// exit times, delays, presence currents, and the dwell time by both the
/// plane-data route and the volume-integral route.  The relative gap
/// between the two dwell routes is the primary self-diagnostic of grid and
/// quadrature adequacy; a gap beyond route_tol is refused as RouteMismatch.
[[nodiscard]] inline TimeStatistics time_statistics(const SMatrix& s, const PotentialModel& model,
                                                    const AmplitudeSet& input,
                                                    const TimeOptions& options = {}) {
    TimeStatistics stats = delay_times(s, input, options.zero_current);
    stats.tau_dwell_surface =
        dwell_time_surface(s, input, options.internal_tol, options.mass_bound);
    stats.tau_dwell_volume =
        dwell_time_volume(s, model, input, options.z_panels, options.propagation);
    const double scale = std::max(std::abs(stats.tau_dwell_volume), 1e-30);
    stats.dwell_route_gap = std::abs(stats.tau_dwell_surface - stats.tau_dwell_volume) / scale;
    if (stats.dwell_route_gap > options.route_tol) {
        std::ostringstream msg;
        msg << "time_statistics: dwell time by plane data " << stats.tau_dwell_surface
            << " and by volume integral " << stats.tau_dwell_volume
            << " disagree (relative gap " << stats.dwell_route_gap << " > " << options.route_tol
            << "); refine the k_t grid or the z resolution";
        throw RouteMismatch(msg.str());
    }
    return stats;
}

}  // namespace zscat
