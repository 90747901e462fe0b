#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <vector>

#include "zscat/observables.hpp"

#include "oracles.hpp"

using namespace zscat;
using Catch::Approx;

namespace {

PotentialModel barrier_model(double v0 = 1.0, double z1 = 0.0, double z2 = 1.0) {
    PotentialModel m;
    m.static_part.kind = Profile::Kind::Square;
    m.static_part.amplitude = v0;
    m.static_part.support_min = z1;
    m.static_part.support_max = z2;
    return m;
}

/// Mean classical flight time over a distance for the open-channel content.
double classical_time(const ChannelGrid& g, const Eigen::VectorXcd& f, double dist) {
    double acc = 0.0;
    for (int idx : g.open_index)
        acc += g.weights[idx] * std::norm(f(idx)) * g.units.mass * dist /
               (g.units.hbar * g.channels[idx].k_z);
    return acc;
}

/// Multiply amplitudes by exp(-i k_t c), channel by channel.
Eigen::VectorXcd phase_ramp(const ChannelGrid& g, const Eigen::VectorXcd& f, double c) {
    Eigen::VectorXcd out = f;
    const complex i(0.0, 1.0);
    for (int j = 0; j < g.size(); ++j) out(j) *= std::exp(-i * (g.channels[j].k_t * c));
    return out;
}

/// Tunneling fixture shared by the delay and dwell tests: a unit square
/// barrier on [0, 1] over a finely resolved all-open band around k_t = 0.5.
const ChannelGrid& narrow_grid() {
    static const ChannelGrid g = build_grid(0.45, 0.55, 161, 0.0, 0.0, Units{});
    return g;
}

const SMatrix& narrow_barrier_smatrix() {
    static const SMatrix s =
        extract_smatrix(narrow_grid(), barrier_model(1.0, 0.0, 1.0), 0.0, 1.0);
    return s;
}

AmplitudeSet narrow_packet(PacketSide side = PacketSide::ForwardAtZ1) {
    PacketSpec spec;
    spec.k_center = 0.5;
    spec.sigma_k = 0.005;
    spec.side = side;
    return build_packet(narrow_grid(), spec);
}

}  // namespace

TEST_CASE("packets are normalized, real at zero offset, and confined to their run",
          "[observables]") {
    const ChannelGrid g = build_grid(-0.45, 0.75, 13, 0.0, 0.0, Units{});
    PacketSpec spec;
    spec.k_center = 0.45;
    spec.sigma_k = 0.05;
    const AmplitudeSet set = build_packet(g, spec);

    double norm2 = 0.0;
    for (int j = 0; j < g.size(); ++j)
        norm2 += g.weights[j] * (std::norm(set.f_F(j)) + std::norm(set.f_B(j)));
    CHECK(norm2 == Approx(1.0).margin(1e-14));
    CHECK(set.role == SetRole::InputPair);
    for (int j = 0; j < g.size(); ++j) {
        CHECK(set.f_F(j).imag() == 0.0);  // t0 = 0 keeps the profile real
        CHECK(set.f_B(j) == complex(0.0, 0.0));
        if (g.channels[j].kind != ChannelKind::Open) CHECK(set.f_F(j) == complex(0.0, 0.0));
    }
    // the taper pins the run edges to exactly zero
    CHECK(set.f_F(g.open_index.front()) == complex(0.0, 0.0));
    CHECK(set.f_F(g.open_index.back()) == complex(0.0, 0.0));

    PacketSpec shifted = spec;
    shifted.t0 = 0.3;
    const AmplitudeSet late = build_packet(g, shifted);
    double norm2_late = 0.0;
    for (int j = 0; j < g.size(); ++j) norm2_late += g.weights[j] * std::norm(late.f_F(j));
    CHECK(norm2_late == Approx(1.0).margin(1e-14));
    for (int j = 0; j < g.size(); ++j)
        CHECK(std::abs(late.f_F(j)) == Approx(std::abs(set.f_F(j))).margin(1e-15));

    PacketSpec backward = spec;
    backward.side = PacketSide::BackwardAtZ2;
    const AmplitudeSet rev = build_packet(g, backward);
    for (int j = 0; j < g.size(); ++j) CHECK(rev.f_F(j) == complex(0.0, 0.0));
    CHECK(presence_norm(rev) == Approx(-1.0).margin(1e-12));
    CHECK(presence_norm(set) == Approx(1.0).margin(1e-12));
}

TEST_CASE("packets that crowd a run edge or miss the open band are refused",
          "[observables]") {
    const ChannelGrid open_band = build_grid(0.05, 1.05, 21, 0.0, 0.0, Units{});
    PacketSpec crowded;
    crowded.k_center = 0.1;
    crowded.sigma_k = 0.05;  // 4 sigma reaches past the lower edge
    CHECK_THROWS_AS(build_packet(open_band, crowded), SupportViolation);

    const ChannelGrid mixed = build_grid(-0.45, 0.75, 13, 0.0, 0.0, Units{});
    PacketSpec in_closed;
    in_closed.k_center = -0.25;
    in_closed.sigma_k = 0.01;
    CHECK_THROWS_AS(build_packet(mixed, in_closed), SupportViolation);

    PacketSpec outside;
    outside.k_center = 2.0;
    outside.sigma_k = 0.01;
    CHECK_THROWS_AS(build_packet(mixed, outside), SupportViolation);
}

TEST_CASE("doubling the spectral width halves the temporal duration", "[observables]") {
    const ChannelGrid g = build_grid(0.1, 2.1, 201, 0.0, 0.0, Units{});
    const auto duration = [&g](double sigma_k) {
        PacketSpec spec;
        spec.k_center = 1.1;
        spec.sigma_k = sigma_k;
        const AmplitudeSet set = build_packet(g, spec);
        // time signal F(t) = sum_j w_j f_j exp(-i k_j t) and its rms duration
        const complex i(0.0, 1.0);
        double m0 = 0.0, m1 = 0.0, m2 = 0.0;
        const double t_max = 60.0, dt = 0.25;
        for (double t = -t_max; t <= t_max; t += dt) {
            complex amp(0.0, 0.0);
            for (int j = 0; j < g.size(); ++j)
                amp += g.weights[j] * set.f_F(j) * std::exp(-i * (g.channels[j].k_t * t));
            const double p = std::norm(amp);
            m0 += p;
            m1 += t * p;
            m2 += t * t * p;
        }
        const double mean = m1 / m0;
        return std::sqrt(m2 / m0 - mean * mean);
    };
    const double wide = duration(0.05);
    const double narrow = duration(0.10);
    CHECK(wide / narrow == Approx(2.0).epsilon(0.02));
}

TEST_CASE("presence norm distinguishes travelling and evanescent content", "[observables]") {
    const ChannelGrid g = build_grid(-0.45, 0.75, 13, 0.0, 0.0, Units{});
    REQUIRE(g.n_closed() > 0);
    const int cj = g.closed_index[2];

    AmplitudeSet closed_only;
    closed_only.grid = g;
    closed_only.f_F = Eigen::VectorXcd::Zero(g.size());
    closed_only.f_B = Eigen::VectorXcd::Zero(g.size());
    closed_only.f_F(cj) = complex(0.8, 0.3);
    CHECK(presence_norm(closed_only) == 0.0);  // a lone evanescent carries nothing

    closed_only.f_B(cj) = complex(-0.2, 0.5);
    const double expected =
        g.weights[cj] * 2.0 * (std::conj(closed_only.f_F(cj)) * closed_only.f_B(cj)).real();
    CHECK(presence_norm(closed_only) == Approx(expected).margin(1e-15));
}

TEST_CASE("free scattering returns the input forward and nothing backward", "[observables]") {
    const ChannelGrid g = build_grid(0.2, 1.2, 41, 0.0, 0.0, Units{});
    const SMatrix s = extract_smatrix(g, barrier_model(0.0), -0.5, 1.5);
    PacketSpec spec;
    spec.k_center = 0.7;
    spec.sigma_k = 0.05;
    const AmplitudeSet input = build_packet(g, spec);

    const PlanePair planes = output_amplitudes(s, input);
    CHECK(planes.at_z1.plane == -0.5);
    CHECK(planes.at_z2.plane == 1.5);
    CHECK(planes.at_z1.role == SetRole::FullPlane);
    CHECK(planes.at_z2.role == SetRole::FullPlane);
    CHECK((planes.at_z2.f_F - input.f_F).cwiseAbs().maxCoeff() < 1e-9);
    CHECK(planes.at_z1.f_B.cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("plane outputs conserve presence and split by the barrier intensities",
          "[observables]") {
    const ChannelGrid g = build_grid(0.45, 0.55, 41, 0.0, 0.0, Units{});
    const SMatrix s = extract_smatrix(g, barrier_model(1.0, 0.0, 1.0), 0.0, 1.0);
    PacketSpec spec;
    spec.k_center = 0.5;
    spec.sigma_k = 0.008;
    const AmplitudeSet input = build_packet(g, spec);

    const PlanePair planes = output_amplitudes(s, input);
    CHECK(presence_norm(planes.at_z1) == Approx(presence_norm(planes.at_z2)).margin(1e-8));

    const double peak = input.f_F.cwiseAbs().maxCoeff();
    for (int j = 0; j < g.size(); ++j) {
        if (std::abs(input.f_F(j)) < 1e-3 * peak) continue;
        const double intensity =
            oracle::square_barrier_intensity(g.channels[j].k_t, 1.0, 1.0);
        const double t2 = std::norm(planes.at_z2.f_F(j) / input.f_F(j));
        const double r2 = std::norm(planes.at_z1.f_B(j) / input.f_F(j));
        CHECK(t2 == Approx(intensity).epsilon(1e-6));
        CHECK(r2 == Approx(1.0 - intensity).epsilon(1e-6));
    }
}

TEST_CASE("scattering inputs must be input pairs on the same grid", "[observables]") {
    const ChannelGrid g = build_grid(0.45, 0.55, 41, 0.0, 0.0, Units{});
    const SMatrix s = extract_smatrix(g, barrier_model(1.0, 0.0, 1.0), 0.0, 1.0);
    PacketSpec spec;
    spec.k_center = 0.5;
    spec.sigma_k = 0.008;

    const ChannelGrid other = build_grid(0.45, 0.55, 21, 0.0, 0.0, Units{});
    CHECK_THROWS_AS(output_amplitudes(s, build_packet(other, spec)), GridMismatch);

    AmplitudeSet misrole = build_packet(g, spec);
    misrole.role = SetRole::FullPlane;
    CHECK_THROWS_AS(output_amplitudes(s, misrole), ConfigError);
    CHECK_THROWS_AS(crossing_time(build_packet(g, spec)), ConfigError);
}

TEST_CASE("crossing times reproduce launch offsets and classical flight", "[observables]") {
    const ChannelGrid g = build_grid(0.2, 1.2, 201, 0.0, 0.0, Units{});
    PacketSpec spec;
    spec.k_center = 0.7;
    spec.sigma_k = 0.05;

    AmplitudeSet at_origin = build_packet(g, spec);
    at_origin.role = SetRole::FullPlane;
    at_origin.plane = 0.0;
    CHECK(crossing_time(at_origin) == Approx(0.0).margin(1e-6));

    AmplitudeSet displaced = at_origin;
    displaced.plane = 2.0;
    CHECK(crossing_time(displaced) ==
          Approx(classical_time(g, displaced.f_F, 2.0)).margin(1e-6));

    PacketSpec late = spec;
    late.t0 = 0.4;
    AmplitudeSet at_origin_late = build_packet(g, late);
    at_origin_late.role = SetRole::FullPlane;
    at_origin_late.plane = 0.0;
    CHECK(crossing_time(at_origin_late) - crossing_time(at_origin) ==
          Approx(0.4).margin(1e-8));

    // a phase ramp exp(-i k_t c) retards the crossing by c times the current
    AmplitudeSet ramped = at_origin;
    ramped.f_F = phase_ramp(g, at_origin.f_F, 0.37);
    CHECK(crossing_time(ramped) - crossing_time(at_origin) ==
          Approx(-0.37 * presence_norm(at_origin)).margin(1e-8));
}

TEST_CASE("amplitude mass close to a band edge is refused as divergent", "[observables]") {
    const Units units;
    const ChannelGrid g = build_grid(0.05, 1.05, 21, 0.0, 0.0, units, 0.05);
    AmplitudeSet set;
    set.grid = g;
    set.role = SetRole::FullPlane;
    set.plane = 0.0;
    set.f_F = Eigen::VectorXcd::Zero(g.size());
    set.f_B = Eigen::VectorXcd::Zero(g.size());
    set.f_F(2) = 1.0;  // k_t = 0.15, within ten threshold windows of the edge
    CHECK_THROWS_AS(crossing_time(set), ThresholdDivergence);

    PacketSpec safe;
    safe.k_center = 0.7;
    safe.sigma_k = 0.04;
    AmplitudeSet packet = build_packet(g, safe);
    packet.role = SetRole::FullPlane;
    packet.plane = 0.0;
    CHECK_NOTHROW(crossing_time(packet));
}

TEST_CASE("free dwell equals the classical traversal by both routes", "[observables]") {
    const ChannelGrid g = build_grid(0.2, 1.2, 61, 0.0, 0.0, Units{});
    const PotentialModel free = barrier_model(0.0);
    const SMatrix s = extract_smatrix(g, free, -0.3, 1.7);
    PacketSpec spec;
    spec.k_center = 0.7;
    spec.sigma_k = 0.05;
    const AmplitudeSet input = build_packet(g, spec);
    const double expected = classical_time(g, input.f_F, 2.0);

    CHECK(dwell_time_surface(s, input) == Approx(expected).margin(1e-5));
    // the two internal assemblies of the surface route agree to roundoff
    CHECK_NOTHROW(dwell_time_surface(s, input, 1e-9));
    CHECK(dwell_time_volume(s, free, input, 32) == Approx(expected).margin(1e-4));
}

TEST_CASE("dwell time ignores a global phase ramp on the input", "[observables]") {
    const SMatrix& s = narrow_barrier_smatrix();
    const AmplitudeSet input = narrow_packet();
    AmplitudeSet ramped = input;
    ramped.f_F = phase_ramp(s.grid, input.f_F, 0.61);
    CHECK_NOTHROW(dwell_time_surface(s, ramped, 1e-9));
    CHECK(dwell_time_surface(s, ramped) == Approx(dwell_time_surface(s, input)).margin(1e-8));
}

TEST_CASE("volume route is stable under refinement and guards deep evanescence",
          "[observables]") {
    const SMatrix& s = narrow_barrier_smatrix();
    const PotentialModel model = barrier_model(1.0, 0.0, 1.0);
    const AmplitudeSet input = narrow_packet();
    const double coarse = dwell_time_volume(s, model, input, 32);
    const double fine = dwell_time_volume(s, model, input, 64);
    CHECK(std::abs(fine - coarse) < 1e-6);

    const ChannelGrid mixed = build_grid(-0.45, 0.75, 13, 0.0, 0.0, Units{});
    const PotentialModel free = barrier_model(0.0);
    const SMatrix wide = extract_smatrix(mixed, free, 0.0, 40.0);
    PacketSpec spec;
    spec.k_center = 0.45;
    spec.sigma_k = 0.05;
    const AmplitudeSet packet = build_packet(mixed, spec);
    CHECK_THROWS_AS(dwell_time_volume(wide, free, packet, 16), SegmentTooLong);
}

TEST_CASE("outgoing presence currents satisfy the signed sum rules", "[observables]") {
    const ChannelGrid g = build_grid(0.45, 0.55, 41, 0.0, 0.0, Units{});
    PacketSpec spec;
    spec.k_center = 0.5;
    spec.sigma_k = 0.008;

    const PotentialModel free = barrier_model(0.0);
    const SMatrix s_free = extract_smatrix(g, free, -0.2, 1.2);
    const PresenceCurrents free_cur = out_currents(s_free, build_packet(g, spec));
    CHECK(std::abs(free_cur.reflected) < 1e-12);
    CHECK(free_cur.transmitted == Approx(1.0).margin(1e-10));

    const SMatrix s = extract_smatrix(g, barrier_model(1.0, 0.0, 1.0), 0.0, 1.0);
    const PresenceCurrents cur = out_currents(s, build_packet(g, spec));
    CHECK(cur.reflected < 0.0);
    CHECK(cur.transmitted > 0.0);
    CHECK(cur.transmitted - cur.reflected == Approx(1.0).margin(1e-8));

    PacketSpec rev = spec;
    rev.side = PacketSide::BackwardAtZ2;
    const PresenceCurrents bcur = out_currents(s, build_packet(g, rev));
    CHECK(bcur.reflected > 0.0);
    CHECK(bcur.transmitted < 0.0);
    CHECK(bcur.reflected - bcur.transmitted == Approx(1.0).margin(1e-8));

    AmplitudeSet two_sided = build_packet(g, spec);
    two_sided.f_B = two_sided.f_F;
    CHECK_THROWS_AS(out_currents(s, two_sided), ConfigError);
}

TEST_CASE("free transmission delay is the classical traversal; reflection never arrives",
          "[observables]") {
    const ChannelGrid g = build_grid(0.2, 1.2, 61, 0.0, 0.0, Units{});
    const PotentialModel free = barrier_model(0.0);
    const SMatrix s = extract_smatrix(g, free, -0.3, 1.7);
    PacketSpec spec;
    spec.k_center = 0.7;
    spec.sigma_k = 0.05;
    const AmplitudeSet input = build_packet(g, spec);

    CHECK_THROWS_AS(delay_times(s, input), ZeroCurrent);

    const TimeStatistics stats = delay_times(s, input, ZeroCurrentPolicy::ReturnNaN);
    CHECK(stats.delay_transmit ==
          Approx(classical_time(g, input.f_F, 2.0)).margin(1e-6));
    CHECK(std::isnan(stats.delay_reflect));
    CHECK(std::isnan(stats.tau_out_reflect));
    CHECK(stats.T_current == Approx(1.0).margin(1e-10));
}

TEST_CASE("narrow-packet transmission delay matches the stationary-phase value",
          "[observables]") {
    const SMatrix& s = narrow_barrier_smatrix();
    const TimeStatistics fwd = delay_times(s, narrow_packet());
    const double reference = oracle::stationary_phase_delay(0.5, 1.0, 1.0, 0.0, 1.0, 1e-5);
    CHECK(fwd.delay_transmit == Approx(reference).epsilon(0.02));
    CHECK(std::isfinite(fwd.delay_reflect));
    CHECK(fwd.T_current - fwd.R_current == Approx(1.0).margin(1e-8));

    // the barrier is mirror symmetric, so a backward packet sees the same
    // delays up to finite-width effects: the traversal term is averaged
    // against the transmitted spectrum in one direction and the input
    // spectrum in the other, an O(sigma_k^2) reweighting (~1e-4 here)
    const TimeStatistics bwd = delay_times(s, narrow_packet(PacketSide::BackwardAtZ2));
    CHECK(bwd.delay_transmit == Approx(fwd.delay_transmit).margin(5e-4));
    CHECK(bwd.delay_reflect == Approx(fwd.delay_reflect).margin(5e-4));
}

TEST_CASE("delay times are invariant under a launch-phase ramp", "[observables]") {
    const SMatrix& s = narrow_barrier_smatrix();
    const AmplitudeSet input = narrow_packet();
    AmplitudeSet ramped = input;
    ramped.f_F = phase_ramp(s.grid, input.f_F, 0.83);

    const TimeStatistics base = delay_times(s, input);
    const TimeStatistics moved = delay_times(s, ramped);
    CHECK(moved.tau_in - base.tau_in == Approx(-0.83).margin(1e-8));
    CHECK(moved.tau_out_transmit - base.tau_out_transmit == Approx(-0.83).margin(1e-8));
    CHECK(moved.delay_transmit == Approx(base.delay_transmit).margin(1e-8));
    CHECK(moved.delay_reflect == Approx(base.delay_reflect).margin(1e-8));
}

TEST_CASE("the combined statistics record is self-consistent on a tunneling barrier",
          "[observables]") {
    const SMatrix& s = narrow_barrier_smatrix();
    const PotentialModel model = barrier_model(1.0, 0.0, 1.0);
    const AmplitudeSet input = narrow_packet();
    TimeOptions options;
    options.z_panels = 48;
    const TimeStatistics stats = time_statistics(s, model, input, options);

    CHECK(stats.T_current - stats.R_current == Approx(1.0).margin(1e-8));
    CHECK(stats.dwell_route_gap <= 1e-4);
    CHECK(stats.tau_dwell_surface ==
          Approx(stats.tau_dwell_volume).margin(1e-4 * std::abs(stats.tau_dwell_volume)));
    CHECK(std::isfinite(stats.delay_transmit));
    CHECK(std::isfinite(stats.delay_reflect));
    CHECK(std::isfinite(stats.tau_in));
    CHECK(stats.tau_dwell_surface > 0.0);
}

TEST_CASE("a starved spectral grid is refused with a route mismatch", "[observables]") {
    const ChannelGrid g = build_grid(0.45, 0.55, 9, 0.0, 0.0, Units{});
    const PotentialModel model = barrier_model(1.0, 0.0, 1.0);
    const SMatrix s = extract_smatrix(g, model, 0.0, 1.0);
    PacketSpec spec;
    spec.k_center = 0.5;
    spec.sigma_k = 0.01;
    const AmplitudeSet input = build_packet(g, spec);
    CHECK_THROWS_AS(time_statistics(s, model, input), RouteMismatch);
}
