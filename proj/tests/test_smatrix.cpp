#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>

#include "zscat/smatrix.hpp"

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

PotentialModel driven_barrier(double v0, double amp, double omega, double phase) {
    PotentialModel m = barrier_model(v0);
    m.omega = omega;
    m.harmonics.push_back({1, m.static_part, phase});
    m.harmonics.back().profile.amplitude = amp;
    return m;
}

} // namespace

TEST_CASE("free potential yields the discrete identity kernel", "[smatrix]") {
    const ChannelGrid g = build_grid(0.2, 1.2, 11, 0.0, 0.0, Units{});
    const SMatrix s = extract_smatrix(g, barrier_model(0.0), -0.5, 1.5);
    for (int j = 0; j < s.n_cols(); ++j) {
        const int row = g.open_index[j];
        for (int i = 0; i < s.n_rows(); ++i) {
            const complex expected =
                i == row ? complex(1.0 / g.weights[row], 0.0) : complex(0.0, 0.0);
            CHECK(std::abs(s.t_ff(i, j) - expected) < 1e-9 / g.weights[row]);
            CHECK(std::abs(s.t_bb(i, j) - expected) < 1e-9 / g.weights[row]);
            CHECK(std::abs(s.r_fb(i, j)) < 1e-9 / g.weights[row]);
            CHECK(std::abs(s.r_bf(i, j)) < 1e-9 / g.weights[row]);
        }
    }
    CHECK(unitarity_defect_left(s) < 1e-10);
    CHECK(unitarity_defect_right(s) < 1e-10);
}

TEST_CASE("sample action matches the weighted kernel convention", "[smatrix]") {
    const ChannelGrid g = build_grid(0.2, 1.2, 11, 0.0, 0.0, Units{});
    const SMatrix s = extract_smatrix(g, barrier_model(), -0.2, 1.2);
    Eigen::VectorXcd f = Eigen::VectorXcd::Zero(s.n_cols());
    f(5) = complex(0.7, -0.3);
    const auto [fwd, bwd] = apply_smatrix(s, f, Eigen::VectorXcd::Zero(s.n_cols()));
    const double w = g.weights[g.open_index[5]];
    CHECK((fwd - s.t_ff.col(5) * (w * f(5))).cwiseAbs().maxCoeff() < 1e-14);
    CHECK((bwd - s.r_bf.col(5) * (w * f(5))).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("support must sit inside the slab", "[smatrix]") {
    const ChannelGrid g = build_grid(0.2, 1.2, 11, 0.0, 0.0, Units{});
    CHECK_THROWS_AS(extract_smatrix(g, barrier_model(1.0, 0.0, 2.0), -0.5, 1.5),
                    SupportViolation);
}

TEST_CASE("center-channel transmission matches the frozen barrier oracle", "[smatrix]") {
    const ChannelGrid g = build_grid(0.45, 0.55, 3, 0.0, 0.0, Units{});
    const SMatrix s = extract_smatrix(g, barrier_model(1.0, 0.0, 1.0), -0.2, 1.3);
    // sample value = w * S entry
    const complex t_sample = s.t_ff(1, 1) * g.weights[1];
    CHECK(std::norm(t_sample) == Approx(oracle::kBarrierHalfHeightIntensity).epsilon(1e-8));
    const auto ref = oracle::square_barrier(0.5, 1.0, 1.0);
    CHECK(std::abs(t_sample - ref.t) < 1e-9);
}

TEST_CASE("static barrier satisfies the flux identities", "[smatrix]") {
    // mixed grid: closed channels participate as rows only
    const ChannelGrid g = build_grid(-0.45, 0.75, 13, 0.0, 0.0, Units{});
    REQUIRE(g.n_closed() > 0);
    const SMatrix s = extract_smatrix(g, barrier_model(0.6, 0.0, 0.8), -0.4, 1.2);

    const auto defects = quadratic_identity_defects(s);
    for (double d : defects) CHECK(d < 1e-8);
    CHECK(unitarity_defect_left(s) ==
          Approx(std::max({defects[0], defects[1], defects[2], defects[3]})).margin(1e-15));
    CHECK(unitarity_defect_right(s) < 1e-8);
}

TEST_CASE("driven barrier keeps the weighted identities", "[smatrix]") {
    // h = 0.05, omega = 4 lattice steps
    const ChannelGrid g = build_grid(0.5, 1.5, 21, 0.0, 0.0, Units{});
    const SMatrix s = extract_smatrix(g, driven_barrier(1.0, 0.1, 0.2, 0.7), -0.2, 1.2);
    CHECK(unitarity_defect_left(s) < 1e-6);
    for (double d : quadratic_identity_defects(s)) CHECK(d < 1e-6);
    // right unitarity is reported, not asserted, for driven models
    CHECK(std::isfinite(unitarity_defect_right(s)));
}

TEST_CASE("sideband amplitudes scale linearly in the weak drive", "[smatrix]") {
    const ChannelGrid g = build_grid(0.5, 1.5, 21, 0.0, 0.0, Units{});
    const int center = 10;  // k_t = 1.0
    const int up = 14;      // k_t = 1.2 = k_t + omega
    REQUIRE(g.channels[center].k_t == Approx(1.0));
    REQUIRE(g.channels[up].k_t == Approx(1.2));
    auto sideband = [&](double amp) {
        const SMatrix s = extract_smatrix(g, driven_barrier(0.4, amp, 0.2, 0.0), -0.2, 1.2);
        // column index of the center channel among open columns
        return std::abs(s.t_ff(up, center) * g.weights[center]);
    };
    const double a1 = sideband(0.02);
    const double a2 = sideband(0.04);
    CHECK(a2 / a1 == Approx(2.0).epsilon(0.05));
}

TEST_CASE("split separates open and closed rows", "[smatrix]") {
    const ChannelGrid g = build_grid(-0.45, 0.75, 13, 0.0, 0.0, Units{});
    const SMatrix s = extract_smatrix(g, barrier_model(0.6, 0.0, 0.8), -0.4, 1.2);
    const SplitSMatrix sp = split(s);
    CHECK(sp.t_ff_open.rows() == g.n_open());
    CHECK(sp.t_ff_closed.rows() == g.n_closed());
    CHECK(sp.t_ff_open.cols() == g.n_open());
    // a static potential cannot shift k_t, so closed rows vanish identically
    CHECK(sp.t_ff_closed.cwiseAbs().maxCoeff() == 0.0);
    CHECK(sp.r_bf_closed.cwiseAbs().maxCoeff() == 0.0);
    // spot-check a row against the parent matrix
    const int first_closed = g.closed_index[0];
    CHECK((sp.t_ff_closed.row(0) - s.t_ff.row(first_closed)).cwiseAbs().maxCoeff() == 0.0);

    // a drive two lattice steps wide feeds closed rows through sidebands
    const SMatrix sd = extract_smatrix(g, driven_barrier(0.6, 0.15, 0.2, 0.0), -0.4, 1.2);
    const SplitSMatrix spd = split(sd);
    CHECK(spd.t_ff_closed.cwiseAbs().maxCoeff() > 0.0);
    CHECK(spd.r_bf_closed.cwiseAbs().maxCoeff() > 0.0);
}
