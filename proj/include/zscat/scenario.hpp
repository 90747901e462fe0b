#pragma once

// Scenario files: JSON description of a grid + potential + slab + packet list,
// and the report generators behind the command-line driver.  Parsing errors
// carry the dotted field path ("slab.z1: missing") so a bad file points at the
// offending entry.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "zscat/errors.hpp"
#include "zscat/grid.hpp"
#include "zscat/modes.hpp"
#include "zscat/observables.hpp"
#include "zscat/potential.hpp"
#include "zscat/propagator.hpp"
#include "zscat/serialize.hpp"
#include "zscat/smatrix.hpp"

namespace zscat {

/// Complete description of one computation: frequency grid, potential model,
/// slab faces, wave packets, and numerical controls.
struct Scenario {
    Units units{};
    double k_t_min = 0.0;   ///< lower edge of the frequency window
    double k_t_max = 0.0;   ///< upper edge of the frequency window
    int n_points = 0;       ///< lattice size across [k_t_min, k_t_max]
    double k_x = 0.0;
    double k_y = 0.0;
    double threshold_window = 1e-3;
    PotentialModel model{};
    double z1 = 0.0;        ///< entry face
    double z2 = 0.0;        ///< exit face
    std::vector<PacketSpec> packets{};
    TimeOptions time{};     ///< quadrature / tolerance controls

    void validate() const {
        if (!(k_t_max > k_t_min))
            throw ConfigError("grid: need k_t_max > k_t_min");
        if (n_points < 2)
            throw ConfigError("grid.n_points: need at least 2 lattice nodes");
        if (!(z2 > z1))
            throw ConfigError("slab: need z2 > z1");
        model.validate();
    }
};

namespace detail {

[[nodiscard]] inline const json& require_field(const json& j, const char* key,
                                               const std::string& path) {
    if (!j.is_object())
        throw ConfigError(path + ": expected an object");
    const auto it = j.find(key);
    if (it == j.end())
        throw ConfigError(path + "." + key + ": missing");
    return *it;
}

[[nodiscard]] inline double get_num(const json& j, const char* key,
                                    const std::string& path) {
    const json& v = require_field(j, key, path);
    if (!v.is_number())
        throw ConfigError(path + "." + key + ": expected a number");
    return v.get<double>();
}

[[nodiscard]] inline double get_num_or(const json& j, const char* key,
                                       const std::string& path, double fallback) {
    if (!j.is_object() || !j.contains(key)) return fallback;
    return get_num(j, key, path);
}

[[nodiscard]] inline int get_int(const json& j, const char* key,
                                 const std::string& path) {
    const json& v = require_field(j, key, path);
    if (!v.is_number_integer())
        throw ConfigError(path + "." + key + ": expected an integer");
    return v.get<int>();
}

[[nodiscard]] inline int get_int_or(const json& j, const char* key,
                                    const std::string& path, int fallback) {
    if (!j.is_object() || !j.contains(key)) return fallback;
    return get_int(j, key, path);
}

[[nodiscard]] inline std::string get_str(const json& j, const char* key,
                                         const std::string& path) {
    const json& v = require_field(j, key, path);
    if (!v.is_string())
        throw ConfigError(path + "." + key + ": expected a string");
    return v.get<std::string>();
}

[[nodiscard]] inline Profile parse_profile(const json& j, const std::string& path,
                                           const std::string& base_dir) {
    Profile p;
    const std::string kind = get_str(j, "kind", path);
    if (kind == "square")
        p.kind = Profile::Kind::Square;
    else if (kind == "gaussian")
        p.kind = Profile::Kind::Gaussian;
    else if (kind == "smoothed_step")
        p.kind = Profile::Kind::SmoothedStep;
    else if (kind == "tabulated")
        p.kind = Profile::Kind::Tabulated;
    else
        throw ConfigError(path + ".kind: unknown kind '" + kind +
                          "' (use square, gaussian, smoothed_step, or tabulated)");

    const json& support = require_field(j, "support", path);
    if (!support.is_array() || support.size() != 2 || !support[0].is_number() ||
        !support[1].is_number())
        throw ConfigError(path + ".support: expected [lo, hi]");
    p.support_min = support[0].get<double>();
    p.support_max = support[1].get<double>();

    if (p.kind == Profile::Kind::Tabulated) {
        p.amplitude = get_num_or(j, "amplitude", path, 1.0);
        if (j.contains("table")) {
            const json& table = j.at("table");
            if (!table.is_array() || table.size() < 2)
                throw ConfigError(path + ".table: expected an array of at least 2 [z, v] pairs");
            for (const auto& row : table) {
                if (!row.is_array() || row.size() != 2)
                    throw ConfigError(path + ".table: each row must be [z, v]");
                p.table_z.push_back(row[0].get<double>());
                p.table_v.push_back(row[1].get<double>());
            }
        } else if (j.contains("file")) {
            std::string file = get_str(j, "file", path);
            if (!file.empty() && file.front() != '/' && !base_dir.empty())
                file = base_dir + "/" + file;
            std::tie(p.table_z, p.table_v) = load_profile_table(file);
        } else {
            throw ConfigError(path + ": tabulated profile needs 'table' or 'file'");
        }
    } else {
        p.amplitude = get_num(j, "amplitude", path);
        p.center = get_num_or(j, "center", path,
                              0.5 * (p.support_min + p.support_max));
        p.width = get_num_or(j, "width", path,
                             0.25 * (p.support_max - p.support_min));
    }
    p.validate(path);
    return p;
}

[[nodiscard]] inline PacketSpec parse_packet(const json& j, const std::string& path) {
    PacketSpec spec;
    spec.k_center = get_num(j, "k_center", path);
    spec.sigma_k = get_num(j, "sigma_k", path);
    if (!(spec.sigma_k > 0.0))
        throw ConfigError(path + ".sigma_k: must be positive");
    spec.t0 = get_num_or(j, "t0", path, 0.0);
    std::string side = "forward";
    if (j.contains("side")) side = get_str(j, "side", path);
    if (side == "forward")
        spec.side = PacketSide::ForwardAtZ1;
    else if (side == "backward")
        spec.side = PacketSide::BackwardAtZ2;
    else
        throw ConfigError(path + ".side: expected 'forward' or 'backward'");
    return spec;
}

}  // namespace detail

/// Build a scenario from parsed JSON.  base_dir resolves relative table files.
[[nodiscard]] inline Scenario parse_scenario(const json& j,
                                             const std::string& base_dir = "") {
    using detail::get_int;
    using detail::get_int_or;
    using detail::get_num;
    using detail::get_num_or;
    using detail::get_str;
    using detail::require_field;

    Scenario sc;
    if (j.contains("units")) {
        const json& u = j.at("units");
        sc.units.hbar = get_num_or(u, "hbar", "units", 1.0);
        sc.units.mass = get_num_or(u, "mass", "units", 1.0);
        if (!(sc.units.hbar > 0.0) || !(sc.units.mass > 0.0))
            throw ConfigError("units: hbar and mass must be positive");
    }

    const json& grid = require_field(j, "grid", "scenario");
    sc.k_t_min = get_num(grid, "k_t_min", "grid");
    sc.k_t_max = get_num(grid, "k_t_max", "grid");
    sc.n_points = get_int(grid, "n_points", "grid");
    sc.k_x = get_num_or(grid, "k_x", "grid", 0.0);
    sc.k_y = get_num_or(grid, "k_y", "grid", 0.0);
    sc.threshold_window = get_num_or(grid, "threshold_window", "grid", 1e-3);

    const json& pot = require_field(j, "potential", "scenario");
    const json& stat = require_field(pot, "static", "potential");
    sc.model.static_part = detail::parse_profile(stat, "potential.static", base_dir);
    sc.model.omega = get_num_or(pot, "omega", "potential", 0.0);
    if (pot.contains("harmonics")) {
        const json& harmonics = pot.at("harmonics");
        if (!harmonics.is_array())
            throw ConfigError("potential.harmonics: expected an array");
        int idx = 0;
        for (const auto& h : harmonics) {
            const std::string path = "potential.harmonics[" + std::to_string(idx) + "]";
            Harmonic harm;
            harm.n = get_int(h, "n", path);
            harm.phase = get_num_or(h, "phase", path, 0.0);
            if (h.contains("profile")) {
                harm.profile = detail::parse_profile(h.at("profile"), path + ".profile",
                                                     base_dir);
            } else {
                // Same spatial shape as the static part, rescaled.
                harm.profile = sc.model.static_part;
                harm.profile.amplitude = get_num(h, "amplitude", path);
            }
            sc.model.harmonics.push_back(std::move(harm));
            ++idx;
        }
    }

    const json& slab = require_field(j, "slab", "scenario");
    sc.z1 = get_num(slab, "z1", "slab");
    sc.z2 = get_num(slab, "z2", "slab");

    if (j.contains("packets")) {
        const json& packets = j.at("packets");
        if (!packets.is_array())
            throw ConfigError("packets: expected an array");
        int idx = 0;
        for (const auto& p : packets) {
            sc.packets.push_back(
                detail::parse_packet(p, "packets[" + std::to_string(idx) + "]"));
            ++idx;
        }
    }

    sc.time.z_panels = get_int_or(j, "z_resolution", "scenario", 64);
    if (sc.time.z_panels < 1)
        throw ConfigError("z_resolution: must be at least 1");
    // Reports record vanishing-current branches as null instead of failing.
    sc.time.zero_current = ZeroCurrentPolicy::ReturnNaN;
    if (j.contains("tolerances")) {
        const json& tol = j.at("tolerances");
        sc.time.propagation.tolerance =
            get_num_or(tol, "integrator", "tolerances", sc.time.propagation.tolerance);
        sc.time.route_tol = get_num_or(tol, "route_match", "tolerances", sc.time.route_tol);
        sc.time.internal_tol =
            get_num_or(tol, "internal_route", "tolerances", sc.time.internal_tol);
        sc.time.mass_bound = get_num_or(tol, "mass_bound", "tolerances", sc.time.mass_bound);
        if (tol.contains("zero_current")) {
            const std::string policy = get_str(tol, "zero_current", "tolerances");
            if (policy == "throw")
                sc.time.zero_current = ZeroCurrentPolicy::Throw;
            else if (policy == "nan")
                sc.time.zero_current = ZeroCurrentPolicy::ReturnNaN;
            else
                throw ConfigError("tolerances.zero_current: expected 'throw' or 'nan'");
        }
    }

    sc.validate();
    return sc;
}

/// Parse a scenario file; relative table paths resolve against its directory.
[[nodiscard]] inline Scenario load_scenario(const std::string& file) {
    std::ifstream in(file);
    if (!in)
        throw ConfigError("scenario: cannot open '" + file + "'");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("scenario: '" + file + "' is not valid JSON: " + e.what());
    }
    std::string base_dir;
    const auto slash = file.find_last_of('/');
    if (slash != std::string::npos) base_dir = file.substr(0, slash);
    return parse_scenario(j, base_dir);
}

[[nodiscard]] inline ChannelGrid make_grid(const Scenario& sc) {
    return build_grid(sc.k_t_min, sc.k_t_max, sc.n_points, sc.k_x, sc.k_y, sc.units,
                      sc.threshold_window);
}

namespace detail {

[[nodiscard]] inline json pairing_table(const TwoComponentValue& plus_bra,
                                        const TwoComponentValue& minus_bra,
                                        const TwoComponentValue& plus_ket,
                                        const TwoComponentValue& minus_ket,
                                        const Units& units) {
    auto entry = [&](const TwoComponentValue& a, const TwoComponentValue& b) {
        const std::complex<double> v = metric_pairing(a, b, units);
        return json::array({v.real(), v.imag()});
    };
    return json{{"pp", entry(plus_bra, plus_ket)},
                {"pm", entry(plus_bra, minus_ket)},
                {"mp", entry(minus_bra, plus_ket)},
                {"mm", entry(minus_bra, minus_ket)}};
}

[[nodiscard]] inline double table_defect(const json& table, double pp, double pm,
                                         double mp, double mm) {
    auto dev = [&](const char* key, double re) {
        const json& v = table.at(key);
        return std::max(std::abs(v[0].get<double>() - re),
                        std::abs(v[1].get<double>()));
    };
    return std::max(std::max(dev("pp", pp), dev("pm", pm)),
                    std::max(dev("mp", mp), dev("mm", mm)));
}

}  // namespace detail

/// Orthogonality audit of the channel-mode tables.  Samples five planes across
/// the slab; every open channel must pair as diag(+1, -1), every closed channel
/// as antidiag(1, 1), and the threshold pair as antidiag(1, 1).
[[nodiscard]] inline json run_modes(const Scenario& sc) {
    const ChannelGrid g = make_grid(sc);
    json report;
    report["format"] = "modes-1";
    report["grid"] = grid_to_json(g);

    std::vector<double> planes;
    for (int i = 0; i < 5; ++i)
        planes.push_back(sc.z1 + (sc.z2 - sc.z1) * static_cast<double>(i) / 4.0);
    report["z_samples"] = planes;

    double open_defect = 0.0;
    double closed_defect = 0.0;
    json open_table, closed_table;
    for (double z : planes) {
        for (int i : g.open_index) {
            const Channel& ch = g.channels[i];
            const auto fwd = open_mode(ch, Direction::Forward, z, g.units);
            const auto bwd = open_mode(ch, Direction::Backward, z, g.units);
            const json table = detail::pairing_table(fwd, bwd, fwd, bwd, g.units);
            open_defect = std::max(open_defect,
                                   detail::table_defect(table, 1.0, 0.0, 0.0, -1.0));
            if (open_table.is_null()) open_table = table;
        }
        for (int i : g.closed_index) {
            const Channel& ch = g.channels[i];
            const auto grow = closed_mode(ch, Direction::Forward, z, g.units);
            const auto decay = closed_mode(ch, Direction::Backward, z, g.units);
            const json table = detail::pairing_table(grow, decay, grow, decay, g.units);
            closed_defect = std::max(closed_defect,
                                     detail::table_defect(table, 0.0, 1.0, 1.0, 0.0));
            if (closed_table.is_null()) closed_table = table;
        }
    }

    // Threshold pair: evaluate on the marginal channel where the dispersion
    // discriminant vanishes (k_t = hbar (k_x^2 + k_y^2) / 2m).
    const double k_marginal = sc.units.hbar * (sc.k_x * sc.k_x + sc.k_y * sc.k_y) /
                              (2.0 * sc.units.mass);
    const Channel marginal =
        classify_channel(k_marginal, sc.k_x, sc.k_y, sc.units, sc.threshold_window);
    double ghost_defect = 0.0;
    json ghost_table;
    for (double z : planes) {
        const auto pair = ghost_pair(marginal, z, sc.units);
        const json table =
            detail::pairing_table(pair[0], pair[1], pair[0], pair[1], g.units);
        ghost_defect = std::max(ghost_defect,
                                detail::table_defect(table, 0.0, 1.0, 1.0, 0.0));
        if (ghost_table.is_null()) ghost_table = table;
    }

    report["open"] = json{{"n_channels", static_cast<int>(g.open_index.size())},
                          {"expected", "diag(+1, -1)"},
                          {"max_defect", open_defect},
                          {"sample_table", open_table}};
    report["closed"] = json{{"n_channels", static_cast<int>(g.closed_index.size())},
                            {"expected", "antidiag(1, 1)"},
                            {"max_defect", closed_defect},
                            {"sample_table", closed_table}};
    report["threshold_pair"] = json{{"k_t", k_marginal},
                                    {"expected", "antidiag(1, 1)"},
                                    {"max_defect", ghost_defect},
                                    {"sample_table", ghost_table}};
    return report;
}

namespace detail {

/// Largest weighted column mass scattered away from the energy-diagonal.  Only
/// meaningful for static models, where frequency is conserved.
[[nodiscard]] inline double off_diagonal_mass(const SMatrix& s) {
    double worst = 0.0;
    for (int a = 0; a < s.n_cols(); ++a) {
        const int target = s.grid.open_index[static_cast<std::size_t>(a)];
        for (const Eigen::MatrixXcd* block : {&s.t_ff, &s.r_fb, &s.r_bf, &s.t_bb}) {
            double acc = 0.0;
            for (int i = 0; i < s.n_rows(); ++i) {
                if (i == target) continue;
                acc += std::norm(s.grid.weights[static_cast<std::size_t>(i)] *
                                 (*block)(i, a));
            }
            worst = std::max(worst, std::sqrt(acc));
        }
    }
    return worst;
}

}  // namespace detail

struct ScatterResult {
    SMatrix s;
    json report;
};

/// Extract the slab scattering matrix and its health figures.
[[nodiscard]] inline ScatterResult run_scatter(const Scenario& sc) {
    const ChannelGrid g = make_grid(sc);
    ScatterResult out{extract_smatrix(g, sc.model, sc.z1, sc.z2, sc.time.propagation),
                      json{}};
    const auto quadratic = quadratic_identity_defects(out.s);
    out.report["format"] = "scatter-1";
    out.report["grid"] = grid_to_json(g);
    out.report["slab"] = json{{"z1", sc.z1}, {"z2", sc.z2}};
    out.report["driven"] = sc.model.driven();
    out.report["unitarity_defect_left"] = unitarity_defect_left(out.s);
    out.report["unitarity_defect_right"] = unitarity_defect_right(out.s);
    out.report["quadratic_identity_defects"] =
        json{{"forward", quadratic[0]},
             {"backward", quadratic[1]},
             {"mixed_fb", quadratic[2]},
             {"mixed_bf", quadratic[3]}};
    out.report["off_diagonal_mass"] =
        sc.model.driven() ? json() : json(detail::off_diagonal_mass(out.s));
    return out;
}

struct TimesResult {
    json report;
    std::string csv;
};

/// Time observables for every packet in the scenario.
[[nodiscard]] inline TimesResult run_times(const Scenario& sc, const SMatrix& s) {
    if (sc.packets.empty())
        throw ConfigError("packets: at least one packet is required for time reports");
    TimesResult out;
    out.report["format"] = "times-1";
    out.report["slab"] = json{{"z1", sc.z1}, {"z2", sc.z2}};
    out.report["driven"] = sc.model.driven();
    json rows = json::array();
    std::string csv = stats_csv_header() + "\n";
    for (const PacketSpec& spec : sc.packets) {
        const AmplitudeSet input = build_packet(s.grid, spec);
        const TimeStatistics stats = time_statistics(s, sc.model, input, sc.time);
        json row;
        row["packet"] = json{
            {"k_center", spec.k_center},
            {"sigma_k", spec.sigma_k},
            {"t0", spec.t0},
            {"side", spec.side == PacketSide::ForwardAtZ1 ? "forward" : "backward"}};
        row["times"] = stats_to_json(stats);
        rows.push_back(std::move(row));
        csv += stats_csv_row(spec, stats) + "\n";
    }
    out.report["packets"] = std::move(rows);
    out.csv = std::move(csv);
    return out;
}

[[nodiscard]] inline TimesResult run_times(const Scenario& sc) {
    const ChannelGrid g = make_grid(sc);
    const SMatrix s = extract_smatrix(g, sc.model, sc.z1, sc.z2, sc.time.propagation);
    return run_times(sc, s);
}

/// Cross-validation sweep: propagator metric conservation, scattering-matrix
/// identities, and per-packet flux / dwell-route consistency.  The returned
/// report carries one entry per check and an overall pass flag.
[[nodiscard]] inline json run_validate(const Scenario& sc) {
    const ChannelGrid g = make_grid(sc);
    json checks = json::array();
    bool all_passed = true;
    auto record = [&](const std::string& name, double value, double tol, bool asserted,
                      const std::string& note = "") {
        const bool ok = !asserted || value <= tol;
        json entry{{"name", name},
                   {"value", detail::number_or_null(value)},
                   {"tolerance", tol},
                   {"asserted", asserted},
                   {"passed", ok}};
        if (!note.empty()) entry["note"] = note;
        checks.push_back(std::move(entry));
        if (!ok) all_passed = false;
    };

    // Metric conservation of the integrated transfer map.  Long evanescent
    // slabs are split so no leg exceeds the growth cap.
    {
        double kappa_max = 0.0;
        for (int i : g.closed_index) kappa_max = std::max(kappa_max, g.channels[i].kappa);
        const double length = sc.z2 - sc.z1;
        int n_seg = 1;
        if (kappa_max > 0.0)
            n_seg = std::max(
                1, static_cast<int>(std::ceil(kappa_max * length /
                                              (0.8 * sc.time.propagation.kappa_cap))));
        double worst = 0.0;
        for (int seg = 0; seg < n_seg; ++seg) {
            const double za = sc.z1 + length * static_cast<double>(seg) / n_seg;
            const double zb = sc.z1 + length * static_cast<double>(seg + 1) / n_seg;
            const TransferMatrix t =
                transfer_matrix(g, sc.model, za, zb, sc.time.propagation);
            worst = std::max(worst, transfer_defect(t.u, g));
        }
        record("transfer_pseudo_unitarity", worst, 1e-8, true);
    }

    const SMatrix s = extract_smatrix(g, sc.model, sc.z1, sc.z2, sc.time.propagation);
    const bool driven = sc.model.driven();
    const double s_tol = driven ? 1e-6 : 1e-8;
    record("smatrix_unitarity_left", unitarity_defect_left(s), s_tol, true);
    record("smatrix_unitarity_right", unitarity_defect_right(s), s_tol, !driven,
           driven ? "reported only; not asserted for driven models" : "");
    {
        const auto quadratic = quadratic_identity_defects(s);
        const double worst =
            *std::max_element(quadratic.begin(), quadratic.end());
        record("quadratic_identities", worst, s_tol, true);
    }

    int idx = 0;
    for (const PacketSpec& spec : sc.packets) {
        const std::string tag = "[" + std::to_string(idx) + "]";
        const AmplitudeSet input = build_packet(g, spec);
        const PlanePair planes = output_amplitudes(s, input);

        // Net rightward presence must survive the slab unchanged.
        const double conservation =
            std::abs(presence_norm(planes.at_z2) - presence_norm(planes.at_z1));
        record("presence_conservation" + tag, conservation, 1e-8, true);

        const PresenceCurrents cur = out_currents(s, input);
        const double sum_defect = spec.side == PacketSide::ForwardAtZ1
                                      ? std::abs(cur.transmitted - cur.reflected - 1.0)
                                      : std::abs(cur.reflected - cur.transmitted - 1.0);
        record("current_sum_rule" + tag, sum_defect, 1e-8, true);

        try {
            const double surface =
                dwell_time_surface(s, input, sc.time.internal_tol, sc.time.mass_bound);
            const double volume = dwell_time_volume(s, sc.model, input, sc.time.z_panels,
                                                    sc.time.propagation);
            const double gap =
                std::abs(surface - volume) / std::max(std::abs(volume), 1e-30);
            record("dwell_route_gap" + tag, gap, sc.time.route_tol, true,
                   gap <= sc.time.route_tol
                       ? ""
                       : "RouteMismatch: surface and volume dwell times disagree");
        } catch (const Error& e) {
            json entry{{"name", "dwell_route_gap" + tag},
                       {"value", nullptr},
                       {"tolerance", sc.time.route_tol},
                       {"asserted", true},
                       {"passed", false},
                       {"note", std::string(e.what())}};
            checks.push_back(std::move(entry));
            all_passed = false;
        }
        ++idx;
    }

    json report;
    report["format"] = "validation-1";
    report["driven"] = driven;
    report["n_checks"] = static_cast<int>(checks.size());
    report["passed"] = all_passed;
    report["checks"] = std::move(checks);
    return report;
}

}  // namespace zscat
