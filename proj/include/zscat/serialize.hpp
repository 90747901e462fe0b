#pragma once

#include <cmath>
#include <cstdio>
#include <string>

#include <json.hpp>

#include "zscat/errors.hpp"
#include "zscat/grid.hpp"
#include "zscat/observables.hpp"
#include "zscat/smatrix.hpp"

namespace zscat {

/// All reports use insertion-ordered JSON so identical inputs serialize to
/// byte-identical files.
using json = nlohmann::ordered_json;

namespace detail {

/// NaN has no JSON literal; suppressed entries serialize as null.
[[nodiscard]] inline json number_or_null(double v) {
    if (std::isnan(v)) return nullptr;
    return v;
}

}  // namespace detail

/// Grid metadata embedded in every report, sufficient for a downstream
/// consumer to rebuild the quadrature and detect convention drift through
/// the weights checksum.
[[nodiscard]] inline json grid_to_json(const ChannelGrid& g) {
    json j;
    j["units"] = {{"hbar", g.units.hbar}, {"mass", g.units.mass}};
    j["k_t_min"] = g.k_t_min;
    j["k_t_max"] = g.k_t_max;
    j["n_points"] = (g.spacing > 0.0)
                        ? static_cast<int>(std::lround((g.k_t_max - g.k_t_min) / g.spacing)) + 1
                        : g.size();
    j["spacing"] = g.spacing;
    j["k_x"] = g.k_x;
    j["k_y"] = g.k_y;
    j["threshold_window"] = g.threshold_window;
    j["n_channels"] = g.size();
    j["n_open"] = g.n_open();
    j["n_closed"] = g.n_closed();
    j["total_weight"] = g.total_weight;
    j["excluded_measure"] = g.excluded_measure;
    j["weights_checksum"] = g.weights_checksum();
    return j;
}

namespace detail {

[[nodiscard]] inline json block_to_json(const Eigen::MatrixXcd& m) {
    json re = json::array();
    json im = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            re.push_back(m(r, c).real());
            im.push_back(m(r, c).imag());
        }
    }
    json j;
    j["rows"] = m.rows();
    j["cols"] = m.cols();
    j["re"] = std::move(re);
    j["im"] = std::move(im);
    return j;
}

[[nodiscard]] inline Eigen::MatrixXcd block_from_json(const json& j, const std::string& path) {
    if (!j.is_object() || !j.contains("rows") || !j.contains("cols") || !j.contains("re") ||
        !j.contains("im"))
        throw ConfigError(path + ": expected an object with rows/cols/re/im");
    const auto rows = j.at("rows").get<Eigen::Index>();
    const auto cols = j.at("cols").get<Eigen::Index>();
    const auto& re = j.at("re");
    const auto& im = j.at("im");
    if (rows < 0 || cols < 0 ||
        re.size() != static_cast<std::size_t>(rows * cols) || im.size() != re.size())
        throw ConfigError(path + ": re/im length does not match rows*cols");
    Eigen::MatrixXcd m(rows, cols);
    std::size_t flat = 0;
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c, ++flat)
            m(r, c) = complex(re[flat].get<double>(), im[flat].get<double>());
    return m;
}

}  // namespace detail

/// Serialize an S-matrix with its grid provenance.  Blocks are stored as
/// flat row-major re/im arrays (rows = all channels, cols = open channels).
[[nodiscard]] inline json smatrix_to_json(const SMatrix& s) {
    json j;
    j["format"] = "smatrix-1";
    j["z1"] = s.z1;
    j["z2"] = s.z2;
    j["grid"] = grid_to_json(s.grid);
    json blocks;
    blocks["t_ff"] = detail::block_to_json(s.t_ff);
    blocks["r_fb"] = detail::block_to_json(s.r_fb);
    blocks["r_bf"] = detail::block_to_json(s.r_bf);
    blocks["t_bb"] = detail::block_to_json(s.t_bb);
    j["blocks"] = std::move(blocks);
    return j;
}

/// Rebuild an S-matrix from its serialized form.  The channel grid is
/// reconstructed from the stored metadata and the weights checksum must
/// match, so files written under a different quadrature convention are
/// rejected instead of silently misread.
[[nodiscard]] inline SMatrix smatrix_from_json(const json& j) {
    if (!j.is_object() || j.value("format", std::string()) != "smatrix-1")
        throw ConfigError("smatrix: missing or unsupported format tag (want smatrix-1)");
    const json& gj = j.at("grid");
    Units units;
    units.hbar = gj.at("units").at("hbar").get<double>();
    units.mass = gj.at("units").at("mass").get<double>();
    const ChannelGrid grid = build_grid(
        gj.at("k_t_min").get<double>(), gj.at("k_t_max").get<double>(),
        gj.at("n_points").get<int>(), gj.at("k_x").get<double>(), gj.at("k_y").get<double>(),
        units, gj.at("threshold_window").get<double>());
    if (grid.size() != gj.at("n_channels").get<int>())
        throw ConfigError("smatrix.grid: channel count does not match the rebuilt grid");
    if (grid.weights_checksum() != gj.at("weights_checksum").get<std::string>())
        throw ConfigError("smatrix.grid: weights checksum mismatch; quadrature conventions differ");

    SMatrix s;
    s.grid = grid;
    s.z1 = j.at("z1").get<double>();
    s.z2 = j.at("z2").get<double>();
    const json& blocks = j.at("blocks");
    s.t_ff = detail::block_from_json(blocks.at("t_ff"), "smatrix.blocks.t_ff");
    s.r_fb = detail::block_from_json(blocks.at("r_fb"), "smatrix.blocks.r_fb");
    s.r_bf = detail::block_from_json(blocks.at("r_bf"), "smatrix.blocks.r_bf");
    s.t_bb = detail::block_from_json(blocks.at("t_bb"), "smatrix.blocks.t_bb");
    const int n = s.grid.size(), no = s.grid.n_open();
    for (const auto* b : {&s.t_ff, &s.r_fb, &s.r_bf, &s.t_bb})
        if (b->rows() != n || b->cols() != no)
            throw ConfigError("smatrix.blocks: block shape does not match the grid");
    return s;
}

/// Time-observable record as a JSON object; suppressed entries are null.
[[nodiscard]] inline json stats_to_json(const TimeStatistics& t) {
    json j;
    j["tau_in"] = detail::number_or_null(t.tau_in);
    j["tau_out_reflect"] = detail::number_or_null(t.tau_out_reflect);
    j["tau_out_transmit"] = detail::number_or_null(t.tau_out_transmit);
    j["R_current"] = detail::number_or_null(t.R_current);
    j["T_current"] = detail::number_or_null(t.T_current);
    j["tau_dwell_surface"] = detail::number_or_null(t.tau_dwell_surface);
    j["tau_dwell_volume"] = detail::number_or_null(t.tau_dwell_volume);
    j["dwell_route_gap"] = detail::number_or_null(t.dwell_route_gap);
    j["delay_transmit"] = detail::number_or_null(t.delay_transmit);
    j["delay_reflect"] = detail::number_or_null(t.delay_reflect);
    return j;
}

/// Shortest-round-trip decimal form used in CSV cells (NaN prints as "nan").
[[nodiscard]] inline std::string csv_number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
}

/// Fixed CSV column order of the times report.  The leading columns identify
/// the packet so sweep output is one self-describing row per run.
[[nodiscard]] inline std::string stats_csv_header() {
    return "k_center,sigma_k,t0,side,"
           "tau_in,tau_out_reflect,tau_out_transmit,R_current,T_current,"
           "tau_dwell_surface,tau_dwell_volume,dwell_route_gap,"
           "delay_transmit,delay_reflect";
}

[[nodiscard]] inline std::string stats_csv_row(const PacketSpec& p, const TimeStatistics& t) {
    std::string row;
    row += csv_number(p.k_center);
    row += ',';
    row += csv_number(p.sigma_k);
    row += ',';
    row += csv_number(p.t0);
    row += ',';
    row += (p.side == PacketSide::ForwardAtZ1) ? "forward" : "backward";
    for (double v : {t.tau_in, t.tau_out_reflect, t.tau_out_transmit, t.R_current, t.T_current,
                     t.tau_dwell_surface, t.tau_dwell_volume, t.dwell_route_gap,
                     t.delay_transmit, t.delay_reflect}) {
        row += ',';
        row += csv_number(v);
    }
    return row;
}

}  // namespace zscat
