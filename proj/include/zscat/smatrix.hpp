#pragma once

#include <array>
#include <cmath>
#include <string>
#include <utility>

#include <Eigen/Dense>

#include "zscat/errors.hpp"
#include "zscat/grid.hpp"
#include "zscat/propagator.hpp"

namespace zscat {

/// Scattering matrix of the slab [z1, z2] between mode coefficients.
///
/// Columns run over *open* channels only (inputs: forward at z1, backward at
/// z2); rows run over all channels (outputs: forward at z2, backward at z1,
/// including the evanescent content excited at the faces). Entries follow the
/// continuum-kernel convention
///     f_out(i) = sum_j w_j * Block(i, j) * f_in(j) ,
/// so the discrete representation of the identity kernel is delta_ij / w_j.
struct SMatrix {
    ChannelGrid grid;
    double z1 = 0.0;
    double z2 = 0.0;
    Eigen::MatrixXcd t_ff;  ///< forward out (z2)  <- forward in (z1)
    Eigen::MatrixXcd r_fb;  ///< forward out (z2)  <- backward in (z2)
    Eigen::MatrixXcd r_bf;  ///< backward out (z1) <- forward in (z1)
    Eigen::MatrixXcd t_bb;  ///< backward out (z1) <- backward in (z2)

    [[nodiscard]] int n_rows() const { return grid.size(); }
    [[nodiscard]] int n_cols() const { return grid.n_open(); }
};

/// Open-row / closed-row restrictions of the four blocks.
struct SplitSMatrix {
    Eigen::MatrixXcd t_ff_open, r_fb_open, r_bf_open, t_bb_open;      // No x No
    Eigen::MatrixXcd t_ff_closed, r_fb_closed, r_bf_closed, t_bb_closed;  // Nc x No
};

namespace detail {

inline Eigen::MatrixXcd select_rows(const Eigen::MatrixXcd& m, const std::vector<int>& rows) {
    Eigen::MatrixXcd out(static_cast<int>(rows.size()), m.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) out.row(static_cast<int>(r)) = m.row(rows[r]);
    return out;
}

} // namespace detail

[[nodiscard]] inline SplitSMatrix split(const SMatrix& s) {
    SplitSMatrix out;
    out.t_ff_open = detail::select_rows(s.t_ff, s.grid.open_index);
    out.r_fb_open = detail::select_rows(s.r_fb, s.grid.open_index);
    out.r_bf_open = detail::select_rows(s.r_bf, s.grid.open_index);
    out.t_bb_open = detail::select_rows(s.t_bb, s.grid.open_index);
    out.t_ff_closed = detail::select_rows(s.t_ff, s.grid.closed_index);
    out.r_fb_closed = detail::select_rows(s.r_fb, s.grid.closed_index);
    out.r_bf_closed = detail::select_rows(s.r_bf, s.grid.closed_index);
    out.t_bb_closed = detail::select_rows(s.t_bb, s.grid.closed_index);
    return out;
}

/// Extract the scattering matrix of the potential between the planes z1 < z2.
/// The potential support must lie inside the slab so the face decompositions
/// are taken in free space.
[[nodiscard]] inline SMatrix extract_smatrix(const ChannelGrid& grid,
                                             const PotentialModel& model,
                                             double z1, double z2,
                                             const PropagationOptions& opts = {}) {
    model.validate();
    const auto [lo, hi] = model.support();
    if (lo < z1 || hi > z2)
        throw SupportViolation("extract_smatrix: potential support [" + std::to_string(lo) +
                               ", " + std::to_string(hi) + "] sticks out of the slab [" +
                               std::to_string(z1) + ", " + std::to_string(z2) + "]");
    const SegmentScattering slab = slab_scattering(grid, model, z1, z2, opts);

    SMatrix s;
    s.grid = grid;
    s.z1 = z1;
    s.z2 = z2;
    const int n = grid.size();
    const int no = grid.n_open();
    s.t_ff.resize(n, no);
    s.r_fb.resize(n, no);
    s.r_bf.resize(n, no);
    s.t_bb.resize(n, no);
    for (int j = 0; j < no; ++j) {
        const int col = grid.open_index[j];
        const double winv = 1.0 / grid.weights[col];
        s.t_ff.col(j) = slab.t_ff.col(col) * winv;
        s.r_fb.col(j) = slab.r_fb.col(col) * winv;
        s.r_bf.col(j) = slab.r_bf.col(col) * winv;
        s.t_bb.col(j) = slab.t_bb.col(col) * winv;
    }
    return s;
}

/// Apply the S-matrix to open-channel inputs (forward at z1, backward at z2)
/// with the discrete kernel convention. Returns the full-channel output
/// coefficient vectors {forward at z2, backward at z1}.
[[nodiscard]] inline std::pair<Eigen::VectorXcd, Eigen::VectorXcd>
apply_smatrix(const SMatrix& s, const Eigen::VectorXcd& f_forward_in,
              const Eigen::VectorXcd& f_backward_in) {
    const int no = s.n_cols();
    if (f_forward_in.size() != no || f_backward_in.size() != no)
        throw GridMismatch("apply_smatrix: input vectors must run over the open channels");
    Eigen::VectorXcd wf(no), wb(no);
    for (int j = 0; j < no; ++j) {
        const double w = s.grid.weights[s.grid.open_index[j]];
        wf(j) = w * f_forward_in(j);
        wb(j) = w * f_backward_in(j);
    }
    Eigen::VectorXcd forward_out = s.t_ff * wf + s.r_fb * wb;
    Eigen::VectorXcd backward_out = s.r_bf * wf + s.t_bb * wb;
    return {std::move(forward_out), std::move(backward_out)};
}

namespace detail {

/// Stacked 2No x 2No open-row matrix [[t_ff, r_fb], [r_bf, t_bb]].
inline Eigen::MatrixXcd stacked_open(const SMatrix& s) {
    const SplitSMatrix sp = split(s);
    const int no = s.n_cols();
    Eigen::MatrixXcd m(2 * no, 2 * no);
    m.topLeftCorner(no, no) = sp.t_ff_open;
    m.topRightCorner(no, no) = sp.r_fb_open;
    m.bottomLeftCorner(no, no) = sp.r_bf_open;
    m.bottomRightCorner(no, no) = sp.t_bb_open;
    return m;
}

inline Eigen::VectorXd open_weights(const SMatrix& s) {
    const int no = s.n_cols();
    Eigen::VectorXd w(no);
    for (int j = 0; j < no; ++j) w(j) = s.grid.weights[s.grid.open_index[j]];
    return w;
}

} // namespace detail

/// Residuals of the four quadratic flux identities (max norm each):
///   [0] sum_i w_i [ |T^FF|^2 + |R^BF|^2 ]_{ki}  -  delta_kj / w_j   (forward columns)
///   [1] sum_i w_i [ |R^FB|^2 + |T^BB|^2 ]_{ki}  -  delta_kj / w_j   (backward columns)
///   [2] sum_i w_i [ conj(R^FB) T^FF + conj(T^BB) R^BF ]             (mixed, B rows x F cols)
///   [3] sum_i w_i [ conj(T^FF) R^FB + conj(R^BF) T^BB ]             (mixed, F rows x B cols)
/// Sums run over open output channels.
[[nodiscard]] inline std::array<double, 4> quadratic_identity_defects(const SMatrix& s) {
    const int no = s.n_cols();
    const Eigen::MatrixXcd so = detail::stacked_open(s);
    const Eigen::VectorXd w = detail::open_weights(s);
    Eigen::VectorXd w2(2 * no);
    w2 << w, w;
    Eigen::MatrixXcd g = so.adjoint() * w2.asDiagonal() * so;
    for (int j = 0; j < 2 * no; ++j) g(j, j) -= 1.0 / w2(j);
    return {g.topLeftCorner(no, no).cwiseAbs().maxCoeff(),
            g.bottomRightCorner(no, no).cwiseAbs().maxCoeff(),
            g.bottomLeftCorner(no, no).cwiseAbs().maxCoeff(),
            g.topRightCorner(no, no).cwiseAbs().maxCoeff()};
}

/// Left (column) unitarity defect: max norm of S_o^dagger W S_o - I/w over
/// the full stacked 2x2 direction structure. Equals the max of the four
/// quadratic-identity residuals.
[[nodiscard]] inline double unitarity_defect_left(const SMatrix& s) {
    const auto d = quadratic_identity_defects(s);
    return std::max(std::max(d[0], d[1]), std::max(d[2], d[3]));
}

/// Right (row) unitarity defect: max norm of S_o W S_o^dagger - I/w. Follows
/// from the left identity for static potentials; for driven potentials it is
/// a measured (reported) quantity.
[[nodiscard]] inline double unitarity_defect_right(const SMatrix& s) {
    const int no = s.n_cols();
    const Eigen::MatrixXcd so = detail::stacked_open(s);
    const Eigen::VectorXd w = detail::open_weights(s);
    Eigen::VectorXd w2(2 * no);
    w2 << w, w;
    Eigen::MatrixXcd h = so * w2.asDiagonal() * so.adjoint();
    for (int j = 0; j < 2 * no; ++j) h(j, j) -= 1.0 / w2(j);
    return h.cwiseAbs().maxCoeff();
}

} // namespace zscat
