#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "zscat/errors.hpp"
#include "zscat/grid.hpp"

namespace zscat {

/// One-dimensional potential profile with compact support [z1, z2].
/// Outside the support every profile evaluates to exactly zero.
struct Profile {
    enum class Kind { Square, Gaussian, SmoothedStep, Tabulated };

    Kind kind = Kind::Square;
    double amplitude = 0.0;   ///< energy scale (peak/plateau value)
    double center = 0.0;      ///< Gaussian center / step midpoint
    double width = 1.0;       ///< Gaussian sigma / edge ramp length
    double support_min = 0.0;
    double support_max = 0.0;
    std::vector<double> table_z;  ///< Tabulated sample positions (ascending)
    std::vector<double> table_v;  ///< Tabulated sample values

    void validate(const std::string& where) const {
        if (!(support_max > support_min))
            throw ConfigError(where + ".support: upper edge must exceed lower edge");
        if (!std::isfinite(amplitude))
            throw ConfigError(where + ".amplitude must be finite");
        if (kind == Kind::Gaussian || kind == Kind::SmoothedStep) {
            if (!(width > 0.0))
                throw ConfigError(where + ".width must be positive");
        }
        if (kind == Kind::Tabulated) {
            if (table_z.size() < 2 || table_z.size() != table_v.size())
                throw ConfigError(where + ".table: need at least two (z, V) samples");
            if (!std::is_sorted(table_z.begin(), table_z.end()))
                throw ConfigError(where + ".table: z samples must be ascending");
        }
    }

    /// Quintic smoothstep, C^2 at both ends: 0 for u <= 0, 1 for u >= 1.
    [[nodiscard]] static double smoothstep(double u) {
        if (u <= 0.0) return 0.0;
        if (u >= 1.0) return 1.0;
        return u * u * u * (10.0 + u * (-15.0 + 6.0 * u));
    }

    [[nodiscard]] double evaluate(double z) const {
        if (z < support_min || z > support_max) return 0.0;
        switch (kind) {
            case Kind::Square:
                return amplitude;
            case Kind::Gaussian: {
                const double u = (z - center) / width;
                return amplitude * std::exp(-0.5 * u * u);
            }
            case Kind::SmoothedStep:
                // Rises from 0 to `amplitude` across [center - width/2,
                // center + width/2]; the hard cut at the support edge models
                // the downstream end of the ledge.
                return amplitude * smoothstep((z - center) / width + 0.5);
            case Kind::Tabulated: {
                // Linear interpolation, clamped to 0 outside the sample range.
                if (z <= table_z.front() || z >= table_z.back()) {
                    if (z == table_z.front()) return table_v.front();
                    if (z == table_z.back()) return table_v.back();
                    return 0.0;
                }
                const auto it = std::upper_bound(table_z.begin(), table_z.end(), z);
                const std::size_t hi = static_cast<std::size_t>(it - table_z.begin());
                const std::size_t lo = hi - 1;
                const double t = (z - table_z[lo]) / (table_z[hi] - table_z[lo]);
                return table_v[lo] + t * (table_v[hi] - table_v[lo]);
            }
        }
        return 0.0;
    }
};

/// Load a two-column (z, V) text table: one sample per line, '#' comments and
/// blank lines ignored.
inline std::pair<std::vector<double>, std::vector<double>>
load_profile_table(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw ConfigError("profile table: cannot open '" + path + "'");
    std::vector<double> zs, vs;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream row(line);
        double z, v;
        if (!(row >> z)) continue;  // blank/comment line
        if (!(row >> v))
            throw ConfigError("profile table '" + path + "' line " +
                              std::to_string(lineno) + ": expected two columns (z V)");
        zs.push_back(z);
        vs.push_back(v);
    }
    if (zs.size() < 2)
        throw ConfigError("profile table '" + path + "': need at least two samples");
    return {zs, vs};
}

/// One driven component of the potential. A declared harmonic with index
/// n >= 1 represents the conjugate pair (+n, -n): its spatial profile enters
/// the e^{-i n Omega t} Fourier coefficient as amplitude(z) * e^{i phase},
/// and the complex conjugate enters the +n term, so the reconstructed
/// potential is real by construction.
struct Harmonic {
    int n = 1;
    Profile profile;
    double phase = 0.0;
};

/// Full potential model: a static profile plus periodically driven harmonics
/// with fundamental frequency omega.
struct PotentialModel {
    Profile static_part;
    std::vector<Harmonic> harmonics;
    double omega = 0.0;

    void validate() const {
        static_part.validate("potential.static");
        if (!harmonics.empty() && !(omega > 0.0))
            throw ConfigError("potential.omega must be positive when harmonics are present");
        for (std::size_t h = 0; h < harmonics.size(); ++h) {
            const std::string where = "potential.harmonics[" + std::to_string(h) + "]";
            if (harmonics[h].n < 1)
                throw ConfigError(where + ".n must be a positive integer "
                                          "(each entry declares the conjugate pair +-n)");
            harmonics[h].profile.validate(where + ".profile");
            if (!std::isfinite(harmonics[h].phase))
                throw ConfigError(where + ".phase must be finite");
        }
    }

    /// Hull of all profile supports.
    [[nodiscard]] std::pair<double, double> support() const {
        double lo = static_part.support_min, hi = static_part.support_max;
        for (const auto& h : harmonics) {
            lo = std::min(lo, h.profile.support_min);
            hi = std::max(hi, h.profile.support_max);
        }
        return {lo, hi};
    }

    [[nodiscard]] bool driven() const { return !harmonics.empty(); }
};

/// Real potential value at (t, z):
///     V(t, z) = static(z) + sum_h 2 amp_h(z) cos(n_h omega t - phase_h).
[[nodiscard]] inline double evaluate_potential(const PotentialModel& model,
                                               double t, double z) {
    double v = model.static_part.evaluate(z);
    for (const auto& h : model.harmonics)
        v += 2.0 * h.profile.evaluate(z) * std::cos(h.n * model.omega * t - h.phase);
    return v;
}

/// Number of lattice steps spanned by one quantum of the drive frequency.
/// Throws GridMismatch unless omega is a (near-exact) integer multiple of the
/// grid spacing — the drive must map lattice nodes onto lattice nodes.
[[nodiscard]] inline int frequency_steps(const PotentialModel& model,
                                         const ChannelGrid& grid) {
    if (!model.driven()) return 0;
    const double ratio = model.omega / grid.spacing;
    const double rounded = std::round(ratio);
    if (rounded < 1.0 || std::abs(ratio - rounded) > 1e-9 * std::max(1.0, std::abs(ratio)))
        throw GridMismatch("potential.omega is not commensurate with the grid spacing (omega/h = " +
                           std::to_string(ratio) + ")");
    return static_cast<int>(rounded);
}

/// Channel-space coupling matrix of the potential at height z.
///
/// The static part sits on the diagonal. A harmonic with index n couples
/// channel j into channel i when k_t(i) - k_t(j) = +n*omega on the lattice,
/// with entry amp_n(z) * e^{i phase_n}; the mirrored entry carries the
/// conjugate, so the matrix is Hermitean (banded before threshold excision).
[[nodiscard]] inline Eigen::MatrixXcd coupling_matrix(const PotentialModel& model,
                                                      const ChannelGrid& grid,
                                                      double z) {
    const int n = grid.size();
    Eigen::MatrixXcd v = Eigen::MatrixXcd::Zero(n, n);
    const double s = model.static_part.evaluate(z);
    for (int i = 0; i < n; ++i) v(i, i) = s;
    if (!model.driven()) return v;

    const int steps = frequency_steps(model, grid);

    // Map lattice position -> channel index for band lookups across excised
    // nodes (a partner that was excised simply contributes no entry).
    const int max_lattice = grid.lattice_index.back();
    std::vector<int> at_lattice(static_cast<std::size_t>(max_lattice) + 1, -1);
    for (int i = 0; i < n; ++i) at_lattice[grid.lattice_index[i]] = i;

    const complex im(0.0, 1.0);
    for (const auto& h : model.harmonics) {
        const complex coeff = h.profile.evaluate(z) * std::exp(im * h.phase);
        if (coeff == complex(0.0, 0.0)) continue;
        const int offset = h.n * steps;
        for (int i = 0; i < n; ++i) {
            const int j_lattice = grid.lattice_index[i] - offset;
            if (j_lattice < 0 || j_lattice > max_lattice) continue;
            const int j = at_lattice[j_lattice];
            if (j < 0) continue;
            v(i, j) += coeff;            // k_t(i) = k_t(j) + n*omega
            v(j, i) += std::conj(coeff); // Hermitean partner
        }
    }
    return v;
}

} // namespace zscat
