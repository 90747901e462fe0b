// Command-line driver: loads a scenario file and produces the requested
// report.  Subcommands:
//   modes     channel-mode orthogonality audit        -> modes_report.json
//   scatter   slab scattering matrix + health figures -> smatrix.json, scatter_report.json
//   times     per-packet time observables             -> times.json, times.csv
//   validate  cross-validation sweep                  -> validation.json
//
// Exit codes: 0 success, 1 unexpected failure, 2 configuration / usage error,
// 3 numerical-consistency failure (including a failed validation), 4 violated
// precondition.  Outputs are deterministic: identical inputs give
// byte-identical files.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "zscat/scenario.hpp"

namespace {

struct CommonArgs {
    std::string scenario_path;
    std::string out_dir = ".";
    std::vector<std::string> tol_overrides;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--scenario", args.scenario_path, "Scenario JSON file")->required();
    cmd->add_option("--out", args.out_dir, "Output directory (created if missing)");
    cmd->add_option("--tol-override", args.tol_overrides,
                    "Override a tolerance as name=value; names: integrator, "
                    "route_match, internal_route, mass_bound");
}

void apply_overrides(zscat::Scenario& sc, const std::vector<std::string>& overrides) {
    for (const std::string& item : overrides) {
        const auto eq = item.find('=');
        if (eq == std::string::npos || eq == 0)
            throw zscat::ConfigError("--tol-override: expected name=value, got '" +
                                     item + "'");
        const std::string name = item.substr(0, eq);
        const std::string text = item.substr(eq + 1);
        double value = 0.0;
        try {
            std::size_t used = 0;
            value = std::stod(text, &used);
            if (used != text.size()) throw std::invalid_argument("trailing characters");
        } catch (const std::exception&) {
            throw zscat::ConfigError("--tol-override " + name + ": cannot parse '" +
                                     text + "' as a number");
        }
        if (!(value > 0.0))
            throw zscat::ConfigError("--tol-override " + name + ": must be positive");
        if (name == "integrator")
            sc.time.propagation.tolerance = value;
        else if (name == "route_match")
            sc.time.route_tol = value;
        else if (name == "internal_route")
            sc.time.internal_tol = value;
        else if (name == "mass_bound")
            sc.time.mass_bound = value;
        else
            throw zscat::ConfigError(
                "--tol-override: unknown tolerance '" + name +
                "' (use integrator, route_match, internal_route, or mass_bound)");
    }
}

/// Parse "k_center:v1,v2,..." into the swept values.
std::vector<double> parse_sweep(const std::string& sweep) {
    const auto colon = sweep.find(':');
    if (colon == std::string::npos)
        throw zscat::ConfigError("--sweep: expected 'k_center:v1,v2,...'");
    const std::string param = sweep.substr(0, colon);
    if (param != "k_center")
        throw zscat::ConfigError("--sweep: unsupported parameter '" + param +
                                 "' (only k_center can be swept)");
    std::vector<double> values;
    std::string rest = sweep.substr(colon + 1);
    std::size_t pos = 0;
    while (pos <= rest.size()) {
        const auto comma = rest.find(',', pos);
        const std::string token =
            rest.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
        try {
            std::size_t used = 0;
            values.push_back(std::stod(token, &used));
            if (used != token.size()) throw std::invalid_argument("trailing characters");
        } catch (const std::exception&) {
            throw zscat::ConfigError("--sweep: cannot parse '" + token + "' as a number");
        }
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
    if (values.empty())
        throw zscat::ConfigError("--sweep: no values given");
    return values;
}

zscat::Scenario load_with_overrides(const CommonArgs& args) {
    zscat::Scenario sc = zscat::load_scenario(args.scenario_path);
    apply_overrides(sc, args.tol_overrides);
    return sc;
}

std::filesystem::path prepare_out_dir(const CommonArgs& args) {
    const std::filesystem::path dir(args.out_dir);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec)
        throw zscat::ConfigError("--out: cannot create directory '" + args.out_dir +
                                 "': " + ec.message());
    return dir;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw zscat::ConfigError("cannot open '" + path.string() + "' for writing");
    out << text;
    out.flush();
    if (!out)
        throw zscat::ConfigError("failed while writing '" + path.string() + "'");
    std::cout << "wrote " << path.string() << "\n";
}

void write_json(const std::filesystem::path& path, const zscat::json& j) {
    write_text(path, j.dump(2) + "\n");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Slab scattering and time observables for two-component states"};
    app.require_subcommand(1);

    CommonArgs modes_args, scatter_args, times_args, validate_args;
    std::string sweep;

    CLI::App* cmd_modes =
        app.add_subcommand("modes", "Audit the channel-mode orthogonality tables");
    add_common(cmd_modes, modes_args);

    CLI::App* cmd_scatter =
        app.add_subcommand("scatter", "Extract the slab scattering matrix");
    add_common(cmd_scatter, scatter_args);

    CLI::App* cmd_times =
        app.add_subcommand("times", "Compute per-packet time observables");
    add_common(cmd_times, times_args);
    cmd_times->add_option("--sweep", sweep,
                          "Sweep one packet parameter, e.g. k_center:0.8,0.9,1.0; "
                          "the first packet serves as the template");

    CLI::App* cmd_validate =
        app.add_subcommand("validate", "Run the cross-validation sweep");
    add_common(cmd_validate, validate_args);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (cmd_modes->parsed()) {
            const zscat::Scenario sc = load_with_overrides(modes_args);
            const auto dir = prepare_out_dir(modes_args);
            write_json(dir / "modes_report.json", zscat::run_modes(sc));
        } else if (cmd_scatter->parsed()) {
            const zscat::Scenario sc = load_with_overrides(scatter_args);
            const auto dir = prepare_out_dir(scatter_args);
            const zscat::ScatterResult result = zscat::run_scatter(sc);
            write_json(dir / "smatrix.json", zscat::smatrix_to_json(result.s));
            write_json(dir / "scatter_report.json", result.report);
        } else if (cmd_times->parsed()) {
            zscat::Scenario sc = load_with_overrides(times_args);
            if (!sweep.empty()) {
                const std::vector<double> values = parse_sweep(sweep);
                if (sc.packets.empty())
                    throw zscat::ConfigError(
                        "--sweep: the scenario must define at least one packet to "
                        "serve as the template");
                const zscat::PacketSpec base = sc.packets.front();
                sc.packets.clear();
                for (double v : values) {
                    zscat::PacketSpec p = base;
                    p.k_center = v;
                    sc.packets.push_back(p);
                }
            }
            const auto dir = prepare_out_dir(times_args);
            const zscat::TimesResult result = zscat::run_times(sc);
            write_json(dir / "times.json", result.report);
            write_text(dir / "times.csv", result.csv);
        } else if (cmd_validate->parsed()) {
            const zscat::Scenario sc = load_with_overrides(validate_args);
            const auto dir = prepare_out_dir(validate_args);
            const zscat::json report = zscat::run_validate(sc);
            write_json(dir / "validation.json", report);
            const bool passed = report.at("passed").get<bool>();
            std::cout << "validation: " << (passed ? "PASS" : "FAIL") << " ("
                      << report.at("n_checks").get<int>() << " checks)\n";
            if (!passed) return 3;
        }
    } catch (const zscat::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.exit_code();
    } catch (const std::exception& e) {
        std::cerr << "unexpected error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
