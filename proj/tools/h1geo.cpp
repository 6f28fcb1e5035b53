// Command-line tool for sub-Riemannian surface geometry in the first
// Heisenberg group. See README.md for the config format and exit codes.

#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "h1geo/cli.hpp"

int main(int argc, char** argv) {
    CLI::App app{"sub-Riemannian geometry of surfaces in the first Heisenberg group"};
    app.require_subcommand(1);

    std::string config, out_path, csv_path;
    double tol = 1e-8, delta = 0.0, span = 2.0;
    int grid = 0, k = 0, kmax = 0;
    std::vector<double> start;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("config", config, "job config file")->required();
        sub->add_option("--out", out_path, "write the report to this file instead of stdout");
        sub->add_option("--csv", csv_path, "write CSV output to this file instead of stdout");
        return sub;
    };

    CLI::App* check = add_common(app.add_subcommand(
        "check-minimal", "grid-check the minimal surface equation (exit 0 PASS, 1 FAIL)"));
    check->add_option("--tol", tol, "residual tolerance (default 1e-8)");
    check->add_option("--grid", grid, "total grid samples (default 1024)");

    CLI::App* strip = add_common(app.add_subcommand(
        "strip", "build strip data, check strictness, emit a CSV table over J"));
    strip->add_option("--grid", grid, "CSV rows (default 1024)");

    CLI::App* secvar = add_common(app.add_subcommand(
        "second-variation", "evaluate the stability form at cutoff test functions"));
    secvar->add_option("--delta", delta, "cutoff half-width (default |J|/4 * 0.99)");
    secvar->add_option("--k", k, "test-function index (default 64)");
    secvar->add_option("--kmax", kmax, "sweep k = 1, 2, 4, ... up to this bound instead");

    CLI::App* search = add_common(app.add_subcommand(
        "instability-search", "double k until the stability form goes negative"));
    search->add_option("--delta", delta, "cutoff half-width (default |J|/4 * 0.99)");
    search->add_option("--kmax", kmax, "largest k to try (default 256)");

    CLI::App* generic = add_common(app.add_subcommand(
        "generic-search", "minimize the stability Rayleigh quotient over a bump basis"));
    generic->add_option("--grid", grid, "bumps per side (default 16)");
    generic->add_option("--delta", delta, "band half-width for strip configs");
    generic->add_option("--k", k, "band length index for strip configs (default 4)");

    CLI::App* trace = add_common(app.add_subcommand(
        "trace", "trace a seed curve on a t-graph and emit its rule lines"));
    trace->add_option("--start", start, "start point x y")->expected(2);
    trace->add_option("--span", span, "arc length to trace (default 2)");
    trace->add_option("--grid", grid, "integrator steps (default 1024)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : h1geo::cli::kExitConfig;
    }

    CLI::App* sub = app.get_subcommands().front();
    h1geo::cli::Options opts;
    auto set_if = [&](const char* name, auto fn) {
        const CLI::Option* o = sub->get_option_no_throw(name);
        if (o != nullptr && o->count() > 0) fn();
    };
    set_if("--tol", [&] { opts.tol = tol; });
    set_if("--grid", [&] { opts.grid = grid; });
    set_if("--delta", [&] { opts.delta = delta; });
    set_if("--k", [&] { opts.k = k; });
    set_if("--kmax", [&] { opts.kmax = kmax; });
    set_if("--span", [&] { opts.span = span; });
    set_if("--start", [&] { opts.start = h1geo::Vec2{start[0], start[1]}; });

    std::ofstream out_file, csv_file;
    std::ostream* report = &std::cout;
    std::ostream* csv = &std::cout;
    if (!out_path.empty()) {
        out_file.open(out_path, std::ios::binary);
        if (!out_file) {
            std::cerr << "error: cannot open \"" << out_path << "\"\n";
            return h1geo::cli::kExitConfig;
        }
        report = &out_file;
    }
    if (!csv_path.empty()) {
        csv_file.open(csv_path, std::ios::binary);
        if (!csv_file) {
            std::cerr << "error: cannot open \"" << csv_path << "\"\n";
            return h1geo::cli::kExitConfig;
        }
        csv = &csv_file;
    }

    return h1geo::cli::run(sub->get_name(), config, opts, {*report, *csv}, std::cerr);
}
