#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "homog/dual.hpp"
#include "homog/experiments.hpp"
#include "homog/io.hpp"
#include "homog/oracle.hpp"

using namespace homog;

namespace {

Scheme parse_scheme(const std::string& name) {
    if (name == "spectral") return Scheme::spectral;
    if (name == "fd") return Scheme::finite_difference;
    throw Error("unknown scheme '" + name + "' (use spectral|fd)");
}

std::vector<double> parse_ladder(const std::string& csv) {
    std::vector<double> out;
    std::stringstream ss(csv);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (!tok.empty()) out.push_back(std::stod(tok));
    }
    return out;
}

CoefficientField coefficient_from_flag(const std::string& path) {
    if (path.empty()) return make_builtin("space_time", {{"b", 0.5}});
    return io::load_coefficient(path);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"homog: parabolic homogenization toolkit (correctors, dual correctors, "
                 "fundamental solutions, convergence-rate experiments)"};
    app.set_version_flag("--version", std::string(version));
    app.require_subcommand(1);

    std::string scheme_name = "spectral";
    app.add_option("--scheme", scheme_name, "discretization scheme: spectral|fd")
        ->capture_default_str();

    // ---- corrector ----------------------------------------------------
    auto* cmd_corr = app.add_subcommand("corrector", "solve the time-periodic cell problem");
    std::string corr_coeff, corr_out = "corrector.bin";
    int corr_n = 128, corr_nt = 128;
    double corr_tol = 0.0;
    cmd_corr->add_option("--coeff", corr_coeff, "coefficient family JSON file");
    cmd_corr->add_option("--n", corr_n, "spatial cell nodes")->capture_default_str();
    cmd_corr->add_option("--nt", corr_nt, "temporal cell nodes")->capture_default_str();
    cmd_corr->add_option("--tol", corr_tol, "solver tolerance (0 = scheme default)");
    cmd_corr->add_option("--out", corr_out, "output bundle path")->capture_default_str();

    // ---- dual ----------------------------------------------------------
    auto* cmd_dual = app.add_subcommand("dual", "build dual correctors from a corrector bundle");
    std::string dual_in, dual_out = "bundle.bin";
    cmd_dual->add_option("--in", dual_in, "corrector bundle")->required();
    cmd_dual->add_option("--out", dual_out, "extended bundle path")->capture_default_str();

    // ---- run -------------------------------------------------------------
    auto* cmd_run = app.add_subcommand("run", "run a convergence-rate experiment");
    std::string run_id, run_coeff, run_eps, run_tladder, run_out = "out";
    double run_t = 1.0, run_cell_tol = 1e-10;
    int run_n = 128, run_nt = 128, run_pp = 16, run_threads = 1;
    cmd_run->add_option("--experiment", run_id, "thm1|thm2|thm2-adj|thm3|cor|tail")->required();
    cmd_run->add_option("--coeff", run_coeff, "coefficient family JSON file");
    cmd_run->add_option("--eps", run_eps, "comma-separated eps ladder");
    cmd_run->add_option("--t-ladder", run_tladder, "comma-separated t ladder (cor)");
    cmd_run->add_option("--t", run_t, "evaluation time t - s")->capture_default_str();
    cmd_run->add_option("--n", run_n, "cell grid spatial nodes")->capture_default_str();
    cmd_run->add_option("--nt", run_nt, "cell grid temporal nodes")->capture_default_str();
    cmd_run->add_option("--cell-tol", run_cell_tol, "cell solver tolerance")->capture_default_str();
    cmd_run->add_option("--points-per-period", run_pp, "kernel resolution policy")
        ->capture_default_str();
    cmd_run->add_option("--threads", run_threads, "ladder-point workers")->capture_default_str();
    cmd_run->add_option("--out", run_out, "output directory")->capture_default_str();

    // ---- oracle -----------------------------------------------------------
    auto* cmd_oracle = app.add_subcommand("oracle", "independent brute-force references");
    bool oracle_list = false;
    std::string oracle_id, oracle_out = "fixtures";
    cmd_oracle->add_flag("--list", oracle_list, "list available oracle ids");
    cmd_oracle->add_option("--run", oracle_id, "run one oracle by id");
    cmd_oracle->add_option("--out", oracle_out, "fixture output directory")->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    try {
        const Scheme scheme = parse_scheme(scheme_name);

        if (cmd_corr->parsed()) {
            auto A = coefficient_from_flag(corr_coeff);
            CellSolveOptions opts;
            opts.tol = corr_tol;
            auto set = solve_corrector(A, build_grid(A.d(), corr_n, corr_nt), scheme, opts);
            io::save_corrector_bundle(corr_out, set);
            std::ofstream js(corr_out + ".json");
            js << io::corrector_manifest(set).dump(2) << '\n';
            std::printf("a_hat = %.12g  (residual %.3e, periods %d)\n", set.a_hat.scalar(),
                        set.solve_residual, set.periods_used);
            std::printf("wrote %s and %s.json\n", corr_out.c_str(), corr_out.c_str());
            return 0;
        }

        if (cmd_dual->parsed()) {
            auto bundle = io::load_bundle(dual_in);
            auto A = io::coefficient_from_json(bundle.manifest.at("coefficient"));
            Scheme bscheme = bundle.manifest.value("scheme", "spectral") == "fd"
                                 ? Scheme::finite_difference
                                 : Scheme::spectral;
            FluxMatrix flux{bundle.fields.at("b_flux")};
            auto duals = solve_dual_correctors(flux, bscheme);
            auto res = flux_identity_residual(duals, flux);

            CorrectorSet set;
            set.coefficient = A;
            set.scheme = bscheme;
            set.chi = bundle.fields.at("chi");
            set.grad_chi = bundle.fields.at("grad_chi");
            set.flux = flux;
            set.solve_residual = bundle.manifest.value("solve_residual", 0.0);
            // rebuild the homogenized tensor block for the manifest
            set.a_hat = homogenized_tensor(A, set);
            io::save_corrector_bundle(dual_out, set, &duals);
            std::printf("flux identity residual %.3e (antisymmetry %.3e), sup|phi| = %.6g\n",
                        res.relative, res.antisymmetry, duals.sup_phi);
            std::printf("wrote %s\n", dual_out.c_str());
            return 0;
        }

        if (cmd_run->parsed()) {
            ExperimentConfig cfg;
            cfg.id = run_id;
            cfg.A = coefficient_from_flag(run_coeff);
            if (!run_eps.empty()) cfg.ladder = parse_ladder(run_eps);
            if (!run_tladder.empty()) cfg.ladder = parse_ladder(run_tladder);
            cfg.t_eval = run_t;
            cfg.scheme = scheme;
            cfg.cell_n = run_n;
            cfg.cell_nt = run_nt;
            cfg.cell_tol = run_cell_tol;
            cfg.points_per_period = run_pp;
            cfg.threads = run_threads;
            auto rep = run_experiment(cfg);
            io::write_report(rep, (std::filesystem::path(run_out) / cfg.id).string());
            std::printf("[%s] %s: %s\n", rep.pass ? "PASS" : "FAIL", cfg.id.c_str(),
                        rep.details.c_str());
            return rep.pass ? 0 : 1;
        }

        if (cmd_oracle->parsed()) {
            auto reg = oracle::registry();
            if (oracle_list) {
                for (const auto& entry : reg)
                    std::printf("%-36s %s\n", entry.id.c_str(), entry.description.c_str());
                return 0;
            }
            if (oracle_id.empty()) throw Error("oracle: pass --list or --run <id>");
            for (const auto& entry : reg) {
                if (entry.id != oracle_id) continue;
                auto result = entry.run();
                nlohmann::json j;
                j["id"] = result.id;
                j["values"] = result.values;
                j["method"] = result.method;
                j["resolution"] = result.resolution;
                j["estimated_accuracy"] = result.estimated_accuracy;
                j["version"] = std::string(version);
                std::filesystem::create_directories(oracle_out);
                auto path = std::filesystem::path(oracle_out) / (result.id + ".json");
                std::ofstream out(path);
                out << j.dump(2) << '\n';
                std::printf("%s -> %s\n", result.id.c_str(), path.string().c_str());
                for (double v : result.values) std::printf("  %.15g\n", v);
                return 0;
            }
            throw Error("oracle: unknown id '" + oracle_id + "' (see --list)");
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}
