#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "homog/experiments.hpp"
#include "homog/io.hpp"

using namespace homog;
namespace fs = std::filesystem;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace

TEST_CASE("fit_rate on exact geometric data") {
    auto f1 = fit_rate({0.4, 0.2, 0.1}, {0.25, 0.125, 0.0625});
    CHECK(f1.slope == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(f1.r2 == doctest::Approx(1.0).epsilon(1e-12));

    auto f2 = fit_rate({0.16, 0.04, 0.01}, {0.25, 0.125, 0.0625});
    CHECK(f2.slope == doctest::Approx(2.0).epsilon(1e-12));

    CHECK_THROWS_WITH_AS(fit_rate({0.1}, {0.5}), doctest::Contains("insufficient points"), Error);
    CHECK_THROWS_AS(fit_rate({0.1, -0.2, 0.3}, {0.5, 0.25, 0.125}), Error);
}

TEST_CASE("write_report: stable CSV, byte-identical reruns, empty-ladder error") {
    RateReport rep;
    rep.experiment = "thm1";
    rep.family = "space_time";
    rep.rows = {{0.25, 4e-3, 5e-3, false, 1e-5}, {0.125, 2e-3, 2.5e-3, false, 5e-6}};
    rep.fit_done = true;
    rep.fit = {1.0, -2.0, 0.999};
    rep.pass = true;

    const std::string base = (fs::temp_directory_path() / "homog_report_test").string();
    io::write_report(rep, base);
    auto csv1 = slurp(base + ".csv");
    CHECK(csv1.substr(0, csv1.find('\n')) == "eps,sup_error,weighted_error,floor_flag");

    rep.runtime_seconds = 123.0;  // volatile metadata must not touch the CSV
    io::write_report(rep, base);
    CHECK(slurp(base + ".csv") == csv1);

    RateReport empty;
    empty.experiment = "thm1";
    const std::string base2 = (fs::temp_directory_path() / "homog_report_none").string();
    CHECK_THROWS_AS(io::write_report(empty, base2), Error);
    CHECK_FALSE(fs::exists(base2 + ".csv"));
}

TEST_CASE("coefficient json round trip") {
    auto A = make_builtin("space_time", {{"b", 0.5}});
    auto j = io::coefficient_to_json(A);
    auto A2 = io::coefficient_from_json(j);
    CHECK(A2.family() == "space_time");
    CHECK(A2.scalar(0.3, 0.7) == A.scalar(0.3, 0.7));
    CHECK_THROWS_AS(io::coefficient_from_json(nlohmann::json{{"params", 1}}), Error);
}

TEST_CASE("corrector bundle round trip is bit-exact") {
    auto A = make_builtin("space_time", {{"b", 0.5}});
    auto set = solve_corrector(A, build_grid(1, 32, 32), Scheme::spectral);
    auto duals = solve_dual_correctors(set.flux);
    const std::string path = (fs::temp_directory_path() / "homog_bundle_test.bin").string();
    io::save_corrector_bundle(path, set, &duals);

    auto bundle = io::load_bundle(path);
    CHECK(bundle.fields.at("chi").values == set.chi.values);
    CHECK(bundle.fields.at("b_flux").values == set.flux.b.values);
    CHECK(bundle.fields.at("phi").values == duals.phi.values);
    CHECK(bundle.manifest.at("a_hat")[0][0].get<double>() == set.a_hat.scalar());
    CHECK(bundle.manifest.at("coefficient").at("family") == "space_time");

    // the reloaded flux feeds the dual construction identically
    FluxMatrix flux{bundle.fields.at("b_flux")};
    auto duals2 = solve_dual_correctors(flux);
    CHECK(duals2.phi.values == duals.phi.values);
}

TEST_CASE("kernel sample CSV serialization") {
    KernelSample s;
    s.epsilon = 0.125;
    s.times = {1.0};
    s.lattice = {-0.5, 0.0, 0.5};
    s.values = {0.1, 0.3, 0.1};
    s.L = 7;
    s.h = 1.0 / 128;
    const std::string path = (fs::temp_directory_path() / "homog_sample.csv").string();
    io::write_kernel_sample(s, path);
    auto text = slurp(path);
    CHECK(text.substr(0, text.find('\n')) == "x,t,comp,value");
    CHECK(std::count(text.begin(), text.end(), '\n') == 4);  // header + 3 rows
    CHECK(fs::exists(path + ".json"));
}

TEST_CASE("experiment config validation") {
    ExperimentConfig bad;
    bad.id = "thm1";
    bad.ladder = {0.125, 0.25};  // not decreasing
    CHECK_THROWS_AS(run_experiment(bad), Error);

    ExperimentConfig unknown;
    unknown.id = "nope";
    CHECK_THROWS_AS(run_experiment(unknown), Error);
}

TEST_CASE("thm1 on constant coefficients reports the floor degeneracy") {
    ExperimentConfig cfg;
    cfg.id = "thm1";
    cfg.A = make_builtin("constant", {{"a", 1.0}});
    cfg.ladder = {0.25, 0.125, 0.0625};
    cfg.cell_n = 32;
    cfg.cell_nt = 32;
    cfg.max_extra_refinements = 1;
    cfg.with_oracle_bound = false;
    auto rep = run_experiment(cfg);
    CHECK_FALSE(rep.fit_done);
    CHECK(rep.fit_note == "degenerate: errors at floor");
    CHECK(rep.pass);
    for (const auto& row : rep.rows) CHECK(row.floor_flag);
}

TEST_CASE("thm1 smoke ladder reproduces the first-order rate") {
    ExperimentConfig cfg;
    cfg.id = "thm1";
    cfg.ladder = {0.25, 0.125, 0.0625};
    cfg.cell_n = 64;
    cfg.cell_nt = 64;
    cfg.cell_tol = 1e-9;
    cfg.with_oracle_bound = false;
    auto rep = run_experiment(cfg);
    REQUIRE(rep.fit_done);
    CHECK(rep.fit.slope >= 0.85);
    CHECK(rep.fit.slope <= 1.30);
    CHECK(rep.fit.r2 >= 0.97);
    CHECK(rep.pass);
    CHECK(rep.stats.at("a_hat") == doctest::Approx(0.935998302509).epsilon(1e-6));

    // determinism: the same config gives identical errors
    auto rep2 = run_experiment(cfg);
    for (std::size_t i = 0; i < rep.rows.size(); ++i)
        CHECK(rep.rows[i].sup_error == rep2.rows[i].sup_error);
}

TEST_CASE("ladder points may run on worker threads with identical results") {
    ExperimentConfig cfg;
    cfg.id = "thm1";
    cfg.ladder = {0.25, 0.125, 0.0625};
    cfg.cell_n = 64;
    cfg.cell_nt = 64;
    cfg.with_oracle_bound = false;
    auto serial = run_experiment(cfg);
    cfg.threads = 3;
    auto parallel = run_experiment(cfg);
    for (std::size_t i = 0; i < serial.rows.size(); ++i)
        CHECK(serial.rows[i].sup_error == parallel.rows[i].sup_error);
}
