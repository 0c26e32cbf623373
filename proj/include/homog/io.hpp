#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>

#include <json.hpp>

#include "homog/cell.hpp"
#include "homog/coefficients.hpp"
#include "homog/dual.hpp"
#include "homog/kernels.hpp"
#include "homog/report.hpp"

namespace homog::io {

using nlohmann::json;

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// ---------------------------------------------------------------------------
// coefficient descriptions: {"family": "...", "params": {...}}
// ---------------------------------------------------------------------------

inline CoefficientField coefficient_from_json(const json& j) {
    if (!j.contains("family")) throw Error("coefficient json: missing \"family\"");
    std::map<std::string, double> params;
    if (j.contains("params"))
        for (auto& [key, value] : j.at("params").items()) params[key] = value.get<double>();
    return make_builtin(j.at("family").get<std::string>(), params);
}

inline CoefficientField load_coefficient(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open coefficient file: " + path);
    json j;
    in >> j;
    return coefficient_from_json(j);
}

inline json coefficient_to_json(const CoefficientField& A) {
    json j;
    j["family"] = A.family();
    j["params"] = json::object();
    for (auto& [k, v] : A.params()) j["params"][k] = v;
    return j;
}

// ---------------------------------------------------------------------------
// GridFunction: one JSON header line, then raw little-endian float64 in the
// documented node order (time-major, then lexicographic space),
// component-major.
// ---------------------------------------------------------------------------

inline void write_grid_function(std::ostream& out, const GridFunction& f) {
    json header;
    header["format"] = "homog-grid-v1";
    header["d"] = f.grid.d;
    header["n_space"] = f.grid.n_space;
    header["n_time"] = f.grid.n_time;
    header["shape"] = f.shape;
    out << header.dump() << '\n';
    out.write(reinterpret_cast<const char*>(f.values.data()),
              static_cast<std::streamsize>(f.values.size() * sizeof(double)));
}

inline GridFunction read_grid_function(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw Error("grid function: missing header");
    json header = json::parse(line);
    if (header.value("format", "") != "homog-grid-v1")
        throw Error("grid function: unknown format");
    auto grid = build_grid(header.at("d").get<int>(), header.at("n_space").get<int>(),
                           header.at("n_time").get<int>());
    GridFunction f = GridFunction::zeros(grid, header.at("shape").get<std::vector<std::size_t>>());
    in.read(reinterpret_cast<char*>(f.values.data()),
            static_cast<std::streamsize>(f.values.size() * sizeof(double)));
    if (!in) throw Error("grid function: truncated payload");
    return f;
}

inline void save_grid_function(const GridFunction& f, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open for writing: " + path);
    write_grid_function(out, f);
}

inline GridFunction load_grid_function(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open: " + path);
    return read_grid_function(in);
}

// ---------------------------------------------------------------------------
// corrector bundle: manifest line + named GridFunction sections
// ---------------------------------------------------------------------------

struct Bundle {
    json manifest;
    std::map<std::string, GridFunction> fields;
};

inline void save_bundle(const std::string& path, const json& manifest,
                        const std::map<std::string, GridFunction>& fields) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open for writing: " + path);
    json m = manifest;
    m["format"] = "homog-bundle-v1";
    m["version"] = std::string(version);
    m["field_names"] = json::array();
    for (auto& [name, f] : fields) m["field_names"].push_back(name);
    out << m.dump() << '\n';
    for (auto& [name, f] : fields) {
        out << name << '\n';
        write_grid_function(out, f);
    }
}

inline Bundle load_bundle(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open: " + path);
    Bundle b;
    std::string line;
    if (!std::getline(in, line)) throw Error("bundle: missing manifest");
    b.manifest = json::parse(line);
    if (b.manifest.value("format", "") != "homog-bundle-v1") throw Error("bundle: unknown format");
    for (const auto& name_json : b.manifest.at("field_names")) {
        std::string expect = name_json.get<std::string>();
        if (!std::getline(in, line) || line != expect)
            throw Error("bundle: field section mismatch for " + expect);
        b.fields.emplace(expect, read_grid_function(in));
    }
    return b;
}

inline json corrector_manifest(const CorrectorSet& set) {
    json m;
    m["d"] = set.chi.grid.d;
    m["n_space"] = set.chi.grid.n_space;
    m["n_time"] = set.chi.grid.n_time;
    m["scheme"] = set.scheme == Scheme::spectral ? "spectral" : "fd";
    const int d = set.chi.grid.d;
    json a_hat = json::array();
    for (int i = 0; i < d; ++i) {
        json row = json::array();
        for (int j = 0; j < d; ++j) row.push_back(set.a_hat.a_hat(i, j));
        a_hat.push_back(row);
    }
    m["a_hat"] = a_hat;
    m["mu_check"] = set.a_hat.mu_check;
    m["solve_residual"] = set.solve_residual;
    m["coefficient"] = coefficient_to_json(set.coefficient);
    return m;
}

inline void save_corrector_bundle(const std::string& path, const CorrectorSet& set,
                                  const DualCorrectorSet* duals = nullptr) {
    std::map<std::string, GridFunction> fields;
    fields["chi"] = set.chi;
    fields["grad_chi"] = set.grad_chi;
    fields["b_flux"] = set.flux.b;
    json m = corrector_manifest(set);
    if (duals) {
        fields["f_pot"] = duals->f_pot;
        fields["phi"] = duals->phi;
        fields["grad_phi_spatial"] = duals->grad_phi_spatial;
        m["sup_phi"] = duals->sup_phi;
        m["gauge_residual"] = duals->gauge_residual;
    }
    save_bundle(path, m, fields);
}

// ---------------------------------------------------------------------------
// kernel samples: CSV (x, t, comp, value) + JSON metadata sidecar
// ---------------------------------------------------------------------------

inline void write_kernel_sample(const KernelSample& s, const std::string& csv_path) {
    std::ofstream out(csv_path);
    if (!out) throw Error("cannot open for writing: " + csv_path);
    out << "x,t,comp,value\n";
    for (std::size_t it = 0; it < s.times.size(); ++it)
        for (std::size_t ix = 0; ix < s.lattice.size(); ++ix) {
            out << format_double(s.lattice[ix]) << ',' << format_double(s.times[it]) << ",0,"
                << format_double(s.value(it, ix)) << '\n';
            if (!s.grad_x.empty())
                out << format_double(s.lattice[ix]) << ',' << format_double(s.times[it]) << ",1,"
                    << format_double(s.grad(it, ix)) << '\n';
        }
    json meta;
    meta["epsilon"] = s.epsilon;
    meta["pole"] = {s.pole_y, s.pole_s};
    meta["L"] = s.L;
    meta["h"] = s.h;
    meta["k"] = s.k;
    meta["mollifier_width"] = s.mollifier_width;
    meta["mass_drift"] = s.mass_drift;
    meta["refine_gap_values"] = s.refine_gap_values;
    meta["refinements"] = s.refinements;
    meta["version"] = std::string(version);
    std::ofstream mout(csv_path + ".json");
    mout << meta.dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// rate reports: CSV of per-point rows + JSON summary
// ---------------------------------------------------------------------------

inline std::string report_scale_column(const std::string& experiment) {
    return experiment == "cor" ? "t" : "eps";
}

inline void write_report(const RateReport& r, const std::string& base_path) {
    if (r.rows.empty()) throw Error("write_report: empty ladder");
    namespace fs = std::filesystem;
    fs::path base(base_path);
    if (base.has_parent_path()) fs::create_directories(base.parent_path());

    std::ofstream csv(base_path + ".csv");
    if (!csv) throw Error("cannot open for writing: " + base_path + ".csv");
    csv << report_scale_column(r.experiment) << ",sup_error,weighted_error,floor_flag\n";
    for (const auto& row : r.rows)
        csv << format_double(row.scale) << ',' << format_double(row.sup_error) << ','
            << format_double(row.weighted_error) << ',' << (row.floor_flag ? 1 : 0) << '\n';

    json j;
    j["experiment"] = r.experiment;
    j["family"] = r.family;
    j["scheme"] = r.scheme;
    j["version"] = std::string(version);
    j["pass"] = r.pass;
    j["details"] = r.details;
    j["log_divided"] = r.log_divided;
    j["window"] = {r.window_lo, r.window_hi};
    j["r2_min"] = r.r2_min;
    if (r.fit_done) {
        j["fit"] = {{"slope", r.fit.slope}, {"intercept", r.fit.intercept}, {"r2", r.fit.r2}};
    } else {
        j["fit_note"] = r.fit_note;
    }
    j["rows"] = json::array();
    for (const auto& row : r.rows)
        j["rows"].push_back({{"scale", row.scale},
                             {"sup_error", row.sup_error},
                             {"weighted_error", row.weighted_error},
                             {"floor_flag", row.floor_flag},
                             {"refine_gap", row.refine_gap}});
    for (auto& [k, v] : r.stats) j["stats"][k] = v;
    j["runtime_seconds"] = r.runtime_seconds;
    std::ofstream js(base_path + ".json");
    js << j.dump(2) << '\n';
}

} // namespace homog::io
