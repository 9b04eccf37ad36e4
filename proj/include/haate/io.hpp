#pragma once
// Serialization: JSON config round-trips for the domain types, the cell
// summary CSV/JSON tables, assignment and Sobol-table CSV, fit JSON export.
// Doubles are written with shortest round-trip formatting so that identical
// runs produce byte-identical files.

#include <charconv>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "haate/core.hpp"
#include "haate/estimate.hpp"
#include "haate/montecarlo.hpp"
#include "haate/sobol.hpp"

namespace haate {

inline std::string format_double(double v) {
    char buf[40];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& s) {
    double v = 0.0;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    while (first != last && (*first == ' ' || *first == '\t')) ++first;
    const auto res = std::from_chars(first, last, v);
    if (res.ec != std::errc{}) throw Error(Errc::parse_error, "bad numeric field: '" + s + "'");
    return v;
}

// ---------------------------------------------------------------- JSON types

inline nlohmann::json to_json(const DesignSpec& s) {
    nlohmann::json j{{"J", s.J}, {"n", s.n}, {"M", s.M}, {"alpha", s.alpha}};
    j["mode"] = s.mode == AssignMode::two_stage_dirichlet ? "two_stage_dirichlet" : "sobol_dirichlet";
    if (s.mode == AssignMode::sobol_dirichlet) j["K"] = s.sobol_k;
    return j;
}

inline DesignSpec design_from_json(const nlohmann::json& j) {
    DesignSpec s;
    try {
        s.J = j.at("J").get<int>();
        s.n = j.at("n").get<int>();
        s.M = j.at("M").get<int>();
        s.alpha = j.at("alpha").get<std::vector<double>>();
        const std::string mode = j.value("mode", std::string("two_stage_dirichlet"));
        if (mode == "two_stage_dirichlet") {
            s.mode = AssignMode::two_stage_dirichlet;
        } else if (mode == "sobol_dirichlet") {
            s.mode = AssignMode::sobol_dirichlet;
            s.sobol_k = j.at("K").get<int>();
        } else {
            throw Error(Errc::parse_error, "unknown assignment mode '" + mode + "'");
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::parse_error, std::string("design: ") + e.what());
    }
    return s;
}

inline nlohmann::json to_json(const DgpParams& p) {
    return nlohmann::json{{"beta", p.beta},     {"delta_base", p.delta_base}, {"c", p.c},
                          {"sigma2", p.sigma2}, {"rho_u", p.rho_u}};
}

inline DgpParams dgp_from_json(const nlohmann::json& j) {
    DgpParams p;
    try {
        p.beta = j.at("beta").get<std::vector<double>>();
        p.delta_base = j.at("delta_base").get<std::vector<std::vector<double>>>();
        p.c = j.at("c").get<double>();
        p.sigma2 = j.at("sigma2").get<double>();
        p.rho_u = j.at("rho_u").get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::parse_error, std::string("dgp: ") + e.what());
    }
    return p;
}

inline nlohmann::json to_json(const SweepGrid& g) {
    return nlohmann::json{{"rho_u", g.rho_u_values},
                          {"c", g.c_values},
                          {"scaled_alpha", g.scaled_alpha_values},
                          {"iterations", g.iterations},
                          {"base_seed", g.base_seed}};
}

inline SweepGrid grid_from_json(const nlohmann::json& j) {
    SweepGrid g;
    try {
        g.rho_u_values = j.at("rho_u").get<std::vector<double>>();
        g.c_values = j.at("c").get<std::vector<double>>();
        g.scaled_alpha_values = j.at("scaled_alpha").get<std::vector<double>>();
        g.iterations = j.at("iterations").get<int>();
        g.base_seed = j.value("base_seed", std::uint64_t{0});
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::parse_error, std::string("grid: ") + e.what());
    }
    if (g.rho_u_values.empty()) throw Error(Errc::parse_error, "grid: empty axis 'rho_u'");
    if (g.c_values.empty()) throw Error(Errc::parse_error, "grid: empty axis 'c'");
    if (g.scaled_alpha_values.empty())
        throw Error(Errc::parse_error, "grid: empty axis 'scaled_alpha'");
    return g;
}

enum class TableFormat { csv, json };

struct RunConfig {
    DesignSpec design;
    DgpParams dgp;
    SweepGrid grid;
    std::string output_dir = ".";
    TableFormat format = TableFormat::csv;
    bool plot = false;
};

inline RunConfig config_from_json(const nlohmann::json& j) {
    RunConfig cfg;
    try {
        cfg.design = design_from_json(j.at("design"));
        cfg.dgp = dgp_from_json(j.at("dgp"));
        cfg.grid = grid_from_json(j.at("grid"));
        cfg.output_dir = j.value("output_dir", std::string("."));
        const std::string fmt = j.value("format", std::string("csv"));
        if (fmt == "csv")
            cfg.format = TableFormat::csv;
        else if (fmt == "json")
            cfg.format = TableFormat::json;
        else
            throw Error(Errc::parse_error, "unknown format '" + fmt + "'");
        cfg.plot = j.value("plot", false);
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::parse_error, std::string("config: ") + e.what());
    }
    return cfg;
}

inline nlohmann::json to_json(const RunConfig& cfg) {
    return nlohmann::json{{"design", to_json(cfg.design)},
                          {"dgp", to_json(cfg.dgp)},
                          {"grid", to_json(cfg.grid)},
                          {"output_dir", cfg.output_dir},
                          {"format", cfg.format == TableFormat::csv ? "csv" : "json"},
                          {"plot", cfg.plot}};
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::io_error, "cannot open config file '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::parse_error, std::string("config: ") + e.what());
    }
    return config_from_json(j);
}

// ------------------------------------------------------------- cell tables

inline std::vector<std::string> cell_csv_header(int M) {
    std::vector<std::string> cols{"rho_u", "c", "rho_m"};
    for (int m = 1; m <= M; ++m) cols.push_back("truth_" + std::to_string(m));
    for (const char* name : {"bias_lm", "bias_dm", "rmse_lm", "rmse_dm", "se_lm", "se_dm",
                             "cover_lm", "cover_dm"})
        cols.emplace_back(name);
    cols.emplace_back("scaled_alpha");
    cols.emplace_back("iterations");
    return cols;
}

inline std::string cells_to_csv(const std::vector<CellSummary>& cells, int M) {
    std::ostringstream out;
    const auto header = cell_csv_header(M);
    for (std::size_t k = 0; k < header.size(); ++k) out << (k ? "," : "") << header[k];
    out << "\n";
    for (const auto& cell : cells) {
        out << format_double(cell.rho_u) << ',' << format_double(cell.c) << ','
            << format_double(cell.rho_m);
        for (int m = 0; m < M; ++m)
            out << ','
                << format_double(m < static_cast<int>(cell.truths.size())
                                     ? cell.truths[static_cast<std::size_t>(m)]
                                     : std::nan(""));
        out << ',' << format_double(cell.lm.bias) << ',' << format_double(cell.dm.bias) << ','
            << format_double(cell.lm.rmse) << ',' << format_double(cell.dm.rmse) << ','
            << format_double(cell.lm.mean_se) << ',' << format_double(cell.dm.mean_se) << ','
            << format_double(cell.lm.coverage) << ',' << format_double(cell.dm.coverage) << ','
            << format_double(cell.scaled_alpha) << ',' << cell.iterations_completed << "\n";
    }
    return out.str();
}

inline nlohmann::json cell_to_json(const CellSummary& cell) {
    auto est = [](const EstimatorSummary& s) {
        return nlohmann::json{{"bias", s.bias},
                              {"rmse", s.rmse},
                              {"mean_se", s.mean_se},
                              {"coverage", s.coverage}};
    };
    nlohmann::json j{{"rho_u", cell.rho_u},
                     {"c", cell.c},
                     {"scaled_alpha", cell.scaled_alpha},
                     {"rho_m", cell.rho_m},
                     {"truths", cell.truths},
                     {"lm", est(cell.lm)},
                     {"dm", est(cell.dm)},
                     {"iterations_completed", cell.iterations_completed},
                     {"iterations_failed", cell.iterations_failed}};
    if (!cell.error.empty()) j["error"] = cell.error;
    return j;
}

inline nlohmann::json cells_to_json(const std::vector<CellSummary>& cells) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& cell : cells) arr.push_back(cell_to_json(cell));
    return arr;
}

// Reads a cell table back from CSV. Columns are located by header name, so
// column order and extra columns are tolerated.
inline std::vector<CellSummary> cells_from_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw Error(Errc::parse_error, "cells csv: empty file");
    std::vector<std::string> header;
    {
        std::stringstream ss(line);
        std::string field;
        while (std::getline(ss, field, ',')) header.push_back(field);
    }
    auto col = [&](const std::string& name) {
        for (std::size_t k = 0; k < header.size(); ++k)
            if (header[k] == name) return static_cast<int>(k);
        throw Error(Errc::parse_error, "cells csv: missing column '" + name + "'");
    };
    const int c_rho_u = col("rho_u"), c_c = col("c"), c_rho_m = col("rho_m");
    const int c_bias_lm = col("bias_lm"), c_bias_dm = col("bias_dm");
    const int c_rmse_lm = col("rmse_lm"), c_rmse_dm = col("rmse_dm");
    const int c_se_lm = col("se_lm"), c_se_dm = col("se_dm");
    const int c_cov_lm = col("cover_lm"), c_cov_dm = col("cover_dm");
    int c_scaled = -1, c_iters = -1;
    for (std::size_t k = 0; k < header.size(); ++k) {
        if (header[k] == "scaled_alpha") c_scaled = static_cast<int>(k);
        if (header[k] == "iterations") c_iters = static_cast<int>(k);
    }
    std::vector<int> truth_cols;
    for (int m = 1;; ++m) {
        bool found = false;
        for (std::size_t k = 0; k < header.size(); ++k)
            if (header[k] == "truth_" + std::to_string(m)) {
                truth_cols.push_back(static_cast<int>(k));
                found = true;
            }
        if (!found) break;
    }

    std::vector<CellSummary> cells;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string field;
        while (std::getline(ss, field, ',')) fields.push_back(field);
        if (fields.size() < header.size())
            throw Error(Errc::parse_error, "cells csv: short row '" + line + "'");
        CellSummary cell;
        cell.rho_u = parse_double(fields[static_cast<std::size_t>(c_rho_u)]);
        cell.c = parse_double(fields[static_cast<std::size_t>(c_c)]);
        cell.rho_m = parse_double(fields[static_cast<std::size_t>(c_rho_m)]);
        for (int tc : truth_cols) cell.truths.push_back(parse_double(fields[static_cast<std::size_t>(tc)]));
        cell.lm.bias = parse_double(fields[static_cast<std::size_t>(c_bias_lm)]);
        cell.dm.bias = parse_double(fields[static_cast<std::size_t>(c_bias_dm)]);
        cell.lm.rmse = parse_double(fields[static_cast<std::size_t>(c_rmse_lm)]);
        cell.dm.rmse = parse_double(fields[static_cast<std::size_t>(c_rmse_dm)]);
        cell.lm.mean_se = parse_double(fields[static_cast<std::size_t>(c_se_lm)]);
        cell.dm.mean_se = parse_double(fields[static_cast<std::size_t>(c_se_dm)]);
        cell.lm.coverage = parse_double(fields[static_cast<std::size_t>(c_cov_lm)]);
        cell.dm.coverage = parse_double(fields[static_cast<std::size_t>(c_cov_dm)]);
        if (c_scaled >= 0) cell.scaled_alpha = parse_double(fields[static_cast<std::size_t>(c_scaled)]);
        if (c_iters >= 0)
            cell.iterations_completed = static_cast<int>(parse_double(fields[static_cast<std::size_t>(c_iters)]));
        cells.push_back(std::move(cell));
    }
    return cells;
}

inline std::vector<CellSummary> cells_from_csv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::io_error, "cannot open cells file '" + path + "'");
    return cells_from_csv(in);
}

// --------------------------------------------------- assignments and tables

inline std::string assignment_to_csv(const AssignmentMatrix& a) {
    std::ostringstream out;
    out << "cluster,unit,arm\n";
    for (int j = 0; j < a.J; ++j)
        for (int i = 0; i < a.n; ++i) out << j << ',' << i << ',' << a.label(j, i) << "\n";
    return out.str();
}

inline std::string assignment_to_csv(const DeployedAssignment& d) {
    std::ostringstream out;
    out << "cluster,unit,arm\n";
    for (std::size_t j = 0; j < d.cluster_ids.size(); ++j)
        for (std::size_t i = 0; i < d.labels[j].size(); ++i)
            out << d.cluster_ids[j] << ',' << i << ',' << d.labels[j][i] << "\n";
    return out.str();
}

inline std::string outcomes_to_csv(const AssignmentMatrix& a, const OutcomeMatrix& y) {
    std::ostringstream out;
    out << "cluster,unit,arm,y\n";
    for (int j = 0; j < a.J; ++j)
        for (int i = 0; i < a.n; ++i)
            out << j << ',' << i << ',' << a.label(j, i) << ',' << format_double(y.at(j, i)) << "\n";
    return out.str();
}

inline std::string sobol_table_to_csv(const SobolDrawTable& t) {
    std::ostringstream out;
    for (int m = 0; m <= t.M; ++m) out << (m ? "," : "") << "arm_" << m;
    out << "\n";
    for (int r = 0; r < t.K; ++r) {
        for (int m = 0; m <= t.M; ++m) out << (m ? "," : "") << format_double(t.at(r, m));
        out << "\n";
    }
    return out.str();
}

inline SobolDrawTable sobol_table_from_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw Error(Errc::parse_error, "sobol csv: empty file");
    int arms = 1;
    for (char ch : line) arms += (ch == ',');
    SobolDrawTable t;
    t.M = arms - 1;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string field;
        int got = 0;
        while (std::getline(ss, field, ',')) {
            t.vectors.push_back(parse_double(field));
            ++got;
        }
        if (got != arms) throw Error(Errc::parse_error, "sobol csv: ragged row");
        ++t.K;
    }
    if (t.K == 0) throw Error(Errc::empty_table, "sobol csv: no rows");
    return t;
}

inline nlohmann::json fit_to_json(const FitResult& fit) {
    nlohmann::json coef = nlohmann::json::object();
    for (std::size_t k = 0; k < fit.retained.size(); ++k)
        coef[fit.retained[k].name()] = fit.coefficients(static_cast<Eigen::Index>(k));
    nlohmann::json dropped = nlohmann::json::array();
    for (const auto& tag : fit.dropped) dropped.push_back(tag.name());
    // dense lower triangle of the cluster-robust covariance, row by row
    nlohmann::json tri = nlohmann::json::array();
    for (Eigen::Index r = 0; r < fit.vcov.rows(); ++r)
        for (Eigen::Index c = 0; c <= r; ++c) tri.push_back(fit.vcov(r, c));
    return nlohmann::json{{"coefficients", coef},
                          {"dropped", dropped},
                          {"vcov_lower_triangle", tri},
                          {"n_clusters", fit.n_clusters}};
}

inline void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(Errc::io_error, "cannot write '" + path + "'");
    out << content;
    if (!out) throw Error(Errc::io_error, "short write to '" + path + "'");
}

inline std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::io_error, "cannot read '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace haate
