#pragma once
// Command implementations behind the CLI front end. Kept header-level and
// stream-parameterized so the exit-code and output contracts are unit
// testable without spawning processes.
//
// Exit codes: 0 success; 1 completed with failed cells; 2 configuration,
// flag, or parse error; 3 I/O error.

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "haate/core.hpp"
#include "haate/io.hpp"
#include "haate/montecarlo.hpp"
#include "haate/plot.hpp"
#include "haate/randomize.hpp"
#include "haate/sobol.hpp"

namespace haate::cli {

inline constexpr const char* threads_env_var = "HAATE_THREADS";

inline int default_thread_count() {
    if (const char* env = std::getenv(threads_env_var)) {
        const int v = std::atoi(env);
        if (v >= 1) return v;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

inline std::string csv_row_for(const CellSummary& cell, int M) {
    const std::string table = cells_to_csv({cell}, M);
    const std::size_t newline = table.find('\n');
    return table.substr(newline + 1, table.size() - newline - 2);  // strip header and trailing \n
}

// ------------------------------------------------------------- simulate

inline int cmd_simulate(const std::string& config_path, int n_threads, std::ostream& out,
                        std::ostream& err) {
    RunConfig cfg;
    try {
        cfg = load_config(config_path);
        validate_design(cfg.design);
        validate_dgp(cfg.dgp);
        if (cfg.dgp.arms() != cfg.design.arms())
            throw Error(Errc::parse_error, "config: design and dgp disagree on the number of arms");
    } catch (const Error& e) {
        if (e.code() == Errc::io_error) {
            err << "error: " << e.what() << "\n";
            return 3;
        }
        err << "config error: " << e.what() << "\n";
        return 2;
    }

    std::vector<CellSummary> cells;
    try {
        cells = sweep(cfg.grid, cfg.design, cfg.dgp, {}, n_threads);
    } catch (const Error& e) {
        err << "config error: " << e.what() << "\n";
        return 2;
    }

    try {
        std::filesystem::create_directories(cfg.output_dir);
        if (cfg.format == TableFormat::csv)
            write_text_file(cfg.output_dir + "/cells.csv", cells_to_csv(cells, cfg.design.M));
        else
            write_text_file(cfg.output_dir + "/cells.json", cells_to_json(cells).dump(2) + "\n");
        if (cfg.plot) {
            for (double c : cfg.grid.c_values) {
                for (Estimator est : {Estimator::linear_in_means, Estimator::difference_in_means}) {
                    const std::string name = std::string("rmse_") + estimator_name(est) + "_c" +
                                             format_double(c) + ".svg";
                    write_text_file(cfg.output_dir + "/" + name,
                                    svg_rmse_plot(cells, c, cfg.grid.rho_u_values, est));
                }
            }
        }
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return 3;
    }

    const auto header = cell_csv_header(cfg.design.M);
    for (Estimator est : {Estimator::linear_in_means, Estimator::difference_in_means}) {
        out << "minimum-RMSE designs, " << estimator_name(est) << " estimator:\n";
        for (std::size_t k = 0; k < header.size(); ++k) out << (k ? "," : "") << header[k];
        out << "\n";
        for (const auto& choice : select_min_rmse(cells, est)) {
            out << csv_row_for(choice.cell, cfg.design.M);
            if (choice.flat) out << "  # flat: RMSE nearly constant in alpha, any design works";
            out << "\n";
        }
    }

    int failed_cells = 0;
    for (const auto& cell : cells) {
        if (!cell.error.empty()) {
            err << "cell (rho_u=" << format_double(cell.rho_u) << ", c=" << format_double(cell.c)
                << ", scaled_alpha=" << format_double(cell.scaled_alpha) << ") failed: " << cell.error
                << "\n";
            ++failed_cells;
        } else if (cell.iterations_failed > 0) {
            err << "cell (rho_u=" << format_double(cell.rho_u) << ", c=" << format_double(cell.c)
                << ", scaled_alpha=" << format_double(cell.scaled_alpha) << ") completed "
                << cell.iterations_completed << " iterations, " << cell.iterations_failed
                << " failed\n";
            ++failed_cells;
        }
    }
    return failed_cells > 0 ? 1 : 0;
}

// --------------------------------------------------------- select-design

inline int cmd_select_design(const std::string& cells_path, double rho_u, double c,
                             Estimator which, std::ostream& out, std::ostream& err) {
    std::vector<CellSummary> cells;
    try {
        cells = cells_from_csv_file(cells_path);
    } catch (const Error& e) {
        err << (e.code() == Errc::io_error ? "error: " : "parse error: ") << e.what() << "\n";
        return 2;
    }

    std::vector<CellSummary> stratum;
    for (auto& cell : cells)
        if (cell.rho_u == rho_u && cell.c == c) stratum.push_back(cell);
    if (stratum.empty()) {
        err << "no cells with rho_u=" << format_double(rho_u) << " and c=" << format_double(c)
            << " in " << cells_path << "\n";
        return 2;
    }

    const int M = stratum.front().truths.empty() ? 2 : static_cast<int>(stratum.front().truths.size());
    const auto choices = select_min_rmse(stratum, which);
    const DesignChoice& choice = choices.front();
    double scaled = choice.scaled_alpha;
    if (scaled == 0.0 && choice.rho_m > 0.0)  // older files without the scaled_alpha column
        scaled = (1.0 / (choice.rho_m * choice.rho_m) - 1.0) / (M + 1);
    out << "optimal design for rho_u=" << format_double(rho_u) << ", c=" << format_double(c)
        << ", estimator=" << estimator_name(which) << ":\n";
    out << "  scaled_alpha=" << format_double(scaled)
        << " alpha_bar=" << format_double(scaled / (M + 1))
        << " rho_m=" << format_double(choice.rho_m) << "\n";
    const auto header = cell_csv_header(M);
    for (std::size_t k = 0; k < header.size(); ++k) out << (k ? "," : "") << header[k];
    out << "\n" << csv_row_for(choice.cell, M) << "\n";
    if (choice.flat)
        out << "warning: RMSE is nearly flat across designs in this stratum; the choice of alpha "
               "barely matters\n";
    return 0;
}

// ----------------------------------------------------------------- assign

struct AssignArgs {
    int J = 0;
    int n = 0;
    int M = 0;
    std::optional<double> alpha_bar;
    std::optional<double> target_icc;
    std::string mode = "two-stage";  // "two-stage" | "sobol"
    int K = 0;
    std::uint64_t seed = 0;
    std::string cluster_id_file;  // sobol mode, optional
    std::string size_file;        // sobol mode, optional (one count per id)
    std::string out_prefix = "assignment";
};

inline int cmd_assign(const AssignArgs& args, std::ostream& out, std::ostream& err) {
    if (args.alpha_bar.has_value() == args.target_icc.has_value()) {
        err << "flag error: give exactly one of --alpha / --target-icc\n";
        return 2;
    }
    if (args.M < 1) {
        err << "flag error: --M must be >= 1\n";
        return 2;
    }
    double alpha_bar;
    try {
        alpha_bar = args.alpha_bar ? *args.alpha_bar : alpha_for_icc(*args.target_icc, args.M);
    } catch (const Error& e) {
        err << "flag error: " << e.what() << "\n";
        return 2;
    }

    nlohmann::json sidecar{{"M", args.M},
                           {"alpha_bar", alpha_bar},
                           {"scaled_alpha", alpha_bar * (args.M + 1)},
                           {"rho_m_formula", treatment_icc(alpha_bar, args.M)},
                           {"seed", args.seed},
                           {"mode", args.mode}};
    try {
        if (args.mode == "two-stage") {
            if (!args.cluster_id_file.empty() || !args.size_file.empty()) {
                err << "flag error: cluster-id/size files need --mode sobol (deployment path)\n";
                return 2;
            }
            DesignSpec spec = DesignSpec::balanced(args.J, args.n, args.M, alpha_bar);
            validate_design(spec);
            const AssignmentMatrix a = assign_two_stage(spec, RngStream{args.seed, 0});
            write_text_file(args.out_prefix + ".csv", assignment_to_csv(a));
            sidecar["J"] = args.J;
            sidecar["n"] = args.n;
            nlohmann::json probs = nlohmann::json::array();
            for (int j = 0; j < a.J; ++j) {
                nlohmann::json row = nlohmann::json::array();
                for (int m = 0; m <= a.M; ++m) row.push_back(a.prob(j, m));
                probs.push_back(std::move(row));
            }
            sidecar["cluster_probs"] = std::move(probs);
            nlohmann::json icc = nlohmann::json::array();
            for (int m = 0; m <= a.M; ++m) {
                const auto v = empirical_icc(a, m);
                icc.push_back(v ? nlohmann::json(*v) : nlohmann::json());
            }
            sidecar["empirical_icc"] = std::move(icc);
        } else if (args.mode == "sobol") {
            if (args.K < 1) {
                err << "flag error: --mode sobol needs --K >= 1\n";
                return 2;
            }
            std::vector<std::string> ids;
            std::vector<int> sizes;
            if (!args.cluster_id_file.empty()) {
                std::istringstream lines(read_text_file(args.cluster_id_file));
                std::string line;
                while (std::getline(lines, line))
                    if (!line.empty()) ids.push_back(line);
                if (!args.size_file.empty()) {
                    std::istringstream sl(read_text_file(args.size_file));
                    while (std::getline(sl, line))
                        if (!line.empty()) sizes.push_back(static_cast<int>(parse_double(line)));
                    if (sizes.size() != ids.size()) {
                        err << "flag error: size file length does not match cluster-id file\n";
                        return 2;
                    }
                } else {
                    sizes.assign(ids.size(), args.n);
                }
            } else {
                for (int j = 0; j < args.J; ++j) ids.push_back("c" + std::to_string(j));
                sizes.assign(ids.size(), args.n);
            }
            if (ids.empty() || args.n < 1) {
                err << "flag error: sobol mode needs clusters (--J or --cluster-ids) and unit "
                       "counts (--n or --sizes)\n";
                return 2;
            }
            DesignSpec spec = DesignSpec::balanced(static_cast<int>(std::max<std::size_t>(ids.size(), 2)),
                                                   std::max(args.n, 2), args.M, alpha_bar,
                                                   AssignMode::sobol_dirichlet, args.K);
            const SobolDrawTable table = build_sobol_table(spec, args.K);
            const DeployedAssignment d =
                assign_from_table(ids, sizes, table, RngStream{args.seed, 0});
            write_text_file(args.out_prefix + ".csv", assignment_to_csv(d));
            sidecar["K"] = args.K;
            sidecar["direction_set"] = table.direction_set;
            nlohmann::json rows = nlohmann::json::array();
            for (int r = 0; r < table.K; ++r) {
                nlohmann::json row = nlohmann::json::array();
                for (int m = 0; m <= table.M; ++m) row.push_back(table.at(r, m));
                rows.push_back(std::move(row));
            }
            sidecar["table"] = std::move(rows);
            sidecar["row_index"] = d.row_index;
        } else {
            err << "flag error: unknown mode '" << args.mode << "'\n";
            return 2;
        }
        write_text_file(args.out_prefix + ".json", sidecar.dump(2) + "\n");
    } catch (const Error& e) {
        if (e.code() == Errc::io_error) {
            err << "error: " << e.what() << "\n";
            return 3;
        }
        err << "error: " << e.what() << "\n";
        return 2;
    }
    out << "wrote " << args.out_prefix << ".csv and " << args.out_prefix << ".json (alpha_bar="
        << format_double(alpha_bar) << ")\n";
    return 0;
}

// ------------------------------------------------------------------- plot

inline int cmd_plot(const std::string& cells_path, double c_value, std::vector<double> rho_u_values,
                    const std::string& out_dir, std::ostream& out, std::ostream& err) {
    std::vector<CellSummary> cells;
    try {
        cells = cells_from_csv_file(cells_path);
    } catch (const Error& e) {
        err << (e.code() == Errc::io_error ? "error: " : "parse error: ") << e.what() << "\n";
        return 2;
    }
    if (rho_u_values.empty()) {
        for (const auto& cell : cells)
            if (cell.c == c_value &&
                std::find(rho_u_values.begin(), rho_u_values.end(), cell.rho_u) == rho_u_values.end())
                rho_u_values.push_back(cell.rho_u);
        std::sort(rho_u_values.begin(), rho_u_values.end());
    }
    try {
        std::filesystem::create_directories(out_dir);
        for (Estimator est : {Estimator::linear_in_means, Estimator::difference_in_means}) {
            const std::string path =
                out_dir + "/rmse_" + estimator_name(est) + "_c" + format_double(c_value) + ".svg";
            write_text_file(path, svg_rmse_plot(cells, c_value, rho_u_values, est));
            out << "wrote " << path << "\n";
        }
    } catch (const Error& e) {
        if (e.code() == Errc::empty_input) {
            err << "error: no cells match c=" << format_double(c_value) << "\n";
            return 2;
        }
        err << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}

}  // namespace haate::cli
