// haate: design and analyze multi-arm cluster experiments under partial
// interference. Subcommands: simulate, select-design, assign, plot.

#include <CLI11.hpp>

#include <iostream>
#include <string>
#include <vector>

#include "haate/cli.hpp"

int main(int argc, char** argv) {
    CLI::App app{"two-stage cluster experiment design and HAATE estimation"};
    app.require_subcommand(1);

    // simulate
    std::string config_path;
    int n_threads = haate::cli::default_thread_count();
    auto* simulate = app.add_subcommand("simulate", "run the Monte Carlo design sweep from a config");
    simulate->add_option("-c,--config", config_path, "JSON config file")->required();
    simulate->add_option("-t,--threads", n_threads,
                         "worker threads (default: " + std::string(haate::cli::threads_env_var) +
                             " or hardware)");

    // select-design
    std::string cells_path;
    double sel_rho_u = 0.0, sel_c = 0.0;
    std::string estimator_name = "dm";
    auto* select = app.add_subcommand("select-design", "pick the minimum-RMSE design from a cell table");
    select->add_option("--cells", cells_path, "cells.csv produced by simulate")->required();
    select->add_option("--rho-u", sel_rho_u, "intra-cluster error correlation stratum")->required();
    select->add_option("--c", sel_c, "interference magnitude stratum")->required();
    select->add_option("--estimator", estimator_name, "lm or dm (default dm)");

    // assign
    haate::cli::AssignArgs assign_args;
    double alpha_opt = 0.0, icc_opt = 0.0;
    auto* assign = app.add_subcommand("assign", "generate a treatment assignment");
    assign->add_option("--J", assign_args.J, "number of clusters");
    assign->add_option("--n", assign_args.n, "units per cluster");
    assign->add_option("--M", assign_args.M, "number of non-control arms")->required();
    auto* alpha_flag = assign->add_option("--alpha", alpha_opt, "per-arm Dirichlet concentration");
    auto* icc_flag =
        assign->add_option("--target-icc", icc_opt, "desired intra-cluster correlation of treatment");
    assign->add_option("--mode", assign_args.mode, "two-stage (default) or sobol");
    assign->add_option("--K", assign_args.K, "precomputed draws (sobol mode)");
    assign->add_option("--seed", assign_args.seed, "random seed");
    assign->add_option("--cluster-ids", assign_args.cluster_id_file,
                       "file with one cluster id per line (sobol mode)");
    assign->add_option("--sizes", assign_args.size_file,
                       "file with one unit count per cluster id (sobol mode)");
    assign->add_option("--out", assign_args.out_prefix, "output path prefix");

    // plot
    std::string plot_cells, plot_out = ".";
    double plot_c = 0.0;
    std::vector<double> plot_rho_u;
    auto* plot = app.add_subcommand("plot", "render RMSE-vs-design curves as SVG");
    plot->add_option("--cells", plot_cells, "cells.csv produced by simulate")->required();
    plot->add_option("--c", plot_c, "interference magnitude to plot")->required();
    plot->add_option("--rho-u", plot_rho_u, "rho_u curves to include (default: all present)");
    plot->add_option("--out", plot_out, "output directory");

    CLI11_PARSE(app, argc, argv);

    if (simulate->parsed())
        return haate::cli::cmd_simulate(config_path, n_threads, std::cout, std::cerr);

    if (select->parsed()) {
        if (estimator_name != "lm" && estimator_name != "dm") {
            std::cerr << "flag error: --estimator must be lm or dm\n";
            return 2;
        }
        const auto which = estimator_name == "lm" ? haate::Estimator::linear_in_means
                                                  : haate::Estimator::difference_in_means;
        return haate::cli::cmd_select_design(cells_path, sel_rho_u, sel_c, which, std::cout,
                                             std::cerr);
    }

    if (assign->parsed()) {
        if (alpha_flag->count()) assign_args.alpha_bar = alpha_opt;
        if (icc_flag->count()) assign_args.target_icc = icc_opt;
        return haate::cli::cmd_assign(assign_args, std::cout, std::cerr);
    }

    if (plot->parsed())
        return haate::cli::cmd_plot(plot_cells, plot_c, plot_rho_u, plot_out, std::cout, std::cerr);

    return 2;
}
