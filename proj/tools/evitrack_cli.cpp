#include <omp.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "evitrack/config.hpp"
#include "evitrack/verify.hpp"
#include "evitrack/version.hpp"

namespace fs = std::filesystem;
using namespace evitrack;

namespace {

constexpr int exit_ok = 0;
constexpr int exit_validation = 1;
constexpr int exit_runtime = 2;

RunConfig load_or_default(const std::string& config_path, std::vector<std::string>& warnings) {
    RunConfig cfg = config_path.empty() ? parse_config(default_config_text(), &warnings)
                                        : load_config(config_path, &warnings);
    for (const std::string& w : warnings) std::cerr << "warning: " << w << "\n";
    return cfg;
}

int cmd_gen_data(const std::string& config_path, int per_bin_override, const std::string& out_dir,
                 bool force) {
    std::vector<std::string> warnings;
    RunConfig cfg = load_or_default(config_path, warnings);
    if (per_bin_override > 0) cfg.dataset.per_bin = per_bin_override;
    fs::path dir = out_dir.empty() ? cfg.output_dir / "dataset" : fs::path(out_dir);
    if (fs::exists(dir / "manifest.tsv") && !force) {
        std::cerr << "error: dataset already exists at " << dir << " (use --force to regenerate)\n";
        return exit_validation;
    }
    QuadratureGrid grid = cfg.make_quadrature_grid();
    Dataset ds = generate_dataset(cfg.world, grid, cfg.dataset.bins, cfg.dataset.per_bin,
                                  cfg.dataset.root_seed, cfg.dataset.tau, cfg.dataset.attempt_cap);
    write_dataset(dir, ds);
    std::ofstream cf(dir / "dataset_config.txt");
    cf << serialize_config(cfg);
    std::cout << "dataset: " << ds.trajectories.size() << " trajectories in " << dir << "\n"
              << "attempts " << ds.stats.attempts << ", rejection fraction "
              << ds.stats.rejection_fraction() << "\n";
    return exit_ok;
}

int cmd_run(const std::string& config_path, const std::string& experiment,
            const std::string& dataset_dir, const std::string& out_dir,
            const std::string& seeds_csv, bool keep_records) {
    std::vector<std::string> warnings;
    RunConfig cfg = load_or_default(config_path, warnings);
    if (!seeds_csv.empty()) {
        cfg.harness.seeds.clear();
        std::istringstream ss(seeds_csv);
        std::string tok;
        while (std::getline(ss, tok, ',')) cfg.harness.seeds.push_back(std::stoull(tok));
    }
    fs::path ds_dir = dataset_dir.empty() ? cfg.output_dir / "dataset" : fs::path(dataset_dir);
    if (!fs::exists(ds_dir / "manifest.tsv")) {
        std::cerr << "error: no dataset at " << ds_dir << " (run gen-data first)\n";
        return exit_validation;
    }
    Dataset ds = read_dataset(ds_dir);
    std::vector<MethodSpec> methods = methods_for_experiment(experiment, cfg.inference_defaults);
    fs::path dir = out_dir.empty() ? cfg.output_dir / experiment : fs::path(out_dir);
    fs::path records_dir = keep_records ? dir / "records" : fs::path{};
    ExperimentResult result = run_experiment(ds, methods, cfg.world, cfg.harness,
                                             cfg.dataset.root_seed, records_dir);
    write_experiment_outputs(dir, result);
    write_run_manifest(dir, serialize_config(cfg), methods, cfg.harness, cfg.dataset.root_seed,
                       result.clamps);
    std::cout << experiment << ": " << methods.size() << " methods x " << cfg.harness.seeds.size()
              << " seeds x " << ds.trajectories.size() << " trajectories -> " << dir << "\n";
    if (result.clamps.clamps > 0)
        std::cout << "log-domain clamps: " << result.clamps.clamps << "\n";
    return exit_ok;
}

int cmd_verify(const std::string& check, const std::string& config_path) {
    // Config validation runs first so an invalid config fails before any check.
    std::vector<std::string> warnings;
    load_or_default(config_path, warnings);
    std::vector<CheckResult> results = run_verification(check);
    if (results.empty()) {
        std::cerr << "error: no checks match '" << check << "'\n";
        return exit_validation;
    }
    bool all = true;
    std::printf("%-18s %-6s %s\n", "check", "result", "detail");
    for (const CheckResult& r : results) {
        std::printf("%-18s %-6s %s\n", r.name.c_str(), r.pass ? "pass" : "FAIL", r.detail.c_str());
        all &= r.pass;
    }
    return all ? exit_ok : exit_runtime;
}

int cmd_summarize(const std::string& records_dir, const std::string& dataset_dir,
                  const std::string& out_dir, const std::string& config_path) {
    std::vector<std::string> warnings;
    RunConfig cfg = load_or_default(config_path, warnings);
    Dataset ds = read_dataset(dataset_dir.empty() ? cfg.output_dir / "dataset"
                                                  : fs::path(dataset_dir));
    ExperimentResult result = aggregate_records(ds, records_dir, cfg.harness);
    write_experiment_outputs(out_dir.empty() ? fs::path(records_dir) / ".." / "resummarized"
                                             : fs::path(out_dir),
                             result);
    std::cout << "re-aggregated " << result.summaries.size() << " summary rows\n";
    return exit_ok;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"EviTrack double-well delayed-disambiguation benchmark"};
    app.set_version_flag("--version", version_string);
    int jobs = 0;
    app.add_option("--jobs", jobs, "worker thread cap (default: all cores)");

    std::string config_path, out_dir, dataset_dir, seeds_csv, check, records_dir, experiment;
    int per_bin = 0;
    bool force = false, keep_records = false;

    auto* gen = app.add_subcommand("gen-data", "generate the labeled benchmark dataset");
    gen->add_option("--config", config_path, "config file (defaults built in)");
    gen->add_option("--per-bin", per_bin, "override trajectories per DD bin");
    gen->add_option("--out", out_dir, "dataset directory");
    gen->add_flag("--force", force, "overwrite an existing dataset");

    auto* run = app.add_subcommand("run", "run an experiment against a dataset");
    run->add_option("--config", config_path, "config file (defaults built in)");
    run->add_option("--experiment", experiment, "main|scoring|g-sweep|c-sweep|k-sweep|custom")
        ->required()
        ->check(CLI::IsMember({"main", "scoring", "g-sweep", "c-sweep", "k-sweep", "custom"}));
    run->add_option("--dataset", dataset_dir, "dataset directory");
    run->add_option("--out", out_dir, "output directory");
    run->add_option("--seeds", seeds_csv, "comma-separated inference seeds");
    run->add_flag("--keep-records", keep_records, "write per-step record files");

    auto* verify = app.add_subcommand("verify", "run the built-in oracle suite");
    verify->add_option("--check", check, "run only checks whose name contains this");
    verify->add_option("--config", config_path, "config file to validate first");

    auto* summarize = app.add_subcommand("summarize", "re-aggregate existing record files");
    summarize->add_option("--records", records_dir, "directory with records_*.tsv")->required();
    summarize->add_option("--dataset", dataset_dir, "dataset directory");
    summarize->add_option("--out", out_dir, "output directory");
    summarize->add_option("--config", config_path, "config file (defaults built in)");

    app.require_subcommand(1);
    CLI11_PARSE(app, argc, argv);

    if (jobs > 0) omp_set_num_threads(jobs);

    try {
        if (gen->parsed()) return cmd_gen_data(config_path, per_bin, out_dir, force);
        if (run->parsed())
            return cmd_run(config_path, experiment, dataset_dir, out_dir, seeds_csv, keep_records);
        if (verify->parsed()) return cmd_verify(check, config_path);
        if (summarize->parsed())
            return cmd_summarize(records_dir, dataset_dir, out_dir, config_path);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return exit_validation;
    } catch (const std::invalid_argument& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return exit_validation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_runtime;
    }
    return exit_ok;
}
