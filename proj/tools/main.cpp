// Command-line pipeline for event-aligned vegetation-index trend analysis:
// seasonal-trend decomposition, functional alignment, FPCA, the per-covariate
// term-type sweep, and the full additive function-on-scalar fit.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>

#include "firefda/io.hpp"
#include "firefda/pipeline.hpp"
#include "firefda/svg.hpp"

namespace fs = std::filesystem;
using namespace firefda;

namespace {

struct CommonArgs {
    std::string config_path;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> jobs;
    std::string series_csv, events_csv, covariates_csv;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool needs_out = true) {
    cmd->add_option("--config", args.config_path, "pipeline config JSON");
    auto* out = cmd->add_option("--out", args.out_dir, "output directory");
    if (needs_out) out->required(false);
    cmd->add_option("--seed", args.seed, "override the config seed");
    cmd->add_option("--jobs", args.jobs, "worker threads for per-unit and per-model stages");
    cmd->add_option("--series", args.series_csv, "long-format series CSV");
    cmd->add_option("--events", args.events_csv, "events CSV (unit_id,event_index)");
    cmd->add_option("--covariates", args.covariates_csv, "covariates CSV");
}

pipeline::PipelineConfig resolve_config(const CommonArgs& args) {
    pipeline::PipelineConfig cfg;
    if (!args.config_path.empty()) cfg = pipeline::load_config(args.config_path);
    if (args.seed) cfg.seed = *args.seed;
    if (args.jobs) cfg.jobs = *args.jobs;
    if (!args.out_dir.empty()) cfg.out_dir = args.out_dir;
    if (!args.series_csv.empty()) {
        cfg.series_csv = args.series_csv;
        cfg.input_mode = "csv";
    }
    if (!args.events_csv.empty()) cfg.events_csv = args.events_csv;
    if (!args.covariates_csv.empty()) cfg.covariates_csv = args.covariates_csv;
    return cfg;
}

int dispatch(const std::string& command, const CommonArgs& args, const std::string& dataset_csv,
             const std::string& trends_csv, const std::string& spec_path) {
    auto cfg = resolve_config(args);
    const fs::path out = cfg.out_dir;

    auto load_dataset = [&](const std::string& fallback) {
        const fs::path csv = dataset_csv.empty() ? fs::path(fallback) : fs::path(dataset_csv);
        fs::path sidecar = csv;
        sidecar.replace_extension();
        sidecar += "_grid.json";
        return io::read_dataset_csv(csv, sidecar);
    };

    if (command == "synth") {
        auto [series, covariates, truth] = synth::generate_raw(cfg.synth, cfg.seed);
        fs::create_directories(out);
        io::write_long_series_csv(out / "series.csv", series);
        io::write_events_csv(out / "events.csv", series);
        io::write_covariates_csv(out / "covariates.csv", covariates);
        io::write_json(out / "truth.json", synth::truth_to_json(truth));
        std::cout << "wrote synthetic input for " << series.size() << " units to " << out.string()
                  << "\n";
        return 0;
    }

    if (command == "decompose") {
        auto input = pipeline::load_input(cfg);
        fs::create_directories(out);
        auto dataset = pipeline::decompose_and_align(input.series, cfg, out / "decompositions");
        io::write_dataset_csv(dataset, out / "trends.csv", out / "trends_grid.json");
        for (const auto& [unit, reason] : input.dropped)
            std::cerr << "dropped " << unit << ": " << reason << "\n";
        std::cout << "decomposed " << dataset.n_units() << " units; trends in "
                  << (out / "trends.csv").string() << "\n";
        return 0;
    }

    if (command == "align") {
        auto dataset = load_dataset(trends_csv.empty() ? (out / "trends.csv").string()
                                                       : trends_csv);
        fs::create_directories(out);
        std::vector<std::string> artifacts;
        pipeline::write_align_artifacts(dataset, out, artifacts);
        std::cout << "aligned " << dataset.n_units() << " curves on " << dataset.grid.n_points
                  << " grid points; mean report in " << (out / "mean_report.json").string()
                  << "\n";
        return 0;
    }

    if (command == "fpca") {
        auto dataset = load_dataset((out / "dataset.csv").string());
        const Eigen::Index q = std::min<Eigen::Index>(
            cfg.fpca_components,
            std::min<Eigen::Index>(dataset.n_units() - 1, dataset.grid.n_points));
        auto result = fpca(dataset, q);
        fs::create_directories(out);
        std::vector<std::string> artifacts;
        pipeline::write_fpca_artifacts(result, cfg.fpca_band_multiplier, out, artifacts);
        std::cout << "fpca: leading share "
                  << io::format_double(result.variance_share(0) * 100.0) << "%\n";
        return 0;
    }

    if (command == "sweep" || command == "fit") {
        auto dataset = load_dataset((out / "dataset.csv").string());
        if (cfg.covariates_csv.empty())
            throw validation_error(command + ": --covariates (or config covariates_csv) required");
        auto covariates = io::read_covariates_csv(cfg.covariates_csv, cfg.categorical,
                                                  cfg.reference_levels);
        // Align covariate rows with the dataset unit order.
        std::vector<Eigen::Index> rows;
        for (const auto& id : dataset.unit_ids) {
            const auto pos =
                std::find(covariates.unit_ids().begin(), covariates.unit_ids().end(), id);
            if (pos == covariates.unit_ids().end())
                throw validation_error("unit '" + id + "' missing from the covariates");
            rows.push_back(pos - covariates.unit_ids().begin());
        }
        const auto standardized = covariates.select_rows(rows).standardized();
        const auto groups = pipeline::resolve_groups(cfg, standardized);
        fs::create_directories(out);

        if (command == "sweep") {
            auto table = sweep(dataset, standardized, groups, cfg.t_basis, cfg.x_basis,
                               cfg.sweep_threshold, cfg.jobs);
            io::write_sweep_csv(out / "sweep.csv", table);
            std::cout << "swept " << groups.size() << " groups x 5 kinds; table in "
                      << (out / "sweep.csv").string() << "\n";
            return 0;
        }

        ModelSpecD spec;
        if (!spec_path.empty()) {
            spec = io::model_spec_from_json(io::read_json(spec_path));
        } else {
            const auto table = io::read_sweep_csv(out / "sweep.csv", groups);
            spec = build_full_spec(table, standardized, cfg.t_basis, cfg.x_basis);
        }
        io::write_json(out / "model_spec.json", io::model_spec_to_json(spec));
        const auto model = fit_additive(dataset, standardized, spec);
        std::vector<std::string> artifacts;
        pipeline::write_fit_artifacts(model, dataset.grid, out, artifacts);
        std::cout << "fit: explained variability "
                  << io::format_double(explained_variability(model)) << "%\n";
        return 0;
    }

    if (command == "run") {
        const auto artifacts = pipeline::run_pipeline(cfg);
        std::cout << "wrote " << artifacts.size() << " artifacts to " << out.string() << "\n";
        return 0;
    }

    throw validation_error("unknown command '" + command + "'");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Vegetation-recovery functional data analysis pipeline"};
    app.require_subcommand(1);

    CommonArgs args;
    std::string dataset_csv, trends_csv, spec_path;

    auto* synth_cmd = app.add_subcommand("synth", "generate a seeded synthetic input set");
    auto* decompose_cmd =
        app.add_subcommand("decompose", "seasonal-trend decomposition per unit + trend extraction");
    auto* align_cmd = app.add_subcommand("align", "assemble extracted trends into a dataset");
    auto* fpca_cmd = app.add_subcommand("fpca", "functional principal component analysis");
    auto* sweep_cmd = app.add_subcommand("sweep", "per-covariate-group term-type sweep");
    auto* fit_cmd = app.add_subcommand("fit", "full additive function-on-scalar fit");
    auto* run_cmd = app.add_subcommand("run", "all stages, one artifact directory");

    for (auto* cmd : {synth_cmd, decompose_cmd, align_cmd, fpca_cmd, sweep_cmd, fit_cmd, run_cmd})
        add_common(cmd, args);
    for (auto* cmd : {align_cmd, fpca_cmd, sweep_cmd, fit_cmd})
        cmd->add_option("--dataset", dataset_csv, "functional dataset CSV");
    align_cmd->add_option("--trends", trends_csv, "extracted trends CSV");
    fit_cmd->add_option("--spec", spec_path, "model spec JSON (overrides the sweep selection)");

    CLI11_PARSE(app, argc, argv);

    try {
        return dispatch(app.get_subcommands().front()->get_name(), args, dataset_csv, trends_csv,
                        spec_path);
    } catch (const validation_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const numeric_error& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
