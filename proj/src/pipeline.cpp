#include "firefda/pipeline.hpp"

#include <atomic>
#include <chrono>
#include <fstream>
#include <future>
#include <set>

#include "firefda/io.hpp"
#include "firefda/svg.hpp"

namespace firefda::pipeline {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

StlConfig stl_from_json(const ordered_json& j) {
    StlConfig c;
    if (j.contains("period")) c.period = j.at("period").get<int>();
    if (j.contains("seasonal_span")) c.seasonal_span = j.at("seasonal_span").get<double>();
    if (j.contains("seasonal_degree")) c.seasonal_degree = j.at("seasonal_degree").get<int>();
    if (j.contains("trend_window")) c.trend_window = j.at("trend_window").get<int>();
    if (j.contains("lowpass_window")) c.lowpass_window = j.at("lowpass_window").get<int>();
    if (j.contains("inner_iters")) c.inner_iters = j.at("inner_iters").get<int>();
    if (j.contains("robust_iters")) c.robust_iters = j.at("robust_iters").get<int>();
    return c;
}

ordered_json stl_to_json(const StlConfig& c) {
    return ordered_json{{"period", c.period},
                        {"seasonal_span", c.seasonal_span},
                        {"seasonal_degree", c.seasonal_degree},
                        {"trend_window", c.trend_window},
                        {"lowpass_window", c.lowpass_window},
                        {"inner_iters", c.inner_iters},
                        {"robust_iters", c.robust_iters}};
}

BasisConfig basis_from_json(const ordered_json& j) {
    BasisConfig b;
    if (j.contains("n_basis")) b.n_basis = j.at("n_basis").get<Eigen::Index>();
    if (j.contains("degree")) b.degree = j.at("degree").get<int>();
    if (j.contains("penalty_order")) b.penalty_order = j.at("penalty_order").get<int>();
    return b;
}

ordered_json basis_to_json(const BasisConfig& b) {
    return ordered_json{{"n_basis", b.n_basis}, {"degree", b.degree},
                        {"penalty_order", b.penalty_order}};
}

std::vector<double> to_std(const Eigen::VectorXd& v) {
    return std::vector<double>(v.data(), v.data() + v.size());
}

class StageLog {
public:
    explicit StageLog(const fs::path& path) {
        if (!path.empty()) {
            out_.open(path, std::ios::binary);
            if (!out_) throw validation_error("cannot write " + path.string());
        }
    }
    void line(const std::string& s) {
        if (out_.is_open()) out_ << s << "\n";
    }
    template <typename F>
    auto stage(const std::string& name, F&& f) {
        const auto t0 = std::chrono::steady_clock::now();
        try {
            if constexpr (std::is_void_v<decltype(f())>) {
                f();
                finish(name, t0);
            } else {
                auto result = f();
                finish(name, t0);
                return result;
            }
        } catch (const validation_error& e) {
            throw validation_error("stage " + name + ": " + e.what());
        } catch (const numeric_error& e) {
            throw numeric_error("stage " + name + ": " + e.what());
        }
    }

private:
    void finish(const std::string& name, std::chrono::steady_clock::time_point t0) {
        const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                            std::chrono::steady_clock::now() - t0)
                            .count();
        line("stage " + name + ": " + std::to_string(ms) + " ms");
    }
    std::ofstream out_;
};

}  // namespace

PipelineConfig config_from_json(const ordered_json& j) {
    PipelineConfig cfg;
    if (j.contains("input_mode")) cfg.input_mode = j.at("input_mode").get<std::string>();
    if (j.contains("series_csv")) cfg.series_csv = j.at("series_csv").get<std::string>();
    if (j.contains("events_csv")) cfg.events_csv = j.at("events_csv").get<std::string>();
    if (j.contains("covariates_csv"))
        cfg.covariates_csv = j.at("covariates_csv").get<std::string>();
    if (j.contains("categorical"))
        cfg.categorical = j.at("categorical").get<std::vector<std::string>>();
    if (j.contains("reference_levels"))
        cfg.reference_levels =
            j.at("reference_levels").get<std::map<std::string, std::string>>();
    if (j.contains("points_per_year")) cfg.points_per_year = j.at("points_per_year").get<int>();
    if (j.contains("years_post")) cfg.years_post = j.at("years_post").get<int>();
    if (j.contains("years_pre_min")) cfg.years_pre_min = j.at("years_pre_min").get<int>();
    if (j.contains("max_missing_fraction"))
        cfg.max_missing_fraction = j.at("max_missing_fraction").get<double>();
    if (j.contains("stl")) cfg.stl = stl_from_json(j.at("stl"));
    if (j.contains("t_basis")) cfg.t_basis = basis_from_json(j.at("t_basis"));
    if (j.contains("x_basis")) cfg.x_basis = basis_from_json(j.at("x_basis"));
    if (j.contains("sweep_threshold")) cfg.sweep_threshold = j.at("sweep_threshold").get<double>();
    if (j.contains("fpca_components"))
        cfg.fpca_components = j.at("fpca_components").get<Eigen::Index>();
    if (j.contains("fpca_band_multiplier"))
        cfg.fpca_band_multiplier = j.at("fpca_band_multiplier").get<double>();
    if (j.contains("jobs")) cfg.jobs = j.at("jobs").get<unsigned>();
    if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("synth")) {
        const auto& s = j.at("synth");
        if (s.contains("n_units")) cfg.synth.n_units = s.at("n_units").get<Eigen::Index>();
        if (s.contains("noise_sd")) cfg.synth.noise_sd = s.at("noise_sd").get<double>();
        if (s.contains("seasonal_amp")) cfg.synth.seasonal_amp = s.at("seasonal_amp").get<double>();
        if (s.contains("years_pre")) cfg.synth.years_pre = s.at("years_pre").get<int>();
    }
    if (j.contains("groups")) {
        for (const auto& g : j.at("groups"))
            cfg.groups.push_back(CovariateGroup{g.at("name").get<std::string>(),
                                                g.at("members").get<std::vector<std::string>>()});
    }
    if (j.contains("out_dir")) cfg.out_dir = j.at("out_dir").get<std::string>();

    cfg.synth.points_per_year = cfg.points_per_year;
    cfg.synth.years_post = cfg.years_post;
    if (cfg.stl.period != cfg.points_per_year && cfg.stl.period == 26)
        cfg.stl.period = cfg.points_per_year;
    return cfg;
}

ordered_json config_to_json(const PipelineConfig& cfg) {
    ordered_json j;
    j["input_mode"] = cfg.input_mode;
    j["series_csv"] = cfg.series_csv;
    j["events_csv"] = cfg.events_csv;
    j["covariates_csv"] = cfg.covariates_csv;
    j["categorical"] = cfg.categorical;
    j["reference_levels"] = cfg.reference_levels;
    j["points_per_year"] = cfg.points_per_year;
    j["years_post"] = cfg.years_post;
    j["years_pre_min"] = cfg.years_pre_min;
    j["max_missing_fraction"] = cfg.max_missing_fraction;
    j["stl"] = stl_to_json(cfg.stl);
    j["t_basis"] = basis_to_json(cfg.t_basis);
    j["x_basis"] = basis_to_json(cfg.x_basis);
    j["sweep_threshold"] = cfg.sweep_threshold;
    j["fpca_components"] = cfg.fpca_components;
    j["fpca_band_multiplier"] = cfg.fpca_band_multiplier;
    j["jobs"] = cfg.jobs;
    j["seed"] = cfg.seed;
    j["synth"] = ordered_json{{"n_units", cfg.synth.n_units},
                              {"noise_sd", cfg.synth.noise_sd},
                              {"seasonal_amp", cfg.synth.seasonal_amp},
                              {"years_pre", cfg.synth.years_pre}};
    ordered_json groups = ordered_json::array();
    for (const auto& g : cfg.groups)
        groups.push_back(ordered_json{{"name", g.name}, {"members", g.members}});
    j["groups"] = std::move(groups);
    j["out_dir"] = cfg.out_dir;
    return j;
}

PipelineConfig load_config(const fs::path& path) {
    return config_from_json(io::read_json(path));
}

double ndvi(double red, double nir) {
    if (red < 0.0 || nir < 0.0) throw validation_error("ndvi: reflectances must be nonnegative");
    if (red + nir <= 0.0) throw validation_error("ndvi: red + nir must be positive");
    return (nir - red) / (nir + red);
}

IngestResult ingest(const PipelineConfig& cfg) {
    const auto long_series = io::read_long_series_csv(cfg.series_csv);
    const auto events = io::read_events_csv(cfg.events_csv);
    const auto covariates =
        io::read_covariates_csv(cfg.covariates_csv, cfg.categorical, cfg.reference_levels);

    std::set<std::string> known_units(covariates.unit_ids().begin(), covariates.unit_ids().end());

    IngestResult out;
    std::vector<Eigen::Index> keep_rows;
    const Eigen::Index pre_needed = Eigen::Index(cfg.years_pre_min) * cfg.points_per_year;
    const Eigen::Index post_needed = Eigen::Index(cfg.years_post) * cfg.points_per_year;

    for (const auto& ls : long_series) {
        if (!known_units.count(ls.unit_id))
            throw validation_error("ingest: unit '" + ls.unit_id +
                                   "' appears in the series but not in the covariates");
        const auto ev = events.find(ls.unit_id);
        if (ev == events.end())
            throw validation_error("ingest: no event for unit '" + ls.unit_id + "'");

        long cal_min = ls.observations.front().first, cal_max = cal_min;
        for (const auto& [cal, value] : ls.observations) {
            cal_min = std::min(cal_min, cal);
            cal_max = std::max(cal_max, cal);
        }
        if (ev->second < cal_min || ev->second > cal_max)
            throw validation_error("ingest: event index " + std::to_string(ev->second) +
                                   " outside the series range for unit '" + ls.unit_id + "'");

        const Eigen::Index len = Eigen::Index(cal_max - cal_min + 1);
        Eigen::VectorXd values = Eigen::VectorXd::Constant(len, std::nan(""));
        std::vector<char> missing(std::size_t(len), 1);
        for (const auto& [cal, value] : ls.observations) {
            if (value) {
                values(Eigen::Index(cal - cal_min)) = *value;
                missing[std::size_t(cal - cal_min)] = 0;
            }
        }
        const Eigen::Index event_pos = Eigen::Index(ev->second - cal_min);
        const Eigen::Index n_missing =
            Eigen::Index(std::count(missing.begin(), missing.end(), char(1)));

        if (event_pos < pre_needed) {
            out.dropped.emplace_back(ls.unit_id, "insufficient pre-event window (" +
                                                     std::to_string(event_pos) + " of " +
                                                     std::to_string(pre_needed) + " points)");
            continue;
        }
        if (len - event_pos < post_needed) {
            out.dropped.emplace_back(ls.unit_id, "insufficient post-event window (" +
                                                     std::to_string(len - event_pos) + " of " +
                                                     std::to_string(post_needed) + " points)");
            continue;
        }
        if (double(n_missing) > cfg.max_missing_fraction * double(len)) {
            out.dropped.emplace_back(
                ls.unit_id, "excessive missing data (" + std::to_string(n_missing) + " of " +
                                std::to_string(len) + " points)");
            continue;
        }

        Eigen::VectorXi cal = Eigen::VectorXi::LinSpaced(int(len), int(cal_min), int(cal_max));
        out.series.emplace_back(ls.unit_id, cal, values, event_pos, missing);
        const auto pos = std::find(covariates.unit_ids().begin(), covariates.unit_ids().end(),
                                   ls.unit_id);
        keep_rows.push_back(Eigen::Index(pos - covariates.unit_ids().begin()));
    }
    if (out.series.empty())
        throw validation_error("ingest: no units satisfy the inclusion criteria");
    out.covariates = covariates.select_rows(keep_rows);
    return out;
}

IngestResult load_input(const PipelineConfig& cfg) {
    if (cfg.input_mode == "csv") return ingest(cfg);
    if (cfg.input_mode != "synthetic")
        throw validation_error("config: input_mode must be 'synthetic' or 'csv'");
    auto [series, covariates, truth] = synth::generate_raw(cfg.synth, cfg.seed);
    (void)truth;
    return IngestResult{std::move(series), std::move(covariates), {}};
}

FunctionalDatasetD decompose_and_align(const std::vector<RawSeriesD>& series,
                                       const PipelineConfig& cfg, const fs::path& out_dir) {
    const Eigen::Index n_post = Eigen::Index(cfg.years_post) * cfg.points_per_year;
    std::vector<std::pair<std::string, Eigen::VectorXd>> trends(series.size());

    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto work = [&](std::size_t i) {
        const auto& s = series[i];
        try {
            // The per-unit CSV documents the decomposition over the whole
            // series; the aligned trend comes from the post-event window
            // (see extract_trend).
            if (!out_dir.empty()) {
                const auto dec = stl_decompose(s, cfg.stl);
                io::write_decomposition_csv(out_dir / (s.unit_id + ".csv"), s, dec);
            }
            trends[i] = {s.unit_id, extract_trend(s, cfg.stl, n_post)};
        } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
        }
    };

    if (!out_dir.empty()) fs::create_directories(out_dir);
    if (cfg.jobs <= 1) {
        for (std::size_t i = 0; i < series.size(); ++i) work(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::future<void>> workers;
        for (unsigned w = 0; w < std::min<unsigned>(cfg.jobs, unsigned(series.size())); ++w)
            workers.push_back(std::async(std::launch::async, [&] {
                for (;;) {
                    const std::size_t i = next.fetch_add(1);
                    if (i >= series.size()) return;
                    work(i);
                }
            }));
        for (auto& f : workers) f.get();
    }
    if (failure) std::rethrow_exception(failure);

    const auto grid = TimeGridD::event_grid(cfg.years_post, cfg.points_per_year);
    return align_trends(trends, grid);
}

std::vector<CovariateGroup> resolve_groups(const PipelineConfig& cfg,
                                           const CovariateTableD& covariates) {
    if (!cfg.groups.empty()) return cfg.groups;
    std::vector<CovariateGroup> groups;
    for (const auto& col : covariates.numeric_columns())
        groups.push_back(CovariateGroup{col.name, {col.name}});
    for (const auto& col : covariates.categorical_columns())
        groups.push_back(CovariateGroup{col.name, {col.name}});
    return groups;
}

namespace {

svg::Panel dataset_panel(const FunctionalDatasetD& ds, Eigen::Index highlight) {
    svg::Panel panel;
    panel.title = "Aligned trend curves";
    panel.x_label = "years since event";
    panel.y_label = "effect (index points)";
    const auto t = to_std(ds.grid.points());
    for (Eigen::Index i = 0; i < ds.n_units(); ++i) {
        if (i == highlight) continue;
        panel.series.push_back(
            {t, to_std(ds.curves.row(i).transpose()), "#9ecae1", "", 0.8, 0.6});
    }
    if (highlight >= 0)
        panel.series.push_back({t, to_std(ds.curves.row(highlight).transpose()), "#2ca02c",
                                "deepest: " + ds.unit_ids[std::size_t(highlight)], 2.0, 1.0});
    panel.series.push_back({t, to_std(mean_function(ds).values), "#d62728", "mean", 2.2, 1.0});
    return panel;
}

}  // namespace

void write_align_artifacts(const FunctionalDatasetD& dataset, const fs::path& out_dir,
                           std::vector<std::string>& artifacts) {
    io::write_dataset_csv(dataset, out_dir / "dataset.csv", out_dir / "dataset_grid.json");
    artifacts.push_back("dataset.csv");
    artifacts.push_back("dataset_grid.json");

    const auto mean = mean_function(dataset);
    const Eigen::Index deepest =
        dataset.n_units() >= 2 ? deepest_index(dataset) : Eigen::Index(0);
    ordered_json report;
    report["t_start"] = dataset.grid.start;
    report["value_start"] = mean.values(0);
    report["t_end"] = dataset.grid.end();
    report["value_end"] = mean.values(dataset.grid.n_points - 1);
    report["global_mean"] = mean.values.mean();
    report["total_recovery"] = mean.values(dataset.grid.n_points - 1) - mean.values(0);
    report["deepest_unit"] = dataset.unit_ids[std::size_t(deepest)];
    io::write_json(out_dir / "mean_report.json", report);
    artifacts.push_back("mean_report.json");
    svg::write(out_dir / "dataset.svg", {dataset_panel(dataset, deepest)}, 1, 760, 480);
    artifacts.push_back("dataset.svg");
}

void write_fpca_artifacts(const FpcaResultD& r, double band_multiplier, const fs::path& out_dir,
                          std::vector<std::string>& artifacts) {
    ordered_json report;
    report["n_components"] = r.n_components();
    report["degenerate"] = r.degenerate;
    report["eigenvalues"] = to_std(r.eigenvalues);
    report["variance_share"] = to_std(r.variance_share);
    report["grid"] = ordered_json{{"start", r.grid.start},
                                  {"step", r.grid.step},
                                  {"points_per_year", r.grid.points_per_year}};
    report["mean"] = to_std(r.mean.values);
    ordered_json pfs = ordered_json::array();
    for (Eigen::Index j = 0; j < r.n_components(); ++j)
        pfs.push_back(to_std(r.principal_functions.col(j)));
    report["principal_functions"] = std::move(pfs);
    io::write_json(out_dir / "fpca_report.json", report);
    artifacts.push_back("fpca_report.json");

    std::vector<svg::Panel> panels;
    const auto t = to_std(r.grid.points());
    for (Eigen::Index j = 0; j < r.n_components(); ++j) {
        svg::Panel panel;
        char buf[96];
        std::snprintf(buf, sizeof(buf), "PC %d (%.1f%% of variability)", int(j + 1),
                      100.0 * r.variance_share(j));
        panel.title = buf;
        panel.x_label = "years since event";
        panel.y_label = "effect (index points)";
        const double c = band_multiplier * std::sqrt(std::max(r.eigenvalues(j), 0.0));
        panel.series.push_back({t, to_std(r.mean.values), "#000000", "mean", 2.0, 1.0});
        panel.series.push_back(
            {t, to_std(Eigen::VectorXd(r.mean.values + c * r.principal_functions.col(j))),
             "#d62728", "mean + c*pc", 1.4, 1.0});
        panel.series.push_back(
            {t, to_std(Eigen::VectorXd(r.mean.values - c * r.principal_functions.col(j))),
             "#1f77b4", "mean - c*pc", 1.4, 1.0});
        panels.push_back(std::move(panel));
    }
    svg::write(out_dir / "fpca.svg", panels, 2);
    artifacts.push_back("fpca.svg");
}

void write_fit_artifacts(const FittedModelD& model, const TimeGridD& grid,
                         const fs::path& out_dir, std::vector<std::string>& artifacts) {
    const auto summary = term_summary(model);
    ordered_json report;
    report["explained_variability"] = explained_variability(model);
    report["edf_total"] = model.edf_total;
    report["sigma2"] = model.sigma2;
    report["n_units"] = Eigen::Index(model.unit_ids.size());
    report["approximate_inference"] = true;

    ordered_json parametric = ordered_json::array();
    for (const auto& row : summary.parametric)
        parametric.push_back(ordered_json{{"term", row.term},
                                          {"estimate", row.estimate},
                                          {"std_error", row.std_error},
                                          {"t_value", row.t_value}});
    report["parametric_terms"] = std::move(parametric);

    ordered_json smooths = ordered_json::array();
    for (const auto& row : summary.smooths)
        smooths.push_back(ordered_json{{"term", row.term},
                                       {"edf", row.edf},
                                       {"ref_df", row.ref_df},
                                       {"f_approx", row.f_approx}});
    report["nonparametric_terms"] = std::move(smooths);

    ordered_json lambdas;
    for (const auto& [label, lambda] : model.lambdas()) lambdas[label] = lambda;
    report["lambdas"] = std::move(lambdas);

    const auto t = to_std(grid.points());
    report["grid"] = ordered_json{{"start", grid.start},
                                  {"step", grid.step},
                                  {"points_per_year", grid.points_per_year}};
    report["intercept_curve"] = to_std(intercept_curve(model).values);

    std::vector<svg::Panel> coef_panels;
    {
        svg::Panel p;
        p.title = "Intercept(t)";
        p.x_label = "years since event";
        p.y_label = "effect (index points)";
        p.series.push_back({t, to_std(intercept_curve(model).values), "", "", 1.8, 1.0});
        coef_panels.push_back(std::move(p));
    }

    ordered_json varying;
    ordered_json smooth_fns;
    ordered_json surfaces;
    std::vector<svg::Panel> smooth_panels;
    for (const auto& block : model.blocks) {
        if (block.type == BlockType::VaryingT) {
            const auto bt = bspline_design(grid.points(), block.t_spline);
            const Eigen::VectorXd beta =
                block.z_t.size() > 0 ? Eigen::VectorXd(bt * (block.z_t * block.coef))
                                     : Eigen::VectorXd(bt * block.coef);
            varying[block.covariate] = to_std(beta);
            svg::Panel p;
            p.title = "beta(t): " + block.covariate;
            p.x_label = "years since event";
            p.y_label = "coefficient";
            p.series.push_back({t, to_std(beta), "", "", 1.8, 1.0});
            coef_panels.push_back(std::move(p));
        } else if (block.type == BlockType::SmoothX) {
            const double lo = block.x_spline.domain_min(), hi = block.x_spline.domain_max();
            Eigen::VectorXd xg = Eigen::VectorXd::LinSpaced(100, lo, hi);
            Eigen::VectorXd sv =
                bspline_design(xg, block.x_spline) * (block.z_x * block.coef);
            smooth_fns[block.covariate] =
                ordered_json{{"x", to_std(xg)}, {"s", to_std(sv)}};
            svg::Panel p;
            p.title = "s(" + block.covariate + ")";
            p.x_label = block.covariate + " (standardized)";
            p.y_label = "effect (index points)";
            p.series.push_back({to_std(xg), to_std(sv), "", "", 1.8, 1.0});
            smooth_panels.push_back(std::move(p));
        } else if (block.type == BlockType::TensorTX) {
            const double lo = block.x_spline.domain_min(), hi = block.x_spline.domain_max();
            Eigen::VectorXd xg = Eigen::VectorXd::LinSpaced(41, lo, hi);
            Eigen::MatrixXd surface(grid.n_points, xg.size());
            for (Eigen::Index c = 0; c < xg.size(); ++c)
                surface.col(c) = detail::tensor_curve(block, grid, xg(c));
            ordered_json rows = ordered_json::array();
            for (Eigen::Index a = 0; a < surface.rows(); ++a)
                rows.push_back(to_std(surface.row(a).transpose()));
            surfaces[block.covariate] =
                ordered_json{{"t", t}, {"x", to_std(xg)}, {"values", std::move(rows)}};
            svg::Panel p;
            p.title = "te(t," + block.covariate + ") slices";
            p.x_label = "years since event";
            p.y_label = "effect (index points)";
            const Eigen::Index mid = xg.size() / 2;
            p.series.push_back({t, to_std(surface.col(0)), "#1f77b4", "low x", 1.4, 1.0});
            p.series.push_back({t, to_std(surface.col(mid)), "#555555", "mid x", 1.4, 1.0});
            p.series.push_back(
                {t, to_std(surface.col(xg.size() - 1)), "#d62728", "high x", 1.4, 1.0});
            coef_panels.push_back(std::move(p));
        }
    }
    report["varying_coefficients"] = std::move(varying);
    report["smooth_functions"] = std::move(smooth_fns);
    report["bivariate_surfaces"] = std::move(surfaces);

    io::write_json(out_dir / "fit_report.json", report);
    artifacts.push_back("fit_report.json");
    svg::write(out_dir / "fit_coefficients.svg", coef_panels, 2);
    artifacts.push_back("fit_coefficients.svg");
    if (!smooth_panels.empty()) {
        svg::write(out_dir / "fit_smooths.svg", smooth_panels, 2);
        artifacts.push_back("fit_smooths.svg");
    }
}

std::vector<std::string> run_pipeline(const PipelineConfig& cfg) {
    const fs::path out = cfg.out_dir;
    fs::create_directories(out);
    StageLog log(out / "run.log");
    std::vector<std::string> artifacts;

    auto input = log.stage("input", [&] { return load_input(cfg); });
    for (const auto& [unit, reason] : input.dropped) log.line("dropped " + unit + ": " + reason);
    log.line("retained " + std::to_string(input.series.size()) + " units");

    auto dataset = log.stage("decompose", [&] {
        auto ds = decompose_and_align(input.series, cfg, out / "decompositions");
        for (const auto& s : input.series)
            artifacts.push_back("decompositions/" + s.unit_id + ".csv");
        return ds;
    });

    log.stage("align", [&] { write_align_artifacts(dataset, out, artifacts); });

    log.stage("fpca", [&] {
        const Eigen::Index q = std::min<Eigen::Index>(
            cfg.fpca_components, std::min<Eigen::Index>(dataset.n_units() - 1,
                                                        dataset.grid.n_points));
        auto result = fpca(dataset, q);
        write_fpca_artifacts(result, cfg.fpca_band_multiplier, out, artifacts);
    });

    const auto standardized = log.stage("standardize", [&] {
        return input.covariates.standardized();
    });
    const auto groups = resolve_groups(cfg, standardized);

    auto table = log.stage("sweep", [&] {
        auto sw = sweep(dataset, standardized, groups, cfg.t_basis, cfg.x_basis,
                        cfg.sweep_threshold, cfg.jobs);
        io::write_sweep_csv(out / "sweep.csv", sw);
        artifacts.push_back("sweep.csv");
        return sw;
    });

    log.stage("fit", [&] {
        const auto spec = build_full_spec(table, standardized, cfg.t_basis, cfg.x_basis);
        io::write_json(out / "model_spec.json", io::model_spec_to_json(spec));
        artifacts.push_back("model_spec.json");
        const auto model = fit_additive(dataset, standardized, spec);
        write_fit_artifacts(model, dataset.grid, out, artifacts);
    });

    log.stage("manifest", [&] {
        artifacts.push_back("manifest.json");
        std::sort(artifacts.begin(), artifacts.end());
        ordered_json manifest;
        // out_dir and jobs determine where and how fast, never what; keep
        // them out of the content fingerprint.
        auto canonical = config_to_json(cfg);
        canonical.erase("out_dir");
        canonical.erase("jobs");
        manifest["config_hash"] = io::fnv1a_hex(canonical.dump());
        manifest["seed"] = cfg.seed;
        manifest["versions"] = ordered_json{{"firefda", version()}};
        manifest["artifacts"] = artifacts;
        io::write_json(out / "manifest.json", manifest);
    });
    return artifacts;
}

}  // namespace firefda::pipeline
