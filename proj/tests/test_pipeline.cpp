#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "firefda/io.hpp"
#include "firefda/pipeline.hpp"

using namespace firefda;
namespace fs = std::filesystem;
using Eigen::Index;
using Eigen::VectorXd;

namespace {

fs::path temp_dir(const std::string& name) {
    auto dir = fs::temp_directory_path() / ("firefda_pipe_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

void write_file(const fs::path& p, const std::string& content) {
    std::ofstream out(p, std::ios::binary);
    out << content;
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("ndvi") {
    CHECK(pipeline::ndvi(100.0, 100.0) == 0.0);
    CHECK(pipeline::ndvi(50.0, 150.0) == 0.5);
    CHECK(pipeline::ndvi(150.0, 50.0) == -0.5);
    CHECK_THROWS_AS(pipeline::ndvi(0.0, 0.0), validation_error);
    CHECK_THROWS_AS(pipeline::ndvi(-1.0, 5.0), validation_error);
    CHECK(pipeline::ndvi(0.0, 10.0) == 1.0);
}

TEST_CASE("synthetic generation is deterministic per seed") {
    synth::SynthConfig cfg;
    cfg.n_units = 8;
    auto dir = temp_dir("synth");

    auto [s1, c1, t1] = synth::generate_raw(cfg, 7);
    auto [s2, c2, t2] = synth::generate_raw(cfg, 7);
    io::write_long_series_csv(dir / "a.csv", s1);
    io::write_long_series_csv(dir / "b.csv", s2);
    CHECK(read_file(dir / "a.csv") == read_file(dir / "b.csv"));

    auto [s3, c3, t3] = synth::generate_raw(cfg, 8);
    io::write_long_series_csv(dir / "c.csv", s3);
    CHECK(read_file(dir / "a.csv") != read_file(dir / "c.csv"));
}

TEST_CASE("noise-free synthetic raw series: extracted trend matches the truth") {
    synth::SynthConfig cfg;
    cfg.n_units = 4;
    cfg.noise_sd = 0.0;
    cfg.seasonal_amp = 0.0;
    auto [series, covariates, truth] = synth::generate_raw(cfg, 11);
    for (std::size_t i = 0; i < series.size(); ++i) {
        const VectorXd trend = extract_trend(series[i], StlConfig{}, 182);
        const VectorXd expect = truth.signal.row(Eigen::Index(i)).transpose();
        const double range = expect.maxCoeff() - expect.minCoeff();
        const double rmse = std::sqrt((trend - expect).squaredNorm() / 182.0);
        CHECK(rmse <= 1e-3 * std::max(range, 0.01));
    }
}

TEST_CASE("synthetic dataset mode matches its own signal plus noise") {
    synth::SynthConfig cfg;
    cfg.n_units = 12;
    cfg.noise_sd = 0.01;
    auto [ds, table, truth] = synth::generate_dataset(cfg, 3);
    CHECK(ds.n_units() == 12);
    CHECK(ds.grid.n_points == 182);
    const double diff_sd =
        std::sqrt((ds.curves - truth.signal).squaredNorm() / double(ds.curves.size()));
    CHECK(diff_sd == doctest::Approx(0.01).epsilon(0.1));
}

TEST_CASE("ingest applies the inclusion criteria with reasons") {
    auto dir = temp_dir("ingest");
    // ppy=2, years_pre_min=2 (4 points), years_post=3 (6 points).
    std::string series = "unit_id,calendar_index,value\n";
    auto add_unit = [&](const std::string& id, int from, int to, bool gappy = false) {
        for (int c = from; c <= to; ++c) {
            if (gappy && c % 3 == 2) continue;  // keeps the endpoints, drops 27%
            series += id + "," + std::to_string(c) + ",0." + std::to_string((c * 7) % 97) + "\n";
        }
    };
    add_unit("keep", 0, 11);
    add_unit("short_pre", 0, 11);       // event at 3 < 4
    add_unit("short_post", 0, 8);       // post = 5 < 6
    add_unit("gappy", 0, 12, true);     // interior gaps above the 20% cap
    write_file(dir / "series.csv", series);
    write_file(dir / "events.csv",
               "unit_id,event_index\nkeep,4\nshort_pre,3\nshort_post,4\ngappy,4\n");
    write_file(dir / "cov.csv",
               "unit_id,elev\nkeep,1.0\nshort_pre,2.0\nshort_post,3.0\ngappy,4.0\nextra,9.0\n");

    pipeline::PipelineConfig cfg;
    cfg.input_mode = "csv";
    cfg.series_csv = (dir / "series.csv").string();
    cfg.events_csv = (dir / "events.csv").string();
    cfg.covariates_csv = (dir / "cov.csv").string();
    cfg.categorical = {};
    cfg.points_per_year = 2;
    cfg.years_pre_min = 2;
    cfg.years_post = 3;

    auto result = pipeline::ingest(cfg);
    REQUIRE(result.series.size() == 1);
    CHECK(result.series[0].unit_id == "keep");
    CHECK(result.covariates.n_units() == 1);
    CHECK(result.covariates.numeric("elev").values(0) == 1.0);
    REQUIRE(result.dropped.size() == 3);
    CHECK(result.dropped[0].first == "short_pre");
    CHECK(result.dropped[0].second.find("insufficient pre-event window") != std::string::npos);
    CHECK(result.dropped[1].first == "short_post");
    CHECK(result.dropped[1].second.find("insufficient post-event window") != std::string::npos);
    CHECK(result.dropped[2].first == "gappy");
    CHECK(result.dropped[2].second.find("excessive missing data") != std::string::npos);
}

TEST_CASE("ingest errors: unit missing from covariates, missing event") {
    auto dir = temp_dir("ingest_err");
    write_file(dir / "series.csv", "unit_id,calendar_index,value\nu1,0,0.1\nu1,1,0.2\n");
    write_file(dir / "events.csv", "unit_id,event_index\nu1,0\n");
    write_file(dir / "cov.csv", "unit_id,elev\nother,1.0\n");

    pipeline::PipelineConfig cfg;
    cfg.input_mode = "csv";
    cfg.series_csv = (dir / "series.csv").string();
    cfg.events_csv = (dir / "events.csv").string();
    cfg.covariates_csv = (dir / "cov.csv").string();
    cfg.categorical = {};
    try {
        pipeline::ingest(cfg);
        FAIL("expected validation_error");
    } catch (const validation_error& e) {
        CHECK(std::string(e.what()).find("not in the covariates") != std::string::npos);
    }

    write_file(dir / "cov.csv", "unit_id,elev\nu1,1.0\n");
    write_file(dir / "events.csv", "unit_id,event_index\nother,0\n");
    CHECK_THROWS_AS(pipeline::ingest(cfg), validation_error);
}

TEST_CASE("paper-scale synthetic input: 243 units ingest, decompose and align") {
    auto dir = temp_dir("scale");
    synth::SynthConfig scfg;
    scfg.n_units = 243;
    auto [series, covariates, truth] = synth::generate_raw(scfg, 2);
    io::write_long_series_csv(dir / "series.csv", series);
    io::write_events_csv(dir / "events.csv", series);
    io::write_covariates_csv(dir / "cov.csv", covariates);

    pipeline::PipelineConfig cfg;
    cfg.input_mode = "csv";
    cfg.series_csv = (dir / "series.csv").string();
    cfg.events_csv = (dir / "events.csv").string();
    cfg.covariates_csv = (dir / "cov.csv").string();
    cfg.jobs = 4;

    auto result = pipeline::ingest(cfg);
    CHECK(result.series.size() == 243);  // every qualifying unit retained
    CHECK(result.dropped.empty());

    auto dataset = pipeline::decompose_and_align(result.series, cfg);
    CHECK(dataset.n_units() == 243);
    CHECK(dataset.grid.n_points == 182);
    CHECK(dataset.grid.points_per_year == 26);
}

TEST_CASE("config round trip keeps every field") {
    pipeline::PipelineConfig cfg;
    cfg.input_mode = "csv";
    cfg.series_csv = "s.csv";
    cfg.sweep_threshold = 2.5;
    cfg.groups = {{"g", {"a", "b"}}};
    cfg.seed = 99;
    const auto j = pipeline::config_to_json(cfg);
    const auto back = pipeline::config_from_json(j);
    CHECK(back.input_mode == "csv");
    CHECK(back.series_csv == "s.csv");
    CHECK(back.sweep_threshold == 2.5);
    CHECK(back.seed == 99);
    REQUIRE(back.groups.size() == 1);
    CHECK(back.groups[0].members == std::vector<std::string>{"a", "b"});
}

TEST_CASE("run_pipeline writes the full artifact set") {
    auto dir = temp_dir("run");
    pipeline::PipelineConfig cfg;
    cfg.input_mode = "synthetic";
    cfg.synth.n_units = 16;
    cfg.seed = 5;
    cfg.jobs = 2;
    cfg.t_basis.n_basis = 8;
    cfg.x_basis.n_basis = 8;
    cfg.fpca_components = 2;
    cfg.out_dir = (dir / "out").string();

    const auto artifacts = pipeline::run_pipeline(cfg);
    for (const char* expect :
         {"dataset.csv", "dataset_grid.json", "dataset.svg", "mean_report.json",
          "fpca_report.json", "fpca.svg", "sweep.csv", "model_spec.json", "fit_report.json",
          "fit_coefficients.svg", "fit_smooths.svg", "manifest.json"}) {
        INFO(expect);
        CHECK(std::find(artifacts.begin(), artifacts.end(), expect) != artifacts.end());
        CHECK(fs::exists(fs::path(cfg.out_dir) / expect));
    }
    // One decomposition per unit.
    CHECK(fs::exists(fs::path(cfg.out_dir) / "decompositions" / "unit0000.csv"));

    const auto manifest = io::read_json(fs::path(cfg.out_dir) / "manifest.json");
    CHECK(manifest.at("seed").get<std::uint64_t>() == 5);
    CHECK(manifest.at("artifacts").size() == artifacts.size());

    // The mean report carries the four headline fields plus the exemplar.
    const auto mean_report = io::read_json(fs::path(cfg.out_dir) / "mean_report.json");
    for (const char* key :
         {"value_start", "value_end", "global_mean", "total_recovery", "deepest_unit"})
        CHECK(mean_report.contains(key));
}
