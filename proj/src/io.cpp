#include "firefda/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace firefda::io {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(field);
            field.clear();
        } else if (c != '\r') {
            field += c;
        }
    }
    fields.push_back(field);
    return fields;
}

[[noreturn]] void csv_error(const std::filesystem::path& path, std::size_t line,
                            const std::string& what) {
    throw validation_error(path.string() + ":" + std::to_string(line) + ": " + what);
}

double parse_double(const std::string& s, const std::filesystem::path& path, std::size_t line) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) csv_error(path, line, "trailing characters in number '" + s + "'");
        return v;
    } catch (const std::invalid_argument&) {
        csv_error(path, line, "expected a number, got '" + s + "'");
    } catch (const std::out_of_range&) {
        csv_error(path, line, "number out of range: '" + s + "'");
    }
}

long parse_long(const std::string& s, const std::filesystem::path& path, std::size_t line) {
    try {
        std::size_t used = 0;
        const long v = std::stol(s, &used);
        if (used != s.size()) csv_error(path, line, "trailing characters in integer '" + s + "'");
        return v;
    } catch (const std::exception&) {
        csv_error(path, line, "expected an integer, got '" + s + "'");
    }
}

std::ifstream open_input(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw validation_error("cannot open " + path.string());
    return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw validation_error("cannot write " + path.string());
    return out;
}

void check_id(const std::string& id) {
    if (id.empty() || id.find(',') != std::string::npos || id.find('\n') != std::string::npos)
        throw validation_error("unit_id '" + id + "' is empty or contains a delimiter");
}

}  // namespace

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

void write_dataset_csv(const FunctionalDatasetD& ds, const std::filesystem::path& csv_path,
                       const std::filesystem::path& sidecar_path) {
    auto out = open_output(csv_path);
    out << "unit_id";
    for (Eigen::Index j = 0; j < ds.grid.n_points; ++j) out << ",t_" << j;
    out << "\n";
    for (Eigen::Index i = 0; i < ds.n_units(); ++i) {
        check_id(ds.unit_ids[std::size_t(i)]);
        out << ds.unit_ids[std::size_t(i)];
        for (Eigen::Index j = 0; j < ds.grid.n_points; ++j)
            out << ',' << format_double(ds.curves(i, j));
        out << "\n";
    }
    ordered_json sidecar;
    sidecar["start"] = ds.grid.start;
    sidecar["step"] = ds.grid.step;
    sidecar["points_per_year"] = ds.grid.points_per_year;
    write_json(sidecar_path, sidecar);
}

FunctionalDatasetD read_dataset_csv(const std::filesystem::path& csv_path,
                                    const std::filesystem::path& sidecar_path) {
    const auto sidecar = read_json(sidecar_path);
    auto in = open_input(csv_path);
    std::string line;
    if (!std::getline(in, line)) csv_error(csv_path, 1, "empty file");
    const auto header = split_csv_line(line);
    if (header.size() < 2 || header[0] != "unit_id")
        csv_error(csv_path, 1, "expected header 'unit_id,t_0,...'");
    const Eigen::Index n_points = Eigen::Index(header.size()) - 1;

    std::vector<std::string> ids;
    std::vector<Eigen::VectorXd> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto fields = split_csv_line(line);
        if (Eigen::Index(fields.size()) != n_points + 1)
            csv_error(csv_path, line_no,
                      "expected " + std::to_string(n_points + 1) + " fields, got " +
                          std::to_string(fields.size()));
        ids.push_back(fields[0]);
        Eigen::VectorXd row(n_points);
        for (Eigen::Index j = 0; j < n_points; ++j)
            row(j) = parse_double(fields[std::size_t(j) + 1], csv_path, line_no);
        rows.push_back(std::move(row));
    }
    if (rows.empty()) csv_error(csv_path, line_no, "no data rows");

    TimeGridD grid(sidecar.at("start").get<double>(), sidecar.at("step").get<double>(), n_points,
                   sidecar.at("points_per_year").get<int>());
    Eigen::MatrixXd curves(Eigen::Index(rows.size()), n_points);
    for (std::size_t i = 0; i < rows.size(); ++i) curves.row(Eigen::Index(i)) = rows[i];
    return FunctionalDatasetD(grid, std::move(ids), std::move(curves));
}

std::vector<LongSeries> read_long_series_csv(const std::filesystem::path& path) {
    auto in = open_input(path);
    std::string line;
    if (!std::getline(in, line)) csv_error(path, 1, "empty file");
    const auto header = split_csv_line(line);
    if (header.size() != 3 || header[0] != "unit_id" || header[1] != "calendar_index" ||
        header[2] != "value")
        csv_error(path, 1, "expected header 'unit_id,calendar_index,value'");

    std::vector<LongSeries> series;
    std::map<std::string, std::size_t> index;
    std::vector<std::set<long>> seen;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto fields = split_csv_line(line);
        if (fields.size() != 3) csv_error(path, line_no, "expected 3 fields");
        const auto& id = fields[0];
        auto [it, inserted] = index.try_emplace(id, series.size());
        if (inserted) {
            series.push_back(LongSeries{id, {}});
            seen.emplace_back();
        }
        auto& s = series[it->second];
        const long cal = parse_long(fields[1], path, line_no);
        std::optional<double> value;
        if (!fields[2].empty() && fields[2] != "nan" && fields[2] != "NA")
            value = parse_double(fields[2], path, line_no);
        if (!seen[it->second].insert(cal).second)
            csv_error(path, line_no,
                      "duplicate calendar_index " + std::to_string(cal) + " for unit " + id);
        s.observations.emplace_back(cal, value);
    }
    if (series.empty()) csv_error(path, line_no, "no data rows");
    return series;
}

std::map<std::string, long> read_events_csv(const std::filesystem::path& path) {
    auto in = open_input(path);
    std::string line;
    if (!std::getline(in, line)) csv_error(path, 1, "empty file");
    const auto header = split_csv_line(line);
    if (header.size() != 2 || header[0] != "unit_id" || header[1] != "event_index")
        csv_error(path, 1, "expected header 'unit_id,event_index'");
    std::map<std::string, long> events;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto fields = split_csv_line(line);
        if (fields.size() != 2) csv_error(path, line_no, "expected 2 fields");
        if (!events.emplace(fields[0], parse_long(fields[1], path, line_no)).second)
            csv_error(path, line_no, "duplicate unit_id '" + fields[0] + "'");
    }
    return events;
}

CovariateTableD read_covariates_csv(const std::filesystem::path& path,
                                    const std::vector<std::string>& categorical,
                                    const std::map<std::string, std::string>& references) {
    auto in = open_input(path);
    std::string line;
    if (!std::getline(in, line)) csv_error(path, 1, "empty file");
    const auto header = split_csv_line(line);
    if (header.size() < 2 || header[0] != "unit_id")
        csv_error(path, 1, "expected header 'unit_id,<columns...>'");

    std::vector<std::string> ids;
    std::vector<std::vector<std::string>> cells(header.size() - 1);
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto fields = split_csv_line(line);
        if (fields.size() != header.size())
            csv_error(path, line_no,
                      "expected " + std::to_string(header.size()) + " fields, got " +
                          std::to_string(fields.size()));
        for (const auto& id : ids)
            if (id == fields[0]) csv_error(path, line_no, "duplicate unit_id '" + fields[0] + "'");
        ids.push_back(fields[0]);
        for (std::size_t c = 1; c < fields.size(); ++c) cells[c - 1].push_back(fields[c]);
    }
    if (ids.empty()) csv_error(path, line_no, "no data rows");

    CovariateTableD table(ids);
    for (std::size_t c = 1; c < header.size(); ++c) {
        const auto& name = header[c];
        const bool is_categorical =
            std::find(categorical.begin(), categorical.end(), name) != categorical.end();
        if (is_categorical) {
            auto ref = references.count(name) ? references.at(name) : std::string{};
            table.add_categorical(name, cells[c - 1], ref);
        } else {
            Eigen::VectorXd v(Eigen::Index(ids.size()));
            for (std::size_t r = 0; r < ids.size(); ++r)
                v(Eigen::Index(r)) = parse_double(cells[c - 1][r], path, r + 2);
            table.add_numeric(name, std::move(v));
        }
    }
    return table;
}

void write_covariates_csv(const std::filesystem::path& path, const CovariateTableD& table) {
    auto out = open_output(path);
    out << "unit_id";
    for (const auto& col : table.numeric_columns()) out << ',' << col.name;
    for (const auto& col : table.categorical_columns()) out << ',' << col.name;
    out << "\n";
    for (Eigen::Index i = 0; i < table.n_units(); ++i) {
        check_id(table.unit_ids()[std::size_t(i)]);
        out << table.unit_ids()[std::size_t(i)];
        for (const auto& col : table.numeric_columns()) out << ',' << format_double(col.values(i));
        for (const auto& col : table.categorical_columns())
            out << ',' << col.labels[std::size_t(i)];
        out << "\n";
    }
}

void write_decomposition_csv(const std::filesystem::path& path, const RawSeriesD& series,
                             const DecompositionD& dec) {
    auto out = open_output(path);
    out << "calendar_index,observed,trend,seasonal,remainder\n";
    for (Eigen::Index j = 0; j < series.size(); ++j) {
        out << series.calendar_index(j) << ',';
        if (!series.is_missing(j)) out << format_double(series.values(j));
        out << ',' << format_double(dec.trend(j)) << ',' << format_double(dec.seasonal(j)) << ','
            << format_double(dec.remainder(j)) << "\n";
    }
}

void write_long_series_csv(const std::filesystem::path& path,
                           const std::vector<RawSeriesD>& series) {
    auto out = open_output(path);
    out << "unit_id,calendar_index,value\n";
    for (const auto& s : series) {
        check_id(s.unit_id);
        for (Eigen::Index j = 0; j < s.size(); ++j) {
            out << s.unit_id << ',' << s.calendar_index(j) << ',';
            if (!s.is_missing(j)) out << format_double(s.values(j));
            out << "\n";
        }
    }
}

void write_events_csv(const std::filesystem::path& path, const std::vector<RawSeriesD>& series) {
    auto out = open_output(path);
    out << "unit_id,event_index\n";
    for (const auto& s : series)
        out << s.unit_id << ',' << s.calendar_index(s.event_pos) << "\n";
}

void write_sweep_csv(const std::filesystem::path& path, const SweepTableD& table) {
    auto out = open_output(path);
    out << "group,constant_linear,smooth,varying_linear,varying_plus_smooth,bivariate,selected\n";
    for (std::size_t g = 0; g < table.groups.size(); ++g) {
        out << table.groups[g].name;
        for (int k = 0; k < 5; ++k)
            out << ',' << format_double(table.explained(Eigen::Index(g), k));
        out << ',' << term_kind_name(table.selected[g]) << "\n";
    }
}

SweepTableD read_sweep_csv(const std::filesystem::path& path,
                           const std::vector<CovariateGroup>& groups) {
    auto in = open_input(path);
    std::string line;
    if (!std::getline(in, line)) csv_error(path, 1, "empty file");
    SweepTableD table;
    table.explained.resize(Eigen::Index(groups.size()), 5);
    std::size_t line_no = 1, row = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto fields = split_csv_line(line);
        if (fields.size() != 7) csv_error(path, line_no, "expected 7 fields");
        if (row >= groups.size()) csv_error(path, line_no, "more rows than configured groups");
        if (fields[0] != groups[row].name)
            csv_error(path, line_no, "group '" + fields[0] + "' does not match configured '" +
                                         groups[row].name + "'");
        for (int k = 0; k < 5; ++k)
            table.explained(Eigen::Index(row), k) =
                parse_double(fields[std::size_t(k) + 1], path, line_no);
        table.selected.push_back(term_kind_from_name(fields[6]));
        ++row;
    }
    if (row != groups.size()) csv_error(path, line_no, "fewer rows than configured groups");
    table.groups = groups;
    return table;
}

TermKind term_kind_from_name(const std::string& name) {
    for (TermKind k : {TermKind::FunctionalIntercept, TermKind::ConstantLinear, TermKind::Smooth,
                       TermKind::VaryingLinear, TermKind::VaryingPlusSmooth, TermKind::Bivariate,
                       TermKind::FactorConstant})
        if (name == term_kind_name(k)) return k;
    throw validation_error("unknown term kind '" + name + "'");
}

namespace {

ordered_json basis_to_json(const BasisConfig& b) {
    return ordered_json{{"n_basis", b.n_basis}, {"degree", b.degree},
                        {"penalty_order", b.penalty_order}};
}

BasisConfig basis_from_json(const ordered_json& j) {
    BasisConfig b;
    if (j.contains("n_basis")) b.n_basis = j.at("n_basis").get<Eigen::Index>();
    if (j.contains("degree")) b.degree = j.at("degree").get<int>();
    if (j.contains("penalty_order")) b.penalty_order = j.at("penalty_order").get<int>();
    return b;
}

}  // namespace

ordered_json model_spec_to_json(const ModelSpecD& spec) {
    ordered_json terms = ordered_json::array();
    for (const auto& t : spec.terms) {
        ordered_json jt;
        jt["covariate"] = t.covariate;
        jt["kind"] = term_kind_name(t.kind);
        jt["t_basis"] = basis_to_json(t.t_basis);
        jt["x_basis"] = basis_to_json(t.x_basis);
        if (t.fixed_lambda_t) jt["fixed_lambda_t"] = *t.fixed_lambda_t;
        if (t.fixed_lambda_x) jt["fixed_lambda_x"] = *t.fixed_lambda_x;
        terms.push_back(std::move(jt));
    }
    return ordered_json{{"terms", std::move(terms)}};
}

ModelSpecD model_spec_from_json(const ordered_json& j) {
    ModelSpecD spec;
    for (const auto& jt : j.at("terms")) {
        TermSpecD t;
        t.covariate = jt.at("covariate").get<std::string>();
        t.kind = term_kind_from_name(jt.at("kind").get<std::string>());
        if (jt.contains("t_basis")) t.t_basis = basis_from_json(jt.at("t_basis"));
        if (jt.contains("x_basis")) t.x_basis = basis_from_json(jt.at("x_basis"));
        if (jt.contains("fixed_lambda_t")) t.fixed_lambda_t = jt.at("fixed_lambda_t").get<double>();
        if (jt.contains("fixed_lambda_x")) t.fixed_lambda_x = jt.at("fixed_lambda_x").get<double>();
        spec.terms.push_back(std::move(t));
    }
    return spec;
}

void write_json(const std::filesystem::path& path, const ordered_json& j) {
    auto out = open_output(path);
    out << j.dump(2) << "\n";
}

ordered_json read_json(const std::filesystem::path& path) {
    auto in = open_input(path);
    try {
        return ordered_json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw validation_error(path.string() + ": " + e.what());
    }
}

std::string fnv1a_hex(const std::string& data) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace firefda::io
