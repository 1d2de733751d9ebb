#pragma once

// File formats and data preparation.
//
//  * CSV input: comma separated, one header row, one numeric column per
//    feature and an optional 0/1 label column.
//  * Model files: versioned JSON. Reals are written in shortest round-trip
//    form, so reading a model back reproduces every value bit for bit.
//  * Contour export: (x, y, B) samples on a uniform grid for external
//    contouring at level 0 (two-dimensional models only).

#include <Eigen/Dense>

#include <charconv>
#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>
#include <variant>
#include <vector>

#include "json.hpp"

#include "boundary.hpp"
#include "error.hpp"
#include "levelset.hpp"
#include "model.hpp"
#include "optimizer.hpp"

namespace prevq {

// ---------------------------------------------------------------------------
// Log-shift transform x_i -> ln(epsilon + x_i - min_i)

struct LogShiftTransform {
    Vector mins;
    double epsilon = 0.01;

    friend bool operator==(const LogShiftTransform& a, const LogShiftTransform& b)
    {
        return a.epsilon == b.epsilon && a.mins.size() == b.mins.size() && a.mins == b.mins;
    }
};

/// Per-coordinate minima taken over the negative training samples.
inline LogShiftTransform fit_transform(const TrainingPopulation& pop)
{
    require(pop.n_negative() > 0, Errc::empty_class, "log-shift transform needs negatives");
    return {pop.negatives().rowwise().minCoeff(), 0.01};
}

inline Measurement apply_transform(const LogShiftTransform& t, const Measurement& r)
{
    require(r.size() == t.mins.size(), Errc::dimension_mismatch,
            "measurement dimension differs from the transform");
    Measurement out(r.size());
    for (Eigen::Index i = 0; i < r.size(); ++i) {
        const double arg = t.epsilon + r[i] - t.mins[i];
        require(arg > 0.0 && std::isfinite(arg), Errc::non_finite_coordinate,
                "coordinate " + std::to_string(i) + " lies below the transform origin");
        out[i] = std::log(arg);
    }
    return out;
}

inline PointSet apply_transform(const LogShiftTransform& t, const PointSet& points)
{
    PointSet out(points.rows(), points.cols());
    for (Eigen::Index c = 0; c < points.cols(); ++c)
        out.col(c) = apply_transform(t, Measurement(points.col(c)));
    return out;
}

inline TrainingPopulation apply_transform(const LogShiftTransform& t, const TrainingPopulation& pop)
{
    return {apply_transform(t, pop.negatives()), apply_transform(t, pop.positives())};
}

inline TestPopulation apply_transform(const LogShiftTransform& t, const TestPopulation& test)
{
    return {apply_transform(t, test.samples), test.true_labels};
}

// ---------------------------------------------------------------------------
// CSV

namespace detail {

inline std::string_view trim(std::string_view s)
{
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '"')) s.remove_prefix(1);
    while (!s.empty()
           && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r' || s.back() == '"'))
        s.remove_suffix(1);
    return s;
}

inline std::vector<std::string_view> split_commas(std::string_view line)
{
    std::vector<std::string_view> cells;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        cells.push_back(trim(line.substr(start, comma - start)));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return cells;
}

inline std::optional<double> parse_double(std::string_view cell)
{
    if (!cell.empty() && cell.front() == '+') cell.remove_prefix(1);
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
    if (ec != std::errc() || ptr != cell.data() + cell.size() || cell.empty()) return std::nullopt;
    return value;
}

/// Shortest text that parses back to exactly `value`.
inline std::string format_double(double value)
{
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
    return std::string(buf, ptr);
}

} // namespace detail

struct CsvData {
    std::vector<std::string> feature_names;
    std::variant<TrainingPopulation, TestPopulation> population;

    bool is_training() const noexcept { return population.index() == 0; }
    const TrainingPopulation& training() const { return std::get<TrainingPopulation>(population); }
    const TestPopulation& test() const { return std::get<TestPopulation>(population); }
};

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
};

inline CsvTable read_csv_table(const std::string& path)
{
    std::ifstream in(path);
    require(in.good(), Errc::io_error, "cannot open '" + path + "'");
    CsvTable table;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        const auto cells = detail::split_commas(line);
        if (table.header.empty()) {
            for (auto c : cells) table.header.emplace_back(c);
            continue;
        }
        require(cells.size() == table.header.size(), Errc::parse_error,
                path + ": row " + std::to_string(line_no) + " has " + std::to_string(cells.size())
                    + " cells, header has " + std::to_string(table.header.size()));
        std::vector<double> row;
        row.reserve(cells.size());
        for (std::size_t c = 0; c < cells.size(); ++c) {
            const auto v = detail::parse_double(cells[c]);
            require(v.has_value(), Errc::parse_error,
                    path + ": row " + std::to_string(line_no) + ", column " + std::to_string(c + 1)
                        + " ('" + table.header[c] + "'): cannot parse '" + std::string(cells[c])
                        + "' as a number");
            row.push_back(*v);
        }
        table.rows.push_back(std::move(row));
    }
    require(!table.header.empty(), Errc::parse_error, path + ": missing header row");
    return table;
}

/// Reads measurements; when `label_column` names a column of the file the
/// rows are split into a training population, otherwise a test population
/// is returned.
inline CsvData read_csv(const std::string& path,
                        const std::optional<std::string>& label_column = std::nullopt)
{
    const CsvTable table = read_csv_table(path);
    std::optional<std::size_t> label_idx;
    if (label_column) {
        for (std::size_t c = 0; c < table.header.size(); ++c)
            if (table.header[c] == *label_column) label_idx = c;
    }
    CsvData out;
    std::vector<std::size_t> feature_idx;
    for (std::size_t c = 0; c < table.header.size(); ++c)
        if (!label_idx || c != *label_idx) {
            feature_idx.push_back(c);
            out.feature_names.push_back(table.header[c]);
        }
    require(!feature_idx.empty(), Errc::parse_error, path + ": no feature columns");

    const auto m = static_cast<Eigen::Index>(feature_idx.size());
    const auto row_point = [&](const std::vector<double>& row) {
        Measurement r(m);
        for (Eigen::Index i = 0; i < m; ++i) r[i] = row[feature_idx[static_cast<std::size_t>(i)]];
        return r;
    };

    if (label_idx) {
        std::vector<Measurement> neg;
        std::vector<Measurement> pos;
        for (std::size_t k = 0; k < table.rows.size(); ++k) {
            const double v = table.rows[k][*label_idx];
            require(v == 0.0 || v == 1.0, Errc::unknown_label_value,
                    path + ": data row " + std::to_string(k + 1) + " has label "
                        + detail::format_double(v));
            (v == 1.0 ? pos : neg).push_back(row_point(table.rows[k]));
        }
        PointSet n = neg.empty() ? PointSet(m, 0) : to_point_set(neg);
        PointSet p = pos.empty() ? PointSet(m, 0) : to_point_set(pos);
        out.population = TrainingPopulation(std::move(n), std::move(p));
    } else {
        TestPopulation test;
        test.samples.resize(m, static_cast<Eigen::Index>(table.rows.size()));
        for (std::size_t k = 0; k < table.rows.size(); ++k)
            test.samples.col(static_cast<Eigen::Index>(k)) = row_point(table.rows[k]);
        out.population = std::move(test);
    }
    return out;
}

/// Test data that may carry a label column; labels become `true_labels`.
inline TestPopulation read_test_csv(const std::string& path,
                                    const std::optional<std::string>& label_column,
                                    std::vector<std::string>* feature_names = nullptr)
{
    const CsvTable table = read_csv_table(path);
    std::optional<std::size_t> label_idx;
    if (label_column)
        for (std::size_t c = 0; c < table.header.size(); ++c)
            if (table.header[c] == *label_column) label_idx = c;
    std::vector<std::size_t> feature_idx;
    std::vector<std::string> names;
    for (std::size_t c = 0; c < table.header.size(); ++c)
        if (!label_idx || c != *label_idx) {
            feature_idx.push_back(c);
            names.push_back(table.header[c]);
        }
    require(!feature_idx.empty(), Errc::parse_error, path + ": no feature columns");
    TestPopulation test;
    test.samples.resize(static_cast<Eigen::Index>(feature_idx.size()),
                        static_cast<Eigen::Index>(table.rows.size()));
    std::vector<Label> labels;
    for (std::size_t k = 0; k < table.rows.size(); ++k) {
        for (std::size_t i = 0; i < feature_idx.size(); ++i)
            test.samples(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) =
                table.rows[k][feature_idx[i]];
        if (label_idx) {
            const double v = table.rows[k][*label_idx];
            require(v == 0.0 || v == 1.0, Errc::unknown_label_value,
                    path + ": data row " + std::to_string(k + 1) + " has label "
                        + detail::format_double(v));
            labels.push_back(v == 1.0 ? Label::positive : Label::negative);
        }
    }
    if (label_idx) test.true_labels = std::move(labels);
    if (feature_names) *feature_names = std::move(names);
    return test;
}

inline std::vector<std::string> default_feature_names(Eigen::Index m)
{
    if (m == 2) return {"x", "y"};
    std::vector<std::string> names;
    for (Eigen::Index i = 0; i < m; ++i) names.push_back("x" + std::to_string(i + 1));
    return names;
}

namespace detail {

inline std::ofstream open_for_write(const std::string& path)
{
    std::ofstream out(path);
    require(out.good(), Errc::io_error, "cannot write '" + path + "'");
    return out;
}

inline void write_row(std::ostream& out, const Eigen::Ref<const Vector>& r)
{
    for (Eigen::Index i = 0; i < r.size(); ++i) {
        if (i) out << ',';
        out << format_double(r[i]);
    }
}

inline void write_header(std::ostream& out, const std::vector<std::string>& names)
{
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (i) out << ',';
        out << names[i];
    }
}

} // namespace detail

/// Negatives first, then positives, each row ending with its label.
inline void write_csv(const std::string& path, const TrainingPopulation& pop,
                      std::vector<std::string> feature_names = {},
                      const std::string& label_column = "label")
{
    if (feature_names.empty()) feature_names = default_feature_names(pop.dim());
    require(static_cast<Eigen::Index>(feature_names.size()) == pop.dim(), Errc::dimension_mismatch,
            "feature name count differs from the dimension");
    auto out = detail::open_for_write(path);
    feature_names.push_back(label_column);
    detail::write_header(out, feature_names);
    out << '\n';
    for (Label label : {Label::negative, Label::positive}) {
        const PointSet& pts = pop.of(label);
        for (Eigen::Index c = 0; c < pts.cols(); ++c) {
            detail::write_row(out, pts.col(c));
            out << ',' << to_int(label) << '\n';
        }
    }
    require(out.good(), Errc::io_error, "failed writing '" + path + "'");
}

/// Rows in sample order; a label column is added when true labels are known.
inline void write_csv(const std::string& path, const TestPopulation& test,
                      std::vector<std::string> feature_names = {},
                      const std::string& label_column = "label")
{
    if (feature_names.empty()) feature_names = default_feature_names(test.dim());
    auto out = detail::open_for_write(path);
    if (test.true_labels) feature_names.push_back(label_column);
    detail::write_header(out, feature_names);
    out << '\n';
    for (Eigen::Index c = 0; c < test.size(); ++c) {
        detail::write_row(out, test.samples.col(c));
        if (test.true_labels) out << ',' << to_int((*test.true_labels)[static_cast<std::size_t>(c)]);
        out << '\n';
    }
    require(out.good(), Errc::io_error, "failed writing '" + path + "'");
}

// ---------------------------------------------------------------------------
// Model files

inline constexpr int model_format_version = 1;

struct ModelFile {
    int version = model_format_version;
    Eigen::Index dim = 0;
    std::vector<std::string> feature_names;
    std::optional<LogShiftTransform> transform;
    double q = 0.5;
    QuadricParams params;
    std::vector<double> schedule;
    std::optional<LevelSetFamily> levelsets;
};

namespace detail {

inline nlohmann::json to_json_vector(const Eigen::Ref<const Vector>& v)
{
    nlohmann::json out = nlohmann::json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
    return out;
}

inline Vector vector_from_json(const nlohmann::json& j)
{
    Vector v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
    return v;
}

} // namespace detail

inline nlohmann::json model_to_json(const ModelFile& model)
{
    using nlohmann::json;
    json j;
    j["format"] = "prevq-model";
    j["version"] = model.version;
    j["dim"] = model.dim;
    j["feature_names"] = model.feature_names;
    if (model.transform) {
        j["transform"] = {{"kind", "log-shift"},
                          {"mins", detail::to_json_vector(model.transform->mins)},
                          {"epsilon", model.transform->epsilon}};
    } else {
        j["transform"] = nullptr;
    }
    j["q"] = model.q;
    j["params"] = detail::to_json_vector(model.params.values());
    j["schedule"] = model.schedule;
    if (model.levelsets) {
        const LevelSetFamily& f = *model.levelsets;
        json levels = json::array();
        for (const auto& p : f.params) levels.push_back(detail::to_json_vector(p.values()));
        json shadow = json::array();
        for (Eigen::Index c = 0; c < f.shadow_points.cols(); ++c)
            shadow.push_back(detail::to_json_vector(f.shadow_points.col(c)));
        j["levelsets"] = {{"q_grid", f.q_grid},
                          {"params", levels},
                          {"shadow_points", shadow},
                          {"constraint_violation", f.constraint_violation},
                          {"penalty_weight", f.penalty_weight},
                          {"grid_violations", f.grid_violations}};
    } else {
        j["levelsets"] = nullptr;
    }
    return j;
}

inline ModelFile model_from_json(const nlohmann::json& j)
{
    try {
        require(j.value("format", "") == "prevq-model", Errc::parse_error, "not a prevq model file");
        ModelFile m;
        m.version = j.at("version").get<int>();
        require(m.version == model_format_version, Errc::parse_error,
                "unsupported model version " + std::to_string(m.version));
        m.dim = j.at("dim").get<Eigen::Index>();
        m.feature_names = j.at("feature_names").get<std::vector<std::string>>();
        if (!j.at("transform").is_null()) {
            const auto& t = j.at("transform");
            m.transform = LogShiftTransform{detail::vector_from_json(t.at("mins")),
                                            t.at("epsilon").get<double>()};
        }
        m.q = j.at("q").get<double>();
        m.params = QuadricParams(m.dim, detail::vector_from_json(j.at("params")));
        m.schedule = j.at("schedule").get<std::vector<double>>();
        if (!j.at("levelsets").is_null()) {
            const auto& l = j.at("levelsets");
            LevelSetFamily f;
            f.q_grid = l.at("q_grid").get<std::vector<double>>();
            for (const auto& p : l.at("params"))
                f.params.emplace_back(m.dim, detail::vector_from_json(p));
            const auto& shadow = l.at("shadow_points");
            f.shadow_points.resize(m.dim, static_cast<Eigen::Index>(shadow.size()));
            for (std::size_t c = 0; c < shadow.size(); ++c)
                f.shadow_points.col(static_cast<Eigen::Index>(c)) = detail::vector_from_json(shadow[c]);
            f.constraint_violation = l.at("constraint_violation").get<double>();
            f.penalty_weight = l.at("penalty_weight").get<double>();
            f.grid_violations = l.at("grid_violations").get<Eigen::Index>();
            require(f.params.size() == f.q_grid.size(), Errc::parse_error,
                    "level-set parameter count differs from the grid");
            m.levelsets = std::move(f);
        }
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::parse_error, std::string("malformed model file: ") + e.what());
    }
}

inline void write_model(const std::string& path, const ModelFile& model)
{
    auto out = detail::open_for_write(path);
    out << model_to_json(model).dump(2) << '\n';
    require(out.good(), Errc::io_error, "failed writing '" + path + "'");
}

inline ModelFile read_model(const std::string& path)
{
    std::ifstream in(path);
    require(in.good(), Errc::io_error, "cannot open '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::parse_error, path + ": " + e.what());
    }
    return model_from_json(j);
}

// ---------------------------------------------------------------------------
// Contours

struct ContourBox {
    double x_min = -1.0;
    double x_max = 1.0;
    double y_min = -1.0;
    double y_max = 1.0;
};

struct ContourSample {
    double x = 0.0;
    double y = 0.0;
    double value = 0.0;
};

/// B sampled on a resolution x resolution grid, x varying fastest.
inline std::vector<ContourSample> export_boundary_contour(const BoundaryClassifier& clf,
                                                          const ContourBox& box, int resolution)
{
    require(clf.dim() == 2, Errc::unsupported_dimension,
            "contours are only defined for two-dimensional models, got dimension "
                + std::to_string(clf.dim()));
    require(resolution >= 2, Errc::invalid_argument, "contour resolution must be >= 2");
    std::vector<ContourSample> out;
    out.reserve(static_cast<std::size_t>(resolution) * static_cast<std::size_t>(resolution));
    Measurement r(2);
    for (int iy = 0; iy < resolution; ++iy) {
        for (int ix = 0; ix < resolution; ++ix) {
            r[0] = box.x_min + (box.x_max - box.x_min) * ix / (resolution - 1);
            r[1] = box.y_min + (box.y_max - box.y_min) * iy / (resolution - 1);
            out.push_back({r[0], r[1], clf.evaluate(r)});
        }
    }
    return out;
}

inline void write_contour_csv(const std::string& path, const std::vector<ContourSample>& samples,
                              const std::vector<std::string>& axis_names = {"x", "y"})
{
    auto out = detail::open_for_write(path);
    out << axis_names.at(0) << ',' << axis_names.at(1) << ",B\n";
    for (const auto& s : samples)
        out << detail::format_double(s.x) << ',' << detail::format_double(s.y) << ','
            << detail::format_double(s.value) << '\n';
    require(out.good(), Errc::io_error, "failed writing '" + path + "'");
}

inline ContourBox contour_box(const TrainingPopulation& pop)
{
    const BoundingBox b = bounding_box(pop, 0.1);
    return {b.lower[0], b.upper[0], b.lower[1], b.upper[1]};
}

} // namespace prevq
