#pragma once

// Command-line front end. `run` returns the process exit code: 0 on success,
// 2 for malformed flags, 1 when a library operation fails.

#include <CLI11.hpp>

#include <cstdint>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "boundary.hpp"
#include "error.hpp"
#include "levelset.hpp"
#include "model.hpp"
#include "objective.hpp"
#include "optimizer.hpp"
#include "pipeline.hpp"
#include "prevalence.hpp"
#include "synth.hpp"

namespace prevq::cli {

struct CliConfig {
    std::string train_path;
    std::string test_path;
    std::string label_column = "label";
    std::optional<double> q;
    int k = default_schedule_length;
    bool log_transform = false;
    std::string q_grid = "0.05:0.95:0.05";
    int shadow_count = 10;
    std::string shadow_extra_path;
    std::uint64_t seed = 1;
    std::string kind = "parabolic";
    long n = 1000;
    bool unlabeled = false;
    int k_max = 5;
    int replicates = 25;
    int resolution = 100;
    std::string model_path = "model.json";
    std::string out_path;
    std::string contour_path;
};

/// "a:b:step" or a comma separated list.
inline std::vector<double> parse_q_grid(const std::string& spec)
{
    std::vector<double> grid;
    const auto number = [&](std::string_view cell) {
        const auto v = detail::parse_double(detail::trim(cell));
        require(v.has_value(), Errc::invalid_argument, "bad prevalence grid '" + spec + "'");
        return *v;
    };
    if (spec.find(':') != std::string::npos) {
        const auto parts = [&] {
            std::vector<std::string_view> p;
            std::string_view s = spec;
            std::size_t start = 0;
            while (true) {
                const auto colon = s.find(':', start);
                p.push_back(s.substr(start, colon - start));
                if (colon == std::string_view::npos) break;
                start = colon + 1;
            }
            return p;
        }();
        require(parts.size() == 3, Errc::invalid_argument, "prevalence grid needs a:b:step");
        const double a = number(parts[0]);
        const double b = number(parts[1]);
        const double step = number(parts[2]);
        require(step > 0.0 && b >= a, Errc::invalid_argument, "bad prevalence grid range");
        const auto count = static_cast<int>(std::floor((b - a) / step + 1e-9));
        for (int j = 0; j <= count; ++j) grid.push_back(a + j * step);
    } else {
        for (auto cell : detail::split_commas(spec)) grid.push_back(number(cell));
    }
    validate_q_grid(grid);
    return grid;
}

namespace detail {

struct LoadedTraining {
    TrainingPopulation raw;
    TrainingPopulation fit;
    std::vector<std::string> feature_names;
    std::optional<LogShiftTransform> transform;
};

inline LoadedTraining load_training(const CliConfig& cfg)
{
    CsvData data = read_csv(cfg.train_path, cfg.label_column);
    require(data.is_training(), Errc::parse_error,
            cfg.train_path + ": no label column '" + cfg.label_column + "'");
    LoadedTraining out{data.training(), data.training(), data.feature_names, std::nullopt};
    validate_population(out.raw);
    if (cfg.log_transform) {
        out.transform = fit_transform(out.raw);
        out.fit = apply_transform(*out.transform, out.raw);
    }
    return out;
}

inline TestPopulation load_test(const CliConfig& cfg, const std::optional<LogShiftTransform>& t)
{
    TestPopulation test = read_test_csv(cfg.test_path, cfg.label_column);
    validate_population(test);
    return t ? apply_transform(*t, test) : test;
}

inline void maybe_write_contour(const CliConfig& cfg, const TrainingPopulation& pop,
                                const QuadricParams& params, const std::vector<std::string>& names,
                                std::ostream& out)
{
    if (cfg.contour_path.empty()) return;
    write_contour_csv(cfg.contour_path,
                      export_boundary_contour(BoundaryClassifier(params), contour_box(pop),
                                              cfg.resolution),
                      names);
    out << "contour: " << cfg.contour_path << '\n';
}

inline std::string fmt(double v) { return prevq::detail::format_double(v); }

inline int cmd_train(const CliConfig& cfg, std::ostream& out)
{
    const LoadedTraining data = load_training(cfg);
    const double q = cfg.q.value_or(data.fit.training_prevalence());
    require(q >= 0.0 && q <= 1.0, Errc::invalid_argument, "--q must lie in [0, 1]");
    const QuadricParams start = hyperplane_init(data.fit);
    const SigmaSchedule schedule = sigma_schedule_from_data(data.fit, cfg.k);
    const HomotopyResult fit = homotopy_run(data.fit, q, start, schedule);

    ModelFile model;
    model.dim = data.fit.dim();
    model.feature_names = data.feature_names;
    model.transform = data.transform;
    model.q = q;
    model.params = fit.final_params;
    model.schedule = schedule.values();
    write_model(cfg.model_path, model);

    out << "q: " << fmt(q) << '\n'
        << "initial_error: " << fmt(empirical_error(BoundaryClassifier(start), data.fit, q)) << '\n'
        << "final_error: " << fmt(empirical_error(BoundaryClassifier(fit.final_params), data.fit, q))
        << '\n'
        << "stages: " << schedule.size() << '\n'
        << "model: " << cfg.model_path << '\n';
    maybe_write_contour(cfg, data.fit, fit.final_params, data.feature_names, out);
    return 0;
}

inline int cmd_classify(const CliConfig& cfg, std::ostream& out)
{
    const ModelFile model = read_model(cfg.model_path);
    const TestPopulation test = load_test(cfg, model.transform);
    require(test.dim() == model.dim, Errc::dimension_mismatch,
            "test data has " + std::to_string(test.dim()) + " features, model expects "
                + std::to_string(model.dim));

    std::ofstream file;
    if (!cfg.out_path.empty()) {
        file.open(cfg.out_path);
        require(file.good(), Errc::io_error, "cannot write '" + cfg.out_path + "'");
    }
    std::ostream& sink = cfg.out_path.empty() ? out : file;
    const BoundaryClassifier clf(model.params);
    sink << "class,B";
    if (model.levelsets) sink << ",q_l,q_h,z_low,z_high";
    sink << '\n';
    for (Eigen::Index c = 0; c < test.size(); ++c) {
        const Measurement r = test.samples.col(c);
        const Label label = clf.classify(r);
        sink << to_int(label) << ',' << fmt(clf.evaluate(r));
        if (model.levelsets) {
            const UncertaintyBracket b = uncertainty_at(*model.levelsets, r, model.q, label);
            sink << ',' << fmt(b.q_l) << ',' << fmt(b.q_h) << ',' << fmt(b.z_low) << ','
                 << fmt(b.z_high);
        }
        sink << '\n';
    }
    require(sink.good(), Errc::io_error, "failed writing classification output");
    return 0;
}

inline int cmd_prevalence(const CliConfig& cfg, std::ostream& out)
{
    const LoadedTraining data = load_training(cfg);
    const TestPopulation test = load_test(cfg, data.transform);
    const TwoPassResult result = two_pass_classify(data.fit, test, cfg.k);
    const auto& e = result.estimate;
    out << "q_hat: " << fmt(e.q_hat) << '\n'
        << "clamped: " << (e.clamped ? "true" : "false") << '\n'
        << "test_rate: " << fmt(e.rates.q_tilde) << '\n'
        << "negative_rate: " << fmt(e.rates.n_tilde) << '\n'
        << "positive_rate: " << fmt(e.rates.p_tilde) << '\n';
    if (!cfg.out_path.empty()) {
        ModelFile model;
        model.dim = data.fit.dim();
        model.feature_names = data.feature_names;
        model.transform = data.transform;
        model.q = e.q_hat;
        model.params = result.second_pass.final_params;
        model.schedule = result.schedule.values();
        write_model(cfg.out_path, model);
        out << "model: " << cfg.out_path << '\n';
    }
    maybe_write_contour(cfg, data.fit, result.second_pass.final_params, data.feature_names, out);
    return 0;
}

inline int cmd_levelsets(const CliConfig& cfg, std::ostream& out)
{
    const LoadedTraining data = load_training(cfg);
    const std::vector<double> grid = parse_q_grid(cfg.q_grid);
    std::vector<Measurement> extra;
    if (!cfg.shadow_extra_path.empty()) {
        const CsvData points = read_csv(cfg.shadow_extra_path);
        const PointSet& s = points.test().samples;
        for (Eigen::Index c = 0; c < s.cols(); ++c) {
            const Measurement r = s.col(c);
            extra.push_back(data.transform ? apply_transform(*data.transform, r) : r);
        }
    }
    const PointSet shadow = shadow_grid(data.fit, cfg.shadow_count, extra);
    const SigmaSchedule schedule = sigma_schedule_from_data(data.fit, cfg.k);
    LevelSetFamily family = fit_levelsets(data.fit, grid, shadow, schedule);
    out << "levels: " << family.levels() << '\n'
        << "shadow_points: " << shadow.cols() << '\n'
        << "constraint_violation: " << fmt(family.constraint_violation) << '\n'
        << "penalty_weight: " << fmt(family.penalty_weight) << '\n'
        << "grid_violations: " << family.grid_violations << '\n';

    const double q = cfg.q.value_or(data.fit.training_prevalence());
    require(q >= 0.0 && q <= 1.0, Errc::invalid_argument, "--q must lie in [0, 1]");
    ModelFile model;
    model.dim = data.fit.dim();
    model.feature_names = data.feature_names;
    model.transform = data.transform;
    model.q = q;
    model.params = homotopy_run(data.fit, q, hyperplane_init(data.fit), schedule).final_params;
    model.schedule = schedule.values();

    if (!cfg.contour_path.empty()) {
        std::ofstream file(cfg.contour_path);
        require(file.good(), Errc::io_error, "cannot write '" + cfg.contour_path + "'");
        const ContourBox box = contour_box(data.fit);
        file << "q," << data.feature_names.at(0) << ',' << data.feature_names.at(1) << ",B\n";
        for (std::size_t j = 0; j < family.levels(); ++j)
            for (const auto& s :
                 export_boundary_contour(BoundaryClassifier(family.params[j]), box, cfg.resolution))
                file << fmt(family.q_grid[j]) << ',' << fmt(s.x) << ',' << fmt(s.y) << ','
                     << fmt(s.value) << '\n';
        require(file.good(), Errc::io_error, "failed writing '" + cfg.contour_path + "'");
        out << "contour: " << cfg.contour_path << '\n';
    }
    model.levelsets = std::move(family);
    write_model(cfg.model_path, model);
    out << "model: " << cfg.model_path << '\n';
    return 0;
}

inline int cmd_synth(const CliConfig& cfg, std::ostream& out)
{
    require(cfg.n >= 1, Errc::invalid_argument, "--n must be >= 1");
    require(cfg.q.value_or(0.5) >= 0.0 && cfg.q.value_or(0.5) <= 1.0, Errc::invalid_argument,
            "--q must lie in [0, 1]");
    const double q = cfg.q.value_or(0.5);
    require(!cfg.out_path.empty(), Errc::invalid_argument, "--out is required");
    TestPopulation data;
    if (cfg.kind == "parabolic") {
        data = sample_parabolic_test(cfg.n, q, cfg.seed);
    } else if (cfg.kind == "elisa") {
        Rng rng(stream_seed(cfg.seed, 20));
        std::binomial_distribution<long> draw(cfg.n, q);
        const long n_pos = draw(rng);
        // Each class needs at least one draw from the generator; surplus rows are dropped.
        const TrainingPopulation pop =
            sample_elisa_like(std::max(cfg.n - n_pos, 1L), std::max(n_pos, 1L), cfg.seed);
        data.samples.resize(2, cfg.n);
        std::vector<Label> labels;
        for (long j = 0; j < cfg.n - n_pos; ++j) {
            data.samples.col(j) = pop.negatives().col(j);
            labels.push_back(Label::negative);
        }
        for (long j = 0; j < n_pos; ++j) {
            data.samples.col(cfg.n - n_pos + j) = pop.positives().col(j);
            labels.push_back(Label::positive);
        }
        data.true_labels = std::move(labels);
    } else {
        throw Error(Errc::invalid_argument, "unknown --kind '" + cfg.kind + "'");
    }
    std::size_t n_pos = 0;
    for (Label l : *data.true_labels) n_pos += l == Label::positive;
    if (cfg.unlabeled) data.true_labels.reset();
    write_csv(cfg.out_path, data, {}, cfg.label_column);
    out << "rows: " << data.size() << '\n'
        << "positives: " << n_pos << '\n'
        << "out: " << cfg.out_path << '\n';
    return 0;
}

inline int cmd_converge(const CliConfig& cfg, std::ostream& out)
{
    const ConvergenceReport report = convergence_study(cfg.k_max, cfg.replicates, cfg.seed);
    std::ofstream file;
    if (!cfg.out_path.empty()) {
        file.open(cfg.out_path);
        require(file.good(), Errc::io_error, "cannot write '" + cfg.out_path + "'");
    }
    std::ostream& sink = cfg.out_path.empty() ? out : file;
    sink << "S,mean_sq_frobenius\n";
    for (std::size_t i = 0; i < report.sample_sizes.size(); ++i)
        sink << report.sample_sizes[i] << ',' << fmt(report.mean_sq_frobenius[i]) << '\n';
    out << "slope: " << fmt(report.slope) << '\n';
    return 0;
}

} // namespace detail

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout,
               std::ostream& err = std::cerr)
{
    CliConfig cfg;
    CLI::App app{"Prevalence-weighted quadric classification"};
    app.name("prevq");
    app.require_subcommand(1);

    const auto add_train = [&](CLI::App* sub) {
        sub->add_option("--train", cfg.train_path, "Labeled training CSV")->required();
        sub->add_option("--label", cfg.label_column, "Name of the 0/1 label column");
        sub->add_option("-K,--schedule-length", cfg.k, "Smoothing stages after the first")
            ->check(CLI::NonNegativeNumber);
        sub->add_flag("--log-transform", cfg.log_transform,
                      "Apply ln(0.01 + x - min) with minima over the negatives");
    };
    const auto add_q = [&](CLI::App* sub) {
        sub->add_option("--q", cfg.q, "Prevalence weight")->check(CLI::Range(0.0, 1.0));
    };
    const auto add_contour = [&](CLI::App* sub) {
        sub->add_option("--contour", cfg.contour_path, "Write B on a grid (2-d data only)");
        sub->add_option("--resolution", cfg.resolution, "Contour grid points per axis")
            ->check(CLI::Range(2, 100000));
    };

    CLI::App* train = app.add_subcommand("train", "Fit one boundary");
    add_train(train);
    add_q(train);
    add_contour(train);
    train->add_option("--model", cfg.model_path, "Output model file");

    CLI::App* classify = app.add_subcommand("classify", "Apply a model to test data");
    classify->add_option("--model", cfg.model_path, "Model file")->required();
    classify->add_option("--test", cfg.test_path, "Test CSV")->required();
    classify->add_option("--label", cfg.label_column, "Label column to ignore if present");
    classify->add_option("--out", cfg.out_path, "Output CSV (default stdout)");

    CLI::App* prevalence = app.add_subcommand("prevalence", "Estimate test prevalence");
    add_train(prevalence);
    add_contour(prevalence);
    prevalence->add_option("--test", cfg.test_path, "Test CSV")->required();
    prevalence->add_option("--out", cfg.out_path, "Write the refitted classifier as a model");

    CLI::App* levelsets = app.add_subcommand("levelsets", "Fit a monotone family of boundaries");
    add_train(levelsets);
    add_q(levelsets);
    add_contour(levelsets);
    levelsets->add_option("--q-grid", cfg.q_grid, "a:b:step or comma list");
    levelsets->add_option("--shadow", cfg.shadow_count, "Shadow grid points per axis")
        ->check(CLI::PositiveNumber);
    levelsets->add_option("--shadow-extra", cfg.shadow_extra_path, "CSV of extra shadow points");
    levelsets->add_option("--model", cfg.model_path, "Output model file");

    CLI::App* synth = app.add_subcommand("synth", "Generate synthetic labeled data");
    synth->add_option("--kind", cfg.kind, "parabolic or elisa")
        ->check(CLI::IsMember({"parabolic", "elisa"}));
    synth->add_option("--n", cfg.n, "Row count")->check(CLI::PositiveNumber);
    add_q(synth);
    synth->add_option("--seed", cfg.seed, "Random seed");
    synth->add_option("--label", cfg.label_column, "Label column name");
    synth->add_flag("--unlabeled", cfg.unlabeled, "Omit the label column");
    synth->add_option("--out", cfg.out_path, "Output CSV")->required();

    CLI::App* converge = app.add_subcommand("converge", "Sample-size convergence study");
    converge->add_option("--kmax", cfg.k_max, "Largest k in S = 200 2^k")
        ->check(CLI::Range(1, 20));
    converge->add_option("--replicates", cfg.replicates, "Replicates per size")
        ->check(CLI::Range(2, 1000000));
    converge->add_option("--seed", cfg.seed, "Random seed");
    converge->add_option("--out", cfg.out_path, "Report CSV (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return 2;
    }

    try {
        if (*train) return detail::cmd_train(cfg, out);
        if (*classify) return detail::cmd_classify(cfg, out);
        if (*prevalence) return detail::cmd_prevalence(cfg, out);
        if (*levelsets) return detail::cmd_levelsets(cfg, out);
        if (*synth) return detail::cmd_synth(cfg, out);
        if (*converge) return detail::cmd_converge(cfg, out);
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
    return 2;
}

} // namespace prevq::cli
