// Command-line front end: simulate, train, identify, evaluate, bench.

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "wipin/classifier.hpp"
#include "wipin/csi.hpp"
#include "wipin/error.hpp"
#include "wipin/harness.hpp"
#include "wipin/simulator.hpp"

namespace fs = std::filesystem;
using namespace wipin;

namespace {

constexpr int kExitInput = 2;
constexpr int kExitRange = 3;

nlohmann::json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw InvalidInput("cannot open '" + path.string() + "'");
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

void write_json(const nlohmann::json& j, const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    out << j.dump(2) << '\n';
}

struct Common {
    std::optional<std::uint64_t> seed;
    std::string config;
    std::string out;
    std::optional<std::string> preset;
};

void add_common(CLI::App* app, Common& c, bool out_required) {
    app->add_option("--seed", c.seed, "master seed");
    app->add_option("--config", c.config, "JSON config file")->check(CLI::ExistingFile);
    auto* out = app->add_option("--out", c.out, "output directory");
    if (out_required) out->required();
    app->add_option("--preset", c.preset, "noise preset")->check(CLI::IsMember({"clean", "lab", "corridor"}));
}

harness::PipelineConfig pipeline_from(const Common& c) {
    return c.config.empty() ? harness::PipelineConfig{} : harness::pipeline_config_from_json(read_json(c.config));
}

// ---------------------------------------------------------------------------

int cmd_simulate(const Common& c) {
    auto cfg = c.config.empty() ? sim::CohortConfig{} : sim::cohort_config_from_json(read_json(c.config));
    if (c.seed) cfg.seed = *c.seed;
    if (c.preset) cfg.preset = sim::parse_preset(*c.preset);
    cfg.validate();
    const auto g = sim::generate_cohort(cfg);
    store_dataset(g.dataset, c.out);
    nlohmann::json bodies = nlohmann::json::array();
    for (std::size_t i = 0; i < g.bodies.size(); ++i)
        bodies.push_back({{"subject", static_cast<int>(i) + 1},
                          {"fat_rate", g.bodies[i].fat_rate},
                          {"muscle_rate", g.bodies[i].muscle_rate},
                          {"shape_scale", g.bodies[i].shape_scale}});
    write_json(bodies, fs::path(c.out) / "bodies.json");
    std::cerr << "wrote " << g.dataset.records.size() << " recordings to " << c.out << '\n';
    return 0;
}

int cmd_train(const Common& c, const std::string& dataset) {
    auto cfg = pipeline_from(c);
    cfg.validate();
    const std::uint64_t seed = c.seed.value_or(1);
    const auto ds = load_dataset(dataset);
    const auto [train, test] = split_dataset(ds, cfg.n_train, cfg.n_test, seed);

    const auto bank = harness::build_feature_bank(train, cfg);
    std::vector<int> labels;
    for (const auto& k : bank.keys) labels.push_back(k.subject);
    auto tcfg = cfg.train;
    tcfg.seed = seed;
    const auto model = classifier::train_identifier(bank.full, labels, tcfg);

    auto j = classifier::to_json(model);
    j["pipeline"] = harness::to_json(cfg);
    j["subject_labels"] = ds.subject_labels;
    j["split_seed"] = seed;
    const fs::path path = fs::path(c.out) / "model.json";
    write_json(j, path);

    const auto test_bank = harness::build_feature_bank(test, cfg);
    std::size_t right = 0;
    for (std::size_t i = 0; i < test_bank.full.size(); ++i)
        right += classifier::identify(model, test_bank.full[i]).best_class == test_bank.keys[i].subject;
    std::cerr << "trained " << model.n_classes() << " classes, threshold " << model.threshold
              << ", held-out accuracy " << static_cast<double>(right) / static_cast<double>(test_bank.full.size())
              << "; model at " << path.string() << '\n';
    return 0;
}

struct LoadedModel {
    classifier::IdentifierModel model;
    harness::PipelineConfig pipeline;
};

LoadedModel load_model(const std::string& path) {
    const auto j = read_json(path);
    LoadedModel m{classifier::identifier_from_json(j), {}};
    if (j.contains("pipeline")) m.pipeline = harness::pipeline_config_from_json(j["pipeline"]);
    return m;
}

int cmd_identify(const std::string& model_path, const std::string& csi_path, std::optional<double> window) {
    auto m = load_model(model_path);
    if (window) m.pipeline.window = window;
    const auto series = load_csv(csi_path);
    const auto decision = classifier::identify(m.model, harness::run_pipeline(series, m.pipeline));
    std::cout << classifier::to_json(decision, m.model.threshold).dump() << '\n';
    return 0;
}

struct EvalArgs {
    std::string mode;
    std::string dataset;
    std::string cohort;
    std::vector<int> levels;
    std::vector<double> windows;
    int k = 0;
    int draws = 100;
    unsigned threads = 0;
};

int cmd_evaluate(const Common& c, const EvalArgs& a) {
    auto cfg = pipeline_from(c);
    cfg.threads = a.threads ? a.threads : std::max(1u, std::thread::hardware_concurrency());
    cfg.validate();
    const std::uint64_t seed = c.seed.value_or(1);
    std::vector<double> windows = a.windows;
    if (a.mode == "window" && windows.empty()) windows = {0.05, 0.1, 0.2, 1.0, 5.0};

    const auto t0 = std::chrono::steady_clock::now();
    harness::FeatureBank bank;
    if (!a.dataset.empty()) {
        bank = harness::build_feature_bank(load_dataset(a.dataset), cfg, windows);
    } else {
        auto cc = a.cohort.empty() ? sim::CohortConfig{} : sim::cohort_config_from_json(read_json(a.cohort));
        if (c.preset) cc.preset = sim::parse_preset(*c.preset);
        bank = harness::build_feature_bank(sim::Cohort(cc), cfg, windows);
    }
    const auto n = static_cast<int>(bank.n_subjects);

    harness::EvaluationReport report;
    if (a.mode == "volume") {
        auto ks = a.levels.empty() ? std::vector<int>{2, 5, 10, 20, 30} : a.levels;
        if (a.levels.empty()) {
            ks.erase(std::remove_if(ks.begin(), ks.end(), [&](int k) { return k >= n; }), ks.end());
            ks.push_back(n);
        }
        report = harness::evaluate_volume_sweep(bank, ks, a.draws, cfg, seed);
    } else if (a.mode == "rejection") {
        auto ks = a.levels.empty() ? std::vector<int>{2, 10, 20, n - 1} : a.levels;
        if (a.levels.empty()) {
            ks.erase(std::remove_if(ks.begin(), ks.end(), [&](int k) { return k > n - 1; }), ks.end());
            std::sort(ks.begin(), ks.end());
            ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
        }
        report = harness::evaluate_rejection(bank, ks, a.draws, cfg, seed);
    } else if (a.mode == "window") {
        report = harness::evaluate_sampling_time(bank, windows, a.k ? a.k : n, a.draws, cfg, seed);
    } else {
        std::vector<int> cuts = a.levels;
        if (cuts.empty()) {
            const int sessions = static_cast<int>(bank.keys.size()) / std::max(1, n);
            for (int j = 1; j < sessions; ++j) cuts.push_back(j);
        }
        report = harness::evaluate_drift(bank, cuts, cfg);
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    fs::create_directories(c.out);
    harness::write_report(report, c.out);
    std::cout << harness::report_csv(report);
    std::cerr << report.mode << " evaluation took " << seconds << " s; reports in " << c.out << '\n';
    return 0;
}

int cmd_bench(const Common& c, const std::string& model_path, const std::string& csi_path, int reps) {
    harness::PipelineConfig cfg = pipeline_from(c);
    classifier::IdentifierModel model;
    CsiSeries window;
    if (!model_path.empty()) {
        auto m = load_model(model_path);
        model = std::move(m.model);
        if (c.config.empty()) cfg = m.pipeline;
    }
    if (!csi_path.empty()) window = load_csv(csi_path);
    if (model_path.empty() || csi_path.empty()) {
        // Small 30-subject cohort for a self-contained measurement.
        sim::CohortConfig cc;
        cc.sessions_per_subject = 2;
        cc.duration = 1.0;
        if (c.seed) cc.seed = *c.seed;
        if (c.preset) cc.preset = sim::parse_preset(*c.preset);
        const sim::Cohort cohort(cc);
        if (model_path.empty()) {
            auto train_cfg = cfg;
            train_cfg.window.reset();
            const auto bank = harness::build_feature_bank(cohort, train_cfg);
            std::vector<int> labels;
            for (const auto& k : bank.keys) labels.push_back(k.subject);
            model = classifier::train_identifier(bank.full, labels, cfg.train);
        }
        if (csi_path.empty()) window = cohort.series(1, 1).head(harness::window_frames(0.2, cc.sample_rate));
    }
    cfg.window.reset();
    const auto report = harness::bench_pipeline(window, model, cfg, reps);
    const auto j = harness::to_json(report);
    std::cout << j.dump(2) << '\n';
    if (!c.out.empty()) write_json(j, fs::path(c.out) / "bench.json");
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Wi-Fi CSI person identification toolkit"};
    app.require_subcommand(1);

    Common sim_c, train_c, eval_c, bench_c;
    auto* simulate = app.add_subcommand("simulate", "generate a synthetic cohort dataset");
    add_common(simulate, sim_c, true);

    std::string train_dataset;
    auto* train = app.add_subcommand("train", "train an identifier on a dataset's training split");
    add_common(train, train_c, true);
    train->add_option("--dataset", train_dataset, "dataset directory")->required()->check(CLI::ExistingDirectory);

    std::string id_model, id_csi;
    std::optional<double> id_window;
    auto* identify = app.add_subcommand("identify", "identify the person in one CSI recording");
    identify->add_option("--model", id_model, "model JSON")->required()->check(CLI::ExistingFile);
    identify->add_option("--csi", id_csi, "CSI CSV recording")->required()->check(CLI::ExistingFile);
    identify->add_option("--window", id_window, "seconds of the recording to use");

    EvalArgs ea;
    auto* evaluate = app.add_subcommand("evaluate", "run an evaluation protocol");
    add_common(evaluate, eval_c, true);
    evaluate->add_option("mode", ea.mode, "volume, rejection, window or drift")
        ->required()
        ->check(CLI::IsMember({"volume", "rejection", "window", "drift"}));
    auto* ds_opt = evaluate->add_option("--dataset", ea.dataset, "dataset directory")->check(CLI::ExistingDirectory);
    evaluate->add_option("--cohort", ea.cohort, "cohort JSON to simulate instead of a dataset")
        ->check(CLI::ExistingFile)
        ->excludes(ds_opt);
    evaluate->add_option("--levels", ea.levels, "user volumes k, or session cuts for drift")->delimiter(',');
    evaluate->add_option("--windows", ea.windows, "window lengths in seconds")->delimiter(',');
    evaluate->add_option("--k", ea.k, "user volume for the window sweep (default: all subjects)");
    evaluate->add_option("--draws", ea.draws, "random draws per level");
    evaluate->add_option("--threads", ea.threads, "worker threads (default: all cores)");

    std::string bench_model, bench_csi;
    int bench_reps = 100;
    auto* bench = app.add_subcommand("bench", "time the identification pipeline");
    add_common(bench, bench_c, false);
    bench->add_option("--model", bench_model, "model JSON (default: trained on a small synthetic cohort)")
        ->check(CLI::ExistingFile);
    bench->add_option("--csi", bench_csi, "CSI window to time (default: 0.2 s synthetic)")->check(CLI::ExistingFile);
    bench->add_option("--reps", bench_reps, "repetitions");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitInput;
    }

    try {
        if (*simulate) return cmd_simulate(sim_c);
        if (*train) return cmd_train(train_c, train_dataset);
        if (*identify) return cmd_identify(id_model, id_csi, id_window);
        if (*evaluate) return cmd_evaluate(eval_c, ea);
        if (*bench) return cmd_bench(bench_c, bench_model, bench_csi, bench_reps);
    } catch (const InvalidRange& e) {
        std::cerr << "wipin: " << e.what() << '\n';
        return kExitRange;
    } catch (const Error& e) {
        std::cerr << "wipin: " << e.what() << '\n';
        return kExitInput;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "wipin: " << e.what() << '\n';
        return kExitInput;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "wipin: " << e.what() << '\n';
        return kExitInput;
    }
    return 0;
}
