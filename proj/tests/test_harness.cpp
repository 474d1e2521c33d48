#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "wipin/error.hpp"
#include "wipin/harness.hpp"

using namespace wipin;
using namespace wipin::harness;

namespace {

sim::CohortConfig small_cohort() {
    sim::CohortConfig c;
    c.n_subjects = 6;
    c.sessions_per_subject = 6;
    c.duration = 0.6;
    c.seed = 5;
    return c;
}

PipelineConfig small_pipeline() {
    PipelineConfig p;
    p.n_train = 4;
    p.n_test = 2;
    return p;
}

const FeatureBank& shared_bank() {
    static const FeatureBank bank = [] {
        const sim::Cohort cohort(small_cohort());
        return build_feature_bank(cohort, small_pipeline(), {0.2, 0.6});
    }();
    return bank;
}

} // namespace

TEST_CASE("window length in frames") {
    CHECK(window_frames(0.2, 500.0) == 100);
    CHECK(window_frames(5.0, 500.0) == 2500);
    CHECK(window_frames(0.002, 500.0) == 1);
    CHECK_THROWS_AS(window_frames(0.001, 500.0), InvalidRange);
    CHECK_THROWS_AS(window_frames(0.0, 500.0), InvalidRange);
}

TEST_CASE("pipeline config json") {
    auto cfg = small_pipeline();
    cfg.window = 0.5;
    cfg.lowpass.init = dsp::FilterInit::Zero;
    cfg.train.c = 3.0;
    const auto back = pipeline_config_from_json(nlohmann::json::parse(to_json(cfg).dump()));
    CHECK(to_json(back) == to_json(cfg));
    CHECK(back.window == std::optional<double>(0.5));
    CHECK(back.lowpass.init == dsp::FilterInit::Zero);

    CHECK_THROWS_AS(pipeline_config_from_json({{"lowpass", {{"init", "warm"}}}}), ParseError);
    CHECK_THROWS_AS(pipeline_config_from_json({{"n_train", "x"}}), ParseError);
    PipelineConfig bad;
    bad.window = -1.0;
    CHECK_THROWS_AS(bad.validate(), InvalidRange);
}

TEST_CASE("pipeline on a constant recording") {
    CsiSeries s;
    CsiFrame f{};
    f.fill(Complex(0.0, 2.0));
    s.frames.assign(500, f);
    const auto x = run_pipeline(s, PipelineConfig{});
    for (std::size_t k = 0; k < kSubcarriers; ++k) CHECK(x[k] == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(std::abs(x[features::kProfileStd]) < 1e-9);
    CHECK_THROWS_AS(run_pipeline(CsiSeries{}, PipelineConfig{}), EmptyInput);
}

TEST_CASE("pipeline windows take the leading frames") {
    const sim::Cohort cohort(small_cohort());
    const auto s = cohort.series(2, 3);
    auto cfg = small_pipeline();
    const auto full = run_pipeline(s, cfg);
    cfg.window = 0.6;
    CHECK(run_pipeline(s, cfg) == full);
    cfg.window = 0.2;
    const auto w = run_pipeline(s, cfg);
    cfg.window.reset();
    CHECK(w == run_pipeline(s.head(100), cfg));
    CHECK(w != full);
}

TEST_CASE("feature bank") {
    const auto& bank = shared_bank();
    CHECK(bank.n_subjects == 6);
    CHECK(bank.keys.size() == 36);
    CHECK(bank.full.size() == 36);
    CHECK(bank.features_for(std::nullopt).size() == 36);
    CHECK(bank.features_for(0.2).size() == 36);
    CHECK(bank.features_for(0.6) == bank.full);
    CHECK_THROWS_AS(bank.features_for(0.3), InvalidRange);

    const sim::Cohort cohort(small_cohort());
    auto cfg = small_pipeline();
    cfg.threads = 3;
    const auto again = build_feature_bank(cohort, cfg, {0.2, 0.6});
    CHECK(again.full == bank.full);
    CHECK(again.keys.size() == bank.keys.size());
    for (std::size_t i = 0; i < bank.keys.size(); ++i) {
        CHECK(again.keys[i].subject == bank.keys[i].subject);
        CHECK(again.keys[i].session == bank.keys[i].session);
    }
}

TEST_CASE("quartiles") {
    const auto q = quartiles({4.0, 1.0, 3.0, 2.0, 5.0});
    CHECK(q.min == 1.0);
    CHECK(q.q1 == 2.0);
    CHECK(q.q2 == 3.0);
    CHECK(q.q3 == 4.0);
    CHECK(q.max == 5.0);
    CHECK(quartiles({1.0, 2.0}).q2 == doctest::Approx(1.5));
}

TEST_CASE("volume sweep is deterministic and consistent with its instance log") {
    const auto& bank = shared_bank();
    auto cfg = small_pipeline();
    const auto a = evaluate_volume_sweep(bank, {2, 4, 6}, 5, cfg, 9);
    const auto b = evaluate_volume_sweep(bank, {2, 4, 6}, 5, cfg, 9);
    CHECK(report_csv(a) == report_csv(b));
    CHECK(instances_csv(a) == instances_csv(b));
    cfg.threads = 3;
    const auto c = evaluate_volume_sweep(bank, {2, 4, 6}, 5, cfg, 9);
    CHECK(report_csv(a) == report_csv(c));
    CHECK(report_json(a) == report_json(c));
    CHECK(instances_csv(a) == instances_csv(c));

    REQUIRE(a.rows.size() == 3);
    for (const auto& row : a.rows) {
        CHECK(row.n_draws == 5);
        std::map<int, std::pair<int, int>> per_draw;  // draw -> (correct, total)
        for (const auto& inst : a.instances)
            if (inst.level == row.level) {
                auto& [ok, n] = per_draw[inst.draw];
                ok += inst.correct;
                ++n;
                CHECK(inst.correct == (inst.predicted == inst.truth));
            }
        REQUIRE(per_draw.size() == 5);
        double mean = 0;
        for (const auto& [d, v] : per_draw) {
            CHECK(v.second == row.k * 2);
            mean += static_cast<double>(v.first) / v.second / 5.0;
        }
        CHECK(row.mean_accuracy == doctest::Approx(mean).epsilon(1e-12));
        CHECK(row.accuracy.min <= row.accuracy.q2);
        CHECK(row.accuracy.q2 <= row.accuracy.max);
    }
    CHECK_THROWS_AS(evaluate_volume_sweep(bank, {1}, 5, cfg, 9), InvalidRange);
    CHECK_THROWS_AS(evaluate_volume_sweep(bank, {7}, 5, cfg, 9), InvalidRange);
    CHECK_THROWS_AS(evaluate_volume_sweep(bank, {2}, 0, cfg, 9), InvalidRange);
}

TEST_CASE("rejection study with forced thresholds") {
    const auto& bank = shared_bank();
    const auto cfg = small_pipeline();
    const auto none = evaluate_rejection(bank, {3}, 4, cfg, 2, {1.0 + 1e-9});
    CHECK(none.rows[0].mean_tpr == 0.0);
    CHECK(none.rows[0].mean_tnr == 1.0);
    CHECK(none.rows[0].mean_ba == doctest::Approx(0.5));

    const auto all = evaluate_rejection(bank, {3}, 4, cfg, 2, {0.0});
    CHECK(all.rows[0].mean_tnr == 0.0);
    CHECK(all.rows[0].mean_ba == doctest::Approx(0.5 * all.rows[0].mean_tpr));
    // accepting everything leaves the closed-set accuracy as the TPR
    const auto closed = evaluate_volume_sweep(bank, {3}, 4, cfg, 2);
    CHECK(all.rows[0].mean_tpr == doctest::Approx(closed.rows[0].mean_accuracy));

    const auto learned = evaluate_rejection(bank, {2, 5}, 3, cfg, 2);
    for (const auto& row : learned.rows) {
        CHECK(row.mean_threshold > 0.0);
        CHECK(row.mean_threshold <= 1.0);
        CHECK(row.mean_ba == doctest::Approx(0.5 * (row.mean_tpr + row.mean_tnr)));
    }
    for (const auto& inst : learned.instances)
        if (inst.truth == 0) CHECK(inst.correct == !inst.accepted);

    CHECK_THROWS_AS(evaluate_rejection(bank, {6}, 2, cfg, 2), InvalidRange);
    CHECK_THROWS_AS(evaluate_rejection(bank, {1}, 2, cfg, 2), InvalidRange);
}

TEST_CASE("full-length window matches the volume sweep") {
    const auto& bank = shared_bank();
    const auto cfg = small_pipeline();
    const auto w = evaluate_sampling_time(bank, {0.6, 0.2}, 4, 5, cfg, 11);
    const auto v = evaluate_volume_sweep(bank, {4}, 5, cfg, 11);
    REQUIRE(w.rows.size() == 2);
    CHECK(w.rows[0].mean_accuracy == v.rows[0].mean_accuracy);
    CHECK(w.metadata["frames_per_window"] == nlohmann::json::array({300, 100}));
    CHECK_THROWS_AS(evaluate_sampling_time(bank, {0.001}, 4, 5, cfg, 11), InvalidRange);
    CHECK_THROWS_AS(evaluate_sampling_time(bank, {0.3}, 4, 5, cfg, 11), InvalidRange);
}

TEST_CASE("drift and transfer") {
    const auto& bank = shared_bank();
    const auto cfg = small_pipeline();
    const auto d = evaluate_drift(bank, {1, 3, 5}, cfg);
    REQUIRE(d.rows.size() == 3);
    std::size_t tested = 0;
    for (const auto& inst : d.instances)
        if (inst.level == 3) {
            CHECK(inst.session > 3);
            ++tested;
        }
    CHECK(tested == 6 * 3);
    CHECK_THROWS_AS(evaluate_drift(bank, {6}, cfg), InvalidRange);
    CHECK_THROWS_AS(evaluate_drift(bank, {0}, cfg), InvalidRange);

    const auto t = evaluate_transfer(bank, bank, cfg);
    REQUIRE(t.rows.size() == 1);
    CHECK(t.rows[0].mean_accuracy >= 0.0);
}

TEST_CASE("report files") {
    const auto& bank = shared_bank();
    const auto r = evaluate_volume_sweep(bank, {2}, 2, small_pipeline(), 1);
    const auto dir = std::filesystem::temp_directory_path() / "wipin_test_reports";
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    write_report(r, dir);
    for (const char* name : {"volume_report.csv", "volume_report.json", "volume_instances.csv"})
        CHECK(std::filesystem::exists(dir / name));
    std::ifstream in(dir / "volume_report.json");
    const auto j = nlohmann::json::parse(in);
    CHECK(j["mode"] == "volume");
    CHECK(j["rows"].size() == 1);
    std::ifstream csv(dir / "volume_report.csv");
    std::stringstream buf;
    buf << csv.rdbuf();
    CHECK(buf.str() == report_csv(r));
}

TEST_CASE("bench") {
    const sim::Cohort cohort(small_cohort());
    const auto& bank = shared_bank();
    std::vector<FeatureVector> x;
    std::vector<int> y;
    for (std::size_t i = 0; i < bank.keys.size(); ++i) {
        x.push_back(bank.full[i]);
        y.push_back(bank.keys[i].subject);
    }
    const auto model = classifier::train_identifier(x, y, {});
    const auto window = cohort.series(1, 1).head(100);
    const auto b = bench_pipeline(window, model, small_pipeline(), 5);
    CHECK(b.n_reps == 5);
    CHECK(b.frames == 100);
    CHECK(b.n_classes == 6);
    CHECK(b.total_ms > 0.0);
    CHECK(b.preprocess_ms >= 0.0);
    CHECK(b.identify_ms >= 0.0);
    const auto j = to_json(b);
    CHECK(j["median_ms"].contains("total"));
    CHECK_THROWS_AS(bench_pipeline(window, model, small_pipeline(), 0), InvalidRange);
}

TEST_CASE("pipeline examples on clean channels") {
    const SubcarrierGrid grid;
    sim::ChannelScenario los;
    los.breathing_amp = 0.0;
    const auto body = sim::BodyProfile::from_parameters(0.2, 0.4, 1.0);
    const auto flat = run_pipeline(sim::synthesize_series(los, body, 1.0, 500.0, grid, 1), PipelineConfig{});
    for (std::size_t k = 1; k < kSubcarriers; ++k) CHECK(std::abs(flat[k] - flat[0]) <= 1e-6);

    // breathing makes one second a non-stationary slice, so switch it off
    auto clean = sim::base_scenario(sim::NoisePreset::Clean, grid);
    clean.breathing_amp = 0.0;
    const auto series = sim::synthesize_series(clean, body, 5.0, 500.0, grid, 2);
    const auto full = run_pipeline(series, PipelineConfig{});
    const auto second = run_pipeline(series.head(500), PipelineConfig{});
    for (std::size_t k = 0; k < kSubcarriers; ++k) CHECK(std::abs(second[k] - full[k]) <= 0.01 * std::abs(full[k]));

    const auto other = sim::BodyProfile::from_parameters(0.3, 0.5, 0.9);
    const auto y = run_pipeline(sim::synthesize_series(clean, other, 5.0, 500.0, grid, 2), PipelineConfig{});
    double largest = 0;
    for (std::size_t i = 0; i < features::kFeatures; ++i) largest = std::max(largest, std::abs(y[i] - full[i]));
    CHECK(largest >= 10 * std::numeric_limits<double>::epsilon());
}

TEST_CASE("every draw at k = N uses the same subjects") {
    const auto r = evaluate_volume_sweep(shared_bank(), {6}, 4, small_pipeline(), 3);
    CHECK(r.rows[0].accuracy.min == r.rows[0].accuracy.max);
}

TEST_CASE("clean cohort") {
    auto cc = small_cohort();
    cc.preset = sim::NoisePreset::Clean;
    cc.duration = 2.0;
    const auto bank = build_feature_bank(sim::Cohort(cc), small_pipeline(), {0.05, 0.1, 0.2, 1.0, 2.0});
    const auto v = evaluate_volume_sweep(bank, {2}, 20, small_pipeline(), 4);
    CHECK(v.rows[0].mean_accuracy == 1.0);

    const auto w = evaluate_sampling_time(bank, {0.05, 0.1, 0.2, 1.0, 2.0}, 6, 10, small_pipeline(), 4);
    int inversions = 0;
    for (std::size_t i = 1; i < w.rows.size(); ++i) {
        const double drop = w.rows[i - 1].mean_accuracy - w.rows[i].mean_accuracy;
        if (drop > 0) {
            ++inversions;
            CHECK(drop <= 0.01);
        }
    }
    CHECK(inversions <= 1);
}

TEST_CASE("bench medians are stable") {
    const auto& bank = shared_bank();
    std::vector<FeatureVector> x;
    std::vector<int> y;
    for (std::size_t i = 0; i < bank.keys.size(); ++i) {
        x.push_back(bank.full[i]);
        y.push_back(bank.keys[i].subject);
    }
    const auto model = classifier::train_identifier(x, y, {});
    const auto window = sim::Cohort(small_cohort()).series(1, 1).head(100);
    const auto one = bench_pipeline(window, model, small_pipeline(), 1);
    const auto many = bench_pipeline(window, model, small_pipeline(), 100);
    CHECK(one.total_ms <= 5.0 * many.total_ms);
    CHECK(many.total_ms <= 5.0 * one.total_ms);
}
