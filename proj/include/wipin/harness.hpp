#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "wipin/classifier.hpp"
#include "wipin/csi.hpp"
#include "wipin/dsp.hpp"
#include "wipin/features.hpp"
#include "wipin/simulator.hpp"

namespace wipin::harness {

using features::FeatureVector;

struct PipelineConfig {
    dsp::ButterworthSpec filter;
    dsp::LowpassOptions lowpass;
    dsp::MitigationConfig mitigation;
    classifier::TrainConfig train;
    std::optional<double> window;  // seconds consumed per identification; full recording when unset
    std::size_t n_train = 20;      // sessions per subject used for training
    std::size_t n_test = 10;
    unsigned threads = 1;          // evaluation draws run in parallel when > 1

    void validate() const;
};

nlohmann::json to_json(const PipelineConfig& cfg);
PipelineConfig pipeline_config_from_json(const nlohmann::json& j);

/// amplitude -> low-pass -> multipath mitigation -> features. The filter's
/// sample rate follows the series. Warm-up rows are skipped when the series
/// is longer than twice the warm-up.
FeatureVector run_pipeline(const CsiSeries& series, const PipelineConfig& cfg);

/// Frames consumed by a window of `seconds` at `fs`; throws InvalidRange
/// below one frame.
std::size_t window_frames(double seconds, double fs);

/// Features of every record, computed once for the full recording and for
/// each requested window.
struct FeatureBank {
    std::vector<RecordKey> keys;
    std::vector<FeatureVector> full;
    std::vector<double> windows;                       // seconds
    std::vector<std::vector<FeatureVector>> windowed;  // [window][record]
    std::size_t n_subjects = 0;
    double sample_rate = 500.0;

    const std::vector<FeatureVector>& features_for(std::optional<double> window) const;
};

using SeriesSource = std::function<CsiSeries(std::size_t record)>;

FeatureBank build_feature_bank(std::size_t n_records, const SeriesSource& source, std::vector<RecordKey> keys,
                               const PipelineConfig& cfg, const std::vector<double>& windows = {});
FeatureBank build_feature_bank(const Dataset& ds, const PipelineConfig& cfg, const std::vector<double>& windows = {});
FeatureBank build_feature_bank(const sim::Cohort& cohort, const PipelineConfig& cfg,
                               const std::vector<double>& windows = {});

// ---------------------------------------------------------------------------
// Reports

struct Quartiles {
    double min = 0, q1 = 0, q2 = 0, q3 = 0, max = 0;
};

/// Linear-interpolation quartiles of the values.
Quartiles quartiles(std::vector<double> values);

/// One scored test instance.
struct InstanceLog {
    std::string mode;     // volume | rejection | window | drift
    double level = 0;     // k, window seconds or session cut
    int draw = 0;
    int subject = 0;      // dataset subject id
    int session = 0;
    int truth = 0;        // class id within the draw, 0 for an attacker
    int predicted = 0;    // argmax class id within the draw
    double confidence = 0;
    bool accepted = true;
    bool correct = false; // volume/window/drift: predicted == truth; rejection: TP or TN
};

struct ReportRow {
    double level = 0;  // k, window seconds or session cut
    int k = 0;
    int n_draws = 0;
    double mean_accuracy = 0;
    Quartiles accuracy;
    // rejection only
    double mean_tpr = 0, mean_tnr = 0, mean_ba = 0;
    Quartiles ba;
    double mean_threshold = 0;
};

struct EvaluationReport {
    std::string mode;
    std::uint64_t seed = 0;
    std::vector<ReportRow> rows;
    std::vector<InstanceLog> instances;
    nlohmann::json metadata = nlohmann::json::object();
};

std::string report_csv(const EvaluationReport& r);
nlohmann::json report_json(const EvaluationReport& r);
std::string instances_csv(const EvaluationReport& r);
/// Writes <mode>_report.csv, <mode>_report.json and <mode>_instances.csv.
void write_report(const EvaluationReport& r, const std::filesystem::path& dir);

// ---------------------------------------------------------------------------
// Protocols

/// For each k, n_draws random k-subject subsets; train on their training
/// split and score accuracy on their test split.
EvaluationReport evaluate_volume_sweep(const FeatureBank& bank, const std::vector<int>& k_range, int n_draws,
                                       const PipelineConfig& cfg, std::uint64_t seed);

/// Threshold override for degenerate-threshold studies.
struct RejectionOptions {
    std::optional<double> forced_threshold;
};

/// k legal subjects train model and threshold; their test sessions score
/// TPR (accepted with the right identity), the test sessions of the other
/// N - k subjects score TNR (rejected).
EvaluationReport evaluate_rejection(const FeatureBank& bank, const std::vector<int>& k_range, int n_draws,
                                    const PipelineConfig& cfg, std::uint64_t seed, const RejectionOptions& opt = {});

/// Training on full recordings, testing on the first floor(w * fs) frames of
/// each test recording. The bank must hold every requested window.
EvaluationReport evaluate_sampling_time(const FeatureBank& bank, const std::vector<double>& windows, int k,
                                        int n_draws, const PipelineConfig& cfg, std::uint64_t seed);

/// Trains on sessions 1..j of every subject and tests on sessions > j, for
/// each cut j.
EvaluationReport evaluate_drift(const FeatureBank& bank, const std::vector<int>& cuts, const PipelineConfig& cfg);

/// Trains on all of `train` and tests on all of `test`; subjects are
/// matched by id.
EvaluationReport evaluate_transfer(const FeatureBank& train, const FeatureBank& test, const PipelineConfig& cfg);

// ---------------------------------------------------------------------------
// Timing

struct BenchReport {
    int n_reps = 0;
    std::size_t frames = 0;
    std::size_t n_classes = 0;
    double preprocess_ms = 0;  // medians
    double features_ms = 0;
    double identify_ms = 0;
    double total_ms = 0;
    nlohmann::json machine = nlohmann::json::object();
};

BenchReport bench_pipeline(const CsiSeries& window, const classifier::IdentifierModel& model,
                           const PipelineConfig& cfg, int n_reps);
nlohmann::json to_json(const BenchReport& r);

} // namespace wipin::harness
