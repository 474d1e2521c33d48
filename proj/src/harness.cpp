#include "wipin/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include "wipin/error.hpp"
#include "wipin/format.hpp"
#include "wipin/random.hpp"

namespace wipin::harness {

void PipelineConfig::validate() const {
    if (filter.order < 1) throw InvalidSpec("Butterworth order must be at least 1");
    if (!(filter.cutoff > 0.0)) throw InvalidSpec("cutoff must be positive");
    mitigation.validate();
    train.validate();
    if (window && !(*window > 0.0)) throw InvalidRange("window must be positive");
    if (n_train < 1 || n_test < 1) throw InvalidInput("split needs at least one training and one test session");
}

nlohmann::json to_json(const PipelineConfig& cfg) {
    return {{"filter", {{"order", cfg.filter.order}, {"cutoff", cfg.filter.cutoff}}},
            {"lowpass",
             {{"init", cfg.lowpass.init == dsp::FilterInit::SteadyState ? "steady" : "zero"},
              {"zero_phase", cfg.lowpass.zero_phase},
              {"init_block", cfg.lowpass.init_block}}},
            {"mitigation",
             {{"keep_taps", cfg.mitigation.keep_taps}, {"suppression_divisor", cfg.mitigation.suppression_divisor}}},
            {"train",
             {{"c", cfg.train.c},
              {"tolerance", cfg.train.tolerance},
              {"max_epochs", cfg.train.max_epochs},
              {"seed", cfg.train.seed}}},
            {"window", cfg.window ? nlohmann::json(*cfg.window) : nlohmann::json(nullptr)},
            {"n_train", cfg.n_train},
            {"n_test", cfg.n_test}};
}

PipelineConfig pipeline_config_from_json(const nlohmann::json& j) {
    PipelineConfig c;
    try {
        if (j.contains("filter")) {
            const auto& f = j["filter"];
            c.filter.order = f.value("order", c.filter.order);
            c.filter.cutoff = f.value("cutoff", c.filter.cutoff);
        }
        if (j.contains("lowpass")) {
            const auto& l = j["lowpass"];
            const auto init = l.value("init", std::string("steady"));
            if (init != "steady" && init != "zero") throw ParseError("lowpass.init must be 'steady' or 'zero'");
            c.lowpass.init = init == "steady" ? dsp::FilterInit::SteadyState : dsp::FilterInit::Zero;
            c.lowpass.zero_phase = l.value("zero_phase", c.lowpass.zero_phase);
            c.lowpass.init_block = l.value("init_block", c.lowpass.init_block);
        }
        if (j.contains("mitigation")) {
            const auto& m = j["mitigation"];
            c.mitigation.keep_taps = m.value("keep_taps", c.mitigation.keep_taps);
            c.mitigation.suppression_divisor = m.value("suppression_divisor", c.mitigation.suppression_divisor);
        }
        if (j.contains("train")) {
            const auto& t = j["train"];
            c.train.c = t.value("c", c.train.c);
            c.train.tolerance = t.value("tolerance", c.train.tolerance);
            c.train.max_epochs = t.value("max_epochs", c.train.max_epochs);
            c.train.seed = t.value("seed", c.train.seed);
        }
        if (j.contains("window") && !j["window"].is_null()) c.window = j["window"].get<double>();
        c.n_train = j.value("n_train", c.n_train);
        c.n_test = j.value("n_test", c.n_test);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("pipeline config: ") + e.what());
    }
    c.validate();
    return c;
}

std::size_t window_frames(double seconds, double fs) {
    const double n = std::floor(seconds * fs + 1e-9);
    if (!(n >= 1.0)) throw InvalidRange("window of " + fmt_num(seconds) + " s holds no frame at " + fmt_num(fs) + " Hz");
    return static_cast<std::size_t>(n);
}

namespace {

struct Preprocessed {
    AmplitudeMatrix matrix;
    std::size_t first_row = 0;
};

Preprocessed preprocess(const CsiSeries& series, const PipelineConfig& cfg, const dsp::FilterCoefficients& coeffs,
                        const dsp::ButterworthSpec& spec) {
    const auto amp = amplitude(series);
    const auto filtered = dsp::apply_lowpass(amp, coeffs, cfg.lowpass);
    Preprocessed p{dsp::mitigate_series(filtered, cfg.mitigation), 0};
    const std::size_t warm = dsp::warmup_samples(spec);
    if (p.matrix.rows() > 2 * warm) p.first_row = warm;
    return p;
}

dsp::ButterworthSpec spec_for(const PipelineConfig& cfg, double fs) {
    auto spec = cfg.filter;
    spec.sample_rate = fs;
    return spec;
}

template <typename Fn>
void parallel_for(std::size_t n, unsigned threads, Fn&& fn) {
    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
    if (threads == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    {
        std::vector<std::jthread> pool;
        for (unsigned t = 0; t < threads; ++t)
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < n; i = next++) {
                    try {
                        fn(i);
                    } catch (...) {
                        std::lock_guard lock(error_mutex);
                        if (!error) error = std::current_exception();
                    }
                }
            });
    }
    if (error) std::rethrow_exception(error);
}

} // namespace

FeatureVector run_pipeline(const CsiSeries& series, const PipelineConfig& cfg) {
    if (series.empty()) throw EmptyInput("run_pipeline: empty series");
    const auto spec = spec_for(cfg, series.sample_rate);
    const auto coeffs = dsp::design_butterworth_lowpass(spec);
    if (cfg.window) {
        const auto n = window_frames(*cfg.window, series.sample_rate);
        const auto p = preprocess(series.head(n), cfg, coeffs, spec);
        return features::extract_features(p.matrix, p.first_row);
    }
    const auto p = preprocess(series, cfg, coeffs, spec);
    return features::extract_features(p.matrix, p.first_row);
}

const std::vector<FeatureVector>& FeatureBank::features_for(std::optional<double> window) const {
    if (!window) return full;
    for (std::size_t i = 0; i < windows.size(); ++i)
        if (windows[i] == *window) return windowed[i];
    throw InvalidRange("feature bank holds no " + fmt_num(*window) + " s window");
}

FeatureBank build_feature_bank(std::size_t n_records, const SeriesSource& source, std::vector<RecordKey> keys,
                               const PipelineConfig& cfg, const std::vector<double>& windows) {
    if (keys.size() != n_records) throw InvalidInput("one record key per record is required");
    FeatureBank bank;
    bank.keys = std::move(keys);
    bank.windows = windows;
    bank.full.resize(n_records);
    bank.windowed.assign(windows.size(), std::vector<FeatureVector>(n_records));
    int max_subject = 0;
    for (const auto& k : bank.keys) max_subject = std::max(max_subject, k.subject);
    bank.n_subjects = static_cast<std::size_t>(max_subject);

    std::vector<double> rates(n_records, 0.0);
    auto no_window = cfg;
    no_window.window.reset();
    parallel_for(n_records, cfg.threads, [&](std::size_t i) {
        const auto series = source(i);
        rates[i] = series.sample_rate;
        bank.full[i] = run_pipeline(series, no_window);
        for (std::size_t w = 0; w < windows.size(); ++w) {
            auto windowed = no_window;
            windowed.window = windows[w];
            bank.windowed[w][i] = run_pipeline(series, windowed);
        }
    });
    if (n_records) bank.sample_rate = rates.front();
    return bank;
}

FeatureBank build_feature_bank(const Dataset& ds, const PipelineConfig& cfg, const std::vector<double>& windows) {
    return build_feature_bank(
        ds.records.size(), [&](std::size_t i) { return ds.records[i].series; }, record_keys(ds), cfg, windows);
}

FeatureBank build_feature_bank(const sim::Cohort& cohort, const PipelineConfig& cfg,
                               const std::vector<double>& windows) {
    const auto sessions = cohort.config().sessions_per_subject;
    const auto n = cohort.config().n_subjects * sessions;
    std::vector<RecordKey> keys;
    keys.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
        keys.push_back({static_cast<int>(i / sessions) + 1, static_cast<int>(i % sessions) + 1});
    return build_feature_bank(
        n, [&](std::size_t i) { return cohort.series(keys[i].subject, keys[i].session); }, keys, cfg, windows);
}

// ---------------------------------------------------------------------------

Quartiles quartiles(std::vector<double> values) {
    if (values.empty()) return {};
    std::sort(values.begin(), values.end());
    return {values.front(), features::quantile_sorted(values, 0.25), features::quantile_sorted(values, 0.5),
            features::quantile_sorted(values, 0.75), values.back()};
}

namespace {

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

struct SplitView {
    // per subject id (1-based index into the vectors)
    std::vector<std::vector<std::size_t>> train;
    std::vector<std::vector<std::size_t>> test;
};

SplitView make_split(const FeatureBank& bank, const PipelineConfig& cfg, std::uint64_t seed) {
    const auto split = split_records(bank.keys, cfg.n_train, cfg.n_test, mix_seed(seed, 0x5B11ULL));
    SplitView v;
    v.train.resize(bank.n_subjects + 1);
    v.test.resize(bank.n_subjects + 1);
    for (auto i : split.train) v.train[static_cast<std::size_t>(bank.keys[i].subject)].push_back(i);
    for (auto i : split.test) v.test[static_cast<std::size_t>(bank.keys[i].subject)].push_back(i);
    return v;
}

std::vector<int> draw_subjects(std::size_t n_subjects, int k, int draw, std::uint64_t seed) {
    std::vector<int> all(n_subjects);
    std::iota(all.begin(), all.end(), 1);
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(k), static_cast<std::uint64_t>(draw)));
    shuffle(std::span<int>(all), rng);
    all.resize(static_cast<std::size_t>(k));
    std::sort(all.begin(), all.end());
    return all;
}

struct TrainingSet {
    std::vector<FeatureVector> x;
    std::vector<int> y;
};

TrainingSet gather(const FeatureBank& bank, const std::vector<int>& subjects,
                   const std::vector<std::vector<std::size_t>>& by_subject) {
    TrainingSet t;
    for (std::size_t c = 0; c < subjects.size(); ++c)
        for (auto i : by_subject[static_cast<std::size_t>(subjects[c])]) {
            t.x.push_back(bank.full[i]);
            t.y.push_back(static_cast<int>(c) + 1);
        }
    return t;
}

struct Trained {
    features::Normalizer norm;
    std::vector<classifier::SvmModel> models;
};

Trained train_models(const TrainingSet& t, const PipelineConfig& cfg) {
    Trained m;
    m.norm = features::fit_normalizer(t.x);
    std::vector<FeatureVector> xn;
    xn.reserve(t.x.size());
    for (const auto& x : t.x) xn.push_back(features::normalize(x, m.norm));
    auto train_cfg = cfg.train;
    train_cfg.threads = 1;
    m.models = classifier::train_one_vs_all(xn, t.y, train_cfg);
    return m;
}

struct DrawResult {
    double accuracy = 0, tpr = 0, tnr = 0, ba = 0, threshold = 0;
    std::vector<InstanceLog> logs;
};

// Scores the test records of the drawn subjects with argmax prediction.
DrawResult score_accuracy(const FeatureBank& bank, const std::vector<FeatureVector>& test_features,
                          const Trained& m, const std::vector<int>& subjects, const SplitView& split,
                          const std::string& mode, double level, int draw) {
    DrawResult r;
    std::size_t correct = 0, total = 0;
    for (std::size_t c = 0; c < subjects.size(); ++c)
        for (auto i : split.test[static_cast<std::size_t>(subjects[c])]) {
            const auto s = classifier::scores(m.models, features::normalize(test_features[i], m.norm));
            const int pred = classifier::predict(s);
            const auto p = classifier::softmax(s);
            InstanceLog log{mode, level, draw, bank.keys[i].subject, bank.keys[i].session, static_cast<int>(c) + 1,
                            pred, p[static_cast<std::size_t>(pred - 1)], true, pred == static_cast<int>(c) + 1};
            correct += log.correct ? 1 : 0;
            ++total;
            r.logs.push_back(std::move(log));
        }
    r.accuracy = total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;
    return r;
}

template <typename DrawFn>
std::vector<DrawResult> run_draws(int n_draws, unsigned threads, DrawFn&& fn) {
    std::vector<DrawResult> results(static_cast<std::size_t>(n_draws));
    parallel_for(results.size(), threads, [&](std::size_t d) { results[d] = fn(static_cast<int>(d)); });
    return results;
}

ReportRow summarize(double level, int k, const std::vector<DrawResult>& draws, bool rejection) {
    ReportRow row;
    row.level = level;
    row.k = k;
    row.n_draws = static_cast<int>(draws.size());
    std::vector<double> acc, tpr, tnr, ba, thr;
    for (const auto& d : draws) {
        acc.push_back(d.accuracy);
        tpr.push_back(d.tpr);
        tnr.push_back(d.tnr);
        ba.push_back(d.ba);
        thr.push_back(d.threshold);
    }
    row.mean_accuracy = mean_of(acc);
    row.accuracy = quartiles(acc);
    if (rejection) {
        row.mean_tpr = mean_of(tpr);
        row.mean_tnr = mean_of(tnr);
        row.mean_ba = 0.5 * row.mean_tpr + 0.5 * row.mean_tnr;
        row.ba = quartiles(ba);
        row.mean_threshold = mean_of(thr);
    }
    return row;
}

void append_logs(EvaluationReport& report, std::vector<DrawResult>& draws) {
    for (auto& d : draws)
        for (auto& l : d.logs) report.instances.push_back(std::move(l));
}

void check_k(int k, std::size_t lo, std::size_t hi, const char* what) {
    if (k < static_cast<int>(lo) || k > static_cast<int>(hi))
        throw InvalidRange(std::string(what) + ": k = " + std::to_string(k) + " outside [" + std::to_string(lo) +
                           ", " + std::to_string(hi) + "]");
}

} // namespace

EvaluationReport evaluate_volume_sweep(const FeatureBank& bank, const std::vector<int>& k_range, int n_draws,
                                       const PipelineConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    if (n_draws < 1) throw InvalidRange("n_draws must be positive");
    for (int k : k_range) check_k(k, 2, bank.n_subjects, "volume sweep");
    const auto split = make_split(bank, cfg, seed);

    EvaluationReport report;
    report.mode = "volume";
    report.seed = seed;
    for (int k : k_range) {
        auto draws = run_draws(n_draws, cfg.threads, [&](int d) {
            const auto subjects = draw_subjects(bank.n_subjects, k, d, seed);
            const auto m = train_models(gather(bank, subjects, split.train), cfg);
            return score_accuracy(bank, bank.full, m, subjects, split, "volume", k, d);
        });
        report.rows.push_back(summarize(k, k, draws, false));
        append_logs(report, draws);
    }
    return report;
}

EvaluationReport evaluate_rejection(const FeatureBank& bank, const std::vector<int>& k_range, int n_draws,
                                    const PipelineConfig& cfg, std::uint64_t seed, const RejectionOptions& opt) {
    cfg.validate();
    if (n_draws < 1) throw InvalidRange("n_draws must be positive");
    for (int k : k_range) check_k(k, 2, bank.n_subjects - 1, "rejection study");
    const auto split = make_split(bank, cfg, seed);

    EvaluationReport report;
    report.mode = "rejection";
    report.seed = seed;
    for (int k : k_range) {
        auto draws = run_draws(n_draws, cfg.threads, [&](int d) {
            const auto legal = draw_subjects(bank.n_subjects, k, d, seed);
            const auto training = gather(bank, legal, split.train);
            classifier::IdentifierModel model;
            {
                auto t = train_models(training, cfg);
                model.normalizer = t.norm;
                model.models = std::move(t.models);
            }
            if (opt.forced_threshold) {
                model.threshold = *opt.forced_threshold;
            } else {
                std::vector<FeatureVector> xn;
                for (const auto& x : training.x) xn.push_back(features::normalize(x, model.normalizer));
                model.threshold = classifier::learn_threshold(model.models, xn, training.y);
            }

            DrawResult r;
            r.threshold = model.threshold;
            std::vector<int> truth_of(bank.n_subjects + 1, 0);
            for (std::size_t c = 0; c < legal.size(); ++c) truth_of[static_cast<std::size_t>(legal[c])] = static_cast<int>(c) + 1;
            std::size_t tp = 0, n_legal = 0, tn = 0, n_attack = 0;
            for (std::size_t s = 1; s <= bank.n_subjects; ++s)
                for (auto i : split.test[s]) {
                    const auto dec = classifier::identify(model, bank.full[i]);
                    const int truth = truth_of[s];
                    const bool ok = truth ? (dec.accepted && dec.best_class == truth) : !dec.accepted;
                    if (truth) {
                        ++n_legal;
                        tp += ok ? 1 : 0;
                    } else {
                        ++n_attack;
                        tn += ok ? 1 : 0;
                    }
                    r.logs.push_back({"rejection", static_cast<double>(k), d, bank.keys[i].subject,
                                      bank.keys[i].session, truth, dec.best_class, dec.confidence, dec.accepted, ok});
                }
            r.tpr = n_legal ? static_cast<double>(tp) / static_cast<double>(n_legal) : 0.0;
            r.tnr = n_attack ? static_cast<double>(tn) / static_cast<double>(n_attack) : 0.0;
            r.ba = 0.5 * r.tpr + 0.5 * r.tnr;
            r.accuracy = r.ba;
            return r;
        });
        report.rows.push_back(summarize(k, k, draws, true));
        append_logs(report, draws);
    }
    return report;
}

EvaluationReport evaluate_sampling_time(const FeatureBank& bank, const std::vector<double>& windows, int k,
                                        int n_draws, const PipelineConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    if (n_draws < 1) throw InvalidRange("n_draws must be positive");
    check_k(k, 2, bank.n_subjects, "sampling-time sweep");
    for (double w : windows) window_frames(w, bank.sample_rate);
    const auto split = make_split(bank, cfg, seed);

    // Models depend only on the draw, so train once and score every window.
    std::vector<Trained> models(static_cast<std::size_t>(n_draws));
    std::vector<std::vector<int>> subjects(static_cast<std::size_t>(n_draws));
    parallel_for(models.size(), cfg.threads, [&](std::size_t d) {
        subjects[d] = draw_subjects(bank.n_subjects, k, static_cast<int>(d), seed);
        models[d] = train_models(gather(bank, subjects[d], split.train), cfg);
    });

    EvaluationReport report;
    report.mode = "window";
    report.seed = seed;
    for (double w : windows) {
        const auto& test = bank.features_for(w);
        auto draws = run_draws(n_draws, cfg.threads, [&](int d) {
            const auto i = static_cast<std::size_t>(d);
            return score_accuracy(bank, test, models[i], subjects[i], split, "window", w, d);
        });
        report.rows.push_back(summarize(w, k, draws, false));
        append_logs(report, draws);
    }
    report.metadata["frames_per_window"] = nlohmann::json::array();
    for (double w : windows) report.metadata["frames_per_window"].push_back(window_frames(w, bank.sample_rate));
    return report;
}

EvaluationReport evaluate_drift(const FeatureBank& bank, const std::vector<int>& cuts, const PipelineConfig& cfg) {
    cfg.validate();
    int max_session = 0;
    for (const auto& key : bank.keys) max_session = std::max(max_session, key.session);
    EvaluationReport report;
    report.mode = "drift";
    for (int cut : cuts) {
        if (cut < 1 || cut >= max_session)
            throw InvalidRange("session cut " + std::to_string(cut) + " leaves no training or no test session");
        SplitView split;
        split.train.resize(bank.n_subjects + 1);
        split.test.resize(bank.n_subjects + 1);
        for (std::size_t i = 0; i < bank.keys.size(); ++i) {
            const auto s = static_cast<std::size_t>(bank.keys[i].subject);
            (bank.keys[i].session <= cut ? split.train : split.test)[s].push_back(i);
        }
        std::vector<int> subjects(bank.n_subjects);
        std::iota(subjects.begin(), subjects.end(), 1);
        const auto m = train_models(gather(bank, subjects, split.train), cfg);
        std::vector<DrawResult> draws{score_accuracy(bank, bank.full, m, subjects, split, "drift", cut, 0)};
        report.rows.push_back(summarize(cut, static_cast<int>(bank.n_subjects), draws, false));
        append_logs(report, draws);
    }
    return report;
}

EvaluationReport evaluate_transfer(const FeatureBank& train, const FeatureBank& test, const PipelineConfig& cfg) {
    cfg.validate();
    if (train.n_subjects != test.n_subjects) throw InvalidRange("train and test datasets hold different subject counts");
    const std::size_t n = train.n_subjects;
    TrainingSet t;
    for (std::size_t i = 0; i < train.keys.size(); ++i) {
        t.x.push_back(train.full[i]);
        t.y.push_back(train.keys[i].subject);
    }
    const auto m = train_models(t, cfg);
    DrawResult r;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < test.keys.size(); ++i) {
        const auto s = classifier::scores(m.models, features::normalize(test.full[i], m.norm));
        const int pred = classifier::predict(s);
        const auto p = classifier::softmax(s);
        const bool ok = pred == test.keys[i].subject;
        correct += ok ? 1 : 0;
        r.logs.push_back({"transfer", static_cast<double>(n), 0, test.keys[i].subject, test.keys[i].session,
                          test.keys[i].subject, pred, p[static_cast<std::size_t>(pred - 1)], true, ok});
    }
    r.accuracy = test.keys.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(test.keys.size());
    EvaluationReport report;
    report.mode = "transfer";
    std::vector<DrawResult> draws{std::move(r)};
    report.rows.push_back(summarize(static_cast<double>(n), static_cast<int>(n), draws, false));
    append_logs(report, draws);
    return report;
}

// ---------------------------------------------------------------------------

std::string report_csv(const EvaluationReport& r) {
    std::ostringstream out;
    const bool rejection = r.mode == "rejection";
    // volume and rejection rows are keyed by k itself
    const bool keyed_by_k = r.mode == "volume" || rejection;
    const char* level = r.mode == "window" ? "window_s" : r.mode == "drift" ? "session_cut" : "level";
    if (!keyed_by_k) out << level << ',';
    out << "k,n_draws,mean_accuracy,acc_min,acc_q1,acc_q2,acc_q3,acc_max";
    if (rejection) out << ",mean_tpr,mean_tnr,mean_ba,ba_min,ba_q1,ba_q2,ba_q3,ba_max,mean_threshold";
    out << '\n';
    for (const auto& row : r.rows) {
        if (!keyed_by_k) out << fmt_num(row.level) << ',';
        out << row.k << ',' << row.n_draws << ',' << fmt_num(row.mean_accuracy) << ','
            << fmt_num(row.accuracy.min) << ',' << fmt_num(row.accuracy.q1) << ',' << fmt_num(row.accuracy.q2) << ','
            << fmt_num(row.accuracy.q3) << ',' << fmt_num(row.accuracy.max);
        if (rejection)
            out << ',' << fmt_num(row.mean_tpr) << ',' << fmt_num(row.mean_tnr) << ',' << fmt_num(row.mean_ba) << ','
                << fmt_num(row.ba.min) << ',' << fmt_num(row.ba.q1) << ',' << fmt_num(row.ba.q2) << ','
                << fmt_num(row.ba.q3) << ',' << fmt_num(row.ba.max) << ',' << fmt_num(row.mean_threshold);
        out << '\n';
    }
    return out.str();
}

nlohmann::json report_json(const EvaluationReport& r) {
    nlohmann::json rows = nlohmann::json::array();
    auto q = [](const Quartiles& v) {
        return nlohmann::json{{"min", v.min}, {"q1", v.q1}, {"q2", v.q2}, {"q3", v.q3}, {"max", v.max}};
    };
    for (const auto& row : r.rows) {
        nlohmann::json j = {{"level", row.level},
                            {"k", row.k},
                            {"n_draws", row.n_draws},
                            {"mean_accuracy", row.mean_accuracy},
                            {"accuracy", q(row.accuracy)}};
        if (r.mode == "rejection") {
            j["mean_tpr"] = row.mean_tpr;
            j["mean_tnr"] = row.mean_tnr;
            j["mean_ba"] = row.mean_ba;
            j["ba"] = q(row.ba);
            j["mean_threshold"] = row.mean_threshold;
        }
        rows.push_back(j);
    }
    return {{"mode", r.mode}, {"seed", r.seed}, {"rows", rows}, {"metadata", r.metadata}};
}

std::string instances_csv(const EvaluationReport& r) {
    std::ostringstream out;
    out << "mode,level,draw,subject,session,truth,predicted,confidence,accepted,correct\n";
    for (const auto& l : r.instances)
        out << l.mode << ',' << fmt_num(l.level) << ',' << l.draw << ',' << l.subject << ',' << l.session << ','
            << l.truth << ',' << l.predicted << ',' << fmt_num(l.confidence) << ',' << (l.accepted ? 1 : 0) << ','
            << (l.correct ? 1 : 0) << '\n';
    return out.str();
}

void write_report(const EvaluationReport& r, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    auto write = [&](const std::string& name, const std::string& text) {
        std::ofstream out(dir / name, std::ios::binary);
        if (!out) throw Error("cannot write '" + (dir / name).string() + "'");
        out << text;
    };
    write(r.mode + "_report.csv", report_csv(r));
    write(r.mode + "_report.json", report_json(r).dump(2) + "\n");
    write(r.mode + "_instances.csv", instances_csv(r));
}

// ---------------------------------------------------------------------------

BenchReport bench_pipeline(const CsiSeries& window, const classifier::IdentifierModel& model,
                           const PipelineConfig& cfg, int n_reps) {
    if (n_reps < 1) throw InvalidRange("n_reps must be positive");
    if (window.empty()) throw EmptyInput("bench_pipeline: empty window");
    using clock = std::chrono::steady_clock;
    auto ms = [](clock::duration d) { return std::chrono::duration<double, std::milli>(d).count(); };

    std::vector<double> pre, feat, ident, total;
    volatile double sink = 0.0;
    for (int rep = 0; rep < n_reps; ++rep) {
        const auto t0 = clock::now();
        const auto spec = spec_for(cfg, window.sample_rate);
        const auto coeffs = dsp::design_butterworth_lowpass(spec);
        const auto p = preprocess(window, cfg, coeffs, spec);
        const auto t1 = clock::now();
        const auto f = features::extract_features(p.matrix, p.first_row);
        const auto t2 = clock::now();
        const auto d = classifier::identify(model, f);
        const auto t3 = clock::now();
        sink = sink + d.confidence;
        pre.push_back(ms(t1 - t0));
        feat.push_back(ms(t2 - t1));
        ident.push_back(ms(t3 - t2));
        total.push_back(ms(t3 - t0));
    }
    auto median = [](std::vector<double> v) { return quartiles(std::move(v)).q2; };
    BenchReport r;
    r.n_reps = n_reps;
    r.frames = window.size();
    r.n_classes = model.n_classes();
    r.preprocess_ms = median(pre);
    r.features_ms = median(feat);
    r.identify_ms = median(ident);
    r.total_ms = median(total);
    r.machine = {{"hardware_threads", std::thread::hardware_concurrency()},
#if defined(__clang__)
                 {"compiler", "clang " __clang_version__},
#elif defined(__GNUC__)
                 {"compiler", "gcc " __VERSION__},
#else
                 {"compiler", "unknown"},
#endif
                 {"cplusplus", static_cast<long>(__cplusplus)}};
    return r;
}

nlohmann::json to_json(const BenchReport& r) {
    return {{"n_reps", r.n_reps},
            {"frames", r.frames},
            {"n_classes", r.n_classes},
            {"median_ms",
             {{"preprocess", r.preprocess_ms},
              {"features", r.features_ms},
              {"identify", r.identify_ms},
              {"total", r.total_ms}}},
            {"machine", r.machine}};
}

} // namespace wipin::harness
