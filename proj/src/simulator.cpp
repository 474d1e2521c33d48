#include "wipin/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "wipin/error.hpp"

namespace wipin::sim {

using std::numbers::pi;

namespace {

void check_range(double v, double lo, double hi, const char* what) {
    if (!(v >= lo && v <= hi))
        throw InvalidInput(std::string(what) + " " + std::to_string(v) + " outside [" + std::to_string(lo) + ", " +
                           std::to_string(hi) + "]");
}

Complex phasor(double frequency, double delay) {
    // e^{-j 2 pi f tau}; reduce the cycle count first to keep the angle small
    const double cycles = frequency * delay;
    const double frac = cycles - std::floor(cycles);
    return std::polar(1.0, -2.0 * pi * frac);
}

} // namespace

std::array<double, kSubcarriers> absorption_curve(double fat, double muscle, double shape) {
    const double base = std::clamp(0.9 - 0.5 * fat + 0.2 * muscle, 1e-6, 1.0);
    const double kappa = 1.0 + 2.0 * (shape - kShapeMin) / (kShapeMax - kShapeMin);
    const double phi = pi * (fat + muscle);
    std::array<double, kSubcarriers> curve{};
    for (std::size_t j = 0; j < kSubcarriers; ++j) {
        const double x = static_cast<double>(j) / static_cast<double>(kSubcarriers);
        const double v = base * (1.0 + kAbsorptionRipple * std::sin(2.0 * pi * x * kappa + phi));
        curve[j] = std::min(v, 1.0);
    }
    return curve;
}

BodyProfile BodyProfile::from_parameters(double fat, double muscle, double shape) {
    check_range(fat, kFatMin, kFatMax, "fat rate");
    check_range(muscle, kMuscleMin, kMuscleMax, "muscle rate");
    check_range(shape, kShapeMin, kShapeMax, "shape scale");
    BodyProfile b;
    b.fat_rate = fat;
    b.muscle_rate = muscle;
    b.shape_scale = shape;
    b.absorption = absorption_curve(fat, muscle, shape);
    return b;
}

void ChannelScenario::validate(const SubcarrierGrid& grid) const {
    auto check_path = [](const PathComponent& p, const char* kind) {
        if (!(std::abs(p.gain) <= 1.0 + 1e-12)) throw InvalidInput(std::string(kind) + " path gain exceeds 1");
        if (!(p.delay >= 0.0) || !std::isfinite(p.delay)) throw InvalidInput(std::string(kind) + " path delay must be >= 0");
    };
    check_path(los, "LOS");
    for (const auto& p : body_paths) {
        check_path(p, "body");
        if (!(p.delay < grid.tap_duration())) throw InvalidInput("body path delay must lie within the first tap");
    }
    for (const auto& p : clutter_paths) check_path(p, "clutter");
    if (!(noise_sigma >= 0.0) || !(jitter_sigma >= 0.0) || !(breathing_amp >= 0.0) || !(breathing_freq >= 0.0))
        throw InvalidInput("noise, jitter and breathing parameters must be non-negative");
}

ChannelKernel::ChannelKernel(const ChannelScenario& scenario, const BodyProfile& body, const SubcarrierGrid& grid)
    : scenario_(scenario) {
    scenario.validate(grid);
    for (std::size_t j = 0; j < kSubcarriers; ++j) {
        const double f = grid.frequency(j);
        Complex fixed = scenario.los.gain * phasor(f, scenario.los.delay);
        for (const auto& p : scenario.clutter_paths) fixed += p.gain * phasor(f, p.delay);
        Complex moving{0.0, 0.0};
        for (const auto& p : scenario.body_paths) moving += p.gain * phasor(f, p.delay);
        static_part_[j] = fixed;
        body_part_[j] = body.absorption[j] * moving;
    }
}

CsiFrame ChannelKernel::clean(double t) const {
    const double sway =
        1.0 + scenario_.breathing_amp * std::sin(2.0 * pi * scenario_.breathing_freq * t + scenario_.breathing_phase);
    CsiFrame h{};
    for (std::size_t j = 0; j < kSubcarriers; ++j) h[j] = static_part_[j] + sway * body_part_[j];
    return h;
}

CsiFrame ChannelKernel::sample(double t, Rng& rng) const {
    CsiFrame h = clean(t);
    if (scenario_.jitter_sigma > 0.0) {
        const double g = 1.0 + scenario_.jitter_sigma * rng.normal();
        for (auto& v : h) v *= g;
    }
    if (scenario_.noise_sigma > 0.0) {
        const double s = scenario_.noise_sigma / std::numbers::sqrt2;
        for (auto& v : h) {
            const double re = rng.normal();
            const double im = rng.normal();
            v += Complex(s * re, s * im);
        }
    }
    return h;
}

CsiFrame synthesize_frame(const ChannelScenario& scenario, const BodyProfile& body, double t,
                          const SubcarrierGrid& grid, Rng& rng) {
    return ChannelKernel(scenario, body, grid).sample(t, rng);
}

CsiSeries synthesize_series(const ChannelScenario& scenario, const BodyProfile& body, double duration, double fs,
                            const SubcarrierGrid& grid, std::uint64_t seed) {
    if (!(duration > 0.0) || !(fs > 0.0)) throw InvalidInput("duration and sample rate must be positive");
    const ChannelKernel kernel(scenario, body, grid);
    const auto n = static_cast<std::size_t>(std::floor(duration * fs + 1e-9));
    CsiSeries s;
    s.sample_rate = fs;
    s.grid = grid;
    s.frames.reserve(n);
    Rng rng(seed);
    for (std::size_t i = 0; i < n; ++i) s.frames.push_back(kernel.sample(static_cast<double>(i) / fs, rng));
    return s;
}

// ---------------------------------------------------------------------------
// Presets and cohorts

NoisePreset parse_preset(const std::string& name) {
    if (name == "clean") return NoisePreset::Clean;
    if (name == "lab") return NoisePreset::Lab;
    if (name == "corridor") return NoisePreset::Corridor;
    throw InvalidInput("unknown noise preset '" + name + "' (expected clean, lab or corridor)");
}

std::string to_string(NoisePreset preset) {
    switch (preset) {
    case NoisePreset::Clean: return "clean";
    case NoisePreset::Lab: return "lab";
    case NoisePreset::Corridor: return "corridor";
    }
    return "lab";
}

PresetParameters preset_parameters(NoisePreset preset) {
    switch (preset) {
    case NoisePreset::Clean: return {0.0, 0.0, 1.0};
    case NoisePreset::Lab: return {0.02, 0.05, 1.0};
    case NoisePreset::Corridor: return {0.05, 0.05, 3.0};
    }
    return {0.02, 0.05, 1.0};
}

namespace {

constexpr double kClutterMeanPaths = 2.0;
constexpr unsigned kClutterMaxPaths = 5;
constexpr double kClutterGainMin = 0.05, kClutterGainMax = 0.2;
constexpr double kClutterDelayMin = 50e-9, kClutterDelayMax = 400e-9;
constexpr double kBreathingFreq = 0.25;
constexpr double kBreathingAmp = 0.02;
constexpr double kLosGain = 0.35;
constexpr std::size_t kBodyRays = 80;
constexpr double kBodyRayGain = 1.0;
constexpr double kBodyDelayMin = 0.2e-9, kBodyDelayMax = 20e-9;

} // namespace

ChannelScenario base_scenario(NoisePreset preset, const SubcarrierGrid& grid) {
    const auto p = preset_parameters(preset);
    ChannelScenario s;
    // The body shadows the direct path and scatters most received energy in
    // a dense ray cluster inside the first tap. Ray phases are referenced to
    // the carrier so the cluster adds coherently at the band centre.
    s.los = {std::polar(kLosGain, 0.0), 0.0};
    s.body_paths.reserve(kBodyRays);
    for (std::size_t i = 0; i < kBodyRays; ++i) {
        const double tau = kBodyDelayMin + (kBodyDelayMax - kBodyDelayMin) * static_cast<double>(i) /
                                               static_cast<double>(kBodyRays - 1);
        const double cycles = grid.center_frequency() * tau;
        s.body_paths.push_back({std::polar(kBodyRayGain, 2.0 * pi * (cycles - std::floor(cycles))), tau});
    }
    s.noise_sigma = p.noise_sigma;
    s.jitter_sigma = p.jitter_sigma;
    s.breathing_amp = kBreathingAmp;
    s.breathing_freq = kBreathingFreq;
    return s;
}

void CohortConfig::validate() const {
    if (n_subjects < 2) throw InvalidInput("a cohort needs at least two subjects");
    if (sessions_per_subject < 1) throw InvalidInput("a cohort needs at least one session per subject");
    if (!(duration > 0.0) || !(sample_rate > 0.0)) throw InvalidInput("duration and sample rate must be positive");
    if (!(min_separation >= 0.0)) throw InvalidInput("minimum separation must be non-negative");
    if (duration * sample_rate < 1.0) throw InvalidInput("recordings must contain at least one frame");
}

nlohmann::json to_json(const CohortConfig& cfg) {
    return {{"n_subjects", cfg.n_subjects},
            {"sessions_per_subject", cfg.sessions_per_subject},
            {"duration", cfg.duration},
            {"sample_rate", cfg.sample_rate},
            {"preset", to_string(cfg.preset)},
            {"seed", cfg.seed},
            {"min_separation", cfg.min_separation},
            {"center_frequency", cfg.center_frequency},
            {"bandwidth", cfg.bandwidth}};
}

CohortConfig cohort_config_from_json(const nlohmann::json& j) {
    CohortConfig c;
    try {
        c.n_subjects = j.value("n_subjects", c.n_subjects);
        c.sessions_per_subject = j.value("sessions_per_subject", c.sessions_per_subject);
        c.duration = j.value("duration", c.duration);
        c.sample_rate = j.value("sample_rate", c.sample_rate);
        c.preset = parse_preset(j.value("preset", to_string(c.preset)));
        c.seed = j.value("seed", c.seed);
        c.min_separation = j.value("min_separation", c.min_separation);
        c.center_frequency = j.value("center_frequency", c.center_frequency);
        c.bandwidth = j.value("bandwidth", c.bandwidth);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("cohort config: ") + e.what());
    }
    c.validate();
    return c;
}

std::vector<BodyProfile> draw_bodies(std::size_t n, double min_separation, std::uint64_t seed) {
    constexpr int kAttempts = 20000;
    Rng rng(mix_seed(seed, 0xB0D7));
    std::vector<BodyProfile> bodies;
    bodies.reserve(n);
    for (std::size_t s = 0; s < n; ++s) {
        bool placed = false;
        for (int a = 0; a < kAttempts && !placed; ++a) {
            const double fat = rng.uniform(kFatMin, kFatMax);
            const double muscle = rng.uniform(kMuscleMin, kMuscleMax);
            const double shape = rng.uniform(kShapeMin, kShapeMax);
            placed = std::all_of(bodies.begin(), bodies.end(), [&](const BodyProfile& b) {
                const double d = std::hypot(fat - b.fat_rate, muscle - b.muscle_rate, shape - b.shape_scale);
                return d >= min_separation;
            });
            if (placed) bodies.push_back(BodyProfile::from_parameters(fat, muscle, shape));
        }
        if (!placed)
            throw CohortError("could not place subject " + std::to_string(s + 1) + " at separation " +
                              std::to_string(min_separation) + "; try a smaller separation");
    }
    return bodies;
}

Cohort::Cohort(CohortConfig cfg)
    : cfg_((cfg.validate(), cfg)),
      grid_(cfg.center_frequency, cfg.bandwidth),
      bodies_(draw_bodies(cfg.n_subjects, cfg.min_separation, cfg.seed)) {}

ChannelScenario Cohort::scenario(int subject, int session) const {
    if (subject < 1 || static_cast<std::size_t>(subject) > cfg_.n_subjects || session < 1 ||
        static_cast<std::size_t>(session) > cfg_.sessions_per_subject)
        throw InvalidInput("subject or session outside the cohort");
    const auto p = preset_parameters(cfg_.preset);
    ChannelScenario s = base_scenario(cfg_.preset, grid_);
    Rng rng(mix_seed(cfg_.seed, static_cast<std::uint64_t>(subject), static_cast<std::uint64_t>(session)));
    const auto cap = static_cast<unsigned>(std::lround(kClutterMaxPaths * p.clutter_scale));
    const unsigned count = std::min(rng.poisson(kClutterMeanPaths * p.clutter_scale), cap);
    for (unsigned i = 0; i < count; ++i) {
        const double gain = rng.uniform(kClutterGainMin, kClutterGainMax);
        const double phase = rng.uniform(0.0, 2.0 * pi);
        const double delay = rng.uniform(kClutterDelayMin, kClutterDelayMax);
        s.clutter_paths.push_back({std::polar(gain, phase), delay});
    }
    s.breathing_phase = rng.uniform(0.0, 2.0 * pi);
    return s;
}

std::string Cohort::label(int subject) {
    std::string s = std::to_string(subject);
    return "S" + std::string(s.size() < 2 ? 2 - s.size() : 0, '0') + s;
}

CsiSeries Cohort::series(int subject, int session) const {
    const auto sc = scenario(subject, session);
    auto s = synthesize_series(sc, bodies_[static_cast<std::size_t>(subject - 1)], cfg_.duration, cfg_.sample_rate,
                               grid_,
                               mix_seed(cfg_.seed ^ 0x5EEDULL, static_cast<std::uint64_t>(subject),
                                        static_cast<std::uint64_t>(session)));
    s.subject_label = label(subject);
    s.session_id = session;
    return s;
}

GeneratedCohort generate_cohort(const CohortConfig& cfg) {
    const Cohort cohort(cfg);
    std::vector<CsiSeries> series;
    series.reserve(cfg.n_subjects * cfg.sessions_per_subject);
    for (std::size_t s = 1; s <= cfg.n_subjects; ++s)
        for (std::size_t r = 1; r <= cfg.sessions_per_subject; ++r)
            series.push_back(cohort.series(static_cast<int>(s), static_cast<int>(r)));
    nlohmann::json provenance = {{"generator", "wipin-sim"}, {"config", to_json(cfg)}};
    nlohmann::json bodies = nlohmann::json::array();
    for (const auto& b : cohort.bodies())
        bodies.push_back({{"fat_rate", b.fat_rate}, {"muscle_rate", b.muscle_rate}, {"shape_scale", b.shape_scale}});
    provenance["bodies"] = bodies;
    return {make_dataset(std::move(series), std::move(provenance)), cohort.bodies()};
}

} // namespace wipin::sim
