#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "wipin/csi.hpp"
#include "wipin/random.hpp"

namespace wipin::sim {

struct PathComponent {
    Complex gain{1.0, 0.0};  // |gain| <= 1
    double delay = 0.0;      // seconds, >= 0
};

struct BodyProfile {
    double fat_rate = 0.2;     // [0.05, 0.45]
    double muscle_rate = 0.4;  // [0.2, 0.6]
    double shape_scale = 1.0;  // [0.8, 1.2]
    std::array<double, kSubcarriers> absorption{};

    /// Validates the ranges and derives the absorption curve.
    static BodyProfile from_parameters(double fat, double muscle, double shape);
};

inline constexpr double kFatMin = 0.05, kFatMax = 0.45;
inline constexpr double kMuscleMin = 0.2, kMuscleMax = 0.6;
inline constexpr double kShapeMin = 0.8, kShapeMax = 1.2;
inline constexpr double kAbsorptionRipple = 0.15;

/// base * (1 + 0.15 sin(2 pi (j/30) kappa + phi)), capped at 1, with
///   base  = clamp(0.9 - 0.5 fat + 0.2 muscle, (0, 1])
///   kappa = 1 + 2 (shape - 0.8) / 0.4       in [1, 3]
///   phi   = pi (fat + muscle)
std::array<double, kSubcarriers> absorption_curve(double fat, double muscle, double shape);

struct ChannelScenario {
    PathComponent los{{1.0, 0.0}, 0.0};
    std::vector<PathComponent> body_paths;     // delays below one tap (25 ns)
    std::vector<PathComponent> clutter_paths;  // any delay
    double noise_sigma = 0.0;     // std of complex AWGN per subcarrier and frame
    double jitter_sigma = 0.0;    // std of the per-frame common amplitude factor
    double breathing_amp = 0.0;   // relative modulation of body path gains
    double breathing_freq = 0.25; // Hz
    double breathing_phase = 0.0; // rad

    /// Throws InvalidInput on |gain| > 1, negative delays, body delays of
    /// one tap or more, or negative noise parameters.
    void validate(const SubcarrierGrid& grid) const;
};

/// Precomputed per-path phasors for one (scenario, body, grid) triple.
class ChannelKernel {
public:
    ChannelKernel(const ChannelScenario& scenario, const BodyProfile& body, const SubcarrierGrid& grid);

    /// Deterministic channel at time t (no noise).
    CsiFrame clean(double t) const;
    /// Channel at time t with jitter and AWGN drawn from rng.
    CsiFrame sample(double t, Rng& rng) const;

private:
    ChannelScenario scenario_;
    CsiFrame static_part_{};  // LOS + clutter
    CsiFrame body_part_{};    // sum of body paths, absorption applied
};

CsiFrame synthesize_frame(const ChannelScenario& scenario, const BodyProfile& body, double t,
                          const SubcarrierGrid& grid, Rng& rng);

/// floor(duration * fs) frames at t = i / fs with fresh noise per frame.
CsiSeries synthesize_series(const ChannelScenario& scenario, const BodyProfile& body, double duration, double fs,
                            const SubcarrierGrid& grid, std::uint64_t seed);

enum class NoisePreset { Clean, Lab, Corridor };

NoisePreset parse_preset(const std::string& name);
std::string to_string(NoisePreset preset);

struct PresetParameters {
    double noise_sigma;
    double jitter_sigma;
    double clutter_scale;  // multiplies the mean and cap of the clutter path count
};

PresetParameters preset_parameters(NoisePreset preset);

struct CohortConfig {
    std::size_t n_subjects = 30;
    std::size_t sessions_per_subject = 30;
    double duration = 5.0;      // s
    double sample_rate = 500.0; // Hz
    NoisePreset preset = NoisePreset::Lab;
    std::uint64_t seed = 1;
    double min_separation = 0.02;  // in (fat, muscle, shape) space
    double center_frequency = 5.0e9;
    double bandwidth = 40.0e6;

    void validate() const;
};

nlohmann::json to_json(const CohortConfig& cfg);
CohortConfig cohort_config_from_json(const nlohmann::json& j);

/// Environment shared by every session before per-session perturbation.
ChannelScenario base_scenario(NoisePreset preset, const SubcarrierGrid& grid = SubcarrierGrid{});

/// Deterministic cohort; series are synthesised on demand, so a 30 x 30
/// cohort never has to be resident in memory at once.
///
/// Seeds: body parameters use mix_seed(seed, 0xB0D7), the session scenario
/// mix_seed(seed, subject, session) and frame noise
/// mix_seed(seed ^ 0x5EED, subject, session).
class Cohort {
public:
    explicit Cohort(CohortConfig cfg);

    const CohortConfig& config() const noexcept { return cfg_; }
    const std::vector<BodyProfile>& bodies() const noexcept { return bodies_; }
    const SubcarrierGrid& grid() const noexcept { return grid_; }

    /// Session scenario of subject (1-based) and session (1-based).
    ChannelScenario scenario(int subject, int session) const;
    CsiSeries series(int subject, int session) const;
    static std::string label(int subject);

private:
    CohortConfig cfg_;
    SubcarrierGrid grid_;
    std::vector<BodyProfile> bodies_;
};

/// Draws `n` body parameter triples with pairwise distance >= min_separation.
/// Throws CohortError if a subject cannot be placed after bounded retries.
std::vector<BodyProfile> draw_bodies(std::size_t n, double min_separation, std::uint64_t seed);

struct GeneratedCohort {
    Dataset dataset;
    std::vector<BodyProfile> bodies;
};

GeneratedCohort generate_cohort(const CohortConfig& cfg);

} // namespace wipin::sim
