#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "wipin/dsp.hpp"
#include "wipin/error.hpp"
#include "wipin/simulator.hpp"

using namespace wipin;
using namespace wipin::sim;
using std::numbers::pi;

namespace {

ChannelScenario quiet_scenario() {
    ChannelScenario s;
    s.breathing_amp = 0.0;
    return s;
}

BodyProfile typical_body() { return BodyProfile::from_parameters(0.2, 0.4, 1.0); }

dsp::Profile magnitudes(const CsiFrame& h) {
    dsp::Profile p{};
    for (std::size_t k = 0; k < kSubcarriers; ++k) p[k] = std::abs(h[k]);
    return p;
}

double norm(const dsp::Profile& a, const dsp::Profile& b) {
    double s = 0;
    for (std::size_t k = 0; k < kSubcarriers; ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
    return std::sqrt(s);
}

double norm(const dsp::Profile& a) { return norm(a, dsp::Profile{}); }

double max_gap(const BodyProfile& a, const BodyProfile& b) {
    double g = 0;
    for (std::size_t j = 0; j < kSubcarriers; ++j) g = std::max(g, std::abs(a.absorption[j] - b.absorption[j]));
    return g;
}

} // namespace

TEST_CASE("line of sight only") {
    Rng rng(1);
    const SubcarrierGrid grid;
    auto s = quiet_scenario();
    const auto h = synthesize_frame(s, typical_body(), 0.0, grid, rng);
    for (const auto& v : h) CHECK(std::abs(v - Complex(1.0, 0.0)) < 1e-15);

    s.los.delay = 25e-9;
    const auto g = synthesize_frame(s, typical_body(), 0.0, grid, rng);
    const Complex step = std::polar(1.0, -2.0 * pi * grid.spacing() * 25e-9);
    for (std::size_t k = 0; k < kSubcarriers; ++k) {
        CHECK(std::abs(std::abs(g[k]) - 1.0) < 1e-12);
        if (k > 0) CHECK(std::abs(g[k] - g[k - 1] * step) < 1e-9);
    }
}

TEST_CASE("two paths beat with a 10 MHz period") {
    Rng rng(1);
    auto s = quiet_scenario();
    s.clutter_paths.push_back({{0.5, 0.0}, 100e-9});
    const SubcarrierGrid grid(5e9, 30e6);  // 1 MHz spacing
    const auto h = synthesize_frame(s, typical_body(), 0.0, grid, rng);
    for (std::size_t k = 0; k < kSubcarriers; ++k) {
        const double f = grid.frequency(k);
        const double direct = std::abs(1.0 + 0.5 * std::exp(Complex(0.0, -2.0 * pi * f * 1e-7)));
        CHECK(std::abs(std::abs(h[k]) - direct) < 1e-9);
        CHECK(std::abs(h[k]) >= 0.5 - 1e-12);
        CHECK(std::abs(h[k]) <= 1.5 + 1e-12);
        if (k + 10 < kSubcarriers) CHECK(std::abs(std::abs(h[k]) - std::abs(h[k + 10])) < 1e-9);
    }
}

TEST_CASE("series length and determinism") {
    const SubcarrierGrid grid;
    const auto sc = base_scenario(NoisePreset::Lab);
    const auto a = synthesize_series(sc, typical_body(), 5.0, 500.0, grid, 9);
    CHECK(a.size() == 2500);
    const auto b = synthesize_series(sc, typical_body(), 5.0, 500.0, grid, 9);
    CHECK(a.frames == b.frames);
    const auto c = synthesize_series(sc, typical_body(), 5.0, 500.0, grid, 10);
    CHECK(a.frames != c.frames);
    CHECK_THROWS_AS(synthesize_series(sc, typical_body(), 0.0, 500.0, grid, 9), InvalidInput);
}

TEST_CASE("noiseless channel gives identical frames") {
    auto sc = base_scenario(NoisePreset::Clean);
    sc.breathing_amp = 0.0;
    sc.clutter_paths.push_back({{0.1, 0.3}, 120e-9});
    const auto s = synthesize_series(sc, typical_body(), 1.0, 500.0, SubcarrierGrid{}, 3);
    for (const auto& f : s.frames) CHECK(f == s.frames.front());
    const auto amp = amplitude(s);
    for (std::size_t r = 0; r < amp.rows(); ++r)
        for (std::size_t k = 0; k < kSubcarriers; ++k) CHECK(amp(r, k) == amp(0, k));
}

TEST_CASE("scenario validation") {
    const SubcarrierGrid grid;
    auto s = quiet_scenario();
    s.body_paths.push_back({{0.5, 0.0}, 25e-9});
    CHECK_THROWS_AS(s.validate(grid), InvalidInput);
    s.body_paths.back().delay = 24e-9;
    CHECK_NOTHROW(s.validate(grid));
    s.los.gain = {1.2, 0.0};
    CHECK_THROWS_AS(s.validate(grid), InvalidInput);
    s.los.gain = {1.0, 0.0};
    s.noise_sigma = -1.0;
    CHECK_THROWS_AS(s.validate(grid), InvalidInput);
    CHECK_NOTHROW(base_scenario(NoisePreset::Corridor).validate(grid));
}

TEST_CASE("absorption curve") {
    const auto a = absorption_curve(0.3, 0.5, 0.9);
    CHECK(a == absorption_curve(0.3, 0.5, 0.9));
    for (double fat = kFatMin; fat <= kFatMax; fat += 0.05)
        for (double muscle = kMuscleMin; muscle <= kMuscleMax; muscle += 0.05)
            for (double shape = kShapeMin; shape <= kShapeMax; shape += 0.05)
                for (double v : absorption_curve(fat, muscle, shape)) {
                    CHECK(v > 0.0);
                    CHECK(v <= 1.0);
                }
    CHECK_THROWS_AS(BodyProfile::from_parameters(0.5, 0.4, 1.0), InvalidInput);
    CHECK_THROWS_AS(BodyProfile::from_parameters(0.2, 0.1, 1.0), InvalidInput);
    CHECK_THROWS_AS(BodyProfile::from_parameters(0.2, 0.4, 1.3), InvalidInput);
}

TEST_CASE("mean absorption falls strictly as fat rises") {
    auto mean = [](const std::array<double, kSubcarriers>& c) {
        double s = 0;
        for (double v : c) s += v;
        return s / kSubcarriers;
    };
    for (double muscle = kMuscleMin; muscle <= kMuscleMax + 1e-9; muscle += 0.1)
        for (double shape = kShapeMin; shape <= kShapeMax + 1e-9; shape += 0.1) {
            double prev = 2.0;
            for (double fat = kFatMin; fat <= kFatMax + 1e-9; fat += 0.01) {
                const double m = mean(absorption_curve(fat, muscle, shape));
                CHECK(m < prev);
                prev = m;
            }
        }
}

TEST_CASE("well separated subjects have distinct curves") {
    // Sampled lower envelope of the worst-case gap between parameter triples
    // at least `delta` apart.
    const double delta = 0.3;
    Rng rng(41);
    double envelope = 1.0;
    for (int i = 0; i < 200000; ++i) {
        const double f1 = rng.uniform(kFatMin, kFatMax), m1 = rng.uniform(kMuscleMin, kMuscleMax),
                     s1 = rng.uniform(kShapeMin, kShapeMax);
        const double f2 = rng.uniform(kFatMin, kFatMax), m2 = rng.uniform(kMuscleMin, kMuscleMax),
                     s2 = rng.uniform(kShapeMin, kShapeMax);
        if (std::hypot(f1 - f2, m1 - m2, s1 - s2) < delta) continue;
        envelope = std::min(envelope, max_gap(BodyProfile::from_parameters(f1, m1, s1),
                                              BodyProfile::from_parameters(f2, m2, s2)));
    }
    REQUIRE(envelope > 0.0);
    for (std::uint64_t seed = 1; seed <= 200; ++seed) {
        const auto bodies = draw_bodies(2, delta, seed);
        CHECK(max_gap(bodies[0], bodies[1]) >= 0.5 * envelope);
    }
}

namespace {

double energy(const dsp::Profile& p) {
    double s = 0;
    for (double v : p) s += v * v;
    return s;
}

// LOS-dominated channel with a few short body paths; the absorption curve is
// flat so only the path delays shape the profile.
ChannelScenario short_body_scenario(Rng& rng, BodyProfile& body) {
    ChannelScenario s = quiet_scenario();
    const auto n = 1 + rng.below(4);
    for (std::size_t i = 0; i < n; ++i)
        s.body_paths.push_back({std::polar(rng.uniform(0.0, 0.3 / static_cast<double>(n)), rng.uniform(0.0, 2 * pi)),
                                rng.uniform(0.0, 0.5e-9)});
    body = typical_body();
    body.absorption.fill(rng.uniform(0.5, 1.0));
    return s;
}

} // namespace

TEST_CASE("short body paths keep their energy through mitigation") {
    const SubcarrierGrid grid;
    Rng rng(42);
    for (int rep = 0; rep < 500; ++rep) {
        BodyProfile body;
        const auto sc = short_body_scenario(rng, body);
        const auto before = magnitudes(ChannelKernel(sc, body, grid).clean(0.0));
        const auto after = dsp::mitigate_multipath(before);
        CHECK(std::abs(energy(after) - energy(before)) / energy(before) < 0.002);
    }
}

// The clutter stays small next to the channel so the amplitude responds
// linearly; the squared term has a constant part that lands in tap 0.
TEST_CASE("clutter at 100 ns is suppressed by the divisor") {
    const SubcarrierGrid grid;
    Rng rng(43);
    for (int rep = 0; rep < 500; ++rep) {
        BodyProfile body;
        const auto sc = short_body_scenario(rng, body);
        auto with = sc;
        with.clutter_paths.push_back({std::polar(rng.uniform(0.0005, 0.001), rng.uniform(0.0, 2 * pi)), 100e-9});
        const auto p0 = magnitudes(ChannelKernel(sc, body, grid).clean(0.0));
        const auto p1 = magnitudes(ChannelKernel(with, body, grid).clean(0.0));
        const double pre = norm(p0, p1);
        const double post = norm(dsp::mitigate_multipath(p0), dsp::mitigate_multipath(p1));
        CHECK(post < pre / 500.0);
    }
}

// The cohort geometry spreads the body cluster over most of the first tap and
// carries the absorption ripple, so both effects leak past tap 0. These
// bounds pin the measured leakage.
TEST_CASE("cohort geometry leakage") {
    const SubcarrierGrid grid;
    auto sc = base_scenario(NoisePreset::Clean, grid);
    sc.breathing_amp = 0.0;
    for (double fat : {0.05, 0.25, 0.45}) {
        const auto body = BodyProfile::from_parameters(fat, 0.4, 1.0);
        const auto before = magnitudes(ChannelKernel(sc, body, grid).clean(0.0));
        const auto after = dsp::mitigate_multipath(before);
        CHECK(std::abs(energy(after) - energy(before)) / energy(before) < 0.02);

        auto with = sc;
        with.clutter_paths.push_back({std::polar(0.05, 1.0), 100e-9});
        const auto p1 = magnitudes(ChannelKernel(with, body, grid).clean(0.0));
        CHECK(norm(after, dsp::mitigate_multipath(p1)) < 0.1 * norm(before, p1));
    }
}

TEST_CASE("presets") {
    CHECK(parse_preset("lab") == NoisePreset::Lab);
    CHECK(to_string(parse_preset("corridor")) == "corridor");
    CHECK_THROWS_AS(parse_preset("garden"), InvalidInput);
    const auto lab = preset_parameters(NoisePreset::Lab);
    CHECK(lab.noise_sigma == 0.02);
    CHECK(lab.jitter_sigma == 0.05);
    CHECK(preset_parameters(NoisePreset::Clean).noise_sigma == 0.0);
    CHECK(preset_parameters(NoisePreset::Corridor).clutter_scale == 3.0);
}

TEST_CASE("cohort structure") {
    CohortConfig cfg;
    cfg.n_subjects = 3;
    cfg.sessions_per_subject = 2;
    cfg.duration = 0.5;
    const auto g = generate_cohort(cfg);
    CHECK(g.dataset.records.size() == 6);
    CHECK(g.bodies.size() == 3);
    for (const auto& r : g.dataset.records) CHECK(r.series.size() == 250);
    const auto again = generate_cohort(cfg);
    for (std::size_t i = 0; i < 6; ++i) CHECK(g.dataset.records[i].series.frames == again.dataset.records[i].series.frames);

    const Cohort full(CohortConfig{});
    CHECK(full.bodies().size() == 30);
    CHECK(full.series(30, 30).size() == 2500);
    CHECK(full.series(30, 30).subject_label == std::optional<std::string>("S30"));
    CHECK_THROWS_AS(full.series(31, 1), InvalidInput);
    for (std::size_t i = 0; i < 30; ++i)
        for (std::size_t j = i + 1; j < 30; ++j) {
            const auto& a = full.bodies()[i];
            const auto& b = full.bodies()[j];
            CHECK(std::hypot(a.fat_rate - b.fat_rate, a.muscle_rate - b.muscle_rate, a.shape_scale - b.shape_scale) >=
                  0.02);
        }
}

TEST_CASE("cohort config errors") {
    CHECK_THROWS_AS(draw_bodies(30, 1.0, 1), CohortError);
    CohortConfig one;
    one.n_subjects = 1;
    CHECK_THROWS_AS(one.validate(), InvalidInput);
    const auto back = cohort_config_from_json(to_json(CohortConfig{}));
    CHECK(to_json(back) == to_json(CohortConfig{}));
    CHECK_THROWS_AS(cohort_config_from_json({{"n_subjects", "many"}}), ParseError);
}
