#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <numbers>
#include <set>
#include <sstream>

#include "wipin/csi.hpp"
#include "wipin/error.hpp"
#include "wipin/random.hpp"

using namespace wipin;

namespace {

CsiSeries random_series(std::size_t frames, std::uint64_t seed, std::optional<std::string> label = std::nullopt,
                        std::optional<int> session = std::nullopt) {
    Rng rng(seed);
    CsiSeries s;
    for (std::size_t t = 0; t < frames; ++t) {
        CsiFrame f{};
        for (auto& v : f) v = Complex(rng.normal(), rng.normal());
        s.frames.push_back(f);
    }
    s.subject_label = std::move(label);
    s.session_id = session;
    return s;
}

std::filesystem::path scratch_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("wipin_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

} // namespace

TEST_CASE("subcarrier grid") {
    SubcarrierGrid g;
    const auto f = g.frequencies();
    for (std::size_t k = 1; k < f.size(); ++k) CHECK(f[k] > f[k - 1]);
    CHECK(f.back() - f.front() <= g.bandwidth());
    CHECK((f.front() + f.back()) / 2 == doctest::Approx(g.center_frequency()));
    CHECK(g.tap_duration() == doctest::Approx(25e-9));
    CHECK(g.size() == 30);
    CHECK_THROWS_AS(SubcarrierGrid(5e9, -1.0), InvalidInput);
}

TEST_CASE("amplitude examples") {
    CsiSeries s;
    CsiFrame f{};
    f[0] = {3, 4};
    f[1] = {0, 0};
    for (std::size_t k = 2; k < 30; ++k) f[k] = std::polar(1.0, 0.37 * static_cast<double>(k));
    s.frames.push_back(f);
    const auto a = amplitude(s);
    REQUIRE(a.rows() == 1);
    CHECK(a(0, 0) == 5.0);
    CHECK(a(0, 1) == 0.0);
    for (std::size_t k = 2; k < 30; ++k) CHECK(std::abs(a(0, k) - 1.0) < 1e-12);
}

TEST_CASE("amplitude is idempotent on real non-negative data") {
    auto s = random_series(5, 1);
    const auto a = amplitude(s);
    CsiSeries back;
    for (std::size_t t = 0; t < a.rows(); ++t) {
        CsiFrame f{};
        for (std::size_t k = 0; k < 30; ++k) f[k] = Complex(a(t, k), 0.0);
        back.frames.push_back(f);
    }
    CHECK(amplitude(back) == a);
}

TEST_CASE("amplitude of an empty series") {
    CHECK_THROWS_AS(amplitude(CsiSeries{}), EmptyInput);
}

TEST_CASE("csv round trip") {
    auto s = random_series(10, 2, "alice", 4);
    s.sample_rate = 250.0;
    s.grid = SubcarrierGrid(2.4e9, 20e6);
    std::stringstream buf;
    write_csv(s, buf);
    const auto back = read_csv(buf);
    REQUIRE(back.size() == 10);
    double worst = 0;
    for (std::size_t t = 0; t < 10; ++t)
        for (std::size_t k = 0; k < 30; ++k) worst = std::max(worst, std::abs(back.frames[t][k] - s.frames[t][k]));
    CHECK(worst < 1e-9);
    CHECK(back.sample_rate == 250.0);
    CHECK(back.grid == s.grid);
    CHECK(back.subject_label == s.subject_label);
    CHECK(back.session_id == s.session_id);
}

TEST_CASE("csv round trip through a file without tags") {
    const auto dir = scratch_dir("csv");
    const auto s = random_series(3, 3);
    store_csv(s, dir / "x.csv");
    const auto back = load_csv(dir / "x.csv");
    CHECK(back.frames == s.frames);
    CHECK_FALSE(back.subject_label.has_value());
    CHECK_FALSE(back.session_id.has_value());
}

TEST_CASE("csv parse errors carry the line number") {
    std::string header = "#wipin-csv v1, fs=500, fc=5000000000, bw=40000000, nsc=30, subject=-, session=-\n";
    std::string good = "0";
    for (int i = 0; i < 60; ++i) good += ",1";
    std::string short_row = "1";
    for (int i = 0; i < 58; ++i) short_row += ",1";

    SUBCASE("29 subcarrier columns") {
        std::stringstream in(header + good + "\n" + short_row + "\n");
        try {
            read_csv(in);
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            CHECK(e.line() == 3);
        }
    }
    SUBCASE("non-finite value") {
        std::string bad = good;
        bad.replace(bad.size() - 1, 1, "nan");
        std::stringstream in(header + bad + "\n");
        CHECK_THROWS_AS(read_csv(in), ParseError);
    }
    SUBCASE("not a number") {
        std::string bad = good;
        bad.replace(bad.size() - 1, 1, "x");
        std::stringstream in(header + bad + "\n");
        CHECK_THROWS_AS(read_csv(in), ParseError);
    }
    SUBCASE("malformed header") {
        std::stringstream in("#other\n" + good + "\n");
        CHECK_THROWS_AS(read_csv(in), ParseError);
    }
    SUBCASE("empty data section") {
        std::stringstream in(header);
        CHECK_THROWS_AS(read_csv(in), EmptyInput);
    }
}

TEST_CASE("dataset ids are dense in first-appearance order") {
    std::vector<CsiSeries> series;
    series.push_back(random_series(2, 1, "bob", 1));
    series.push_back(random_series(2, 2, "amy", 1));
    series.push_back(random_series(2, 3, "bob", 2));
    const auto ds = make_dataset(series);
    CHECK(ds.n_subjects() == 2);
    CHECK(ds.records[0].subject == 1);
    CHECK(ds.records[1].subject == 2);
    CHECK(ds.records[2].subject == 1);
    // labels -> ids -> labels is the identity
    for (const auto& r : ds.records) CHECK(ds.id_of(ds.label_of(r.subject)) == r.subject);
    CHECK(ds.label_of(1) == "bob");
    CHECK_FALSE(ds.id_of("carol").has_value());
}

TEST_CASE("dataset rejects unlabelled series and mixed grids") {
    std::vector<CsiSeries> unlabelled{random_series(1, 1)};
    CHECK_THROWS_AS(make_dataset(unlabelled), InvalidInput);
    auto a = random_series(1, 1, "a", 1);
    auto b = random_series(1, 2, "b", 1);
    b.grid = SubcarrierGrid(2.4e9, 40e6);
    CHECK_THROWS_AS(make_dataset({a, b}), InvalidInput);
}

TEST_CASE("per-subject stratified split") {
    std::vector<RecordKey> keys;
    for (int s = 1; s <= 4; ++s)
        for (int r = 1; r <= 30; ++r) keys.push_back({s, r});
    const auto split = split_records(keys, 20, 10, 99);
    CHECK(split.train.size() == 80);
    CHECK(split.test.size() == 40);
    std::set<std::size_t> train(split.train.begin(), split.train.end());
    for (auto i : split.test) CHECK(train.count(i) == 0);
    for (int s = 1; s <= 4; ++s) {
        int n_train = 0, n_test = 0;
        for (auto i : split.train) n_train += keys[i].subject == s;
        for (auto i : split.test) n_test += keys[i].subject == s;
        CHECK(n_train == 20);
        CHECK(n_test == 10);
    }
    CHECK(std::is_sorted(split.train.begin(), split.train.end()));
    const auto again = split_records(keys, 20, 10, 99);
    CHECK(again.train == split.train);
    CHECK(again.test == split.test);
    const auto other = split_records(keys, 20, 10, 100);
    CHECK(other.train != split.train);
}

TEST_CASE("split with too few sessions names the subject") {
    std::vector<RecordKey> keys;
    for (int r = 1; r <= 30; ++r) keys.push_back({1, r});
    try {
        split_records(keys, 21, 10, 1);
        FAIL("expected InsufficientData");
    } catch (const InsufficientData& e) {
        CHECK(std::string(e.what()).find("subject 1") != std::string::npos);
    }
}

TEST_CASE("split_dataset keeps labels and sessions") {
    std::vector<CsiSeries> series;
    for (int s = 0; s < 2; ++s)
        for (int r = 1; r <= 3; ++r) series.push_back(random_series(1, 10 * s + r, s ? "y" : "x", r));
    const auto ds = make_dataset(series);
    const auto [train, test] = split_dataset(ds, 2, 1, 5);
    CHECK(train.records.size() == 4);
    CHECK(test.records.size() == 2);
    CHECK(train.subject_labels == ds.subject_labels);
    for (const auto& r : test.records) CHECK(r.series.session_id == r.session);
}

TEST_CASE("dataset directory round trip") {
    const auto dir = scratch_dir("dataset");
    std::vector<CsiSeries> series;
    for (int s = 0; s < 2; ++s)
        for (int r = 1; r <= 2; ++r) series.push_back(random_series(4, 10 * s + r, s ? "S02" : "S01", r));
    const auto ds = make_dataset(series, {{"seed", 3}});
    store_dataset(ds, dir);
    CHECK(std::filesystem::exists(dir / "manifest.json"));
    CHECK(std::filesystem::exists(dir / record_file_name(2, 1)));
    const auto back = load_dataset(dir);
    REQUIRE(back.records.size() == ds.records.size());
    CHECK(back.subject_labels == ds.subject_labels);
    CHECK(back.provenance["seed"] == 3);
    CHECK(back.provenance.contains("origin"));
    for (std::size_t i = 0; i < ds.records.size(); ++i) {
        CHECK(back.records[i].subject == ds.records[i].subject);
        CHECK(back.records[i].session == ds.records[i].session);
        CHECK(back.records[i].series.frames == ds.records[i].series.frames);
    }
    const auto manifest = dataset_manifest(ds);
    CHECK(manifest["records"].size() == 4);
    CHECK(manifest["generator"]["seed"] == 3);
}

TEST_CASE("missing manifest") {
    const auto dir = scratch_dir("nomanifest");
    CHECK_THROWS_AS(load_dataset(dir), ParseError);
}
