#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace wipin {

inline constexpr std::size_t kSubcarriers = 30;

using Complex = std::complex<double>;

/// Frequencies of the 30 reported OFDM subcarrier groups.
///
/// The groups are spaced bandwidth/30 apart and centred on the carrier, so
/// one delay-domain tap of a 30-point IFFT spans 1/bandwidth seconds.
class SubcarrierGrid {
public:
    explicit SubcarrierGrid(double center_frequency = 5.0e9, double bandwidth = 40.0e6);

    double center_frequency() const noexcept { return center_; }
    double bandwidth() const noexcept { return bandwidth_; }
    std::size_t size() const noexcept { return kSubcarriers; }
    double spacing() const noexcept { return bandwidth_ / kSubcarriers; }
    double frequency(std::size_t k) const noexcept;
    std::array<double, kSubcarriers> frequencies() const noexcept;
    /// Delay spanned by one IFFT tap.
    double tap_duration() const noexcept { return 1.0 / bandwidth_; }

    bool operator==(const SubcarrierGrid&) const = default;

private:
    double center_;
    double bandwidth_;
};

using CsiFrame = std::array<Complex, kSubcarriers>;

struct CsiSeries {
    std::vector<CsiFrame> frames;
    double sample_rate = 500.0;
    SubcarrierGrid grid = SubcarrierGrid();
    std::optional<std::string> subject_label;
    std::optional<int> session_id;

    std::size_t size() const noexcept { return frames.size(); }
    bool empty() const noexcept { return frames.empty(); }
    /// First `n` frames with the same metadata. n is clamped to size().
    CsiSeries head(std::size_t n) const;
};

/// Row-major t x 30 matrix of linear CSI amplitudes.
class AmplitudeMatrix {
public:
    AmplitudeMatrix() = default;
    AmplitudeMatrix(std::size_t rows, double sample_rate)
        : rows_(rows), sample_rate_(sample_rate), data_(rows * kSubcarriers, 0.0) {}

    std::size_t rows() const noexcept { return rows_; }
    static constexpr std::size_t cols() noexcept { return kSubcarriers; }
    bool empty() const noexcept { return rows_ == 0; }
    double sample_rate() const noexcept { return sample_rate_; }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * kSubcarriers + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * kSubcarriers + c]; }

    std::span<double, kSubcarriers> row(std::size_t r) {
        return std::span<double, kSubcarriers>(data_.data() + r * kSubcarriers, kSubcarriers);
    }
    std::span<const double, kSubcarriers> row(std::size_t r) const {
        return std::span<const double, kSubcarriers>(data_.data() + r * kSubcarriers, kSubcarriers);
    }
    std::span<const double> data() const noexcept { return data_; }

    bool operator==(const AmplitudeMatrix&) const = default;

private:
    std::size_t rows_ = 0;
    double sample_rate_ = 500.0;
    std::vector<double> data_;
};

/// Modulus of every CSI entry. Throws EmptyInput for an empty series.
AmplitudeMatrix amplitude(const CsiSeries& series);

// ---------------------------------------------------------------------------
// Canonical CSV

void store_csv(const CsiSeries& series, const std::filesystem::path& path);
void write_csv(const CsiSeries& series, std::ostream& out);
CsiSeries load_csv(const std::filesystem::path& path);
CsiSeries read_csv(std::istream& in);

// ---------------------------------------------------------------------------
// Datasets

struct DatasetRecord {
    int subject = 0;  // dense id in 1..N
    int session = 0;
    CsiSeries series;
};

struct Dataset {
    std::vector<DatasetRecord> records;
    /// Original subject tags; subject id i maps to subject_labels[i - 1].
    std::vector<std::string> subject_labels;
    /// Provenance (generator config and seed, or file origin).
    nlohmann::json provenance = nlohmann::json::object();

    std::size_t n_subjects() const noexcept { return subject_labels.size(); }
    const std::string& label_of(int subject) const { return subject_labels.at(subject - 1); }
    std::optional<int> id_of(const std::string& label) const;
};

/// Builds a dataset from labelled series, assigning dense subject ids in
/// first-appearance order of `subject_label`. Series without a label or a
/// session id are rejected, as are series on differing grids.
Dataset make_dataset(std::vector<CsiSeries> series, nlohmann::json provenance = nlohmann::json::object());

/// Identifies a record by subject and session without carrying its frames.
struct RecordKey {
    int subject = 0;
    int session = 0;
};

struct SplitIndices {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};

/// Per-subject stratified random split over record keys. Each subject
/// contributes exactly n_train records to `train` and n_test to `test`.
/// Deterministic for a fixed seed; indices come back in ascending order.
SplitIndices split_records(std::span<const RecordKey> keys, std::size_t n_train, std::size_t n_test,
                           std::uint64_t seed);

std::pair<Dataset, Dataset> split_dataset(const Dataset& ds, std::size_t n_train, std::size_t n_test,
                                          std::uint64_t seed);

std::vector<RecordKey> record_keys(const Dataset& ds);

/// Writes one CSV per record plus manifest.json into `dir`.
void store_dataset(const Dataset& ds, const std::filesystem::path& dir);
Dataset load_dataset(const std::filesystem::path& dir);

/// Manifest document describing a dataset directory.
nlohmann::json dataset_manifest(const Dataset& ds);
std::string record_file_name(int subject, int session);

} // namespace wipin
