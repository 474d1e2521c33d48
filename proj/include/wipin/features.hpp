#pragma once

#include <array>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "wipin/csi.hpp"

namespace wipin::features {

inline constexpr std::size_t kFeatures = 39;
inline constexpr std::size_t kEntropyBins = 10;

using FeatureVector = std::array<double, kFeatures>;

/// Slots 0..29 hold per-subcarrier temporal means; the profile statistics
/// over those 30 means follow.
enum FeatureIndex : std::size_t {
    kProfileMean = 30,
    kProfileStd,
    kProfileMedianAbsDev,
    kProfileMeanAbsDev,
    kProfileIqr,
    kProfileRms,
    kProfileSkewness,
    kProfileKurtosis,
    kProfileEntropy,
};

const char* feature_name(std::size_t index);

/// Shannon entropy (natural log) of the values binned into 10 equal-width
/// bins over [min, max]. A value at max falls in the last bin; a constant
/// profile has entropy 0.
double entropy(std::span<const double> profile);

/// Quantile by linear interpolation at rank q * (n - 1) of the sorted data.
double quantile_sorted(std::span<const double> sorted, double q);

/// mean, std, median-abs-dev, mean-abs-dev, IQR, RMS, skewness, excess
/// kurtosis, entropy. Moments use the n divisor; skewness and kurtosis are 0
/// for a (numerically) constant profile.
std::array<double, 9> profile_statistics(std::span<const double> profile);

/// Column means over rows [first_row, rows) plus profile statistics.
/// Throws EmptyInput when no rows remain.
FeatureVector extract_features(const AmplitudeMatrix& matrix, std::size_t first_row = 0);

struct Normalizer {
    FeatureVector min{};
    FeatureVector max{};
};

Normalizer fit_normalizer(std::span<const FeatureVector> training);

/// x' = (2x - max - min) / (max - min), 0 where max == min. Not clamped.
FeatureVector normalize(const FeatureVector& x, const Normalizer& norm);

nlohmann::json to_json(const Normalizer& norm);
Normalizer normalizer_from_json(const nlohmann::json& j);

/// 39-column CSV under a `#wipin-feat v1, subject=<tag|->` header.
void write_features(std::ostream& out, std::span<const FeatureVector> rows,
                    const std::optional<std::string>& subject = std::nullopt);

struct FeatureFile {
    std::optional<std::string> subject;
    std::vector<FeatureVector> rows;
};

FeatureFile read_features(std::istream& in);

} // namespace wipin::features
