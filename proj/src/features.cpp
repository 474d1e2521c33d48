#include "wipin/features.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>

#include "wipin/error.hpp"
#include "wipin/format.hpp"

namespace wipin::features {

namespace {

constexpr double kDegenerate = 1e-12;

constexpr std::array<const char*, kFeatures> kNames = [] {
    std::array<const char*, kFeatures> n{};
    constexpr const char* sc[] = {"sc01", "sc02", "sc03", "sc04", "sc05", "sc06", "sc07", "sc08", "sc09", "sc10",
                                  "sc11", "sc12", "sc13", "sc14", "sc15", "sc16", "sc17", "sc18", "sc19", "sc20",
                                  "sc21", "sc22", "sc23", "sc24", "sc25", "sc26", "sc27", "sc28", "sc29", "sc30"};
    for (std::size_t i = 0; i < 30; ++i) n[i] = sc[i];
    n[kProfileMean] = "mean";
    n[kProfileStd] = "std";
    n[kProfileMedianAbsDev] = "median_abs_dev";
    n[kProfileMeanAbsDev] = "mean_abs_dev";
    n[kProfileIqr] = "iqr";
    n[kProfileRms] = "rms";
    n[kProfileSkewness] = "skewness";
    n[kProfileKurtosis] = "kurtosis";
    n[kProfileEntropy] = "entropy";
    return n;
}();

} // namespace

const char* feature_name(std::size_t index) { return kNames.at(index); }

double entropy(std::span<const double> profile) {
    if (profile.empty()) return 0.0;
    const auto [lo_it, hi_it] = std::minmax_element(profile.begin(), profile.end());
    const double lo = *lo_it;
    const double hi = *hi_it;
    const double range = hi - lo;
    if (!(range > kDegenerate * std::max(std::abs(lo), std::abs(hi)))) return 0.0;

    std::array<std::size_t, kEntropyBins> counts{};
    for (double v : profile) {
        auto bin = static_cast<std::size_t>(std::floor(static_cast<double>(kEntropyBins) * (v - lo) / range));
        counts[std::min(bin, kEntropyBins - 1)]++;
    }
    const double n = static_cast<double>(profile.size());
    double e = 0.0;
    for (auto c : counts) {
        if (c == 0) continue;
        const double p = static_cast<double>(c) / n;
        e -= p * std::log(p);
    }
    return e;
}

double quantile_sorted(std::span<const double> sorted, double q) {
    if (sorted.empty()) throw EmptyInput("quantile of empty data");
    const double rank = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(rank));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = rank - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

std::array<double, 9> profile_statistics(std::span<const double> profile) {
    if (profile.empty()) throw EmptyInput("profile statistics of an empty profile");
    const double n = static_cast<double>(profile.size());

    double sum = 0.0, sum_sq = 0.0;
    for (double v : profile) {
        sum += v;
        sum_sq += v * v;
    }
    const double mean = sum / n;
    const double rms = std::sqrt(sum_sq / n);

    double m2 = 0.0, m3 = 0.0, m4 = 0.0, abs_dev = 0.0;
    for (double v : profile) {
        const double d = v - mean;
        const double d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
        abs_dev += std::abs(d);
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    const double sd = std::sqrt(m2);

    std::vector<double> sorted(profile.begin(), profile.end());
    std::sort(sorted.begin(), sorted.end());
    const double median = quantile_sorted(sorted, 0.5);
    const double iqr = quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25);

    std::vector<double> dev(sorted.size());
    std::transform(sorted.begin(), sorted.end(), dev.begin(), [median](double v) { return std::abs(v - median); });
    std::sort(dev.begin(), dev.end());
    const double mad = quantile_sorted(dev, 0.5);

    double skew = 0.0, kurt = 0.0;
    if (sd > kDegenerate * rms) {
        skew = m3 / (m2 * sd);
        kurt = m4 / (m2 * m2) - 3.0;
    }
    return {mean, sd, mad, abs_dev / n, iqr, rms, skew, kurt, entropy(profile)};
}

FeatureVector extract_features(const AmplitudeMatrix& matrix, std::size_t first_row) {
    if (first_row >= matrix.rows()) throw EmptyInput("extract_features: no rows to average");
    std::array<double, kSubcarriers> means{};
    for (std::size_t r = first_row; r < matrix.rows(); ++r) {
        const auto row = matrix.row(r);
        for (std::size_t c = 0; c < kSubcarriers; ++c) means[c] += row[c];
    }
    const double count = static_cast<double>(matrix.rows() - first_row);
    for (auto& m : means) m /= count;

    FeatureVector f{};
    std::copy(means.begin(), means.end(), f.begin());
    const auto stats = profile_statistics(means);
    std::copy(stats.begin(), stats.end(), f.begin() + kProfileMean);
    return f;
}

Normalizer fit_normalizer(std::span<const FeatureVector> training) {
    if (training.empty()) throw EmptyInput("fit_normalizer: no training vectors");
    Normalizer norm{training.front(), training.front()};
    for (const auto& x : training)
        for (std::size_t i = 0; i < kFeatures; ++i) {
            norm.min[i] = std::min(norm.min[i], x[i]);
            norm.max[i] = std::max(norm.max[i], x[i]);
        }
    return norm;
}

FeatureVector normalize(const FeatureVector& x, const Normalizer& norm) {
    FeatureVector out{};
    for (std::size_t i = 0; i < kFeatures; ++i) {
        const double span = norm.max[i] - norm.min[i];
        out[i] = span > 0.0 ? (2.0 * x[i] - norm.max[i] - norm.min[i]) / span : 0.0;
    }
    return out;
}

nlohmann::json to_json(const Normalizer& norm) {
    return {{"min", norm.min}, {"max", norm.max}};
}

Normalizer normalizer_from_json(const nlohmann::json& j) {
    Normalizer norm;
    try {
        const auto lo = j.at("min").get<std::vector<double>>();
        const auto hi = j.at("max").get<std::vector<double>>();
        if (lo.size() != kFeatures || hi.size() != kFeatures)
            throw ParseError("normalizer needs 39 min and 39 max values");
        for (std::size_t i = 0; i < kFeatures; ++i) {
            if (lo[i] > hi[i]) throw ParseError("normalizer min exceeds max at feature " + std::to_string(i));
            norm.min[i] = lo[i];
            norm.max[i] = hi[i];
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("normalizer: ") + e.what());
    }
    return norm;
}

void write_features(std::ostream& out, std::span<const FeatureVector> rows, const std::optional<std::string>& subject) {
    out << "#wipin-feat v1, subject=" << subject.value_or("-") << '\n';
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < kFeatures; ++i) out << (i ? "," : "") << fmt_num(row[i]);
        out << '\n';
    }
}

FeatureFile read_features(std::istream& in) {
    FeatureFile file;
    std::string line;
    if (!std::getline(in, line) || line.rfind("#wipin-feat v1", 0) != 0)
        throw ParseError("expected '#wipin-feat v1' header", 1);
    if (const auto pos = line.find("subject="); pos != std::string::npos) {
        auto tag = line.substr(pos + 8);
        while (!tag.empty() && (tag.back() == '\r' || tag.back() == ' ')) tag.pop_back();
        if (tag != "-") file.subject = tag;
    }
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        FeatureVector row{};
        std::size_t field = 0;
        const char* p = line.data();
        const char* end = line.data() + line.size();
        while (p <= end) {
            const char* comma = std::find(p, end, ',');
            if (field >= kFeatures) throw ParseError("more than 39 feature columns", line_no);
            const char* a = p;
            const char* b = comma;
            while (a < b && *a == ' ') ++a;
            while (b > a && (b[-1] == ' ' || b[-1] == '\r')) --b;
            const auto [ptr, ec] = std::from_chars(a, b, row[field]);
            if (ec != std::errc() || ptr != b || a == b || !std::isfinite(row[field]))
                throw ParseError("bad feature value", line_no);
            ++field;
            p = comma + 1;
        }
        if (field != kFeatures) throw ParseError("expected 39 feature columns", line_no);
        file.rows.push_back(row);
    }
    return file;
}

} // namespace wipin::features
