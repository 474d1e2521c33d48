#include "wipin/csi.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "wipin/error.hpp"
#include "wipin/format.hpp"
#include "wipin/random.hpp"

namespace wipin {

SubcarrierGrid::SubcarrierGrid(double center_frequency, double bandwidth)
    : center_(center_frequency), bandwidth_(bandwidth) {
    if (!(center_frequency > 0.0) || !(bandwidth > 0.0) || !std::isfinite(center_frequency) ||
        !std::isfinite(bandwidth))
        throw InvalidInput("subcarrier grid needs positive finite center frequency and bandwidth");
    if (bandwidth >= 2.0 * center_frequency)
        throw InvalidInput("bandwidth must be smaller than twice the center frequency");
}

double SubcarrierGrid::frequency(std::size_t k) const noexcept {
    const double offset = static_cast<double>(k) - 0.5 * static_cast<double>(kSubcarriers - 1);
    return center_ + offset * spacing();
}

std::array<double, kSubcarriers> SubcarrierGrid::frequencies() const noexcept {
    std::array<double, kSubcarriers> f{};
    for (std::size_t k = 0; k < kSubcarriers; ++k) f[k] = frequency(k);
    return f;
}

CsiSeries CsiSeries::head(std::size_t n) const {
    CsiSeries out;
    n = std::min(n, frames.size());
    out.frames.assign(frames.begin(), frames.begin() + static_cast<std::ptrdiff_t>(n));
    out.sample_rate = sample_rate;
    out.grid = grid;
    out.subject_label = subject_label;
    out.session_id = session_id;
    return out;
}

AmplitudeMatrix amplitude(const CsiSeries& series) {
    if (series.empty()) throw EmptyInput("amplitude: CSI series has no frames");
    AmplitudeMatrix m(series.size(), series.sample_rate);
    for (std::size_t t = 0; t < series.size(); ++t) {
        const auto& frame = series.frames[t];
        for (std::size_t k = 0; k < kSubcarriers; ++k) m(t, k) = std::abs(frame[k]);
    }
    return m;
}

// ---------------------------------------------------------------------------
// CSV

namespace {

constexpr std::string_view kCsvMagic = "#wipin-csv v1";

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split_commas(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const auto pos = line.find(',', start);
        if (pos == std::string_view::npos) {
            out.push_back(trim(line.substr(start)));
            return out;
        }
        out.push_back(trim(line.substr(start, pos - start)));
        start = pos + 1;
    }
}

double parse_number(std::string_view field, std::size_t line) {
    double v = 0.0;
    const auto* first = field.data();
    const auto* last = field.data() + field.size();
    if (!field.empty() && *first == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last || field.empty())
        throw ParseError("not a number: '" + std::string(field) + "'", line);
    if (!std::isfinite(v)) throw ParseError("non-finite value", line);
    return v;
}

std::string header_value(const std::map<std::string, std::string, std::less<>>& kv, std::string_view key,
                         std::size_t line) {
    const auto it = kv.find(key);
    if (it == kv.end()) throw ParseError("header is missing '" + std::string(key) + "'", line);
    return it->second;
}

void check_tag(const std::string& tag) {
    if (tag.empty() || tag == "-" || tag.find_first_of(",\n\r") != std::string::npos)
        throw InvalidInput("subject tag '" + tag + "' cannot be stored in CSV");
}

} // namespace

void write_csv(const CsiSeries& series, std::ostream& out) {
    if (series.subject_label) check_tag(*series.subject_label);
    out << kCsvMagic << ", fs=" << fmt_num(series.sample_rate) << ", fc=" << fmt_num(series.grid.center_frequency())
        << ", bw=" << fmt_num(series.grid.bandwidth()) << ", nsc=" << kSubcarriers
        << ", subject=" << (series.subject_label ? *series.subject_label : std::string("-"))
        << ", session=" << (series.session_id ? std::to_string(*series.session_id) : std::string("-")) << '\n';
    std::string line;
    for (std::size_t t = 0; t < series.size(); ++t) {
        line.clear();
        line += std::to_string(t);
        for (const auto& v : series.frames[t]) {
            line += ',';
            line += fmt_num(v.real());
            line += ',';
            line += fmt_num(v.imag());
        }
        line += '\n';
        out << line;
    }
}

void store_csv(const CsiSeries& series, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot open '" + path.string() + "' for writing");
    write_csv(series, out);
    if (!out) throw Error("write failed for '" + path.string() + "'");
}

CsiSeries read_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw ParseError("missing header", 1);
    const auto fields = split_commas(line);
    if (fields.empty() || fields[0] != kCsvMagic) throw ParseError("expected '#wipin-csv v1' header", 1);

    std::map<std::string, std::string, std::less<>> kv;
    for (std::size_t i = 1; i < fields.size(); ++i) {
        const auto eq = fields[i].find('=');
        if (eq == std::string_view::npos) throw ParseError("malformed header field '" + std::string(fields[i]) + "'", 1);
        kv.emplace(std::string(trim(fields[i].substr(0, eq))), std::string(trim(fields[i].substr(eq + 1))));
    }

    CsiSeries series;
    try {
        series.sample_rate = parse_number(header_value(kv, "fs", 1), 1);
        const double fc = parse_number(header_value(kv, "fc", 1), 1);
        const double bw = parse_number(header_value(kv, "bw", 1), 1);
        series.grid = SubcarrierGrid(fc, bw);
    } catch (const InvalidInput& e) {
        throw ParseError(e.what(), 1);
    }
    if (!(series.sample_rate > 0.0)) throw ParseError("fs must be positive", 1);
    if (header_value(kv, "nsc", 1) != "30") throw ParseError("nsc must be 30", 1);
    if (const auto subject = header_value(kv, "subject", 1); subject != "-") series.subject_label = subject;
    if (const auto session = header_value(kv, "session", 1); session != "-") {
        const double s = parse_number(session, 1);
        if (s != std::floor(s)) throw ParseError("session must be an integer", 1);
        series.session_id = static_cast<int>(s);
    }

    std::size_t line_no = 1;
    constexpr std::size_t kFields = 1 + 2 * kSubcarriers;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto row = split_commas(line);
        if (row.size() != kFields)
            throw ParseError("expected " + std::to_string(kFields) + " fields, found " + std::to_string(row.size()),
                             line_no);
        const double index = parse_number(row[0], line_no);
        if (index < 0 || index != std::floor(index)) throw ParseError("frame index must be a non-negative integer", line_no);
        CsiFrame frame{};
        for (std::size_t k = 0; k < kSubcarriers; ++k)
            frame[k] = Complex(parse_number(row[1 + 2 * k], line_no), parse_number(row[2 + 2 * k], line_no));
        series.frames.push_back(frame);
    }
    if (series.frames.empty()) throw EmptyInput("CSV file has a header but no frames");
    return series;
}

CsiSeries load_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open '" + path.string() + "'");
    return read_csv(in);
}

// ---------------------------------------------------------------------------
// Datasets

std::optional<int> Dataset::id_of(const std::string& label) const {
    const auto it = std::find(subject_labels.begin(), subject_labels.end(), label);
    if (it == subject_labels.end()) return std::nullopt;
    return static_cast<int>(it - subject_labels.begin()) + 1;
}

Dataset make_dataset(std::vector<CsiSeries> series, nlohmann::json provenance) {
    Dataset ds;
    ds.provenance = std::move(provenance);
    std::map<std::string, int> ids;
    for (auto& s : series) {
        if (!s.subject_label) throw InvalidInput("dataset series must carry a subject label");
        if (!s.session_id) throw InvalidInput("dataset series must carry a session id");
        if (!ds.records.empty() && !(s.grid == ds.records.front().series.grid))
            throw InvalidInput("all dataset series must share one subcarrier grid");
        auto [it, inserted] = ids.emplace(*s.subject_label, static_cast<int>(ds.subject_labels.size()) + 1);
        if (inserted) ds.subject_labels.push_back(*s.subject_label);
        const int session = *s.session_id;
        ds.records.push_back(DatasetRecord{it->second, session, std::move(s)});
    }
    return ds;
}

std::vector<RecordKey> record_keys(const Dataset& ds) {
    std::vector<RecordKey> keys;
    keys.reserve(ds.records.size());
    for (const auto& r : ds.records) keys.push_back({r.subject, r.session});
    return keys;
}

SplitIndices split_records(std::span<const RecordKey> keys, std::size_t n_train, std::size_t n_test,
                           std::uint64_t seed) {
    std::map<int, std::vector<std::size_t>> by_subject;
    for (std::size_t i = 0; i < keys.size(); ++i) by_subject[keys[i].subject].push_back(i);

    SplitIndices out;
    for (auto& [subject, idx] : by_subject) {
        if (idx.size() < n_train + n_test)
            throw InsufficientData("subject " + std::to_string(subject) + " has " + std::to_string(idx.size()) +
                                   " sessions, split needs " + std::to_string(n_train + n_test));
        Rng rng(mix_seed(seed, static_cast<std::uint64_t>(subject)));
        shuffle(std::span<std::size_t>(idx), rng);
        out.train.insert(out.train.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
        out.test.insert(out.test.end(), idx.begin() + static_cast<std::ptrdiff_t>(n_train),
                        idx.begin() + static_cast<std::ptrdiff_t>(n_train + n_test));
    }
    std::sort(out.train.begin(), out.train.end());
    std::sort(out.test.begin(), out.test.end());
    return out;
}

std::pair<Dataset, Dataset> split_dataset(const Dataset& ds, std::size_t n_train, std::size_t n_test,
                                          std::uint64_t seed) {
    const auto keys = record_keys(ds);
    const auto split = split_records(keys, n_train, n_test, seed);
    auto subset = [&](const std::vector<std::size_t>& idx) {
        Dataset part;
        part.subject_labels = ds.subject_labels;
        part.provenance = ds.provenance;
        for (auto i : idx) part.records.push_back(ds.records[i]);
        return part;
    };
    return {subset(split.train), subset(split.test)};
}

std::string record_file_name(int subject, int session) {
    std::ostringstream name;
    name << "s" << subject << "_r" << session << ".csv";
    return name.str();
}

nlohmann::json dataset_manifest(const Dataset& ds) {
    nlohmann::json records = nlohmann::json::array();
    for (const auto& r : ds.records)
        records.push_back({{"subject", r.subject},
                           {"label", ds.label_of(r.subject)},
                           {"session", r.session},
                           {"file", record_file_name(r.subject, r.session)}});
    return {{"records", records}, {"generator", ds.provenance}};
}

void store_dataset(const Dataset& ds, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    for (const auto& r : ds.records) {
        CsiSeries s = r.series;
        s.subject_label = ds.label_of(r.subject);
        s.session_id = r.session;
        store_csv(s, dir / record_file_name(r.subject, r.session));
    }
    std::ofstream out(dir / "manifest.json");
    if (!out) throw Error("cannot write manifest in '" + dir.string() + "'");
    out << dataset_manifest(ds).dump(2) << '\n';
}

Dataset load_dataset(const std::filesystem::path& dir) {
    std::ifstream in(dir / "manifest.json");
    if (!in) throw ParseError("no manifest.json in '" + dir.string() + "'");
    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("manifest.json: ") + e.what());
    }
    if (!manifest.contains("records") || !manifest["records"].is_array())
        throw ParseError("manifest.json: missing 'records' array");

    std::vector<CsiSeries> series;
    for (const auto& rec : manifest["records"]) {
        try {
            auto s = load_csv(dir / rec.at("file").get<std::string>());
            const std::string label = rec.contains("label") ? rec["label"].get<std::string>()
                                                            : rec.at("subject").dump();
            s.subject_label = label;
            s.session_id = rec.at("session").get<int>();
            series.push_back(std::move(s));
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(std::string("manifest.json record: ") + e.what());
        }
    }
    nlohmann::json provenance = manifest.value("generator", nlohmann::json::object());
    provenance["origin"] = dir.string();
    return make_dataset(std::move(series), std::move(provenance));
}

} // namespace wipin
