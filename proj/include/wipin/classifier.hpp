#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "wipin/features.hpp"

namespace wipin::classifier {

using features::FeatureVector;
using features::kFeatures;

struct TrainConfig {
    double c = 1.0;           // loss weight C
    double tolerance = 1e-4;  // stop when |grad| <= tolerance * |grad at zero|
    int max_epochs = 1000;    // Newton iterations
    std::uint64_t seed = 0;
    unsigned threads = 1;     // parallel one-vs-all subproblems

    void validate() const;
};

/// One linear scorer: score = weights . x + bias.
struct SvmModel {
    FeatureVector weights{};
    double bias = 0.0;
    int class_id = 0;

    double score(const FeatureVector& x) const;
};

/// Result of a primal Newton solve.
struct SolveInfo {
    double objective = 0.0;
    int iterations = 0;
    bool converged = false;
};

/// Minimises 0.5 |w|^2 + C sum max(0, 1 - y (w.x + b))^2 for y in {-1, +1}.
/// The bias is not regularised.
SvmModel train_binary(std::span<const FeatureVector> x, std::span<const int> y, const TrainConfig& cfg,
                      SolveInfo* info = nullptr);

/// Primal objective of a binary squared-hinge problem.
double svm_objective(const SvmModel& m, std::span<const FeatureVector> x, std::span<const int> y, double c);

/// One-against-all training; labels must cover 1..N with N >= 2.
/// Returns N models ordered by class id.
std::vector<SvmModel> train_one_vs_all(std::span<const FeatureVector> x, std::span<const int> labels,
                                       const TrainConfig& cfg);

std::vector<double> scores(std::span<const SvmModel> models, const FeatureVector& x);

/// 1-based index of the largest score; ties go to the smallest class id.
int predict(std::span<const double> scores);

/// Max-subtracted softmax.
std::vector<double> softmax(std::span<const double> scores);

/// Order statistic at 1-based rank ceil(p * n) of the ascending-sorted values.
double nearest_rank_percentile(std::vector<double> values, double p);

/// Fifth-percentile (nearest rank) of the max softmax score over correctly
/// classified training instances. Throws DegenerateModel if none survive.
double learn_threshold(std::span<const SvmModel> models, std::span<const FeatureVector> normalized,
                       std::span<const int> labels);

struct IdentifierModel {
    std::vector<SvmModel> models;
    features::Normalizer normalizer;
    double threshold = 0.5;

    std::size_t n_classes() const noexcept { return models.size(); }
};

struct Decision {
    bool accepted = false;
    std::optional<int> identity;  // set when accepted
    double confidence = 0.0;      // max softmax score
    int best_class = 0;           // argmax regardless of the outcome
};

/// Normalise, score, softmax. Rejects when the top confidence is strictly
/// below the model threshold.
Decision identify(const IdentifierModel& model, const FeatureVector& raw);

/// Fits the normaliser on `raw`, trains one-vs-all and learns the threshold.
IdentifierModel train_identifier(std::span<const FeatureVector> raw, std::span<const int> labels,
                                 const TrainConfig& cfg);

nlohmann::json to_json(const IdentifierModel& model);
IdentifierModel identifier_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Decision& d, double threshold);

// ---------------------------------------------------------------------------
// Regression

struct SvrModel {
    features::Normalizer normalizer;
    FeatureVector weights{};
    double bias = 0.0;
    double epsilon = 0.01;
};

/// Linear regression with L2 regulariser and squared epsilon-insensitive
/// loss, fitted on features normalised by a normaliser fitted here.
SvrModel train_svr(std::span<const FeatureVector> raw, std::span<const double> targets, const TrainConfig& cfg,
                   double epsilon = 0.01, SolveInfo* info = nullptr);

double predict_svr(const SvrModel& model, const FeatureVector& raw);

} // namespace wipin::classifier
