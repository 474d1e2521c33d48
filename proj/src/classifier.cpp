#include "wipin/classifier.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <set>
#include <thread>

#include <Eigen/Dense>

#include "wipin/error.hpp"

namespace wipin::classifier {

void TrainConfig::validate() const {
    if (!(c > 0.0)) throw InvalidInput("regularization C must be positive");
    if (!(tolerance > 0.0)) throw InvalidInput("tolerance must be positive");
    if (max_epochs < 1) throw InvalidInput("max_epochs must be at least 1");
}

double SvmModel::score(const FeatureVector& x) const {
    double s = bias;
    for (std::size_t i = 0; i < kFeatures; ++i) s += weights[i] * x[i];
    return s;
}

namespace {

constexpr Eigen::Index kDim = static_cast<Eigen::Index>(kFeatures) + 1;  // weights + bias

Eigen::MatrixXd design_matrix(std::span<const FeatureVector> x) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(x.size()), kDim);
    for (std::size_t i = 0; i < x.size(); ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        for (std::size_t j = 0; j < kFeatures; ++j) {
            if (!std::isfinite(x[i][j])) throw InvalidInput("non-finite training feature");
            m(r, static_cast<Eigen::Index>(j)) = x[i][j];
        }
        m(r, kDim - 1) = 1.0;
    }
    return m;
}

// Piecewise-quadratic loss on the linear response z = X theta.
struct SquaredHinge {
    Eigen::VectorXd y;  // +-1
    double loss(double z, Eigen::Index i) const {
        const double m = 1.0 - y[i] * z;
        return m > 0.0 ? m * m : 0.0;
    }
    // first derivative, and whether the second derivative (2) is active
    double slope(double z, Eigen::Index i, bool& active) const {
        const double m = 1.0 - y[i] * z;
        active = m > 0.0;
        return active ? -2.0 * y[i] * m : 0.0;
    }
};

struct SquaredInsensitive {
    Eigen::VectorXd t;
    double eps;
    double loss(double z, Eigen::Index i) const {
        const double e = std::abs(z - t[i]) - eps;
        return e > 0.0 ? e * e : 0.0;
    }
    double slope(double z, Eigen::Index i, bool& active) const {
        const double r = z - t[i];
        const double e = std::abs(r) - eps;
        active = e > 0.0;
        return active ? 2.0 * e * (r > 0.0 ? 1.0 : -1.0) : 0.0;
    }
};

template <typename Loss>
double objective(const Eigen::VectorXd& theta, const Eigen::VectorXd& z, const Loss& loss, double c) {
    double sum = 0.0;
    for (Eigen::Index i = 0; i < z.size(); ++i) sum += loss.loss(z[i], i);
    return 0.5 * theta.head(kDim - 1).squaredNorm() + c * sum;
}

// Generalised Newton method with Armijo backtracking. The Hessian of the
// active pieces is exact, so the iteration terminates quickly.
template <typename Loss>
Eigen::VectorXd newton(const Eigen::MatrixXd& x, const Loss& loss, const TrainConfig& cfg, SolveInfo* info) {
    const Eigen::Index n = x.rows();
    Eigen::VectorXd theta = Eigen::VectorXd::Zero(kDim);
    Eigen::VectorXd z = Eigen::VectorXd::Zero(n);
    double f = objective(theta, z, loss, cfg.c);
    double g0 = -1.0;
    bool converged = false;
    int iter = 0;

    Eigen::VectorXd grad(kDim);
    Eigen::VectorXd slope(n);
    std::vector<Eigen::Index> active;
    active.reserve(static_cast<std::size_t>(n));
    for (; iter < cfg.max_epochs; ++iter) {
        active.clear();
        for (Eigen::Index i = 0; i < n; ++i) {
            bool on = false;
            slope[i] = loss.slope(z[i], i, on);
            if (on) active.push_back(i);
        }
        grad = cfg.c * (x.transpose() * slope);
        grad.head(kDim - 1) += theta.head(kDim - 1);
        const double gnorm = grad.norm();
        if (g0 < 0.0) g0 = gnorm;
        if (gnorm <= cfg.tolerance * g0 || gnorm == 0.0) {
            converged = true;
            break;
        }

        Eigen::MatrixXd hess = Eigen::MatrixXd::Zero(kDim, kDim);
        if (!active.empty()) {
            Eigen::MatrixXd xa(static_cast<Eigen::Index>(active.size()), kDim);
            for (std::size_t a = 0; a < active.size(); ++a) xa.row(static_cast<Eigen::Index>(a)) = x.row(active[a]);
            hess.selfadjointView<Eigen::Lower>().rankUpdate(xa.transpose(), 2.0 * cfg.c);
            hess.triangularView<Eigen::StrictlyUpper>() = hess.transpose();
        }
        hess.diagonal().head(kDim - 1).array() += 1.0;
        hess(kDim - 1, kDim - 1) += 1e-10 * (1.0 + hess.diagonal().head(kDim - 1).sum());

        const Eigen::VectorXd step = -hess.ldlt().solve(grad);
        const double descent = grad.dot(step);
        if (!(descent < 0.0)) break;
        const Eigen::VectorXd dz = x * step;

        double alpha = 1.0;
        bool accepted = false;
        for (int bt = 0; bt < 60; ++bt, alpha *= 0.5) {
            const Eigen::VectorXd theta_new = theta + alpha * step;
            const Eigen::VectorXd z_new = z + alpha * dz;
            const double f_new = objective(theta_new, z_new, loss, cfg.c);
            if (f_new <= f + 0.01 * alpha * descent) {
                theta = theta_new;
                z = z_new;
                f = f_new;
                accepted = true;
                break;
            }
        }
        if (!accepted) break;
    }
    if (info) {
        info->objective = f;
        info->iterations = iter;
        info->converged = converged;
    }
    return theta;
}

void unpack(const Eigen::VectorXd& theta, FeatureVector& w, double& b) {
    for (std::size_t j = 0; j < kFeatures; ++j) w[j] = theta[static_cast<Eigen::Index>(j)];
    b = theta[kDim - 1];
}

SvmModel solve_binary(const Eigen::MatrixXd& x, Eigen::VectorXd y, const TrainConfig& cfg, SolveInfo* info) {
    SquaredHinge loss{std::move(y)};
    const auto theta = newton(x, loss, cfg, info);
    SvmModel m;
    unpack(theta, m.weights, m.bias);
    return m;
}

} // namespace

SvmModel train_binary(std::span<const FeatureVector> x, std::span<const int> y, const TrainConfig& cfg,
                      SolveInfo* info) {
    cfg.validate();
    if (x.size() != y.size()) throw InvalidInput("feature and label counts differ");
    if (x.empty()) throw EmptyInput("no training instances");
    Eigen::VectorXd yy(static_cast<Eigen::Index>(y.size()));
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (y[i] != 1 && y[i] != -1) throw InvalidLabels("binary labels must be +1 or -1");
        yy[static_cast<Eigen::Index>(i)] = y[i];
    }
    return solve_binary(design_matrix(x), std::move(yy), cfg, info);
}

double svm_objective(const SvmModel& m, std::span<const FeatureVector> x, std::span<const int> y, double c) {
    double loss = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double margin = 1.0 - y[i] * m.score(x[i]);
        if (margin > 0.0) loss += margin * margin;
    }
    double reg = 0.0;
    for (double w : m.weights) reg += w * w;
    return 0.5 * reg + c * loss;
}

std::vector<SvmModel> train_one_vs_all(std::span<const FeatureVector> x, std::span<const int> labels,
                                       const TrainConfig& cfg) {
    cfg.validate();
    if (x.size() != labels.size()) throw InvalidInput("feature and label counts differ");
    const std::set<int> classes(labels.begin(), labels.end());
    if (classes.size() < 2) throw InvalidLabels("one-vs-all training needs at least two classes");
    const int n_classes = static_cast<int>(classes.size());
    if (*classes.begin() != 1 || *classes.rbegin() != n_classes)
        throw InvalidLabels("class labels must cover 1..N without gaps");

    const Eigen::MatrixXd design = design_matrix(x);
    std::vector<SvmModel> models(static_cast<std::size_t>(n_classes));
    auto train_class = [&](int cls) {
        Eigen::VectorXd y(static_cast<Eigen::Index>(labels.size()));
        for (std::size_t i = 0; i < labels.size(); ++i)
            y[static_cast<Eigen::Index>(i)] = labels[i] == cls ? 1.0 : -1.0;
        auto m = solve_binary(design, std::move(y), cfg, nullptr);
        m.class_id = cls;
        models[static_cast<std::size_t>(cls - 1)] = m;
    };

    const unsigned threads = std::min<unsigned>(std::max(1u, cfg.threads), static_cast<unsigned>(n_classes));
    if (threads == 1) {
        for (int cls = 1; cls <= n_classes; ++cls) train_class(cls);
    } else {
        std::atomic<int> next{1};
        std::vector<std::jthread> pool;
        for (unsigned t = 0; t < threads; ++t)
            pool.emplace_back([&] {
                for (int cls = next++; cls <= n_classes; cls = next++) train_class(cls);
            });
    }
    return models;
}

std::vector<double> scores(std::span<const SvmModel> models, const FeatureVector& x) {
    std::vector<double> s;
    s.reserve(models.size());
    for (const auto& m : models) s.push_back(m.score(x));
    return s;
}

int predict(std::span<const double> s) {
    if (s.empty()) throw InvalidInput("predict: no scores");
    std::size_t best = 0;
    for (std::size_t i = 1; i < s.size(); ++i)
        if (s[i] > s[best]) best = i;
    return static_cast<int>(best) + 1;
}

std::vector<double> softmax(std::span<const double> s) {
    if (s.empty()) return {};
    const double top = *std::max_element(s.begin(), s.end());
    std::vector<double> out(s.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        out[i] = std::exp(s[i] - top);
        sum += out[i];
    }
    for (auto& v : out) v /= sum;
    return out;
}

double nearest_rank_percentile(std::vector<double> values, double p) {
    if (values.empty()) throw EmptyInput("percentile of no values");
    std::sort(values.begin(), values.end());
    const double n = static_cast<double>(values.size());
    // Guard p * n landing a hair above an integer, e.g. 0.05 * 100.
    auto rank = static_cast<std::size_t>(std::ceil(p * n - 1e-9 * n));
    rank = std::clamp<std::size_t>(rank, 1, values.size());
    return values[rank - 1];
}

double learn_threshold(std::span<const SvmModel> models, std::span<const FeatureVector> normalized,
                       std::span<const int> labels) {
    if (normalized.size() != labels.size()) throw InvalidInput("feature and label counts differ");
    std::vector<double> surviving;
    for (std::size_t i = 0; i < normalized.size(); ++i) {
        const auto s = scores(models, normalized[i]);
        if (predict(s) != labels[i]) continue;
        const auto p = softmax(s);
        surviving.push_back(*std::max_element(p.begin(), p.end()));
    }
    if (surviving.empty()) throw DegenerateModel("every training instance is misclassified");
    return nearest_rank_percentile(std::move(surviving), 0.05);
}

Decision identify(const IdentifierModel& model, const FeatureVector& raw) {
    const auto x = features::normalize(raw, model.normalizer);
    const auto s = scores(model.models, x);
    const int best = predict(s);
    const auto p = softmax(s);
    Decision d;
    d.best_class = model.models[static_cast<std::size_t>(best - 1)].class_id;
    d.confidence = p[static_cast<std::size_t>(best - 1)];
    d.accepted = !(d.confidence < model.threshold);
    if (d.accepted) d.identity = d.best_class;
    return d;
}

IdentifierModel train_identifier(std::span<const FeatureVector> raw, std::span<const int> labels,
                                 const TrainConfig& cfg) {
    IdentifierModel model;
    model.normalizer = features::fit_normalizer(raw);
    std::vector<FeatureVector> x;
    x.reserve(raw.size());
    for (const auto& r : raw) x.push_back(features::normalize(r, model.normalizer));
    model.models = train_one_vs_all(x, labels, cfg);
    model.threshold = learn_threshold(model.models, x, labels);
    return model;
}

nlohmann::json to_json(const IdentifierModel& model) {
    nlohmann::json models = nlohmann::json::array();
    for (const auto& m : model.models)
        models.push_back({{"class_id", m.class_id}, {"bias", m.bias}, {"weights", m.weights}});
    return {{"n_classes", model.n_classes()},
            {"threshold", model.threshold},
            {"normalizer", features::to_json(model.normalizer)},
            {"models", models}};
}

IdentifierModel identifier_from_json(const nlohmann::json& j) {
    IdentifierModel model;
    try {
        model.threshold = j.at("threshold").get<double>();
        model.normalizer = features::normalizer_from_json(j.at("normalizer"));
        for (const auto& m : j.at("models")) {
            SvmModel svm;
            svm.class_id = m.at("class_id").get<int>();
            svm.bias = m.at("bias").get<double>();
            const auto w = m.at("weights").get<std::vector<double>>();
            if (w.size() != kFeatures) throw ParseError("model weights must have 39 entries");
            std::copy(w.begin(), w.end(), svm.weights.begin());
            model.models.push_back(svm);
        }
        const auto n = j.at("n_classes").get<std::size_t>();
        if (n != model.models.size()) throw ParseError("n_classes does not match the model list");
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("identifier model: ") + e.what());
    }
    if (model.models.size() < 2) throw ParseError("identifier model needs at least two classes");
    std::sort(model.models.begin(), model.models.end(),
              [](const SvmModel& a, const SvmModel& b) { return a.class_id < b.class_id; });
    if (!(model.threshold >= 0.0 && model.threshold <= 1.0)) throw ParseError("threshold must lie in [0, 1]");
    return model;
}

nlohmann::json to_json(const Decision& d, double threshold) {
    nlohmann::json j;
    j["decision"] = d.accepted ? "accept" : "reject";
    j["identity"] = d.identity ? nlohmann::json(*d.identity) : nlohmann::json(nullptr);
    j["confidence"] = d.confidence;
    j["threshold"] = threshold;
    return j;
}

// ---------------------------------------------------------------------------

SvrModel train_svr(std::span<const FeatureVector> raw, std::span<const double> targets, const TrainConfig& cfg,
                   double epsilon, SolveInfo* info) {
    cfg.validate();
    if (raw.size() != targets.size()) throw InvalidInput("feature and target counts differ");
    if (raw.size() < 2) throw InsufficientData("SVR needs at least two training pairs");
    if (!(epsilon >= 0.0)) throw InvalidInput("epsilon must be non-negative");

    SvrModel model;
    model.epsilon = epsilon;
    model.normalizer = features::fit_normalizer(raw);
    std::vector<FeatureVector> x;
    x.reserve(raw.size());
    for (const auto& r : raw) x.push_back(features::normalize(r, model.normalizer));

    SquaredInsensitive loss{Eigen::VectorXd(static_cast<Eigen::Index>(targets.size())), epsilon};
    for (std::size_t i = 0; i < targets.size(); ++i) {
        if (!std::isfinite(targets[i])) throw InvalidInput("non-finite regression target");
        loss.t[static_cast<Eigen::Index>(i)] = targets[i];
    }
    const auto theta = newton(design_matrix(x), loss, cfg, info);
    unpack(theta, model.weights, model.bias);
    return model;
}

double predict_svr(const SvrModel& model, const FeatureVector& raw) {
    const auto x = features::normalize(raw, model.normalizer);
    double s = model.bias;
    for (std::size_t i = 0; i < kFeatures; ++i) s += model.weights[i] * x[i];
    return s;
}

} // namespace wipin::classifier
