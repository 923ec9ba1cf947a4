#pragma once

// Correctness meta-model: standardized features -> weighted ridge -> per-fold
// calibrator, averaged over three stratified cross-fit pipelines. Grid search
// picks the configuration with the best minority-class (error) F1.

#include "lppgate/calibration.hpp"
#include "lppgate/common.hpp"
#include "lppgate/features.hpp"
#include "lppgate/ridge.hpp"

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <thread>
#include <vector>

namespace lppgate {

struct ClassWeightConfig {
    std::string name = "1:1";
    double w0 = 1.0;
    double w1 = 1.0;
    bool balanced = false;

    // n / (2 n_c) per class when balanced.
    ClassWeights resolve(std::span<const int> z) const {
        if (!balanced) return ClassWeights{w0, w1};
        const auto n1 = static_cast<double>(std::count(z.begin(), z.end(), 1));
        const auto n0 = static_cast<double>(z.size()) - n1;
        if (n0 == 0 || n1 == 0) throw Error(ErrorCode::DegenerateFold, "balanced weights need both classes");
        const double n = static_cast<double>(z.size());
        return ClassWeights{n / (2.0 * n0), n / (2.0 * n1)};
    }

    bool operator==(const ClassWeightConfig&) const = default;
};

// w0:w1 presets; 0.64 mirrors the default review/miss cost ratio.
inline const std::vector<ClassWeightConfig>& class_weight_presets() {
    static const std::vector<ClassWeightConfig> presets{
        {"1:1", 1.0, 1.0, false},   {"0.64:1", 0.64, 1.0, false}, {"1:0.64", 1.0, 0.64, false},
        {"0.5:1", 0.5, 1.0, false}, {"1:0.5", 1.0, 0.5, false},   {"2:1", 2.0, 1.0, false},
        {"balanced", 1.0, 1.0, true},
    };
    return presets;
}

inline ClassWeightConfig class_weight_preset(std::string_view name) {
    for (const auto& p : class_weight_presets())
        if (p.name == name) return p;
    throw Error(ErrorCode::InvalidArgument, "unknown class weight preset '" + std::string(name) + "'");
}

struct RidgeConfig {
    double alpha = 1.0;
    double tol = 1e-4;
    int max_iter = 1000;
    ClassWeightConfig class_weight;
    CalibrationMethod calibration = CalibrationMethod::Sigmoid;
    RidgeSolver solver = RidgeSolver::ClosedForm;

    bool operator==(const RidgeConfig&) const = default;
};

struct GridSpace {
    std::vector<double> alphas{0.1, 1.0, 10.0, 100.0};
    std::vector<double> tols{1e-6, 1e-5, 1e-4, 1e-3};
    std::vector<int> max_iters{1000, 2000, 3000};
    std::vector<ClassWeightConfig> class_weights = class_weight_presets();
    std::vector<CalibrationMethod> calibrations{CalibrationMethod::Sigmoid, CalibrationMethod::Isotonic};
    RidgeSolver solver = RidgeSolver::ClosedForm;

    // Lexicographic over (alpha, tol, max_iter, class_weight, calibration).
    std::vector<RidgeConfig> enumerate() const {
        std::vector<RidgeConfig> out;
        for (double a : alphas)
            for (double t : tols)
                for (int m : max_iters)
                    for (const auto& cw : class_weights)
                        for (auto cal : calibrations) out.push_back(RidgeConfig{a, t, m, cw, cal, solver});
        return out;
    }
};

struct FoldPipeline {
    RidgeModel ridge;
    Calibrator calibrator;
    bool calibrator_fallback = false;  // Platt did not converge; identity used
};

struct TrainedGate {
    std::vector<std::string> feature_names;
    Scaler scaler;
    std::vector<FoldPipeline> folds;
    RidgeConfig config;
    std::optional<double> tau_star;

    double score_standardized(const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
        double s = 0.0;
        for (const auto& f : folds) s += calibrate(f.calibrator, f.ridge.predict(x));
        return std::clamp(s / static_cast<double>(folds.size()), 0.0, 1.0);
    }
};

inline constexpr int kCrossFitFolds = 3;

// Stratified K-fold: each class shuffled with the seed, then dealt round-robin.
// Returns held-out index lists.
inline std::vector<std::vector<std::size_t>> stratified_kfold(std::span<const int> z, int k,
                                                              std::uint64_t seed = kDefaultSeed) {
    if (k < 2) throw Error(ErrorCode::InvalidArgument, "need at least two folds");
    std::vector<std::size_t> neg, pos;
    for (std::size_t i = 0; i < z.size(); ++i) (z[i] == 0 ? neg : pos).push_back(i);
    std::mt19937_64 rng(seed);
    std::shuffle(neg.begin(), neg.end(), rng);
    std::shuffle(pos.begin(), pos.end(), rng);
    std::vector<std::vector<std::size_t>> folds(static_cast<std::size_t>(k));
    std::size_t slot = 0;
    for (auto i : neg) folds[slot++ % folds.size()].push_back(i);
    for (auto i : pos) folds[slot++ % folds.size()].push_back(i);
    for (auto& f : folds) std::sort(f.begin(), f.end());
    return folds;
}

namespace detail {

inline std::vector<std::size_t> complement(std::size_t n, const std::vector<std::size_t>& held_out) {
    std::vector<bool> mark(n, false);
    for (auto i : held_out) mark[i] = true;
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < n; ++i)
        if (!mark[i]) out.push_back(i);
    return out;
}

inline Eigen::MatrixXd rows(const Eigen::MatrixXd& X, const std::vector<std::size_t>& idx) {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(idx.size()), X.cols());
    for (std::size_t k = 0; k < idx.size(); ++k) out.row(static_cast<Eigen::Index>(k)) = X.row(static_cast<Eigen::Index>(idx[k]));
    return out;
}

inline std::vector<int> pick(std::span<const int> z, const std::vector<std::size_t>& idx) {
    std::vector<int> out;
    out.reserve(idx.size());
    for (auto i : idx) out.push_back(z[i]);
    return out;
}

inline bool both_classes(std::span<const int> z) {
    return std::find(z.begin(), z.end(), 0) != z.end() && std::find(z.begin(), z.end(), 1) != z.end();
}

}  // namespace detail

inline TrainedGate cross_fit_calibrated(const Eigen::MatrixXd& X, std::span<const int> z, const RidgeConfig& cfg,
                                        std::vector<std::string> feature_names = {},
                                        std::uint64_t seed = kDefaultSeed) {
    if (static_cast<std::size_t>(X.rows()) != z.size()) throw Error(ErrorCode::LengthMismatch, "X rows != z length");
    if (!feature_names.empty() && feature_names.size() != static_cast<std::size_t>(X.cols()))
        throw Error(ErrorCode::FeatureMismatch, "feature name count != column count");
    TrainedGate gate;
    gate.feature_names = std::move(feature_names);
    gate.config = cfg;
    gate.scaler = standardize_fit(X);
    const Eigen::MatrixXd Xs = gate.scaler.apply(X);

    for (const auto& held : stratified_kfold(z, kCrossFitFolds, seed)) {
        const auto train = detail::complement(z.size(), held);
        const auto z_train = detail::pick(z, train);
        const auto z_held = detail::pick(z, held);
        if (!detail::both_classes(z_train) || !detail::both_classes(z_held))
            throw Error(ErrorCode::DegenerateFold, "a cross-fit fold lacks one of the classes");

        FoldPipeline fp;
        fp.ridge = fit_ridge_weighted(detail::rows(Xs, train), z_train, cfg.class_weight.resolve(z_train), cfg.alpha,
                                      cfg.solver, cfg.tol, cfg.max_iter);
        const Eigen::VectorXd raw = fp.ridge.predict(detail::rows(Xs, held));
        const std::vector<double> raw_v(raw.data(), raw.data() + raw.size());
        if (cfg.calibration == CalibrationMethod::Sigmoid) {
            const auto fit = fit_platt(raw_v, z_held);
            if (fit.converged) fp.calibrator = fit.calibrator;
            else {
                fp.calibrator = IdentityCalibrator{};
                fp.calibrator_fallback = true;
            }
        } else {
            fp.calibrator = fit_isotonic(raw_v, z_held);
        }
        gate.folds.push_back(std::move(fp));
    }
    return gate;
}

// Scores rows that are already in the gate's column order.
inline std::vector<double> predict_scores_ordered(const TrainedGate& gate, const Eigen::MatrixXd& X) {
    const Eigen::MatrixXd Xs = gate.scaler.apply(X);
    std::vector<double> out(static_cast<std::size_t>(Xs.rows()));
    for (Eigen::Index i = 0; i < Xs.rows(); ++i) out[static_cast<std::size_t>(i)] = gate.score_standardized(Xs.row(i));
    return out;
}

// Aligns columns by name; invalid rows score 0 (always escalated).
inline std::vector<double> predict_scores(const TrainedGate& gate, const FeatureMatrix& m) {
    if (m.columns.size() != gate.feature_names.size())
        throw Error(ErrorCode::FeatureMismatch, "feature set differs from training (" +
                                                    std::to_string(m.columns.size()) + " vs " +
                                                    std::to_string(gate.feature_names.size()) + " columns)");
    Eigen::MatrixXd X(m.values.rows(), static_cast<Eigen::Index>(gate.feature_names.size()));
    for (std::size_t j = 0; j < gate.feature_names.size(); ++j) {
        auto src = m.column_index(gate.feature_names[j]);
        if (!src) throw Error(ErrorCode::FeatureMismatch, "missing feature " + gate.feature_names[j]);
        X.col(static_cast<Eigen::Index>(j)) = m.values.col(static_cast<Eigen::Index>(*src));
    }
    auto s = predict_scores_ordered(gate, X);
    for (std::size_t i = 0; i < s.size(); ++i)
        if (!m.valid[i]) s[i] = 0.0;
    return s;
}

inline double predict_score(const TrainedGate& gate, const FeatureVector& fv) {
    if (!fv.valid) return 0.0;
    if (fv.entries.size() != gate.feature_names.size())
        throw Error(ErrorCode::FeatureMismatch, "feature vector width differs from training");
    Eigen::RowVectorXd x(static_cast<Eigen::Index>(gate.feature_names.size()));
    for (std::size_t j = 0; j < gate.feature_names.size(); ++j) {
        auto v = fv.get(gate.feature_names[j]);
        if (!v) throw Error(ErrorCode::FeatureMismatch, "missing feature " + gate.feature_names[j]);
        x(static_cast<Eigen::Index>(j)) = *v;
    }
    const Eigen::RowVectorXd xs = (x - gate.scaler.mean.transpose()).array() / gate.scaler.scale.transpose().array();
    return gate.score_standardized(xs);
}

// ---------------------------------------------------------------------------
// Grid search

// F1 of the error class (z = 0) when scores below the threshold are flagged.
inline double error_class_f1(std::span<const double> scores, std::span<const int> z, double threshold = 0.5) {
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        const bool flagged = scores[i] < threshold;
        if (flagged && z[i] == 0) ++tp;
        else if (flagged && z[i] == 1) ++fp;
        else if (!flagged && z[i] == 0) ++fn;
    }
    const auto denom = 2 * tp + fp + fn;
    return denom == 0 ? 0.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
}

struct GridEntry {
    RidgeConfig config;
    double mean_f1 = 0.0;
    std::vector<double> fold_f1;
};

struct GridResult {
    RidgeConfig best;
    double best_f1 = 0.0;
    std::vector<GridEntry> entries;  // enumeration order
};

inline GridEntry evaluate_config(const Eigen::MatrixXd& X, std::span<const int> z, const RidgeConfig& cfg,
                                 std::uint64_t seed = kDefaultSeed) {
    GridEntry e;
    e.config = cfg;
    for (const auto& held : stratified_kfold(z, kCrossFitFolds, seed)) {
        const auto train = detail::complement(z.size(), held);
        const auto z_train = detail::pick(z, train);
        const auto gate = cross_fit_calibrated(detail::rows(X, train), z_train, cfg, {}, seed);
        const auto s = predict_scores_ordered(gate, detail::rows(X, held));
        e.fold_f1.push_back(error_class_f1(s, detail::pick(z, held)));
    }
    double sum = 0.0;
    for (double f : e.fold_f1) sum += f;
    e.mean_f1 = sum / static_cast<double>(e.fold_f1.size());
    return e;
}

// Configurations are independent; results are reduced in enumeration order so
// the thread count never changes the winner.
inline GridResult grid_search(const GridSpace& space, const Eigen::MatrixXd& X, std::span<const int> z,
                              std::uint64_t seed = kDefaultSeed, unsigned threads = 0) {
    const auto configs = space.enumerate();
    if (configs.empty()) throw Error(ErrorCode::InvalidArgument, "empty grid");
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = std::min<unsigned>(threads, static_cast<unsigned>(configs.size()));

    GridResult r;
    r.entries.resize(configs.size());
    std::vector<std::exception_ptr> errors(threads);
    auto worker = [&](unsigned t) {
        try {
            for (std::size_t i = t; i < configs.size(); i += threads) r.entries[i] = evaluate_config(X, z, configs[i], seed);
        } catch (...) {
            errors[t] = std::current_exception();
        }
    };
    if (threads == 1) {
        worker(0);
    } else {
        std::vector<std::jthread> pool;
        for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker, t);
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);

    r.best = r.entries[0].config;
    r.best_f1 = r.entries[0].mean_f1;
    for (const auto& e : r.entries)
        if (e.mean_f1 > r.best_f1) {
            r.best = e.config;
            r.best_f1 = e.mean_f1;
        }
    return r;
}

// ---------------------------------------------------------------------------
// Model artifact (versioned JSON with a content hash)

inline constexpr int kModelFormatVersion = 1;

inline nlohmann::ordered_json to_json(const RidgeConfig& c) {
    nlohmann::ordered_json j;
    j["alpha"] = c.alpha;
    j["tol"] = c.tol;
    j["max_iter"] = c.max_iter;
    j["class_weight"] = c.class_weight.name;
    j["calibration"] = std::string(to_string(c.calibration));
    j["solver"] = c.solver == RidgeSolver::ClosedForm ? "closed_form" : "iterative";
    return j;
}

inline RidgeConfig ridge_config_from_json(const nlohmann::ordered_json& j) {
    RidgeConfig c;
    c.alpha = j.at("alpha").get<double>();
    c.tol = j.at("tol").get<double>();
    c.max_iter = j.at("max_iter").get<int>();
    c.class_weight = class_weight_preset(j.at("class_weight").get<std::string>());
    const auto cal = j.at("calibration").get<std::string>();
    if (cal == "sigmoid") c.calibration = CalibrationMethod::Sigmoid;
    else if (cal == "isotonic") c.calibration = CalibrationMethod::Isotonic;
    else throw Error(ErrorCode::InvalidArgument, "unknown calibration '" + cal + "'");
    c.solver = j.at("solver").get<std::string>() == "iterative" ? RidgeSolver::Iterative : RidgeSolver::ClosedForm;
    return c;
}

namespace detail {

inline nlohmann::ordered_json vec_json(const Eigen::VectorXd& v) {
    nlohmann::ordered_json a = nlohmann::ordered_json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
}

inline Eigen::VectorXd vec_from_json(const nlohmann::ordered_json& a) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(a.size()));
    for (std::size_t i = 0; i < a.size(); ++i) v(static_cast<Eigen::Index>(i)) = a[i].get<double>();
    return v;
}

inline nlohmann::ordered_json gate_body(const TrainedGate& g) {
    nlohmann::ordered_json j;
    j["format"] = "lppgate.model";
    j["version"] = kModelFormatVersion;
    j["feature_names"] = g.feature_names;
    j["scaler"]["mean"] = vec_json(g.scaler.mean);
    j["scaler"]["scale"] = vec_json(g.scaler.scale);
    nlohmann::ordered_json folds = nlohmann::ordered_json::array();
    for (const auto& f : g.folds) {
        nlohmann::ordered_json fj;
        fj["w"] = vec_json(f.ridge.w);
        fj["b"] = f.ridge.b;
        nlohmann::ordered_json cj;
        if (std::holds_alternative<IdentityCalibrator>(f.calibrator)) {
            cj["kind"] = "identity";
        } else if (const auto* p = std::get_if<PlattCalibrator>(&f.calibrator)) {
            cj["kind"] = "sigmoid";
            cj["a"] = p->a;
            cj["b"] = p->b;
        } else {
            const auto& iso = std::get<IsotonicCalibrator>(f.calibrator);
            cj["kind"] = "isotonic";
            cj["x"] = iso.x;
            cj["y"] = iso.y;
        }
        fj["calibrator"] = std::move(cj);
        fj["calibrator_fallback"] = f.calibrator_fallback;
        folds.push_back(std::move(fj));
    }
    j["folds"] = std::move(folds);
    j["config"] = to_json(g.config);
    j["tau_star"] = g.tau_star ? nlohmann::ordered_json(*g.tau_star) : nlohmann::ordered_json(nullptr);
    return j;
}

}  // namespace detail

inline std::string gate_content_hash(const TrainedGate& g) { return sha256_hex(detail::gate_body(g).dump()); }

inline nlohmann::ordered_json to_json(const TrainedGate& g) {
    auto j = detail::gate_body(g);
    j["content_hash"] = sha256_hex(j.dump());
    return j;
}

inline TrainedGate gate_from_json(const nlohmann::ordered_json& j) {
    if (j.value("format", "") != "lppgate.model") throw Error(ErrorCode::InvalidArgument, "not a model artifact");
    if (j.at("version").get<int>() != kModelFormatVersion)
        throw Error(ErrorCode::InvalidArgument, "unsupported model version");
    TrainedGate g;
    g.feature_names = j.at("feature_names").get<std::vector<std::string>>();
    g.scaler.mean = detail::vec_from_json(j.at("scaler").at("mean"));
    g.scaler.scale = detail::vec_from_json(j.at("scaler").at("scale"));
    for (const auto& fj : j.at("folds")) {
        FoldPipeline f;
        f.ridge.w = detail::vec_from_json(fj.at("w"));
        f.ridge.b = fj.at("b").get<double>();
        const auto& cj = fj.at("calibrator");
        const auto kind = cj.at("kind").get<std::string>();
        if (kind == "identity") f.calibrator = IdentityCalibrator{};
        else if (kind == "sigmoid") f.calibrator = PlattCalibrator{cj.at("a").get<double>(), cj.at("b").get<double>()};
        else if (kind == "isotonic")
            f.calibrator = IsotonicCalibrator{cj.at("x").get<std::vector<double>>(), cj.at("y").get<std::vector<double>>()};
        else throw Error(ErrorCode::InvalidArgument, "unknown calibrator kind '" + kind + "'");
        f.calibrator_fallback = fj.value("calibrator_fallback", false);
        g.folds.push_back(std::move(f));
    }
    g.config = ridge_config_from_json(j.at("config"));
    if (!j.at("tau_star").is_null()) g.tau_star = j.at("tau_star").get<double>();
    if (auto it = j.find("content_hash"); it != j.end() && it->get<std::string>() != gate_content_hash(g))
        throw Error(ErrorCode::InvalidArgument, "model content hash mismatch");
    return g;
}

}  // namespace lppgate
