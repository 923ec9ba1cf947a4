#pragma once

// Score-to-probability calibrators: Platt sigmoid (Newton, smoothed targets)
// and isotonic regression (pool adjacent violators).

#include "lppgate/common.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <variant>
#include <vector>

namespace lppgate {

struct IdentityCalibrator {
    double operator()(double s) const { return std::clamp(s, 0.0, 1.0); }
};

struct PlattCalibrator {
    double a = 0.0;
    double b = 0.0;

    double operator()(double s) const {
        const double u = a * s + b;
        return u >= 0 ? 1.0 / (1.0 + std::exp(-u)) : std::exp(u) / (1.0 + std::exp(u));
    }
};

struct PlattFit {
    PlattCalibrator calibrator;
    bool converged = false;
    int iterations = 0;
};

namespace detail {

inline double softplus(double u) { return u > 0 ? u + std::log1p(std::exp(-u)) : std::log1p(std::exp(u)); }

inline double sigmoid(double u) { return u >= 0 ? 1.0 / (1.0 + std::exp(-u)) : std::exp(u) / (1.0 + std::exp(u)); }

}  // namespace detail

// Maximizes the smoothed-target log likelihood of sigma(a*s + b).
inline PlattFit fit_platt(std::span<const double> scores, std::span<const int> z, int max_iter = 100,
                          double grad_tol = 1e-9) {
    if (scores.size() != z.size()) throw Error(ErrorCode::LengthMismatch, "scores and labels differ in length");
    if (scores.empty()) throw Error(ErrorCode::InvalidArgument, "no scores to calibrate");
    const auto n_pos = static_cast<double>(std::count(z.begin(), z.end(), 1));
    const auto n_neg = static_cast<double>(z.size()) - n_pos;
    const double t_pos = (n_pos + 1.0) / (n_pos + 2.0);
    const double t_neg = 1.0 / (n_neg + 2.0);

    std::vector<double> t(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) t[i] = z[i] == 1 ? t_pos : t_neg;

    auto objective = [&](double a, double b) {
        double f = 0.0;
        for (std::size_t i = 0; i < t.size(); ++i) {
            const double u = a * scores[i] + b;
            f += detail::softplus(u) - t[i] * u;
        }
        return f;
    };

    const double t_mean = std::accumulate(t.begin(), t.end(), 0.0) / static_cast<double>(t.size());
    PlattFit fit;
    double a = 0.0, b = std::log(t_mean / (1.0 - t_mean));
    double f = objective(a, b);
    for (int it = 0; it <= max_iter; ++it) {
        double ga = 0.0, gb = 0.0, haa = 0.0, hab = 0.0, hbb = 0.0;
        for (std::size_t i = 0; i < t.size(); ++i) {
            const double s = scores[i];
            const double p = detail::sigmoid(a * s + b);
            const double d = p - t[i];
            ga += d * s;
            gb += d;
            const double w = p * (1.0 - p);
            haa += w * s * s;
            hab += w * s;
            hbb += w;
        }
        fit.iterations = it;
        if (std::max(std::abs(ga), std::abs(gb)) < grad_tol) {
            fit.converged = true;
            break;
        }
        if (it == max_iter) break;

        // Newton direction with a tiny ridge for the flat direction.
        haa += 1e-12;
        hbb += 1e-12;
        const double det = haa * hbb - hab * hab;
        double da, db;
        if (det > 0.0) {
            da = -(hbb * ga - hab * gb) / det;
            db = -(haa * gb - hab * ga) / det;
        } else {
            da = -ga;
            db = -gb;
        }
        double step = 1.0;
        bool moved = false;
        while (step >= 1e-12) {
            const double fa = objective(a + step * da, b + step * db);
            if (fa <= f + 1e-4 * step * (ga * da + gb * db)) {
                a += step * da;
                b += step * db;
                f = fa;
                moved = true;
                break;
            }
            step *= 0.5;
        }
        if (!moved) {
            // At machine precision of the objective; accept if the gradient is tiny relative to n.
            fit.converged = std::max(std::abs(ga), std::abs(gb)) < 1e-6 * static_cast<double>(t.size());
            break;
        }
    }
    fit.calibrator = PlattCalibrator{a, b};
    return fit;
}

// Non-decreasing step function on the score axis.
struct IsotonicCalibrator {
    std::vector<double> x;  // distinct knots, ascending
    std::vector<double> y;  // fitted value from each knot onward

    double operator()(double s) const {
        if (x.empty()) return 0.5;
        auto it = std::upper_bound(x.begin(), x.end(), s);
        const std::size_t i = it == x.begin() ? 0 : static_cast<std::size_t>(it - x.begin()) - 1;
        return std::clamp(y[i], 0.0, 1.0);
    }
};

// Weighted pool-adjacent-violators; returns the fitted value for each input in order.
inline std::vector<double> pava(std::span<const double> values, std::span<const double> weights) {
    struct Block {
        double sum;
        double weight;
        std::size_t count;
        double mean() const { return sum / weight; }
    };
    std::vector<Block> blocks;
    for (std::size_t i = 0; i < values.size(); ++i) {
        blocks.push_back({values[i] * weights[i], weights[i], 1});
        while (blocks.size() > 1 && blocks[blocks.size() - 2].mean() > blocks.back().mean()) {
            auto last = blocks.back();
            blocks.pop_back();
            blocks.back().sum += last.sum;
            blocks.back().weight += last.weight;
            blocks.back().count += last.count;
        }
    }
    std::vector<double> out;
    out.reserve(values.size());
    for (const auto& blk : blocks) out.insert(out.end(), blk.count, blk.mean());
    return out;
}

inline IsotonicCalibrator fit_isotonic(std::span<const double> scores, std::span<const int> z) {
    if (scores.size() != z.size()) throw Error(ErrorCode::LengthMismatch, "scores and labels differ in length");
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // Pre-pool equal scores.
    IsotonicCalibrator cal;
    std::vector<double> means, weights;
    for (std::size_t k = 0; k < order.size();) {
        std::size_t e = k;
        double sum = 0.0;
        while (e < order.size() && scores[order[e]] == scores[order[k]]) sum += z[order[e++]];
        cal.x.push_back(scores[order[k]]);
        weights.push_back(static_cast<double>(e - k));
        means.push_back(sum / static_cast<double>(e - k));
        k = e;
    }
    cal.y = pava(means, weights);
    return cal;
}

enum class CalibrationMethod : std::uint8_t { Sigmoid, Isotonic };

inline std::string_view to_string(CalibrationMethod m) { return m == CalibrationMethod::Sigmoid ? "sigmoid" : "isotonic"; }

using Calibrator = std::variant<IdentityCalibrator, PlattCalibrator, IsotonicCalibrator>;

inline double calibrate(const Calibrator& c, double raw) {
    return std::clamp(std::visit([raw](const auto& cal) { return cal(raw); }, c), 0.0, 1.0);
}

}  // namespace lppgate
