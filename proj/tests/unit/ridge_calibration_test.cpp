#include "lppgate/calibration.hpp"
#include "lppgate/ridge.hpp"
#include "test_util.hpp"

#include <cmath>
#include <limits>
#include <random>

using namespace lppgate;

namespace {

struct Problem {
    Eigen::MatrixXd X;
    std::vector<int> z;
};

Problem random_problem(Eigen::Index n, Eigen::Index d, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0, 1);
    Problem p;
    p.X.resize(n, d);
    for (Eigen::Index i = 0; i < n; ++i) {
        double s = 0;
        for (Eigen::Index j = 0; j < d; ++j) {
            p.X(i, j) = g(rng);
            s += p.X(i, j) * (j % 2 ? -0.5 : 1.0);
        }
        p.z.push_back(s + 0.5 * g(rng) > 0 ? 1 : 0);
    }
    return p;
}

// Best isotonic fit by enumerating contiguous block partitions (n <= 10).
double brute_isotonic_sse(const std::vector<double>& v) {
    const std::size_t n = v.size();
    double best = std::numeric_limits<double>::infinity();
    for (unsigned mask = 0; mask < (1u << (n - 1)); ++mask) {
        double prev = -std::numeric_limits<double>::infinity(), sse = 0;
        bool ok = true;
        std::size_t start = 0;
        for (std::size_t i = 0; i < n && ok; ++i) {
            if (i == n - 1 || (mask >> i) & 1u) {
                double m = 0;
                for (std::size_t k = start; k <= i; ++k) m += v[k];
                m /= static_cast<double>(i - start + 1);
                if (m < prev - 1e-15) ok = false;
                for (std::size_t k = start; k <= i; ++k) sse += (v[k] - m) * (v[k] - m);
                prev = m;
                start = i + 1;
            }
        }
        if (ok) best = std::min(best, sse);
    }
    return best;
}

}  // namespace

TEST(Scaler, Examples) {
    Eigen::MatrixXd X(2, 2);
    X << 1, 5, 3, 5;
    const auto s = standardize_fit(X);
    EXPECT_DOUBLE_EQ(s.mean(0), 2.0);
    EXPECT_DOUBLE_EQ(s.scale(0), 1.0);
    EXPECT_DOUBLE_EQ(s.scale(1), 1.0);
    const auto T = s.apply(X);
    EXPECT_DOUBLE_EQ(T(0, 0), -1.0);
    EXPECT_DOUBLE_EQ(T(1, 0), 1.0);
    EXPECT_DOUBLE_EQ(T(0, 1), 0.0);
    Eigen::MatrixXd u(1, 2);
    u << 5, 5;
    EXPECT_DOUBLE_EQ(s.apply(u)(0, 0), 3.0);
    EXPECT_LPP_ERROR(s.apply(Eigen::MatrixXd(1, 3)), ErrorCode::FeatureMismatch);
}

TEST(Ridge, HandSolved) {
    Eigen::MatrixXd X(2, 1);
    X << 1, -1;
    const std::vector<int> z{1, 0};
    const auto m = fit_ridge_weighted(X, z, {}, 2.0);
    EXPECT_NEAR(m.w(0), 0.25, 1e-14);
    EXPECT_NEAR(m.b, 0.5, 1e-14);
}

TEST(Ridge, HeavyPenaltyGivesWeightedMean) {
    const auto p = random_problem(50, 3, 1);
    const ClassWeights cw{2.0, 1.0};
    const auto m = fit_ridge_weighted(p.X, p.z, cw, 1e9);
    EXPECT_LT(m.w.norm(), 1e-6);
    double num = 0, den = 0;
    for (int zi : p.z) {
        num += cw.of(zi) * zi;
        den += cw.of(zi);
    }
    EXPECT_NEAR(m.b, num / den, 1e-6);
}

TEST(Ridge, DuplicatedRowsSameSolution) {
    const auto p = random_problem(40, 4, 2);
    Eigen::MatrixXd X2(80, 4);
    X2 << p.X, p.X;
    std::vector<int> z2 = p.z;
    z2.insert(z2.end(), p.z.begin(), p.z.end());
    const auto a = fit_ridge_weighted(p.X, p.z, {}, 1.0);
    const auto b = fit_ridge_weighted(X2, z2, {}, 2.0);
    EXPECT_LT((a.w - b.w).norm(), 1e-12);
    EXPECT_NEAR(a.b, b.b, 1e-12);
}

TEST(Ridge, FiniteDifferenceOptimality) {
    const auto p = random_problem(120, 5, 3);
    const ClassWeights cw{0.64, 1.0};
    const double alpha = 3.0;
    const auto m = fit_ridge_weighted(p.X, p.z, cw, alpha);
    const double h = 1e-6;
    auto grad_norm = [&](const Eigen::VectorXd& w, double b) {
        double g = 0;
        for (Eigen::Index j = 0; j <= w.size(); ++j) {
            Eigen::VectorXd wp = w, wm = w;
            double bp = b, bm = b;
            if (j < w.size()) {
                wp(j) += h;
                wm(j) -= h;
            } else {
                bp += h;
                bm -= h;
            }
            const double d = (ridge_objective(p.X, p.z, cw, alpha, wp, bp) - ridge_objective(p.X, p.z, cw, alpha, wm, bm)) / (2 * h);
            g = std::max(g, std::abs(d));
        }
        return g;
    };
    const double g0 = grad_norm(Eigen::VectorXd::Zero(5), 0.0);
    EXPECT_LT(grad_norm(m.w, m.b), 1e-6 * (1 + g0));
}

TEST(Ridge, MonotoneShrinkage) {
    const auto p = random_problem(100, 6, 4);
    double prev = std::numeric_limits<double>::infinity();
    for (double a : {0.1, 1.0, 10.0, 100.0}) {
        const double n = fit_ridge_weighted(p.X, p.z, {}, a).w.norm();
        EXPECT_LE(n, prev);
        prev = n;
    }
}

TEST(Ridge, WeightAndPenaltyScaling) {
    const auto p = random_problem(60, 3, 5);
    const auto a = fit_ridge_weighted(p.X, p.z, {0.5, 1.0}, 2.0);
    const auto b = fit_ridge_weighted(p.X, p.z, {1.5, 3.0}, 6.0);
    EXPECT_LT((a.w - b.w).norm(), 1e-9);
    EXPECT_NEAR(a.b, b.b, 1e-9);
}

TEST(Ridge, IterativeAgreesWithClosedForm) {
    const auto p = random_problem(200, 8, 6);
    const auto a = fit_ridge_weighted(p.X, p.z, {1.0, 0.64}, 1.0);
    const auto b = fit_ridge_weighted(p.X, p.z, {1.0, 0.64}, 1.0, RidgeSolver::Iterative, 1e-12, 1000);
    EXPECT_TRUE(b.converged);
    EXPECT_LT((a.w - b.w).lpNorm<Eigen::Infinity>(), 1e-6);
    EXPECT_NEAR(a.b, b.b, 1e-6);
}

TEST(Ridge, InputChecks) {
    Eigen::MatrixXd X(2, 1);
    X << 1, 2;
    EXPECT_LPP_ERROR(fit_ridge_weighted(X, std::vector<int>{1}, {}, 1.0), ErrorCode::LengthMismatch);
    EXPECT_LPP_ERROR(fit_ridge_weighted(X, std::vector<int>{1, 0}, {0.0, 1.0}, 1.0), ErrorCode::InvalidArgument);
}

TEST(Platt, TwoPoints) {
    const std::vector<double> s{-1, 1};
    const std::vector<int> z{0, 1};
    const auto f = fit_platt(s, z);
    EXPECT_TRUE(f.converged);
    EXPECT_NEAR(f.calibrator.a, std::log(2.0), 1e-8);
    EXPECT_NEAR(f.calibrator.b, 0.0, 1e-8);
}

TEST(Platt, SingleClassIsFlat) {
    const std::vector<double> s{-1, 0, 1, 2};
    const std::vector<int> z{1, 1, 1, 1};
    const auto f = fit_platt(s, z);
    for (double v : s) EXPECT_NEAR(f.calibrator(v), 5.0 / 6.0, 1e-6);
}

TEST(Platt, ConstantScoresPickZeroSlope) {
    const std::vector<double> s(6, 0.3);
    const std::vector<int> z{0, 1, 1, 0, 1, 1};
    const auto f = fit_platt(s, z);
    EXPECT_TRUE(f.converged);
    EXPECT_EQ(f.calibrator.a, 0.0);
}

TEST(Platt, PreservesOrderWhenSlopePositive) {
    const auto p = random_problem(200, 1, 8);
    std::vector<double> s(200);
    for (int i = 0; i < 200; ++i) s[static_cast<std::size_t>(i)] = p.X(i, 0);
    const auto f = fit_platt(s, p.z);
    ASSERT_GT(f.calibrator.a, 0.0);
    for (std::size_t i = 0; i < s.size(); ++i)
        for (std::size_t j = 0; j < s.size(); ++j)
            if (s[i] < s[j]) {
                ASSERT_LT(f.calibrator(s[i]), f.calibrator(s[j]));
            }
}

TEST(Isotonic, Examples) {
    {
        const std::vector<double> s{1, 2, 3};
        const std::vector<int> z{1, 0, 1};
        const auto c = fit_isotonic(s, z);
        EXPECT_DOUBLE_EQ(c(1), 0.5);
        EXPECT_DOUBLE_EQ(c(2), 0.5);
        EXPECT_DOUBLE_EQ(c(3), 1.0);
    }
    {
        const std::vector<double> s{1, 2, 3, 4};
        const std::vector<int> z{0, 0, 1, 1};
        const auto c = fit_isotonic(s, z);
        for (std::size_t i = 0; i < 4; ++i) EXPECT_DOUBLE_EQ(c(s[i]), z[i]);
    }
    {
        const std::vector<double> s{7, 7, 7};
        const std::vector<int> z{0, 1, 1};
        EXPECT_DOUBLE_EQ(fit_isotonic(s, z)(7), 2.0 / 3.0);
    }
}

TEST(Isotonic, StepInterpolationAndClamp) {
    const std::vector<double> s{0.2, 0.8};
    const std::vector<int> z{0, 1};
    const auto c = fit_isotonic(s, z);
    EXPECT_DOUBLE_EQ(c(0.5), 0.0);
    EXPECT_DOUBLE_EQ(c(-5), 0.0);
    EXPECT_DOUBLE_EQ(c(9), 1.0);
}

TEST(Isotonic, MatchesBruteForce) {
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> u(0, 1);
    for (int rep = 0; rep < 300; ++rep) {
        const std::size_t n = 1 + rep % 10;
        std::vector<double> v(n), w(n, 1.0);
        for (auto& x : v) x = u(rng) < 0.5 ? 0.0 : (u(rng) < 0.5 ? 1.0 : u(rng));
        const auto g = pava(v, w);
        double sse = 0;
        for (std::size_t i = 0; i < n; ++i) {
            sse += (v[i] - g[i]) * (v[i] - g[i]);
            if (i) {
                EXPECT_LE(g[i - 1], g[i]);
            }
        }
        EXPECT_NEAR(sse, brute_isotonic_sse(v), 1e-12);
    }
}

TEST(Calibrate, ClampsToUnitInterval) {
    EXPECT_EQ(calibrate(IdentityCalibrator{}, 1.7), 1.0);
    EXPECT_EQ(calibrate(IdentityCalibrator{}, -0.2), 0.0);
    EXPECT_DOUBLE_EQ(calibrate(PlattCalibrator{0.0, 0.0}, 42.0), 0.5);
}
