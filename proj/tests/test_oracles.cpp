#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "nsrlsvi/oracles.hpp"
#include "nsrlsvi/rng.hpp"

using namespace nsrlsvi;

namespace {

Vector vec(std::initializer_list<double> xs) {
    Vector v(static_cast<Eigen::Index>(xs.size()));
    Eigen::Index i = 0;
    for (double x : xs) v[i++] = x;
    return v;
}

const Vector e1 = vec({1, 0});
const Vector e2 = vec({0, 1});
const Vector diag = (e1 + e2) / std::sqrt(2.0);

RegressionProblem three_point_system(double W) {
    RegressionProblem p;
    p.features = {e1, e2, diag};
    p.targets = {1, 2, 3 / std::sqrt(2.0)};
    p.W = W;
    return p;
}

}  // namespace

TEST(ExactLsq, SingleAxisDatum) {
    RegressionProblem p;
    p.features = {e1};
    p.targets = {1.0};
    const LsqResult r = exact_lsq(p, LinOpt({e1, e2}));
    EXPECT_NEAR((r.theta - e1).norm(), 0.0, 1e-12);
    EXPECT_TRUE(r.in_class);
    EXPECT_FALSE(r.fallback);
}

TEST(ExactLsq, EmptyDataGivesZero) {
    const LsqResult r = exact_lsq(RegressionProblem{}, LinOpt({e1, e2}));
    EXPECT_TRUE(r.theta.isZero(0.0));
}

TEST(ExactLsq, ConsistentThreePointSystem) {
    const LsqResult r = exact_lsq(three_point_system(10.0), LinOpt({e1, e2, diag}));
    EXPECT_NEAR((r.theta - vec({1, 2})).norm(), 0.0, 1e-12);
    EXPECT_TRUE(r.in_class);
}

TEST(ExactLsq, WeightedRowsMatchRepeatedRows) {
    Rng rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        RegressionProblem rep, wtd;
        for (int i = 0; i < 6; ++i) {
            const Vector x = standard_normal(3, rng);
            const double y = standard_normal(1, rng)[0];
            const int k = 1 + i % 3;
            for (int j = 0; j < k; ++j) {
                rep.features.push_back(x);
                rep.targets.push_back(y);
            }
            wtd.features.push_back(x);
            wtd.targets.push_back(y);
            wtd.weights.push_back(k);
        }
        EXPECT_LE((min_norm_lsq(rep, 3) - min_norm_lsq(wtd, 3)).norm(), 1e-9);
        EXPECT_NEAR(rep.objective(vec({0.1, 0.2, 0.3})), wtd.objective(vec({0.1, 0.2, 0.3})), 1e-9);
    }
}

TEST(ExactLsq, LargeOneHotTargetsAreReproducedExactly) {
    // Each one-hot feature appears on several weighted rows sharing a target near 1e8.
    const Eigen::Index d = 12;
    std::vector<Vector> basis;
    for (Eigen::Index i = 0; i < d; ++i) basis.push_back(Vector::Unit(d, i));
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        RegressionProblem p;
        p.W = 1e12;
        Rng rng(seed);
        const int reps = 1 + static_cast<int>(seed % 6);
        for (Eigen::Index i = 0; i < d; ++i) {
            const double y = 1e8 * (1.0 + uniform01(rng));
            for (int copy = 0; copy < reps; ++copy) {
                p.features.push_back(basis[static_cast<std::size_t>(i)]);
                p.targets.push_back(y);
                p.weights.push_back(1.0 + 37.0 * uniform01(rng));
            }
        }
        const LsqResult r = exact_lsq(p, LinOpt(basis));
        for (std::size_t i = 0; i < p.size(); ++i) EXPECT_EQ(r.theta.dot(p.features[i]), p.targets[i]) << "seed " << seed;
    }
}

TEST(ExactLsq, MinNormAmongMinimizers) {
    // Only e1 is observed: the e2 coordinate must stay at zero.
    RegressionProblem p;
    p.features = {e1, 2.0 * e1};
    p.targets = {1.0, 2.0};
    const Vector t = min_norm_lsq(p, 2);
    EXPECT_NEAR(t[0], 1.0, 1e-12);
    EXPECT_NEAR(t[1], 0.0, 1e-12);
}

TEST(ExactLsq, OutOfClassFallsBackToConstrainedOracle) {
    RegressionProblem p;
    p.features = {e1};
    p.targets = {1.2};
    p.W = 1.0;
    const LinOpt lo({e1, e2});
    ApxOptions opt;
    opt.eps = 0.05;
    Rng rng(4);

    const LsqResult plain = exact_lsq(p, lo);
    EXPECT_FALSE(plain.in_class);
    EXPECT_FALSE(plain.fallback);

    const LsqResult r = exact_lsq(p, lo, opt, &rng, /*reward=*/true);
    EXPECT_TRUE(r.fallback);
    EXPECT_TRUE(r.in_class);
    EXPECT_LE(lo.max_abs(r.theta), 1.0 + opt.eps);
    // Over O(1 + eps) the best objective is (1.2 - 1.05)^2.
    EXPECT_LE(p.objective(r.theta), 0.0225 + opt.eps);
}

TEST(SeparationKapx, Examples) {
    {
        RegressionProblem q;
        q.features = {e1, e2};
        q.targets = {0.05, -0.1};
        EXPECT_FALSE(separation_for_Kapx(Vector::Zero(2), q, 0.1, LinOpt({e1, e2})));
        q.features = {e1};
        q.targets = {0.0};
        const auto h = separation_for_Kapx(3.0 * e1, q, 0.1, LinOpt({e1, e2}));
        ASSERT_TRUE(h);
        EXPECT_EQ(h->a, e1);
        EXPECT_DOUBLE_EQ(h->b, 0.1);
    }
    RegressionProblem p;
    p.features = {e1};
    p.targets = {1.0};
    p.W = 2.0;
    const LinOpt lo({e1, e2});
    const double eps = 0.1;

    auto h = separation_for_Kapx(vec({1.5, 0}), p, eps, lo);
    ASSERT_TRUE(h);
    EXPECT_EQ(h->a, e1);
    EXPECT_DOUBLE_EQ(h->b, 1.1);

    h = separation_for_Kapx(vec({0.5, 0}), p, eps, lo);
    ASSERT_TRUE(h);
    EXPECT_EQ(h->a, -e1);
    EXPECT_DOUBLE_EQ(h->b, -0.9);

    h = separation_for_Kapx(vec({1, 3}), p, eps, lo);
    ASSERT_TRUE(h);
    EXPECT_EQ(h->a, e2);
    EXPECT_DOUBLE_EQ(h->b, 2.1);

    h = separation_for_Kapx(vec({1, -3}), p, eps, lo);
    ASSERT_TRUE(h);
    EXPECT_EQ(h->a, -e2);

    EXPECT_FALSE(separation_for_Kapx(vec({1.05, 0.5}), p, eps, lo));
}

TEST(SeparationKapx, ReturnedHyperplaneAlwaysSeparates) {
    Rng rng(5);
    std::vector<Vector> feats;
    for (int i = 0; i < 12; ++i) feats.push_back(standard_normal(3, rng));
    const LinOpt lo(feats);
    RegressionProblem p;
    p.features = {feats[0], feats[1], feats[2]};
    p.targets = {0.3, -0.2, 0.1};
    p.W = 1.0;
    for (int i = 0; i < 500; ++i) {
        const Vector z = 2.0 * standard_normal(3, rng);
        if (const auto h = separation_for_Kapx(z, p, 0.05, lo)) {
            EXPECT_GT(h->a.dot(z), h->b);
        } else {
            EXPECT_LE(p.max_residual(z), 0.05);
            EXPECT_LE(lo.max_abs(z), 1.05 + 1e-12);
        }
    }
}

TEST(LinOpt, ArgmaxMatchesBruteForce) {
    Rng rng(6);
    std::vector<Vector> feats;
    for (int i = 0; i < 40; ++i) feats.push_back(standard_normal(4, rng));
    const LinOpt lo(feats);
    for (int trial = 0; trial < 100; ++trial) {
        const Vector th = standard_normal(4, rng);
        double best = -1e300, best_abs = 0.0;
        for (const auto& f : feats) {
            best = std::max(best, f.dot(th));
            best_abs = std::max(best_abs, std::abs(f.dot(th)));
        }
        const auto hit = lo.argmax(th);
        EXPECT_NEAR(hit.value, best, 1e-12);
        EXPECT_NEAR(feats[hit.index].dot(th), best, 1e-12);
        EXPECT_NEAR(lo.max_abs(th), best_abs, 1e-12);
    }
    EXPECT_THROW(LinOpt(std::vector<Vector>{}), ConfigError);
    EXPECT_THROW(lo.argmax(standard_normal(3, rng)), DimensionMismatch);
}

TEST(FeatureRadius, ContainsTheBoundedClass) {
    EXPECT_DOUBLE_EQ(*feature_radius(std::vector<Vector>{e1, e2}), 1.0);
    EXPECT_FALSE(feature_radius(std::vector<Vector>{e1, 2.0 * e1}));

    // Any theta with |<theta, phi>| <= 1 on the features lies in the cube of that radius.
    Rng rng(7);
    std::vector<Vector> feats;
    for (int i = 0; i < 6; ++i) feats.push_back(standard_normal(3, rng));
    const double R = *feature_radius(feats);
    const LinOpt lo(feats);
    for (int i = 0; i < 2000; ++i) {
        Vector th(3);
        for (Eigen::Index k = 0; k < 3; ++k) th[k] = 1.5 * R * (2.0 * uniform01(rng) - 1.0);
        if (lo.max_abs(th) <= 1.0) {
            EXPECT_LE(th.lpNorm<Eigen::Infinity>(), R + 1e-9);
        }
    }
}

TEST(ApxValueOracle, SingleDatum) {
    RegressionProblem p;
    p.features = {e1};
    p.targets = {0.5};
    p.W = 1.0;
    ApxOptions opt;
    opt.eps = 1e-3;
    Rng rng(8);
    const LinOpt lo({e1, e2});
    const Vector th = apx_value_oracle(p, opt, lo, rng);
    EXPECT_LE(std::abs(th[0] - 0.5), opt.eps);
    EXPECT_LE(lo.max_abs(th), p.W + opt.eps);
}

TEST(ApxValueOracle, ThreePointSystemAtTightTolerance) {
    const RegressionProblem p = three_point_system(3.0);
    ApxOptions opt;
    opt.eps = 1e-4;
    Rng rng(9);
    const LinOpt lo({e1, e2, diag});
    const Vector th = apx_value_oracle(p, opt, lo, rng);
    double sum = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) sum += std::abs(th.dot(p.features[i]) - p.targets[i]);
    EXPECT_LE(sum, 3e-4);
    EXPECT_LE(lo.max_abs(th), p.W + opt.eps);
}

TEST(ApxValueOracle, InconsistentDataFail) {
    RegressionProblem p;
    p.features = {e1, e1};
    p.targets = {0.0, 1.0};
    ApxOptions opt;
    opt.eps = 0.01;
    Rng rng(10);
    EXPECT_THROW(apx_value_oracle(p, opt, LinOpt({e1, e2}), rng), OracleFailure);
}

TEST(ApxValueOracle, NonSpanningFeaturesAreRejected) {
    RegressionProblem p;
    Rng rng(11);
    EXPECT_THROW(apx_value_oracle(p, ApxOptions{}, LinOpt({e1}), rng), ConfigError);
    EXPECT_THROW(apx_value_oracle(p, ApxOptions{}, LinOpt({e1, 2.0 * e1}), rng), ConfigError);
}

TEST(ApxRewardOracle, NoisyRepeatedDatum) {
    // Four zeros and a one at the same feature: the best fit is 0.2 with objective 0.8.
    RegressionProblem p;
    for (int i = 0; i < 4; ++i) {
        p.features.push_back(vec({1}));
        p.targets.push_back(0.0);
    }
    p.features.push_back(vec({1}));
    p.targets.push_back(1.0);
    ApxOptions opt;
    opt.eps = 0.01;
    Rng rng(12);
    const RewardOracleResult r = apx_reward_oracle(p, opt, LinOpt({vec({1})}), rng);
    EXPECT_LE(r.objective, 0.8 + opt.eps);
    EXPECT_NEAR(r.objective, p.objective(r.omega), 1e-12);
    EXPECT_LE(std::abs(r.omega[0]), 1.0 + opt.eps);
}

TEST(ApxRewardOracle, NoiselessDataStopAtZero) {
    RegressionProblem p;
    p.features = {e1, e2};
    p.targets = {0.5, 0.3};
    ApxOptions opt;
    opt.eps = 0.01;
    Rng rng(13);
    const RewardOracleResult r = apx_reward_oracle(p, opt, LinOpt({e1, e2}), rng);
    EXPECT_EQ(r.delta_level, 0.0);
    EXPECT_LE(r.objective, opt.eps / 2.0);
}

TEST(ApxRewardOracle, EmptyDataReturnsAClassMember) {
    ApxOptions opt;
    opt.eps = 0.01;
    Rng rng(14);
    const LinOpt lo({e1, e2});
    const RewardOracleResult r = apx_reward_oracle(RegressionProblem{}, opt, lo, rng);
    EXPECT_EQ(r.delta_level, 0.0);
    EXPECT_LE(lo.max_abs(r.omega), 1.0 + opt.eps);
}

TEST(ApxRewardOracle, GridLevelBracketsTheOptimum) {
    Rng rng(15);
    const LinOpt lo({e1, e2, vec({1, -1}) / std::sqrt(2.0)});
    for (int trial = 0; trial < 8; ++trial) {
        RegressionProblem p;
        for (int i = 0; i < 5; ++i) {
            const auto& f = lo.feature(static_cast<std::size_t>(i % 3));
            p.features.push_back(f);
            p.targets.push_back(uniform01(rng) * 0.8);
        }
        ApxOptions opt;
        opt.eps = 0.05;
        const RewardOracleResult r = apx_reward_oracle(p, opt, lo, rng);
        const double best = p.objective(min_norm_lsq(p, 2));
        const double step = opt.eps / 2.0;
        EXPECT_NEAR(std::remainder(r.delta_level, step), 0.0, 1e-12);
        EXPECT_LE(r.objective, r.delta_level + step + 1e-12);
        EXPECT_LE(r.delta_level, best + step + 1e-12);
        EXPECT_GE(r.objective, best - 1e-12);
    }
}
