#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "oracles.hpp"
#include "tpc/poly.hpp"

using namespace tpc;
using tpc::testing::random_model;
using tpc::testing::random_vector;

namespace {

TpcModel quadratic_18() {
    TpcModel m(2, 2, 1);
    m.term(2).lambda = {2.0};
    m.term(2).factors(0, 0) = 1.0;
    m.term(2).factors(0, 1) = 1.0;
    m.set_trained_through(2);
    return m;
}

} // namespace

TEST(ForwardTruncated, HandLinearCase) {
    TpcModel m(2, 1, 1);
    m.bias() = 1.0;
    m.linear()[0] = 1.0;
    m.linear()[1] = -1.0;
    const std::vector<double> z{2.0, 3.0};
    EXPECT_EQ(forward_truncated<double>(m, z, 1), 0.0);
}

TEST(ForwardTruncated, ZeroInputGivesBias) {
    std::mt19937_64 rng(1);
    const auto m = random_model(rng, 4, 3, 4);
    const std::vector<double> z(4, 0.0);
    for (std::size_t n = 1; n <= 4; ++n) EXPECT_EQ(forward_truncated<double>(m, z, n), m.bias());
}

TEST(ForwardTruncated, HandQuadraticCase) {
    const auto m = quadratic_18();
    const std::vector<double> z{1.0, 2.0};
    EXPECT_DOUBLE_EQ(forward_truncated<double>(m, z, 2), 18.0);
    EXPECT_DOUBLE_EQ(forward_term<double>(m, z, 2), 18.0);
}

TEST(ForwardTruncated, RejectsBadArguments) {
    auto m = quadratic_18();
    const std::vector<double> z{1.0, 2.0}, wrong{1.0};
    EXPECT_THROW(forward_truncated<double>(m, wrong, 1), Error);
    EXPECT_THROW(forward_truncated<double>(m, z, 0), Error);
    EXPECT_THROW(forward_truncated<double>(m, z, 3), Error);
    m.set_trained_through(1);
    EXPECT_THROW(forward_truncated<double>(m, z, 2), Error);
    EXPECT_THROW(forward_term<double>(m, z, 2), Error);
    EXPECT_THROW(forward_term<double>(m, z, 1), Error);
}

TEST(ForwardTruncated, AppliesScalerInternally) {
    auto m = quadratic_18();
    m.set_scaler(FeatureScaler({1.0, 1.0}, {2.0, 0.5}));
    const std::vector<double> raw{3.0, 2.0}; // scales to (1, 2)
    EXPECT_DOUBLE_EQ(forward_truncated<double>(m, raw, 2), 18.0);
}

TEST(ForwardTerm, ZeroLambdaContributesNothing) {
    std::mt19937_64 rng(2);
    auto m = random_model(rng, 5, 3, 3);
    std::fill(m.term(3).lambda.begin(), m.term(3).lambda.end(), 0.0);
    const auto z = random_vector(rng, 5);
    EXPECT_EQ(forward_term<double>(m, z, 3), 0.0);
    EXPECT_EQ(forward_truncated<double>(m, z, 3), forward_truncated<double>(m, z, 2));
}

TEST(ForwardProperties, TruncationOneIsLinearProbeBitExact) {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 200; ++trial) {
        const auto m = random_model(rng, 6, 4, 4);
        const auto z = random_vector(rng, 6);
        EXPECT_EQ(forward_truncated<double>(m, z, 1), forward_linear<double>(m, z));
    }
}

TEST(ForwardProperties, AdditivityIsExact) {
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 200; ++trial) {
        const auto m = random_model(rng, 5, 3, 5);
        const auto z = random_vector(rng, 5);
        for (std::size_t n = 2; n <= 5; ++n)
            EXPECT_EQ(forward_truncated<double>(m, z, n),
                      forward_truncated<double>(m, z, n - 1) + forward_term<double>(m, z, n));
    }
}

TEST(ForwardProperties, MatchesDenseOracle) {
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<std::size_t> dim(1, 6), rank(1, 4), degree(1, 4);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t d = dim(rng), r = rank(rng), n = degree(rng);
        const auto m = random_model(rng, d, r, n);
        std::vector<DenseTensor<double>> dense;
        for (std::size_t k = 2; k <= n; ++k) dense.push_back(reconstruct_dense_weights(m, k));
        const auto z = random_vector(rng, d);
        for (std::size_t t = 1; t <= n; ++t) {
            const double fact = forward_truncated<double>(m, z, t);
            const double oracle = forward_dense_oracle<double>(m.bias(), m.linear(), dense, z, t);
            ASSERT_NEAR(fact, oracle, 1e-10) << "D=" << d << " R=" << r << " N=" << n << " n=" << t;
        }
    }
}

TEST(ForwardProperties, TermMatchesMonomialEnumeration) {
    std::mt19937_64 rng(6);
    for (int trial = 0; trial < 50; ++trial) {
        const auto m = random_model(rng, 3, 2, 4);
        const auto z = random_vector(rng, 3);
        for (std::size_t k = 2; k <= 4; ++k)
            EXPECT_NEAR(forward_term<double>(m, z, k), tpc::testing::monomial_sum(m, k, z), 1e-10);
    }
}

TEST(ForwardProperties, TermIsHomogeneous) {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 100; ++trial) {
        const auto m = random_model(rng, 4, 3, 4);
        const auto z = random_vector(rng, 4);
        for (double alpha : {-2.0, 0.5, 3.0}) {
            std::vector<double> az(z);
            for (auto& v : az) v *= alpha;
            for (std::size_t k = 2; k <= 4; ++k) {
                const double lhs = forward_term<double>(m, az, k);
                const double rhs = std::pow(alpha, static_cast<double>(k)) * forward_term<double>(m, z, k);
                EXPECT_LE(std::abs(lhs - rhs), 1e-9 * std::max(1.0, std::abs(rhs)));
            }
        }
    }
}

TEST(Sigmoid, Values) {
    EXPECT_EQ(sigmoid(0.0), 0.5);
    EXPECT_EQ(sigmoid(1000.0), 1.0);
    EXPECT_EQ(sigmoid(-1000.0), 0.0);
    EXPECT_TRUE(std::isfinite(sigmoid(-1000.0)));
    EXPECT_NEAR(sigmoid(std::log(9.0)), 0.9, 1e-15);
    EXPECT_LT(sigmoid(-1.0), sigmoid(1.0));
}

TEST(DenseWeights, OuterProductByHand) {
    TpcModel m(2, 2, 1);
    m.term(2).lambda = {1.0};
    m.term(2).factors(0, 0) = 1.0;
    m.term(2).factors(0, 1) = 2.0;
    m.set_trained_through(2);
    const auto w = reconstruct_dense_weights(m, 2);
    EXPECT_EQ(w.values, (std::vector<double>{1.0, 2.0, 2.0, 4.0}));
}

TEST(DenseWeights, ZeroLambdaGivesZeroTensor) {
    std::mt19937_64 rng(8);
    auto m = random_model(rng, 3, 2, 3);
    std::fill(m.term(3).lambda.begin(), m.term(3).lambda.end(), 0.0);
    for (double v : reconstruct_dense_weights(m, 3).values) EXPECT_EQ(v, 0.0);
}

TEST(DenseWeights, ExactlySymmetricUnderPermutation) {
    std::mt19937_64 rng(9);
    for (int trial = 0; trial < 20; ++trial) {
        const auto m = random_model(rng, 4, 3, 4);
        for (std::size_t k = 3; k <= 4; ++k) {
            const auto w = reconstruct_dense_weights(m, k);
            std::vector<std::size_t> idx(k, 0);
            for (std::size_t flat = 0; flat < w.values.size(); ++flat) {
                std::size_t rem = flat;
                for (std::size_t m2 = k; m2-- > 0;) {
                    idx[m2] = rem % w.dim;
                    rem /= w.dim;
                }
                auto perm = idx;
                std::sort(perm.begin(), perm.end());
                do {
                    ASSERT_EQ(w.at(perm), w.values[flat]);
                } while (std::next_permutation(perm.begin(), perm.end()));
            }
        }
    }
}

TEST(DenseWeights, SizeGuard) {
    TpcModel m(400, 3, 1);
    m.set_trained_through(3);
    EXPECT_NO_THROW(reconstruct_dense_weights(m, 2));
    EXPECT_THROW(reconstruct_dense_weights(m, 3), Error); // 6.4e7 entries
}

TEST(DenseOracle, WorkedDegreeThreeExample) {
    // w0 = 0.5, w1 = (1, -1), W2 = [[1, 2], [3, 4]], W3[a][b][c] = 1 + a + 2b + 4c, z = (2, 3).
    // Expanded by monomial:
    //   linear    2 - 3                                   = -1
    //   quadratic 1*z0^2 + (2+3)*z0 z1 + 4*z1^2           = 4 + 30 + 36 = 70
    //   cubic     1*z0^3 + (2+3+5)*z0^2 z1 + (4+6+7)*z0 z1^2 + 8*z1^3
    //                                                      = 8 + 120 + 306 + 216 = 650
    const std::vector<double> linear{1.0, -1.0}, z{2.0, 3.0};
    std::vector<DenseTensor<double>> dense{{2, 2, {1, 2, 3, 4}}, {2, 3, {}}};
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b)
            for (int c = 0; c < 2; ++c) dense[1].values.push_back(1 + a + 2 * b + 4 * c);
    EXPECT_DOUBLE_EQ(forward_dense_oracle<double>(0.5, linear, dense, z, 1), -0.5);
    EXPECT_DOUBLE_EQ(forward_dense_oracle<double>(0.5, linear, dense, z, 2), 69.5);
    EXPECT_DOUBLE_EQ(forward_dense_oracle<double>(0.5, linear, dense, z, 3), 719.5);

    const std::vector<double> zero{0.0, 0.0};
    EXPECT_EQ(forward_dense_oracle<double>(0.5, linear, dense, zero, 3), 0.5);
    const std::vector<double> short_z{1.0};
    EXPECT_THROW(forward_dense_oracle<double>(0.5, linear, dense, short_z, 3), Error);
}

TEST(NonSymCp, HandCase) {
    NonSymCpTerm<double> t{2, {1.0}, {Matrix<double>(1, 2), Matrix<double>(1, 2)}};
    t.factors[0](0, 0) = 1.0;
    t.factors[1](0, 1) = 1.0;
    const std::vector<double> linear{0.0, 0.0}, z{3.0, 4.0};
    const std::vector<NonSymCpTerm<double>> terms{t};
    EXPECT_EQ(forward_nonsym_cp<double>(0.0, linear, terms, z, 2), 12.0);
    EXPECT_EQ(forward_nonsym_cp<double>(0.0, linear, terms, z, 1), 0.0);
}

TEST(NonSymCp, TiedFactorsReduceToSymmetricExactly) {
    std::mt19937_64 rng(10);
    for (int trial = 0; trial < 100; ++trial) {
        const auto m = random_model(rng, 5, 3, 4);
        std::vector<NonSymCpTerm<double>> terms;
        for (std::size_t k = 2; k <= 4; ++k)
            terms.push_back({k, m.term(k).lambda, std::vector<Matrix<double>>(k, m.term(k).factors)});
        const auto z = random_vector(rng, 5);
        for (std::size_t n = 1; n <= 4; ++n)
            EXPECT_EQ(forward_nonsym_cp<double>(m.bias(), m.linear(), terms, z, n), forward_truncated<double>(m, z, n));
    }
}

TEST(NonSymCp, ZeroLambdaIsLinear) {
    std::mt19937_64 rng(11);
    const auto m = random_model(rng, 3, 2, 3);
    std::vector<NonSymCpTerm<double>> terms;
    for (std::size_t k = 2; k <= 3; ++k) {
        std::vector<Matrix<double>> f;
        for (std::size_t j = 0; j < k; ++j) {
            Matrix<double> v(2, 3);
            for (auto& x : v.data()) x = random_vector(rng, 1)[0];
            f.push_back(v);
        }
        terms.push_back({k, {0.0, 0.0}, f});
    }
    const auto z = random_vector(rng, 3);
    EXPECT_EQ(forward_nonsym_cp<double>(m.bias(), m.linear(), terms, z, 3), forward_linear<double>(m, z));
}

TEST(NonSymCp, RejectsWrongFactorCount) {
    NonSymCpTerm<double> t{3, {1.0}, {Matrix<double>(1, 2), Matrix<double>(1, 2)}};
    const std::vector<double> linear{0.0, 0.0}, z{1.0, 1.0};
    const std::vector<NonSymCpTerm<double>> terms{t};
    EXPECT_THROW(forward_nonsym_cp<double>(0.0, linear, terms, z, 3), Error);
}

TEST(Scaler, FitApplyInvertRoundTrip) {
    std::mt19937_64 rng(12);
    Matrix<double> x(50, 3);
    for (std::size_t i = 0; i < 50; ++i) {
        x(i, 0) = random_vector(rng, 1, 5.0)[0] + 10.0;
        x(i, 1) = 7.0; // constant column
        x(i, 2) = random_vector(rng, 1, 0.01)[0];
    }
    const auto s = FeatureScaler::fit(x);
    EXPECT_EQ(s.scale()[1], 1.0);
    for (double v : s.scale()) EXPECT_GT(v, 0.0);
    std::vector<double> out(3), back(3);
    for (std::size_t i = 0; i < 50; ++i) {
        s.apply(x.row(i), out);
        EXPECT_EQ(out[1], 0.0);
        s.invert(out, back);
        for (std::size_t d = 0; d < 3; ++d) EXPECT_NEAR(back[d], x(i, d), 1e-12 * std::max(1.0, std::abs(x(i, d))));
    }
    EXPECT_THROW(FeatureScaler({0.0}, {0.0}), Error);
}

TEST(Model, ShapeInvariants) {
    TpcModel m(7, 4, 3);
    EXPECT_EQ(m.trained_through(), 1u);
    for (std::size_t k = 2; k <= 4; ++k) {
        EXPECT_EQ(m.term(k).lambda.size(), 3u);
        EXPECT_EQ(m.term(k).factors.rows(), 3u);
        EXPECT_EQ(m.term(k).factors.cols(), 7u);
    }
    EXPECT_THROW(m.term(1), Error);
    EXPECT_THROW(m.term(5), Error);
    EXPECT_THROW(m.set_trained_through(5), Error);
    EXPECT_THROW(TpcModel(0, 1, 1), Error);
}

TEST(Model, SinglePrecisionCastTracksDouble) {
    std::mt19937_64 rng(13);
    const auto m = random_model(rng, 6, 4, 3);
    const auto f = m.cast<float>();
    const auto z = random_vector(rng, 6);
    const std::vector<float> zf(z.begin(), z.end());
    for (std::size_t n = 1; n <= 3; ++n)
        EXPECT_NEAR(forward_truncated<float>(f, zf, n), forward_truncated<double>(m, z, n), 1e-3);
}
