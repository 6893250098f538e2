#include <gtest/gtest.h>

#include <random>
#include <vector>

#include "oracles.hpp"
#include "tpc/attribution.hpp"

using namespace tpc;
using tpc::testing::random_model;
using tpc::testing::random_vector;

TEST(PairwiseAttribution, HandCase) {
    TpcModel m(2, 2, 1);
    m.term(2).lambda = {1.0};
    m.term(2).factors(0, 0) = 1.0;
    m.term(2).factors(0, 1) = 2.0;
    m.set_trained_through(2);
    const std::vector<double> z{3.0, 4.0};
    EXPECT_DOUBLE_EQ(pairwise_attribution<double>(m, z, 0, 1), 48.0);
    EXPECT_DOUBLE_EQ(pairwise_attribution<double>(m, z, 1, 0), 48.0);

    const auto top = top_attributions<double>(m, z, 5);
    ASSERT_EQ(top.size(), 1u);
    EXPECT_EQ(top[0], (PairAttribution{0, 1, 48.0}));
}

TEST(PairwiseAttribution, ZeroFeatureGivesZero) {
    std::mt19937_64 rng(1);
    const auto m = random_model(rng, 4, 3, 2);
    auto z = random_vector(rng, 4);
    z[2] = 0.0;
    EXPECT_EQ(pairwise_attribution<double>(m, z, 2, 0), 0.0);
    EXPECT_EQ(pairwise_attribution<double>(m, z, 3, 2), 0.0);
}

TEST(PairwiseAttribution, SymmetricInIndices) {
    std::mt19937_64 rng(2);
    for (int t = 0; t < 50; ++t) {
        const auto m = random_model(rng, 5, 3, 3);
        const auto z = random_vector(rng, 5);
        for (std::size_t i = 0; i < 5; ++i)
            for (std::size_t j = 0; j < 5; ++j)
                if (i != j) {
                    EXPECT_EQ(pairwise_attribution<double>(m, z, i, j), pairwise_attribution<double>(m, z, j, i));
                }
    }
}

TEST(PairwiseAttribution, RejectsDiagonalAndLinearModels) {
    std::mt19937_64 rng(3);
    auto m = random_model(rng, 3, 2, 2);
    const auto z = random_vector(rng, 3);
    EXPECT_THROW(pairwise_attribution<double>(m, z, 1, 1), Error);
    EXPECT_THROW(pairwise_attribution<double>(m, z, 0, 3), Error);
    m.set_trained_through(1);
    EXPECT_THROW(pairwise_attribution<double>(m, z, 0, 1), Error);
    EXPECT_THROW(top_attributions<double>(m, z, 1), Error);
}

TEST(PairwiseAttribution, CompletenessAgainstQuadraticTerm) {
    std::mt19937_64 rng(4);
    for (int t = 0; t < 100; ++t) {
        const auto m = random_model(rng, 6, 4, 3);
        const auto z = random_vector(rng, 6);
        const auto w2 = reconstruct_dense_weights(m, 2);
        double total = 0.0;
        for (std::size_t i = 0; i < 6; ++i) {
            for (std::size_t j = i + 1; j < 6; ++j) total += pairwise_attribution<double>(m, z, i, j);
            const double diag = w2.values[i * 6 + i] * z[i] * z[i];
            EXPECT_NEAR(diagonal_attribution<double>(m, z, i), diag, 1e-12);
            total += diag;
        }
        EXPECT_NEAR(total, forward_term<double>(m, z, 2), 1e-8);
    }
}

TEST(TopAttributions, MatchesDenseEnumeration) {
    std::mt19937_64 rng(5);
    for (int t = 0; t < 50; ++t) {
        const std::size_t d = 2 + static_cast<std::size_t>(t % 9);
        const auto m = random_model(rng, d, 3, 2);
        const auto z = random_vector(rng, d);
        const auto expected = tpc::testing::pairs_from_dense(reconstruct_dense_weights(m, 2), z);
        const auto all = top_attributions<double>(m, z, expected.size() + 3);
        ASSERT_EQ(all.size(), expected.size());
        for (std::size_t p = 0; p < all.size(); ++p) {
            EXPECT_EQ(all[p].i, expected[p].i);
            EXPECT_EQ(all[p].j, expected[p].j);
            EXPECT_EQ(all[p].value, expected[p].value);
        }
        const auto top3 = top_attributions<double>(m, z, 3);
        ASSERT_EQ(top3.size(), std::min<std::size_t>(3, expected.size()));
        for (std::size_t p = 0; p < top3.size(); ++p) EXPECT_EQ(top3[p], all[p]);
    }
}

TEST(TopAttributions, ZeroLambdaFallsBackToLexicographicOrder) {
    TpcModel m(4, 2, 2);
    m.set_trained_through(2);
    const std::vector<double> z{1.0, 2.0, 3.0, 4.0};
    const auto top = top_attributions<double>(m, z, 10);
    const std::vector<std::pair<std::size_t, std::size_t>> expected{{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}};
    ASSERT_EQ(top.size(), expected.size());
    for (std::size_t p = 0; p < top.size(); ++p) {
        EXPECT_EQ(top[p].i, expected[p].first);
        EXPECT_EQ(top[p].j, expected[p].second);
        EXPECT_EQ(top[p].value, 0.0);
    }
    EXPECT_TRUE(top_attributions<double>(m, z, 0).empty());
}
