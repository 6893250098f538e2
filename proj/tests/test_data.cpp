#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <random>
#include <set>
#include <string>

#include "oracles.hpp"
#include "tpc/dataset.hpp"
#include "tpc/io.hpp"
#include "tpc/synthetic.hpp"

using namespace tpc;
namespace fs = std::filesystem;

namespace {

fs::path temp_path(const std::string& name) {
    const auto dir = fs::temp_directory_path() / "tpc_test_data";
    fs::create_directories(dir);
    return dir / name;
}

LabeledDataset random_dataset(std::size_t rows, std::size_t dim, std::uint64_t seed) {
    return gen_synthetic(SyntheticKind::linear, rows, dim, 0.0, seed);
}

} // namespace

TEST(MeanPool, Basics) {
    Matrix<double> one(1, 3);
    one(0, 0) = 1.5;
    one(0, 2) = -2.0;
    EXPECT_EQ(mean_pool(one), (std::vector<double>{1.5, 0.0, -2.0}));

    Matrix<double> two(2, 2);
    two(0, 0) = 1;
    two(0, 1) = 3;
    two(1, 0) = 3;
    two(1, 1) = 5;
    EXPECT_EQ(mean_pool(two), (std::vector<double>{2.0, 4.0}));

    EXPECT_THROW(mean_pool(Matrix<double>(0, 3)), Error);
}

TEST(MeanPool, CopiesOfOneTokenAreExact) {
    std::mt19937_64 rng(1);
    for (std::size_t k = 1; k <= 16; ++k) {
        const auto v = tpc::testing::random_vector(rng, 5);
        Matrix<double> tokens(k, 5);
        for (std::size_t t = 0; t < k; ++t) std::copy(v.begin(), v.end(), tokens.row(t).begin());
        EXPECT_EQ(mean_pool(tokens), v);
    }
}

TEST(MeanPool, Linearity) {
    std::mt19937_64 rng(2);
    Matrix<double> tokens(7, 4);
    for (auto& x : tokens.data()) x = tpc::testing::random_vector(rng, 1)[0];
    const auto base = mean_pool(tokens);
    for (double alpha : {-3.0, 0.25, 10.0}) {
        Matrix<double> scaled = tokens;
        for (auto& x : scaled.data()) x *= alpha;
        const auto pooled = mean_pool(scaled);
        for (std::size_t d = 0; d < 4; ++d) EXPECT_NEAR(pooled[d], alpha * base[d], 1e-12);
    }
}

TEST(Split, SizesDisjointAndDeterministic) {
    const auto idx = split_indices(10, 0.8, 3);
    EXPECT_EQ(idx.train.size(), 8u);
    EXPECT_EQ(idx.val.size(), 2u);
    std::set<std::size_t> all(idx.train.begin(), idx.train.end());
    for (auto v : idx.val) EXPECT_TRUE(all.insert(v).second);
    EXPECT_EQ(all.size(), 10u);
    const auto again = split_indices(10, 0.8, 3);
    EXPECT_EQ(again.train, idx.train);
    EXPECT_EQ(again.val, idx.val);

    const auto data = random_dataset(10, 2, 1);
    const auto [a, b] = split(data, 0.8, 3);
    EXPECT_EQ(a.size(), 8u);
    EXPECT_EQ(b.size(), 2u);
}

TEST(Split, Errors) {
    EXPECT_THROW(split_indices(10, 0.0, 1), Error);
    EXPECT_THROW(split_indices(10, 1.0, 1), Error);
    EXPECT_THROW(split_indices(1, 0.5, 1), Error);
    EXPECT_THROW(split_indices(10, 0.05, 1), Error);
}

TEST(Csv, RoundTrip) {
    auto data = random_dataset(40, 3, 5);
    const auto path = temp_path("roundtrip.csv");
    save_csv(data, path);
    const auto back = load_csv(path);
    EXPECT_EQ(back.labels, data.labels);
    ASSERT_EQ(back.features.rows(), 40u);
    for (std::size_t i = 0; i < data.features.data().size(); ++i)
        EXPECT_EQ(back.features.data()[i], data.features.data()[i]);
}

TEST(Csv, HeaderOnlyIsEmptyDataset) {
    try {
        parse_csv("f0,f1,label\n");
        FAIL();
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("empty dataset"), std::string::npos);
    }
}

TEST(Csv, BadLabelNamesRow) {
    const std::string text = "f0,label\n1,0\n2,1\n3,0\n4,1\n5,2\n6,0\n";
    try {
        parse_csv(text);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::format);
        EXPECT_NE(std::string(e.what()).find("row 5"), std::string::npos) << e.what();
    }
}

TEST(Csv, MalformedInputs) {
    EXPECT_THROW(parse_csv(""), Error);
    EXPECT_THROW(parse_csv("a,b,label\n1,2,0\n"), Error);
    EXPECT_THROW(parse_csv("f0,f1\n1,2\n"), Error);
    EXPECT_THROW(parse_csv("f0,f1,label\n1,2\n"), Error);
    EXPECT_THROW(parse_csv("f0,label\nnan,1\n"), Error);
    EXPECT_THROW(parse_csv("f0,label\nabc,1\n"), Error);
    EXPECT_THROW(load_csv(temp_path("does_not_exist.csv")), Error);
}

TEST(Binary, RoundTripIsByteIdentical) {
    const auto data = random_dataset(100, 8, 9);
    const auto path = temp_path("roundtrip.tpcd");
    save_binary(data, path);
    const auto loaded = load_binary(path);
    const auto path2 = temp_path("roundtrip2.tpcd");
    save_binary(loaded, path2);
    EXPECT_EQ(detail::read_file(path), detail::read_file(path2));
    EXPECT_EQ(loaded.labels, data.labels);
    for (std::size_t i = 0; i < data.features.data().size(); ++i)
        EXPECT_EQ(loaded.features.data()[i], static_cast<double>(static_cast<float>(data.features.data()[i])));
}

TEST(Binary, HeaderLayout) {
    LabeledDataset d;
    d.features = Matrix<double>(2, 3, 1.0);
    d.labels = {0, 1};
    d.metadata.pooling = "mean";
    const auto bytes = encode_dataset(d);
    ASSERT_EQ(bytes.size(), 4u + 4 + 8 + 4 + 1 + 2 * 3 * 4 + 2);
    EXPECT_EQ(bytes.substr(0, 4), "TPCD");
    EXPECT_EQ(bytes[4], 1);
    EXPECT_EQ(bytes[8], 2);
    EXPECT_EQ(bytes[16], 3);
    EXPECT_EQ(bytes[20], 1);
    EXPECT_EQ(decode_dataset(bytes).metadata.pooling, std::optional<std::string>("mean"));
}

TEST(Binary, FuzzedHeadersAreRejected) {
    const auto bytes = encode_dataset(random_dataset(5, 3, 2));
    const std::size_t header = 21;
    std::mt19937_64 rng(4);
    std::uniform_int_distribution<int> byte(0, 255);
    for (std::size_t pos = 0; pos < header; ++pos) {
        for (int trial = 0; trial < 64; ++trial) {
            auto bad = bytes;
            const auto v = static_cast<char>(byte(rng));
            if (bad[pos] == v) continue;
            bad[pos] = v;
            // Flipping the pooled flag is the one benign header mutation.
            if (pos == 20 && (static_cast<unsigned char>(v) & ~1u) == 0) continue;
            EXPECT_THROW(decode_dataset(bad), Error) << "byte " << pos;
        }
    }
    for (std::size_t len = 0; len < bytes.size(); ++len) EXPECT_THROW(decode_dataset(bytes.substr(0, len)), Error);
    EXPECT_THROW(decode_dataset(bytes + "x"), Error);
}

TEST(Binary, RejectsBadPayload) {
    auto bytes = encode_dataset(random_dataset(3, 2, 2));
    auto bad_label = bytes;
    bad_label.back() = 2;
    EXPECT_THROW(decode_dataset(bad_label), Error);
    auto nan_feature = bytes;
    const float nan = std::numeric_limits<float>::quiet_NaN();
    std::memcpy(nan_feature.data() + 21, &nan, 4);
    EXPECT_THROW(decode_dataset(nan_feature), Error);
}

TEST(ModelFile, RoundTripIsByteIdentical) {
    std::mt19937_64 rng(6);
    auto m = tpc::testing::random_model(rng, 5, 3, 4);
    m.set_scaler(FeatureScaler({1, 2, 3, 4, 5}, {0.5, 1, 2, 3, 4}));
    m.set_trained_through(3);
    const auto bytes = encode_model(m);
    const auto back = decode_model(bytes);
    EXPECT_EQ(back, m);
    EXPECT_EQ(encode_model(back), bytes);
    EXPECT_EQ(bytes.size(), 4u + 5 * 4 + 8 * (3 * 5 + 1 + 3 * 3 * (5 + 1)));

    const auto path = temp_path("model.tpcm");
    save_model(m, path);
    EXPECT_EQ(load_model(path), m);
}

TEST(ModelFile, LinearModelHasNoDegreeBlocks) {
    TpcModel m(3, 1, 8);
    EXPECT_EQ(encode_model(m).size(), 24u + 8 * (3 * 3 + 1));
}

TEST(ModelFile, FuzzedHeadersAreRejected) {
    std::mt19937_64 rng(7);
    const auto bytes = encode_model(tpc::testing::random_model(rng, 3, 2, 3));
    std::uniform_int_distribution<int> byte(0, 255);
    for (std::size_t pos = 0; pos < 24; ++pos) {
        for (int trial = 0; trial < 64; ++trial) {
            auto bad = bytes;
            const auto v = static_cast<char>(byte(rng));
            if (bad[pos] == v) continue;
            bad[pos] = v;
            // trained_through may legally move within [1, N].
            if (pos >= 20) {
                std::uint32_t t;
                std::memcpy(&t, bad.data() + 20, 4);
                if (t >= 1 && t <= 3) continue;
            }
            EXPECT_THROW(decode_model(bad), Error) << "byte " << pos;
        }
    }
    for (std::size_t len = 0; len < bytes.size(); len += 7) EXPECT_THROW(decode_model(bytes.substr(0, len)), Error);
}

TEST(Synthetic, DimensionRequirements) {
    EXPECT_THROW(gen_synthetic(SyntheticKind::cubic_parity, 10, 2, 0.0, 1), Error);
    EXPECT_THROW(gen_synthetic(SyntheticKind::xor_quadratic, 10, 1, 0.0, 1), Error);
    EXPECT_NO_THROW(gen_synthetic(SyntheticKind::linear, 10, 1, 0.0, 1));
    EXPECT_THROW(parse_synthetic_kind("quartic"), Error);
}

TEST(Synthetic, LabelsFollowTheirBoundary) {
    const auto x = gen_synthetic(SyntheticKind::xor_quadratic, 500, 4, 0.0, 3);
    for (std::size_t i = 0; i < x.size(); ++i)
        EXPECT_EQ(x.labels[i], x.features(i, 0) * x.features(i, 1) > 0 ? 1 : 0);
    const auto c = gen_synthetic(SyntheticKind::cubic_parity, 500, 4, 0.0, 3);
    for (std::size_t i = 0; i < c.size(); ++i)
        EXPECT_EQ(c.labels[i], c.features(i, 0) * c.features(i, 1) * c.features(i, 2) > 0 ? 1 : 0);
}

TEST(Synthetic, XorIsBalanced) {
    const auto x = gen_synthetic(SyntheticKind::xor_quadratic, 10000, 8, 0.0, 7);
    const double frac = static_cast<double>(x.positives()) / 10000.0;
    EXPECT_NEAR(frac, 0.5, 0.02);
}

TEST(Synthetic, DeterministicPerSeed) {
    const auto a = encode_dataset(gen_synthetic(SyntheticKind::cubic_parity, 300, 5, 0.3, 11));
    const auto b = encode_dataset(gen_synthetic(SyntheticKind::cubic_parity, 300, 5, 0.3, 11));
    const auto c = encode_dataset(gen_synthetic(SyntheticKind::cubic_parity, 300, 5, 0.3, 12));
    EXPECT_EQ(a, b);
    EXPECT_NE(a, c);
}

TEST(Synthetic, NoiseFlipsAboutTheDocumentedFraction) {
    EXPECT_EQ(label_flip_probability(0.0), 0.0);
    const double p = label_flip_probability(1.0); // P(N(0,1) > 1)
    EXPECT_NEAR(p, 0.158655, 1e-6);
    const auto clean = gen_synthetic(SyntheticKind::xor_quadratic, 20000, 2, 0.0, 5);
    const auto noisy = gen_synthetic(SyntheticKind::xor_quadratic, 20000, 2, 1.0, 5);
    EXPECT_EQ(clean.features, noisy.features);
    std::size_t flips = 0;
    for (std::size_t i = 0; i < clean.size(); ++i) flips += clean.labels[i] != noisy.labels[i];
    EXPECT_NEAR(static_cast<double>(flips) / 20000.0, p, 0.01);
}
