#include <gtest/gtest.h>

#include <bit>
#include <cmath>
#include <cstring>

#include "supersub/error.hpp"
#include "supersub/half.hpp"
#include "supersub/prng.hpp"
#include "supersub/tensor.hpp"

using namespace supersub;

namespace {

// Nearest finite binary16 by exhaustive search, ties to the even mantissa.
std::uint16_t nearest_half(float x) {
    std::uint16_t best = 0;
    double best_err = INFINITY;
    for (std::uint32_t h = 0; h < 0x10000; ++h) {
        if ((h & 0x7c00u) == 0x7c00u) continue;
        const double err = std::abs(static_cast<double>(half::to_float(static_cast<std::uint16_t>(h))) - x);
        if (err < best_err || (err == best_err && (h & 1u) == 0 && (best & 1u) == 1)) {
            best_err = err;
            best = static_cast<std::uint16_t>(h);
        }
    }
    return best;
}

}  // namespace

TEST(Matmul, IdentityLeft) {
    const Tensor b = Tensor::matrix(2, 2, {1, 2, 3, 4});
    EXPECT_TRUE(matmul(Tensor::matrix(2, 2, {1, 0, 0, 1}), b).bit_equal(b));
}

TEST(Matmul, ZeroLeft) {
    const Tensor c = matmul(Tensor::matrix(2, 2, {0, 0, 0, 0}), Tensor::matrix(2, 3, {1, 2, 3, 4, 5, 6}));
    EXPECT_EQ(c.shape(), (Shape{2, 3}));
    for (float v : c.values()) EXPECT_EQ(v, 0.0f);
}

TEST(Matmul, HandComputed) {
    const Tensor c = matmul(Tensor::matrix(2, 2, {1, 2, 3, 4}), Tensor::matrix(2, 2, {5, 6, 7, 8}));
    EXPECT_EQ(c.values(), (std::vector<float>{19, 22, 43, 50}));
}

TEST(Matmul, ShapeMismatchNamesBothShapes) {
    try {
        matmul(Tensor({2, 3}), Tensor({2, 2}));
        FAIL();
    } catch (const DimensionError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("[2x3]"), std::string::npos) << msg;
        EXPECT_NE(msg.find("[2x2]"), std::string::npos) << msg;
    }
}

TEST(Matmul, RightIdentityIsBitExact) {
    Prng rng(7);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t m = 1 + rng.below(6), n = 1 + rng.below(6);
        Tensor a({m, n});
        for (float& v : a.data()) v = static_cast<float>(rng.gaussian(0, 3));
        Tensor id({n, n});
        for (std::size_t i = 0; i < n; ++i) id.at(i, i) = 1.0f;
        EXPECT_TRUE(matmul(a, id).bit_equal(a));
    }
}

TEST(Relu, Examples) {
    EXPECT_EQ(relu(Tensor::vector({-1, 0, 2})).values(), (std::vector<float>{0, 0, 2}));
    EXPECT_EQ(relu(Tensor::vector({0.5f, 3, 7})).values(), (std::vector<float>{0.5f, 3, 7}));
    EXPECT_EQ(relu(Tensor::vector({-3.5f})).values(), (std::vector<float>{0}));
}

TEST(Softmax, Examples) {
    EXPECT_EQ(softmax_rows(Tensor::matrix(1, 2, {0, 0})).values(), (std::vector<float>{0.5f, 0.5f}));
    EXPECT_EQ(softmax_rows(Tensor::matrix(1, 2, {1000, 1000})).values(), (std::vector<float>{0.5f, 0.5f}));
    const Tensor p = softmax_rows(Tensor::matrix(1, 2, {0, std::log(3.0f)}));
    EXPECT_NEAR(p[0], 0.25f, 1e-7);
    EXPECT_NEAR(p[1], 0.75f, 1e-7);
}

TEST(Softmax, RowsSumToOne) {
    Prng rng(11);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t m = 1 + rng.below(4), n = 1 + rng.below(20);
        Tensor x({m, n});
        for (float& v : x.data()) v = static_cast<float>((rng.uniform() * 2 - 1) * 1e4);
        const Tensor p = softmax_rows(x);
        for (std::size_t i = 0; i < m; ++i) {
            double s = 0;
            for (std::size_t j = 0; j < n; ++j) s += p.at(i, j);
            EXPECT_NEAR(s, 1.0, 1e-6);
        }
        EXPECT_TRUE(p.all_finite());
    }
}

TEST(CrossEntropy, Examples) {
    const std::size_t one[] = {1};
    EXPECT_NEAR(cross_entropy(Tensor::matrix(1, 2, {0, 1}), one), 0.0, 1e-11);
    const std::size_t labels[] = {0, 3, 2};
    EXPECT_NEAR(cross_entropy(Tensor({3, 4}, 0.25f), labels), std::log(4.0), 1e-6);
    EXPECT_NEAR(cross_entropy(Tensor::matrix(1, 2, {0.25f, 0.75f}), one), 0.2876820724517809, 1e-7);
}

TEST(CrossEntropy, LabelOutOfRange) {
    const std::size_t bad[] = {2};
    EXPECT_THROW(cross_entropy(Tensor::matrix(1, 2, {0.5f, 0.5f}), bad), IndexError);
}

TEST(F16Round, Examples) {
    const Tensor r = f16_round(Tensor::vector({0.0f, 1.0f, 0.1f}));
    EXPECT_EQ(r[0], 0.0f);
    EXPECT_EQ(r[1], 1.0f);
    EXPECT_EQ(static_cast<double>(r[2]), 0.0999755859375);
}

TEST(F16Round, Overflow) {
    EXPECT_THROW(f16_round(Tensor::vector({70000.0f})), OverflowError);
    EXPECT_THROW(f16_round(Tensor::vector({-65520.0f})), OverflowError);
    EXPECT_EQ(f16_round(Tensor::vector({65504.0f}))[0], 65504.0f);
}

TEST(F16Round, IdempotentBitExact) {
    Prng rng(3);
    Tensor x({4096});
    for (float& v : x.data()) v = static_cast<float>(rng.gaussian(0, 100));
    const Tensor once = f16_round(x);
    EXPECT_TRUE(f16_round(once).bit_equal(once));
}

TEST(Half, EveryFiniteHalfRoundTrips) {
    for (std::uint32_t h = 0; h < 0x10000; ++h) {
        if ((h & 0x7c00u) == 0x7c00u) continue;
        EXPECT_EQ(half::from_float(half::to_float(static_cast<std::uint16_t>(h))), h) << std::hex << h;
    }
}

TEST(Half, MatchesExhaustiveNearestNeighbour) {
    Prng rng(5);
    for (int trial = 0; trial < 300; ++trial) {
        const float x = static_cast<float>(rng.gaussian(0, trial % 2 ? 1e-5 : 500));
        EXPECT_EQ(half::from_float(x), nearest_half(x)) << x;
    }
}

TEST(Half, TiesGoToEven) {
    // 1 + 2^-11 sits halfway between 1 and 1 + 2^-10.
    EXPECT_EQ(half::from_float(1.0f + std::ldexp(1.0f, -11)), 0x3c00);
    // 1 + 3*2^-11 sits halfway between odd 1+2^-10 and even 1+2^-9.
    EXPECT_EQ(half::from_float(1.0f + 3 * std::ldexp(1.0f, -11)), 0x3c02);
    EXPECT_EQ(half::from_float(std::ldexp(1.0f, -25)), 0x0000);
}

TEST(Prng, SplitmixReferenceSequence) {
    Prng rng(0);
    EXPECT_EQ(rng.next_u64(), 0xe220a8397b1dcdafull);
    EXPECT_EQ(rng.next_u64(), 0x6e789e6aa1b965f4ull);
    EXPECT_EQ(rng.next_u64(), 0x06c45d188009454full);
}

TEST(Prng, UniformOpenLowRange) {
    Prng rng(9);
    for (int i = 0; i < 100000; ++i) {
        const double u = rng.uniform_open_low();
        ASSERT_GT(u, 0.0);
        ASSERT_LE(u, 1.0);
    }
}

TEST(Gaussian, ZeroSigmaIsMean) {
    Prng rng(1);
    EXPECT_EQ(rng.gaussian(3.25, 0.0), 3.25);
}

TEST(Gaussian, NegativeSigma) {
    Prng rng(1);
    EXPECT_THROW(rng.gaussian(0, -1), ParameterError);
}

TEST(Gaussian, SampleMoments) {
    Prng rng(20240517);
    const int n = 100000;
    double sum = 0, sq = 0;
    for (int i = 0; i < n; ++i) {
        const double x = rng.gaussian(0, 1);
        sum += x;
        sq += x * x;
    }
    const double mean = sum / n;
    const double sd = std::sqrt(sq / n - mean * mean);
    EXPECT_NEAR(mean, 0.0, 0.02);
    EXPECT_NEAR(sd, 1.0, 0.02);
}

TEST(Gaussian, Deterministic) {
    Prng a(42), b(42);
    for (int i = 0; i < 1000; ++i) ASSERT_EQ(std::bit_cast<std::uint64_t>(a.gaussian(1, 2)),
                                             std::bit_cast<std::uint64_t>(b.gaussian(1, 2)));
}
