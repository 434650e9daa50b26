#include <gtest/gtest.h>

#include <set>

#include "oracles.hpp"
#include "tradenet/core/gaussian.hpp"
#include "tradenet/core/ops.hpp"
#include "tradenet/core/rng.hpp"
#include "tradenet/core/tensor.hpp"

using namespace tradenet;
using oracle::random_tensor;

TEST(Tensor, RejectsZeroDimsAndBadLength) {
    EXPECT_THROW(Tensor({2, 0}), Error);
    try {
        Tensor({2, 3}, std::vector<double>(5));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::shape);
    }
}

TEST(Tensor, IndexingIsRowMajor) {
    Tensor t({2, 3, 4});
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<double>(i);
    EXPECT_EQ(t.at(1, 2, 3), 23.0);
    EXPECT_EQ(t.reshaped({6, 4}).at(5, 3), 23.0);
    EXPECT_THROW(t.reshaped({5, 5}), Error);
}

TEST(Tensor, GradBufferIsLazyAndZeroed) {
    Tensor t({3});
    EXPECT_FALSE(t.has_grad());
    t.grad()[1] = 2.0;
    EXPECT_TRUE(t.has_grad());
    t.zero_grad();
    EXPECT_EQ(t.grad()[1], 0.0);
}

TEST(Rng, SameSeedSameStream) {
    Rng a(42), b(42), c(43);
    for (int i = 0; i < 100; ++i) {
        const auto x = a.next_u64();
        EXPECT_EQ(x, b.next_u64());
        EXPECT_NE(x, c.next_u64());
    }
}

TEST(Rng, SplitStreamsAreIndependentOfParentState) {
    Rng a(7);
    const auto before = a.split(3).next_u64();
    a.next_u64();
    EXPECT_EQ(a.split(3).next_u64(), before);
    EXPECT_NE(a.split(4).next_u64(), before);
}

TEST(Rng, UniformAndNormalMoments) {
    Rng r(1);
    const int n = 200000;
    double su = 0, sn = 0, sn2 = 0;
    for (int i = 0; i < n; ++i) {
        const double u = r.uniform();
        ASSERT_GE(u, 0.0);
        ASSERT_LT(u, 1.0);
        su += u;
        const double z = r.normal();
        sn += z;
        sn2 += z * z;
    }
    EXPECT_NEAR(su / n, 0.5, 0.005);
    EXPECT_NEAR(sn / n, 0.0, 0.01);
    EXPECT_NEAR(sn2 / n, 1.0, 0.02);
}

TEST(Rng, BelowAndShuffle) {
    Rng r(3);
    std::set<std::uint64_t> seen;
    for (int i = 0; i < 1000; ++i) {
        const auto v = r.below(5);
        ASSERT_LT(v, 5u);
        seen.insert(v);
    }
    EXPECT_EQ(seen.size(), 5u);
    std::vector<int> v(20);
    std::iota(v.begin(), v.end(), 0);
    r.shuffle(std::span<int>(v));
    std::vector<int> sorted = v;
    std::sort(sorted.begin(), sorted.end());
    for (int i = 0; i < 20; ++i) EXPECT_EQ(sorted[i], i);
}

TEST(Conv2d, BitwiseEqualToNaiveLoop) {
    for (std::uint64_t seed = 1; seed <= 50; ++seed) {
        Rng rng(seed);
        const std::size_t c = 1 + rng.below(4), o = 1 + rng.below(5), kh = 1 + rng.below(4), kw = 1 + rng.below(4);
        const std::size_t h = kh + rng.below(9), w = kw + rng.below(9);
        const Stride2 st{1 + rng.below(3), 1 + rng.below(3)};
        const Tensor x = random_tensor({c, h, w}, rng), k = random_tensor({o, c, kh, kw}, rng);
        const Tensor b = random_tensor({o}, rng);
        const Tensor y = conv2d_forward(x, k, b, st);
        const Tensor ref = oracle::conv2d_naive(x, k, b, st.rows, st.cols);
        ASSERT_EQ(y.shape(), ref.shape());
        for (std::size_t i = 0; i < y.size(); ++i) ASSERT_EQ(y[i], ref[i]) << "seed " << seed << " index " << i;
    }
}

TEST(Conv2d, OutputExtentFormula) {
    Rng rng(1);
    const Tensor x = random_tensor({1, 90, 291}, rng), k = random_tensor({32, 1, 8, 8}, rng);
    const Tensor y = conv2d_forward(x, k, Tensor({32}), {4, 4});
    EXPECT_EQ(y.shape(), (Shape{32, 21, 71}));
}

TEST(Conv2d, ShapeErrors) {
    const Tensor x({2, 5, 5}), b({3});
    EXPECT_THROW(conv2d_forward(x, Tensor({3, 1, 2, 2}), b, {}), Error);
    EXPECT_THROW(conv2d_forward(x, Tensor({3, 2, 6, 2}), b, {}), Error);
    EXPECT_THROW(conv2d_forward(x, Tensor({3, 2, 2, 2}), Tensor({2}), {}), Error);
}

TEST(Dense, BatchedKernelBitwiseEqualToNaive) {
    for (std::size_t n = 1; n <= 9; ++n) {
        Rng rng(n);
        const std::size_t in = 1 + rng.below(20), out = 1 + rng.below(11);
        const Tensor x = random_tensor({n, in}, rng), w = random_tensor({out, in}, rng), b = random_tensor({out}, rng);
        std::vector<double> y(n * out);
        kernels::dense_forward(n, in, out, x.data().data(), w.data().data(), b.data().data(), y.data());
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t o = 0; o < out; ++o) {
                double s = 0;
                for (std::size_t f = 0; f < in; ++f) s += w[o * in + f] * x[i * in + f];
                ASSERT_EQ(y[i * out + o], s + b[o]) << "n=" << n;
            }
        }
    }
}

TEST(Dense, BatchedBackwardMatchesPerSampleSums) {
    Rng rng(9);
    const std::size_t n = 7, in = 5, out = 3;
    const Tensor x = random_tensor({n, in}, rng), w = random_tensor({out, in}, rng), g = random_tensor({n, out}, rng);
    std::vector<double> gx(n * in, 0.0), gw(out * in, 0.0), gb(out, 0.0);
    kernels::dense_backward(n, in, out, g.data().data(), x.data().data(), w.data().data(), gx.data(), gw.data(),
                            gb.data());
    for (std::size_t o = 0; o < out; ++o) {
        double sb = 0;
        for (std::size_t i = 0; i < n; ++i) sb += g[i * out + o];
        EXPECT_NEAR(gb[o], sb, 1e-12);
        for (std::size_t f = 0; f < in; ++f) {
            double sw = 0;
            for (std::size_t i = 0; i < n; ++i) sw += g[i * out + o] * x[i * in + f];
            EXPECT_NEAR(gw[o * in + f], sw, 1e-12);
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t f = 0; f < in; ++f) {
            double s = 0;
            for (std::size_t o = 0; o < out; ++o) s += g[i * out + o] * w[o * in + f];
            EXPECT_NEAR(gx[i * in + f], s, 1e-12);
        }
    }
}

TEST(MaxPool, FloorsOddExtentsAndPicksFirstTie) {
    Tensor x({1, 3, 5}, std::vector<double>(15, 1.0));
    const auto r = maxpool2d(x);
    EXPECT_EQ(r.output.shape(), (Shape{1, 1, 2}));
    EXPECT_EQ(r.argmax[0], 0u);
    EXPECT_EQ(r.argmax[1], 2u);
    EXPECT_THROW(maxpool2d(Tensor({1, 1, 4})), Error);
}

TEST(Dropout, EvalIsIdentityAndTrainScalesKeptUnits) {
    Rng rng(4);
    const Tensor x = random_tensor({1000}, rng);
    Rng r1(1);
    EXPECT_EQ(dropout(x, 0.3, Mode::eval, r1).output, x);
    const auto d = dropout(x, 0.3, Mode::train, r1);
    std::size_t dropped = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (d.mask[i] == 0.0) {
            ++dropped;
            EXPECT_EQ(d.output[i], 0.0);
        } else {
            EXPECT_DOUBLE_EQ(d.mask[i], 1.0 / 0.7);
        }
    }
    EXPECT_NEAR(static_cast<double>(dropped) / 1000.0, 0.3, 0.05);
    EXPECT_THROW(dropout(x, 1.0, Mode::train, r1), Error);
}

TEST(BatchNorm, TrainNormalizesAndUpdatesRunningStats) {
    Rng rng(2);
    const Tensor x = random_tensor({8, 2, 3}, rng, 3.0);
    RunningStats stats;
    const Tensor y = batchnorm_forward(x, Tensor({2}, 1.0), Tensor({2}, 0.0), kBatchNormEps, Mode::train, stats);
    for (std::size_t ch = 0; ch < 2; ++ch) {
        double m = 0, v = 0, xm = 0, xv = 0;
        for (std::size_t i = 0; i < 8; ++i) {
            for (std::size_t k = 0; k < 3; ++k) {
                m += y[(i * 2 + ch) * 3 + k] / 24;
                xm += x[(i * 2 + ch) * 3 + k] / 24;
            }
        }
        for (std::size_t i = 0; i < 8; ++i) {
            for (std::size_t k = 0; k < 3; ++k) {
                v += std::pow(y[(i * 2 + ch) * 3 + k] - m, 2) / 24;
                xv += std::pow(x[(i * 2 + ch) * 3 + k] - xm, 2) / 23;
            }
        }
        EXPECT_NEAR(m, 0.0, 1e-12);
        EXPECT_NEAR(v, 1.0, 1e-4);
        EXPECT_NEAR(stats.mean[ch], 0.1 * xm, 1e-12);
        EXPECT_NEAR(stats.var[ch], 0.9 + 0.1 * xv, 1e-12);
    }
}

TEST(BatchNorm, EvalBeforeStatsIsStateError) {
    RunningStats stats;
    try {
        batchnorm_forward(Tensor({2, 1}), Tensor({1}, 1.0), Tensor({1}), kBatchNormEps, Mode::eval, stats);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::state);
    }
}

TEST(ColumnNormalize, ZeroMeanUnitStdAndConstantColumnsToZero) {
    Rng rng(8);
    Tensor x = random_tensor({30, 4}, rng);
    for (std::size_t i = 0; i < 30; ++i) {
        x.at(i, 1) = 1e6 + 1e5 * x.at(i, 1);
        x.at(i, 3) = 7.0;
    }
    const Tensor y = column_normalize(x);
    for (std::size_t j = 0; j < 4; ++j) {
        double m = 0, v = 0;
        for (std::size_t i = 0; i < 30; ++i) m += y.at(i, j) / 30;
        for (std::size_t i = 0; i < 30; ++i) v += std::pow(y.at(i, j) - m, 2) / 30;
        EXPECT_NEAR(m, 0.0, 1e-12);
        EXPECT_NEAR(v, j == 3 ? 0.0 : 1.0, 1e-6);
    }
}

TEST(Gaussian, LogProbMatchesDensity) {
    const std::vector<double> mean{0.5, -1.0}, log_std{std::log(0.3), std::log(2.0)}, a{0.2, 1.0};
    double expected = 0;
    for (int i = 0; i < 2; ++i) {
        const double s = std::exp(log_std[i]);
        expected += std::log(std::exp(-0.5 * std::pow((a[i] - mean[i]) / s, 2)) / (s * std::sqrt(2 * M_PI)));
    }
    EXPECT_NEAR(gaussian_log_prob(mean, log_std, a), expected, 1e-12);
    EXPECT_NEAR(gaussian_entropy(log_std), 0.5 * std::log(2 * M_PI * M_E) * 2 + log_std[0] + log_std[1], 1e-12);
}

TEST(Gaussian, HeadSamplesAreSeeded) {
    const std::vector<double> mean{0.0, 1.0}, log_std{0.0, -1.0};
    Rng a(5), b(5);
    const auto s1 = gaussian_head(mean, log_std, a), s2 = gaussian_head(mean, log_std, b);
    EXPECT_EQ(s1.sample, s2.sample);
    EXPECT_EQ(s1.log_prob, gaussian_log_prob(mean, log_std, s1.sample));
}
