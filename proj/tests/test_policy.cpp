#include <gtest/gtest.h>

#include <filesystem>

#include "criteria.hpp"

using namespace tradenet;
using policy::ArchKind;
using policy::ArchSpec;
using policy::PolicyNet;

TEST(Architecture, PlannedShapesMatchHandDerivedTables) {
    for (const auto& c : criteria::shape_cases()) {
        EXPECT_EQ(criteria::check_plan(c), "") << policy::to_string(c.kind) << " F=" << c.features;
    }
}

TEST(Architecture, SmallStacksBuildAndForward) {
    Rng rng(1);
    for (auto kind : {ArchKind::mlp, ArchKind::cnn_v1, ArchKind::grcnn}) {
        auto net = PolicyNet::build(ArchSpec::defaults(kind), 90, 35, 2, 3);
        const auto out = net.forward(oracle::random_tensor({2, 90, 35}, rng), Mode::train);
        EXPECT_EQ(out.mean.shape(), (Shape{2, 2}));
        EXPECT_EQ(out.value.shape(), (Shape{2}));
        EXPECT_TRUE(out.mean.all_finite());
        EXPECT_EQ(net.parameter_count(), PolicyNet::expected_parameter_count(net.spec(), 90, 35, 2));
    }
}

TEST(Architecture, ParameterCountsByHand) {
    // mlp: 3150*64+64 + 64*64+64 + actor 64*2+2 + critic 64+1 + log_std 2
    EXPECT_EQ(PolicyNet::expected_parameter_count(ArchSpec::mlp(), 90, 35, 2),
              3150u * 64 + 64 + 64 * 64 + 64 + 64 * 2 + 2 + 64 + 1 + 2);
    // grcnn F=35: later kernels clamp to 4x3 (conv2), 3x1 (conv3), 2x1 (conv4).
    const std::size_t grcnn = (32 * 64 + 32) + 2 * 32 + (64 * 32 * 12 + 64) + 2 * 64 + (128 * 64 * 3 + 128) +
                              2 * 128 + (256 * 128 * 2 + 256) + 2 * 256 + (256 * 512 + 512) + 512 * 2 + 2 + 512 +
                              1 + 2;
    EXPECT_EQ(PolicyNet::expected_parameter_count(ArchSpec::grcnn(), 90, 35, 2), grcnn);
    auto net = PolicyNet::build(ArchSpec::grcnn(), 90, 35, 2, 0);
    EXPECT_EQ(net.parameter_count(), grcnn);
}

TEST(Architecture, TooSmallObservationNamesTheLayer) {
    try {
        PolicyNet::build(ArchSpec::grcnn(), 7, 35, 2, 0);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::arch);
        EXPECT_NE(std::string(e.what()).find("conv1"), std::string::npos) << e.what();
    }
    try {
        PolicyNet::build(ArchSpec::grcnn(), 9, 9, 2, 0);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::arch);
        EXPECT_NE(std::string(e.what()).find("pool1"), std::string::npos) << e.what();
    }
}

TEST(Architecture, SpecValidationAndRoundTrip) {
    auto bad = ArchSpec::grcnn();
    bad.use_input_norm = false;
    EXPECT_THROW(bad.validate(), Error);
    bad = ArchSpec::grcnn();
    bad.convs = ArchSpec::parse_convs("64x8s4;32x4s2");
    EXPECT_THROW(bad.validate(), Error);
    EXPECT_THROW(ArchSpec::parse_convs("32x8"), Error);
    EXPECT_THROW(policy::parse_arch_kind("resnet"), Error);
    for (auto kind : {ArchKind::mlp, ArchKind::cnn_v1, ArchKind::grcnn}) {
        EXPECT_EQ(ArchSpec::from_map(ArchSpec::defaults(kind).to_map()), ArchSpec::defaults(kind));
    }
}

TEST(Initialization, SeededOrthogonalAndZeroLogStd) {
    auto a = PolicyNet::build(ArchSpec::mlp(), 10, 6, 2, 42);
    auto b = PolicyNet::build(ArchSpec::mlp(), 10, 6, 2, 42);
    auto c = PolicyNet::build(ArchSpec::mlp(), 10, 6, 2, 43);
    auto pa = a.parameters(), pb = b.parameters(), pc = c.parameters();
    for (std::size_t k = 0; k < pa.size(); ++k) EXPECT_EQ(pa[k].tensor->values(), pb[k].tensor->values());
    EXPECT_NE(pa[0].tensor->values(), pc[0].tensor->values());
    for (double v : a.log_std().data()) EXPECT_EQ(v, 0.0);

    // Hidden weights [64, 60]: orthonormal columns scaled by sqrt(2).
    const Tensor& w = *pa[0].tensor;
    ASSERT_EQ(pa[0].name, "trunk.1.weight");
    const std::size_t rows = w.dim(0), cols = w.dim(1);
    for (std::size_t i = 0; i < cols; ++i) {
        for (std::size_t j = 0; j < cols; ++j) {
            double s = 0;
            for (std::size_t r = 0; r < rows; ++r) s += w.at(r, i) * w.at(r, j);
            EXPECT_NEAR(s, i == j ? 2.0 : 0.0, 1e-10);
        }
    }
    // Actor rows have norm 0.01; biases start at zero.
    const auto& actor = a.actor_head().weight;
    for (std::size_t r = 0; r < actor.dim(0); ++r) {
        double s = 0;
        for (std::size_t k = 0; k < actor.dim(1); ++k) s += actor.at(r, k) * actor.at(r, k);
        EXPECT_NEAR(std::sqrt(s), 0.01, 1e-12);
    }
    for (double v : a.actor_head().bias.data()) EXPECT_EQ(v, 0.0);
}

TEST(Policy, BatchedForwardEqualsPerSample) {
    Rng rng(2);
    for (auto kind : {ArchKind::mlp, ArchKind::grcnn}) {
        auto net = PolicyNet::build(ArchSpec::defaults(kind), 30, 35, 2, 5);
        const Tensor obs = oracle::random_tensor({5, 30, 35}, rng);
        const auto all = net.forward(obs, Mode::eval);
        for (std::size_t i = 0; i < 5; ++i) {
            Tensor one({30, 35}, std::vector<double>(obs.data().begin() + i * 1050, obs.data().begin() + (i + 1) * 1050));
            const auto o = net.forward(one, Mode::eval);
            EXPECT_EQ(o.value[0], all.value[i]);
            EXPECT_EQ(o.mean[0], all.mean[2 * i]);
            EXPECT_EQ(o.mean[1], all.mean[2 * i + 1]);
        }
    }
}

TEST(Policy, ActSamplesClipsAndScoresConsistently) {
    auto net = PolicyNet::build(ArchSpec::mlp(), 8, 5, 3, 1);
    net.log_std().data()[0] = 1.5;  // wide enough to leave [-1, 1]
    Rng rng(3);
    const Tensor obs = oracle::random_tensor({8, 5}, rng);
    Rng again = rng;
    bool clipped = false;
    for (int k = 0; k < 50; ++k) {
        const auto a = net.act(obs, rng);
        const auto b = net.act(obs, again);
        EXPECT_EQ(a.sample, b.sample);
        for (std::size_t j = 0; j < 3; ++j) {
            EXPECT_EQ(a.action[j], std::clamp(a.sample[j], -1.0, 1.0));
            clipped = clipped || a.action[j] != a.sample[j];
        }
        const auto ev = net.evaluate_actions(obs, Tensor({1, 3}, a.sample), Mode::eval);
        EXPECT_NEAR(ev.log_probs[0], a.log_prob, 1e-12);
        EXPECT_EQ(ev.values[0], a.value);
    }
    EXPECT_TRUE(clipped);
    const auto det = net.act_deterministic(obs);
    const auto out = net.forward(obs, Mode::eval);
    for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(det[j], std::clamp(out.mean[j], -1.0, 1.0));
}

TEST(Policy, RejectsBadObservations) {
    auto net = PolicyNet::build(ArchSpec::mlp(), 8, 5, 2, 1);
    EXPECT_THROW(net.forward(Tensor({8, 4}), Mode::eval), Error);
    Tensor obs({8, 5});
    obs[3] = NAN;
    try {
        net.forward(obs, Mode::eval);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::numeric);
    }
}

TEST(Policy, DropoutOnlyInTrainMode) {
    auto net = PolicyNet::build(ArchSpec::cnn_v1(), 30, 35, 2, 1);
    Rng rng(4);
    const Tensor obs = oracle::random_tensor({2, 30, 35}, rng);
    const auto e1 = net.forward(obs, Mode::eval), e2 = net.forward(obs, Mode::eval);
    EXPECT_EQ(e1.value, e2.value);
    const auto t1 = net.forward(obs, Mode::train), t2 = net.forward(obs, Mode::train);
    EXPECT_NE(t1.value, t2.value);
}

TEST(Checkpoint, RoundTripPreservesOutputsBitwise) {
    const auto dir = std::filesystem::temp_directory_path() / "tradenet_test_policy_ckpt";
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    Rng rng(6);
    for (auto kind : {ArchKind::mlp, ArchKind::cnn_v1, ArchKind::grcnn}) {
        auto net = PolicyNet::build(ArchSpec::defaults(kind), 30, 35, 2, 9);
        net.log_std().data()[1] = -0.25;
        // Move batch-norm running statistics away from identity.
        net.forward(oracle::random_tensor({4, 30, 35}, rng), Mode::train);
        const auto stem = dir / policy::to_string(kind);
        save_checkpoint(stem, net.to_checkpoint());
        auto back = PolicyNet::from_checkpoint(load_checkpoint(stem));
        const Tensor obs = oracle::random_tensor({3, 30, 35}, rng);
        const auto a = net.forward(obs, Mode::eval), b = back.forward(obs, Mode::eval);
        EXPECT_EQ(a.mean, b.mean);
        EXPECT_EQ(a.value, b.value);
        EXPECT_EQ(back.log_std(), net.log_std());
    }
}
