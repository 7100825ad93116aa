#include <doctest.h>

#include <numeric>

#include "milpath/checkpoint.hpp"
#include "milpath/error.hpp"
#include "milpath/model.hpp"
#include "milpath/rng.hpp"
#include "oracles.hpp"

using namespace milpath;

namespace {

Eigen::MatrixXd gaussian(Eigen::Index rows, Eigen::Index cols, SplitMix64& rng, double scale = 1.0) {
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) {
        m.data()[i] = scale * rng.normal();
    }
    return m;
}

ModelConfig small_config(int m, FusionMode fusion = FusionMode::concat) {
    ModelConfig c;
    c.extractor_names = {"a"};
    c.extractor_dims = {m};
    c.fusion = fusion;
    c.attention_dim = 6;
    c.head_widths = {5};
    c.fusion_dim = 4;
    c.fusion_attention_dim = 3;
    return c;
}

}  // namespace

TEST_SUITE("mil-core") {

TEST_CASE("attention over a single instance is exactly one") {
    SplitMix64 rng(1);
    const auto model = init_model(small_config(8), 3);
    const auto alpha = attention_weights(model.attention, gaussian(1, 8, rng));
    REQUIRE(alpha.size() == 1);
    CHECK(alpha[0] == 1.0);
}

TEST_CASE("identical instances get uniform attention") {
    SplitMix64 rng(2);
    const auto model = init_model(small_config(8), 3);
    const Eigen::MatrixXd h = gaussian(1, 8, rng).replicate(7, 1);
    const auto alpha = attention_weights(model.attention, h);
    for (Eigen::Index i = 0; i < 7; ++i) {
        CHECK(alpha[i] == doctest::Approx(1.0 / 7.0).epsilon(1e-15));
    }
}

TEST_CASE("attention matches the literal gated-softmax formula") {
    SplitMix64 rng(3);
    for (int trial = 0; trial < 10; ++trial) {
        GatedAttentionParams p{gaussian(4, 8, rng, 0.5), gaussian(4, 8, rng, 0.5), gaussian(4, 1, rng).col(0)};
        const auto h = gaussian(5, 8, rng);
        const auto alpha = attention_weights(p, h);
        const auto expected = oracle::naive_attention(p.V, p.U, p.w, h);
        CHECK((alpha - expected).cwiseAbs().maxCoeff() <= 1e-10);
        CHECK(alpha.sum() == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("attention is stable for huge logit spreads") {
    SplitMix64 rng(4);
    GatedAttentionParams p{gaussian(3, 4, rng), gaussian(3, 4, rng), Eigen::VectorXd::Constant(3, 400.0)};
    const auto h = gaussian(9, 4, rng, 10.0);
    const auto alpha = attention_weights(p, h);
    CHECK(alpha.allFinite());
    CHECK(std::abs(alpha.sum() - 1.0) <= 1e-10);
    CHECK(alpha.minCoeff() >= 0.0);
}

TEST_CASE("attention input validation") {
    SplitMix64 rng(5);
    const auto model = init_model(small_config(8), 3);
    CHECK_THROWS_AS(attention_weights(model.attention, gaussian(3, 7, rng)), ShapeError);
    CHECK_THROWS_AS(attention_weights(model.attention, Eigen::MatrixXd(0, 8)), ShapeError);
    auto bad = gaussian(3, 8, rng);
    bad(1, 2) = std::nan("");
    CHECK_THROWS_AS(attention_weights(model.attention, bad), DataError);
}

TEST_CASE("pooling") {
    SplitMix64 rng(6);
    const auto h = gaussian(5, 3, rng);
    Eigen::VectorXd one_hot = Eigen::VectorXd::Zero(5);
    one_hot[2] = 1.0;
    CHECK(pool(one_hot, h) == h.row(2).transpose());

    const Eigen::MatrixXd same = h.row(0).replicate(5, 1);
    Eigen::VectorXd alpha(5);
    alpha << 0.1, 0.2, 0.3, 0.15, 0.25;
    CHECK((pool(alpha, same) - h.row(0).transpose()).cwiseAbs().maxCoeff() < 1e-15);

    for (int trial = 0; trial < 20; ++trial) {
        const auto x = gaussian(6, 4, rng);
        Eigen::VectorXd a = gaussian(6, 1, rng).col(0);
        a = stable_softmax(a);
        const auto z = pool(a, x);
        for (Eigen::Index c = 0; c < 4; ++c) {
            CHECK(z[c] >= x.col(c).minCoeff() - 1e-15);
            CHECK(z[c] <= x.col(c).maxCoeff() + 1e-15);
        }
    }
    CHECK_THROWS_AS(pool(Eigen::VectorXd::Ones(4), h), ShapeError);
}

TEST_CASE("mlp head") {
    MLPHeadParams zero{{{Eigen::MatrixXd::Zero(3, 2), Eigen::VectorXd::Zero(3)},
                        {Eigen::MatrixXd::Zero(1, 3), Eigen::VectorXd::Zero(1)}}};
    const auto out = mlp_forward(zero, Eigen::Vector2d(1.0, -4.0));
    CHECK(out.logit == 0.0);
    CHECK(out.probability == 0.5);

    // Hand computation: a1 = W1 z + b1 = (-1, 3.5) -> relu (0, 3.5);
    // logit = 2*0 - 0.5*3.5 + 0.25 = -1.5.
    MLPHeadParams head;
    Eigen::MatrixXd w1(2, 2);
    w1 << 1.0, -1.0, 0.5, 2.0;
    Eigen::MatrixXd w2(1, 2);
    w2 << 2.0, -0.5;
    head.layers = {{w1, Eigen::Vector2d(0.0, -1.0)}, {w2, Eigen::VectorXd::Constant(1, 0.25)}};
    const auto hand = mlp_forward(head, Eigen::Vector2d(1.0, 2.0));
    CHECK(hand.logit == -1.5);
    CHECK(hand.probability == doctest::Approx(1.0 / (1.0 + std::exp(1.5))).epsilon(1e-15));

    CHECK_THROWS_AS(mlp_forward(head, Eigen::Vector3d(1, 2, 3)), ShapeError);
}

TEST_CASE("forward: pooling collapse, permutation invariance, trace invariants") {
    SplitMix64 rng(8);
    const auto model = init_model(small_config(8), 11);
    const auto inst = gaussian(1, 8, rng);
    const auto single = forward(model, inst);
    const auto many = forward(model, Eigen::MatrixXd(inst.replicate(6, 1)));
    CHECK(many.probability == doctest::Approx(single.probability).epsilon(1e-14));

    for (int trial = 0; trial < 30; ++trial) {
        const Eigen::Index k = 1 + static_cast<Eigen::Index>(rng.below(12));
        const auto bag = gaussian(k, 8, rng);
        std::vector<int> idx(static_cast<std::size_t>(k));
        std::iota(idx.begin(), idx.end(), 0);
        shuffle(idx, rng);
        Eigen::MatrixXd permuted(k, 8);
        for (Eigen::Index i = 0; i < k; ++i) {
            permuted.row(i) = bag.row(idx[static_cast<std::size_t>(i)]);
        }
        const auto a = forward(model, bag);
        const auto b = forward(model, permuted);
        CHECK(std::abs(a.probability - b.probability) <= 1e-12);
        for (Eigen::Index i = 0; i < k; ++i) {
            CHECK(std::abs(b.alpha[i] - a.alpha[idx[static_cast<std::size_t>(i)]]) <= 1e-15);
        }
        CHECK(std::abs(a.alpha.sum() - 1.0) <= 1e-10);
        CHECK(a.alpha.minCoeff() >= 0.0);
        CHECK(a.probability > 0.0);
        CHECK(a.probability < 1.0);

        // Duplicating every instance halves each weight and leaves z alone.
        Eigen::MatrixXd doubled(2 * k, 8);
        doubled << bag, bag;
        CHECK((forward(model, doubled).pooled - a.pooled).cwiseAbs().maxCoeff() <= 1e-10);
    }
}

TEST_CASE("forward through attention fusion") {
    SplitMix64 rng(9);
    auto config = small_config(0, FusionMode::attention);
    config.extractor_names = {"a", "b"};
    config.extractor_dims = {5, 3};
    const auto model = init_model(config, 4);
    REQUIRE(model.fusion.has_value());
    const auto trace = forward(model, gaussian(7, 8, rng));
    REQUIRE(trace.fusion.has_value());
    CHECK(trace.pooled.size() == 4);
    CHECK(trace.fusion->weights.rows() == 7);
    CHECK_THROWS_AS(forward(model, gaussian(7, 9, rng)), ShapeError);
}

TEST_CASE("initialization is seeded, bounded, biases zero") {
    const auto a = init_model(small_config(8), 1);
    const auto b = init_model(small_config(8), 1);
    const auto c = init_model(small_config(8), 2);
    CHECK(a.attention.V == b.attention.V);
    CHECK(a.attention.V != c.attention.V);
    CHECK(a.attention.V.cwiseAbs().maxCoeff() <= 1.0 / std::sqrt(8.0));
    CHECK(a.head.layers[0].weight.cwiseAbs().maxCoeff() <= 1.0 / std::sqrt(8.0));
    CHECK(a.head.layers[1].weight.cwiseAbs().maxCoeff() <= 1.0 / std::sqrt(5.0));
    CHECK(a.attention.w.cwiseAbs().maxCoeff() <= 1.0 / std::sqrt(6.0));
    CHECK(a.head.layers[0].bias.isZero(0.0));
    CHECK(a.head.layers[1].bias.isZero(0.0));
    CHECK(a.parameter_count() == 6 * 8 * 2 + 6 + 5 * 8 + 5 + 5 + 1);
}

TEST_CASE("checkpoint binary and JSON round trips are bit-exact") {
    auto config = small_config(0, FusionMode::attention);
    config.extractor_names = {"a", "b"};
    config.extractor_dims = {5, 3};
    const Checkpoint cp{init_model(config, 99), "deadbeef"};

    const auto bytes = encode_checkpoint(cp);
    const auto back = decode_checkpoint(bytes);
    CHECK(back.config_hash == "deadbeef");
    CHECK(back.model.config.extractor_names == config.extractor_names);
    CHECK(encode_checkpoint(back) == bytes);

    const auto json_back = checkpoint_from_json(checkpoint_to_json(cp));
    CHECK(encode_checkpoint(json_back) == bytes);

    auto corrupt = bytes;
    corrupt[0] = 'X';
    CHECK_THROWS_AS(decode_checkpoint(corrupt), FormatError);
    auto truncated = bytes;
    truncated.pop_back();
    CHECK_THROWS_AS(decode_checkpoint(truncated), LengthError);
}

}  // TEST_SUITE
