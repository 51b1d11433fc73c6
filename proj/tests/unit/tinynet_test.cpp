#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "smartchoices/gradcheck.hpp"
#include "smartchoices/tinynet.hpp"

using namespace smartchoices;
using namespace smartchoices::nn;

namespace {

Dense layer(std::size_t in, std::size_t out, Activation act, std::vector<double> w, std::vector<double> b) {
    Dense d;
    d.in = in;
    d.out = out;
    d.activation = act;
    d.weight = std::move(w);
    d.bias = std::move(b);
    return d;
}

Matrix row_vector(std::vector<double> v) {
    Matrix m(1, v.size());
    m.data = std::move(v);
    return m;
}

}  // namespace

TEST(Tinynet, IdentityLayerWithIdentityWeights) {
    Mlp net({layer(2, 2, Activation::identity, {1, 0, 0, 1}, {0, 0})});
    const auto y = net.forward(row_vector({1, 2}));
    EXPECT_EQ(y.data, (std::vector<double>{1, 2}));
}

TEST(Tinynet, ZeroWeightTanhGivesZero) {
    Mlp net({layer(3, 2, Activation::tanh, std::vector<double>(6, 0.0), {0, 0})});
    const auto y = net.forward(row_vector({0.3, -4, 9}));
    EXPECT_EQ(y.data, (std::vector<double>{0, 0}));
}

TEST(Tinynet, Relu) {
    Mlp net({layer(2, 2, Activation::relu, {1, 0, 0, 1}, {0, 0})});
    EXPECT_EQ(net.forward(row_vector({-1, 3})).data, (std::vector<double>{0, 3}));
}

TEST(Tinynet, ForwardRejectsWrongWidth) {
    Mlp net({layer(2, 1, Activation::identity, {1, 1}, {0})});
    EXPECT_THROW(net.forward(row_vector({1, 2, 3})), ShapeError);
}

TEST(Tinynet, ForwardIsPure) {
    Rng rng(3);
    Mlp net(4, parse_layers("5:tanh,3:relu,2"), rng);
    const auto x = row_vector({0.1, -0.2, 0.7, 1.5});
    const auto a = net.forward(x);
    const auto b = net.forward(x);
    EXPECT_EQ(a.data, b.data);
    Workspace ws;
    const auto first = net.forward_one(x.data, ws);
    const std::vector<double> one(first.begin(), first.end());
    const auto again = net.forward_one(x.data, ws);
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        EXPECT_EQ(one[i], again[i]);
        // Single-row and batched paths may round differently.
        EXPECT_NEAR(one[i], a.data[i], 1e-12);
    }
}

TEST(Tinynet, TanhDerivativeAtZero) {
    Mlp net({layer(1, 1, Activation::tanh, {0.0}, {0.0})});
    ForwardCache cache;
    net.forward(row_vector({1.0}), cache);
    auto g = net.zeros_like();
    net.backward(cache, row_vector({1.0}), g);
    EXPECT_DOUBLE_EQ(g.layers()[0].weight[0], 1.0);
}

TEST(Tinynet, ReluGradientAtNegativeInput) {
    Mlp net({layer(1, 1, Activation::relu, {1.0}, {0.0})});
    ForwardCache cache;
    net.forward(row_vector({-1.0}), cache);
    auto g = net.zeros_like();
    const auto& dx = net.backward(cache, row_vector({1.0}), g);
    EXPECT_EQ(dx(0, 0), 0.0);
}

TEST(Tinynet, GradientsMatchFiniteDifferences) {
    Rng rng(11);
    for (int i = 0; i < 30; ++i) {
        auto probe = random_grad_probe(rng, i % 2 == 1);
        const auto res = check_gradients(probe);
        EXPECT_LT(res.max_rel_error, 1e-4) << "probe " << i << " worst " << res.worst;
        EXPECT_GT(res.checked, 0u);
    }
}

TEST(Tinynet, AdamZeroGradientLeavesParameters) {
    Rng rng(5);
    Mlp net(3, parse_layers("4:tanh,1"), rng);
    const Mlp before = net;
    auto g = net.zeros_like();
    Adam opt(1e-3);
    opt.step(net.parameters(), g.parameters());
    EXPECT_TRUE(net == before);
}

TEST(Tinynet, AdamFirstStepHasMagnitudeLr) {
    Mlp net({layer(2, 1, Activation::identity, {0.5, -0.5}, {0.0})});
    Mlp g({layer(2, 1, Activation::identity, {3.0, -0.02}, {1e-3})});
    Adam opt(1e-3);
    opt.step(net.parameters(), g.parameters());
    const auto& l = net.layers()[0];
    EXPECT_NEAR(l.weight[0], 0.5 - 1e-3, 1e-9);
    EXPECT_NEAR(l.weight[1], -0.5 + 1e-3, 1e-9);
    EXPECT_NEAR(l.bias[0], -1e-3, 1e-7);
}

TEST(Tinynet, AdamDescendsQuadratic) {
    // L = sum (w - 3)^2
    Mlp net({layer(2, 1, Activation::identity, {0.0, 1.0}, {-2.0})});
    Adam opt(0.1);
    const auto loss = [&] {
        double l = 0.0;
        for (auto& p : net.parameters())
            for (double v : p.values) l += (v - 3) * (v - 3);
        return l;
    };
    double prev = loss();
    for (int step = 0; step < 2; ++step) {
        auto g = net.zeros_like();
        auto gp = g.parameters();
        auto pp = net.parameters();
        for (std::size_t t = 0; t < pp.size(); ++t)
            for (std::size_t k = 0; k < pp[t].values.size(); ++k) gp[t].values[k] = 2 * (pp[t].values[k] - 3);
        opt.step(pp, gp);
        const double now = loss();
        EXPECT_LT(now, prev);
        prev = now;
    }
}

TEST(Tinynet, SoftUpdateExtremes) {
    Rng rng(9);
    Mlp online(3, parse_layers("4:relu,2"), rng);
    Mlp target(3, parse_layers("4:relu,2"), rng);
    const Mlp keep = target;
    soft_update(target, online, 0.0);
    EXPECT_TRUE(target == keep);
    soft_update(target, online, 1.0);
    EXPECT_TRUE(target == online);
}

TEST(Tinynet, SoftUpdateTau005) {
    Mlp target({layer(1, 1, Activation::identity, {0.0}, {0.0})});
    Mlp online({layer(1, 1, Activation::identity, {1.0}, {1.0})});
    soft_update(target, online, 0.05);
    EXPECT_DOUBLE_EQ(target.layers()[0].weight[0], 0.05);
    EXPECT_DOUBLE_EQ(target.layers()[0].bias[0], 0.05);
}

TEST(Tinynet, SoftUpdateIsContraction) {
    Rng rng(21);
    Mlp online(2, parse_layers("3:tanh,1"), rng);
    Mlp target(2, parse_layers("3:tanh,1"), rng);
    Mlp before = target;
    const double tau = 0.3;
    soft_update(target, online, tau);
    auto o = online.parameters(), t = target.parameters(), b = before.parameters();
    for (std::size_t i = 0; i < o.size(); ++i)
        for (std::size_t k = 0; k < o[i].values.size(); ++k)
            EXPECT_NEAR(std::abs(t[i].values[k] - o[i].values[k]), (1 - tau) * std::abs(b[i].values[k] - o[i].values[k]),
                        1e-12);
}

TEST(Tinynet, SoftUpdateArchitectureMismatch) {
    Rng rng(1);
    Mlp a(2, parse_layers("3:tanh,1"), rng);
    Mlp b(2, parse_layers("4:tanh,1"), rng);
    EXPECT_THROW(soft_update(a, b, 0.5), ShapeError);
}

TEST(Tinynet, EmbeddingRows) {
    Rng rng(2);
    Embedding e(100, 8, rng);
    EXPECT_EQ(e.row(3).size(), 8u);
    const auto r3 = e.row(3);
    const auto r4 = e.row(4);
    EXPECT_FALSE(std::equal(r3.begin(), r3.end(), r4.begin()));
    EXPECT_THROW(e.row(100), ShapeError);
    EXPECT_THROW(e.row(-1), ShapeError);
}

TEST(Tinynet, ParseLayers) {
    const auto specs = parse_layers("16:relu, 16:relu,1");
    ASSERT_EQ(specs.size(), 3u);
    EXPECT_EQ(specs[0].units, 16u);
    EXPECT_EQ(specs[1].activation, Activation::relu);
    EXPECT_EQ(specs[2].activation, Activation::identity);
}

TEST(Tinynet, TensorRoundtripIsBitIdentical) {
    Rng rng(4);
    Mlp net(3, parse_layers("5:tanh,2"), rng);
    Embedding e(7, 3, rng);
    auto tensors = to_tensors(net, "net.");
    tensors.push_back(to_tensor(e, "emb"));
    std::stringstream ss;
    write_tensors(ss, tensors);
    const auto back = read_tensors(ss);
    EXPECT_EQ(back, tensors);

    Mlp other(3, parse_layers("5:tanh,2"), rng);
    load_tensors(other, back, "net.");
    EXPECT_TRUE(other == net);
    Embedding e2;
    load_tensor(e2, back, "emb");
    EXPECT_TRUE(e2 == e);
}

TEST(Tinynet, ReadTensorsRejectsGarbage) {
    std::stringstream ss("not tensors\n");
    EXPECT_THROW(read_tensors(ss), ShapeError);
}
