#pragma once

// Central finite-difference check of Mlp::backward and of embedding-row
// gradients routed through the Encoder.
//
// The probe loss is L = sum_ij out_ij * R_ij for a fixed random R, so the
// upstream gradient is R itself.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "smartchoices/learner.hpp"
#include "smartchoices/random.hpp"
#include "smartchoices/tinynet.hpp"

namespace smartchoices::nn {

struct GradCheckResult {
    double max_rel_error = 0.0;
    std::size_t checked = 0;
    std::string worst;  ///< parameter with the largest error
};

/// |a - n| / max(|a|, |n|, floor). The floor keeps gradients that are zero up
/// to rounding from dominating the ratio.
inline double grad_rel_error(double analytic, double numeric, double floor = 1e-6) {
    return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

/// Network plus optional embedding input, as a learner wires them.
struct GradProbe {
    Mlp net;
    std::optional<Embedding> embedding;
    Encoder encoder;
    std::vector<State> batch;
    Matrix weights;  ///< R

    double loss() const {
        const auto get = [&](std::size_t i) -> const State& { return batch[i]; };
        const auto x = encoder.encode(batch.size(), get, embedding ? &*embedding : nullptr);
        const auto y = net.forward(x);
        double l = 0.0;
        for (std::size_t k = 0; k < y.data.size(); ++k) l += y.data[k] * weights.data[k];
        return l;
    }
};

/// Random probe: 1 to 3 layers drawn from {identity, tanh, relu}, widths 1..6,
/// optional key slots feeding an embedding table.
inline GradProbe random_grad_probe(Rng& rng, bool with_embedding) {
    std::uniform_int_distribution<std::size_t> units(1, 6), depth(1, 3), act(0, 2), batch(1, 4);
    constexpr Activation acts[] = {Activation::identity, Activation::tanh, Activation::relu};
    GradProbe p;
    InputLayout layout;
    layout.dense_width = units(rng);
    std::size_t emb_width = 0;
    if (with_embedding) {
        layout.key_slots = std::uniform_int_distribution<std::size_t>(1, 2)(rng);
        layout.key_space = std::uniform_int_distribution<std::size_t>(3, 8)(rng);
        emb_width = units(rng);
        p.embedding.emplace(layout.key_space, emb_width, rng);
    }
    p.encoder = Encoder(layout, emb_width);
    std::vector<LayerSpec> specs(depth(rng));
    for (auto& s : specs) s = {units(rng), acts[act(rng)]};
    p.net = Mlp(p.encoder.state_width(), specs, rng);

    std::normal_distribution<double> n01(0.0, 1.0);
    p.batch.resize(batch(rng));
    for (auto& s : p.batch) {
        s.dense.resize(layout.dense_width);
        for (auto& v : s.dense) v = n01(rng);
        s.keys.resize(layout.key_slots);
        for (auto& k : s.keys)
            k = static_cast<std::int64_t>(std::uniform_int_distribution<std::size_t>(0, layout.key_space - 1)(rng));
    }
    p.weights = Matrix(p.batch.size(), p.net.output_width());
    for (auto& v : p.weights.data) v = n01(rng);
    return p;
}

/// Compares every network parameter and every touched embedding entry
/// against central differences with step h.
inline GradCheckResult check_gradients(GradProbe& p, double h = 1e-5) {
    GradCheckResult res;
    const auto get = [&](std::size_t i) -> const State& { return p.batch[i]; };
    const auto x = p.encoder.encode(p.batch.size(), get, p.embedding ? &*p.embedding : nullptr);
    ForwardCache cache;
    p.net.forward(x, cache);
    Mlp grads = p.net.zeros_like();
    const Matrix& dx = p.net.backward(cache, p.weights, grads);
    SparseRowGrads row_grads;
    row_grads.width = p.embedding ? p.embedding->width : 0;
    p.encoder.scatter_key_grads(p.batch.size(), get, dx, row_grads);

    const auto compare = [&](double& param, double analytic, const std::string& name) {
        const double keep = param;
        param = keep + h;
        const double up = p.loss();
        param = keep - h;
        const double down = p.loss();
        param = keep;
        const double err = grad_rel_error(analytic, (up - down) / (2.0 * h));
        ++res.checked;
        if (err > res.max_rel_error) {
            res.max_rel_error = err;
            res.worst = name;
        }
    };

    auto params = p.net.parameters();
    const auto gparams = grads.parameters();
    for (std::size_t t = 0; t < params.size(); ++t)
        for (std::size_t k = 0; k < params[t].values.size(); ++k)
            compare(params[t].values[k], gparams[t].values[k], params[t].name + "[" + std::to_string(k) + "]");
    if (p.embedding) {
        for (auto& [id, g] : row_grads.rows) {
            auto row = p.embedding->row(id);
            for (std::size_t k = 0; k < row.size(); ++k)
                compare(row[k], g[k], "embedding[" + std::to_string(id) + "][" + std::to_string(k) + "]");
        }
    }
    return res;
}

}  // namespace smartchoices::nn
