#pragma once

// Small dense networks with hand-written gradients.
//
// Everything is double precision and batch-major: a Matrix of shape
// (batch x features) goes in, a Matrix of shape (batch x outputs) comes out.
// Parameter gradients are stored in a network-shaped object (see
// Mlp::zeros_like) so parameters and gradients can be walked in lockstep.

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <istream>
#include <map>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "smartchoices/errors.hpp"
#include "smartchoices/random.hpp"

namespace smartchoices::nn {

enum class Activation { identity, tanh, relu };

inline const char* to_string(Activation a) {
    switch (a) {
        case Activation::identity: return "identity";
        case Activation::tanh: return "tanh";
        case Activation::relu: return "relu";
    }
    return "identity";
}

inline Activation parse_activation(const std::string& s) {
    if (s == "identity" || s == "linear" || s.empty()) return Activation::identity;
    if (s == "tanh") return Activation::tanh;
    if (s == "relu") return Activation::relu;
    throw ConfigError("unknown activation '" + s + "'");
}

struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

    /// Reshapes without clearing; callers overwrite every element.
    void resize(std::size_t r, std::size_t c) {
        rows = r;
        cols = c;
        data.resize(r * c);
    }
    double* row(std::size_t r) { return data.data() + r * cols; }
    const double* row(std::size_t r) const { return data.data() + r * cols; }
    double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
};

/// Fully connected layer, y = act(W x + b). W is (out x in), row-major.
struct Dense {
    std::size_t in = 0;
    std::size_t out = 0;
    std::vector<double> weight;
    std::vector<double> bias;
    Activation activation = Activation::identity;

    /// Uniform(-1/sqrt(in), 1/sqrt(in)) for weights and biases.
    static Dense random(std::size_t in, std::size_t out, Activation act, Rng& rng) {
        Dense d;
        d.in = in;
        d.out = out;
        d.activation = act;
        const double bound = 1.0 / std::sqrt(static_cast<double>(in));
        std::uniform_real_distribution<double> u(-bound, bound);
        d.weight.resize(in * out);
        d.bias.resize(out);
        for (auto& w : d.weight) w = u(rng);
        for (auto& b : d.bias) b = u(rng);
        return d;
    }
};

struct LayerSpec {
    std::size_t units = 0;
    Activation activation = Activation::identity;
};

/// Parses "16:relu,16:relu,1" into layer specs. Missing activation means identity.
inline std::vector<LayerSpec> parse_layers(const std::string& text) {
    std::vector<LayerSpec> specs;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item.erase(std::remove_if(item.begin(), item.end(), [](unsigned char c) { return std::isspace(c); }),
                   item.end());
        if (item.empty()) continue;
        const auto colon = item.find(':');
        LayerSpec spec;
        try {
            spec.units = std::stoul(item.substr(0, colon));
        } catch (const std::exception&) {
            throw ConfigError("bad layer spec '" + item + "'");
        }
        if (spec.units == 0) throw ConfigError("layer with zero units in '" + text + "'");
        spec.activation = parse_activation(colon == std::string::npos ? "" : item.substr(colon + 1));
        specs.push_back(spec);
    }
    return specs;
}

inline std::string format_layers(std::span<const LayerSpec> specs) {
    std::string out;
    for (const auto& s : specs) {
        if (!out.empty()) out += ',';
        out += std::to_string(s.units) + ':' + to_string(s.activation);
    }
    return out;
}

/// Named view of one parameter tensor.
struct ParamView {
    std::string name;
    std::vector<std::size_t> shape;
    std::span<double> values;
};

/// Per-layer inputs and post-activation outputs recorded by a forward pass.
struct ForwardCache {
    std::vector<Matrix> inputs;
    std::vector<Matrix> outputs;
    // Backward scratch; the input gradient is returned by reference into it.
    mutable Matrix delta, dx;
};

/// Scratch for allocation-free single-sample inference.
struct Workspace {
    std::vector<double> a;
    std::vector<double> b;
};

namespace detail {

inline double activate(Activation act, double z) {
    switch (act) {
        case Activation::identity: return z;
        case Activation::tanh: return std::tanh(z);
        case Activation::relu: return z > 0.0 ? z : 0.0;
    }
    return z;
}

// Derivative expressed through the activation output y.
inline double activation_grad(Activation act, double y) {
    switch (act) {
        case Activation::identity: return 1.0;
        case Activation::tanh: return 1.0 - y * y;
        case Activation::relu: return y > 0.0 ? 1.0 : 0.0;
    }
    return 1.0;
}

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

inline void dense_forward(const Dense& layer, const Matrix& x, Matrix& y) {
    y.resize(x.rows, layer.out);
    const ConstMap X(x.data.data(), static_cast<Eigen::Index>(x.rows), static_cast<Eigen::Index>(layer.in));
    const ConstMap W(layer.weight.data(), static_cast<Eigen::Index>(layer.out), static_cast<Eigen::Index>(layer.in));
    MutMap Y(y.data.data(), static_cast<Eigen::Index>(x.rows), static_cast<Eigen::Index>(layer.out));
    Y.noalias() = X * W.transpose();
    const Eigen::Map<const Eigen::RowVectorXd> b(layer.bias.data(), static_cast<Eigen::Index>(layer.out));
    Y.rowwise() += b;
    if (layer.activation != Activation::identity)
        for (auto& v : y.data) v = activate(layer.activation, v);
}

}  // namespace detail

/// Multi-layer perceptron.
class Mlp {
public:
    Mlp() = default;

    Mlp(std::size_t input_width, std::span<const LayerSpec> specs, Rng& rng) : input_width_(input_width) {
        if (input_width == 0) throw ShapeError("network input width must be positive");
        if (specs.empty()) throw ShapeError("network needs at least one layer");
        std::size_t in = input_width;
        for (const auto& s : specs) {
            layers_.push_back(Dense::random(in, s.units, s.activation, rng));
            in = s.units;
        }
    }

    explicit Mlp(std::vector<Dense> layers) : layers_(std::move(layers)) {
        if (layers_.empty()) throw ShapeError("network needs at least one layer");
        input_width_ = layers_.front().in;
        for (std::size_t i = 0; i < layers_.size(); ++i) {
            const auto& l = layers_[i];
            if (l.weight.size() != l.in * l.out || l.bias.size() != l.out)
                throw ShapeError("layer " + std::to_string(i) + " parameter sizes inconsistent");
            if (i > 0 && layers_[i - 1].out != l.in)
                throw ShapeError("layer " + std::to_string(i) + " input does not match previous output");
        }
    }

    std::size_t input_width() const { return input_width_; }
    std::size_t output_width() const { return layers_.empty() ? 0 : layers_.back().out; }
    std::vector<Dense>& layers() { return layers_; }
    const std::vector<Dense>& layers() const { return layers_; }

    Mlp zeros_like() const {
        Mlp z = *this;
        for (auto& l : z.layers_) {
            std::fill(l.weight.begin(), l.weight.end(), 0.0);
            std::fill(l.bias.begin(), l.bias.end(), 0.0);
        }
        return z;
    }

    void set_zero() {
        for (auto& l : layers_) {
            std::fill(l.weight.begin(), l.weight.end(), 0.0);
            std::fill(l.bias.begin(), l.bias.end(), 0.0);
        }
    }

    Matrix forward(const Matrix& x) const {
        check_input(x.cols);
        Matrix cur = x;
        Matrix next;
        for (const auto& l : layers_) {
            detail::dense_forward(l, cur, next);
            std::swap(cur, next);
        }
        return cur;
    }

    /// The result refers into `cache` and stays valid until its next use.
    const Matrix& forward(const Matrix& x, ForwardCache& cache) const {
        check_input(x.cols);
        cache.inputs.resize(layers_.size());
        cache.outputs.resize(layers_.size());
        const Matrix* cur = &x;
        for (std::size_t i = 0; i < layers_.size(); ++i) {
            cache.inputs[i] = *cur;
            detail::dense_forward(layers_[i], *cur, cache.outputs[i]);
            cur = &cache.outputs[i];
        }
        return cache.outputs.back();
    }

    /// Single sample, no allocation once the workspace has grown.
    std::span<const double> forward_one(std::span<const double> x, Workspace& ws) const {
        check_input(x.size());
        ws.a.assign(x.begin(), x.end());
        for (const auto& l : layers_) {
            ws.b.resize(l.out);
            for (std::size_t o = 0; o < l.out; ++o) {
                const double* w = l.weight.data() + o * l.in;
                double z = l.bias[o];
                for (std::size_t i = 0; i < l.in; ++i) z += w[i] * ws.a[i];
                ws.b[o] = detail::activate(l.activation, z);
            }
            std::swap(ws.a, ws.b);
        }
        return {ws.a.data(), output_width()};
    }

    /// Backpropagates `upstream` (dL/doutput). Parameter gradients are
    /// accumulated into `grads` (shaped like this network); returns dL/dinput.
    /// `preact_extra`, when given, is added to the gradient w.r.t. the output
    /// layer's pre-activation (after the activation derivative is applied).
    /// The returned input gradient refers into `cache`.
    const Matrix& backward(const ForwardCache& cache, const Matrix& upstream, Mlp& grads,
                           const Matrix* preact_extra = nullptr) const {
        if (cache.outputs.size() != layers_.size()) throw ShapeError("backward without matching forward cache");
        if (upstream.cols != output_width() || upstream.rows != cache.outputs.back().rows)
            throw ShapeError("upstream gradient shape mismatch");
        Matrix& delta = cache.delta;
        Matrix& dx = cache.dx;
        delta = upstream;
        for (std::size_t li = layers_.size(); li-- > 0;) {
            const Dense& l = layers_[li];
            Dense& g = grads.layers_[li];
            const Matrix& y = cache.outputs[li];
            const Matrix& x = cache.inputs[li];
            for (std::size_t k = 0; k < delta.data.size(); ++k)
                delta.data[k] *= detail::activation_grad(l.activation, y.data[k]);
            if (preact_extra && li + 1 == layers_.size()) {
                if (preact_extra->rows != delta.rows || preact_extra->cols != delta.cols)
                    throw ShapeError("pre-activation gradient shape mismatch");
                for (std::size_t k = 0; k < delta.data.size(); ++k) delta.data[k] += preact_extra->data[k];
            }
            dx.resize(x.rows, l.in);
            const auto rows = static_cast<Eigen::Index>(x.rows);
            const auto in = static_cast<Eigen::Index>(l.in);
            const auto out = static_cast<Eigen::Index>(l.out);
            const detail::ConstMap X(x.data.data(), rows, in);
            const detail::ConstMap D(delta.data.data(), rows, out);
            const detail::ConstMap W(l.weight.data(), out, in);
            detail::MutMap GW(g.weight.data(), out, in);
            Eigen::Map<Eigen::RowVectorXd> GB(g.bias.data(), out);
            GW.noalias() += D.transpose() * X;
            GB += D.colwise().sum();
            detail::MutMap(dx.data.data(), rows, in).noalias() = D * W;
            std::swap(delta, dx);
        }
        return delta;
    }

    std::vector<ParamView> parameters(const std::string& prefix = "") {
        std::vector<ParamView> out;
        for (std::size_t i = 0; i < layers_.size(); ++i) {
            auto& l = layers_[i];
            const std::string base = prefix + "layer" + std::to_string(i);
            out.push_back({base + ".weight", {l.out, l.in}, l.weight});
            out.push_back({base + ".bias", {l.out}, l.bias});
        }
        return out;
    }

    bool same_architecture(const Mlp& other) const {
        if (layers_.size() != other.layers_.size()) return false;
        for (std::size_t i = 0; i < layers_.size(); ++i) {
            if (layers_[i].in != other.layers_[i].in || layers_[i].out != other.layers_[i].out ||
                layers_[i].activation != other.layers_[i].activation)
                return false;
        }
        return true;
    }

    friend bool operator==(const Mlp& a, const Mlp& b) {
        if (!a.same_architecture(b)) return false;
        for (std::size_t i = 0; i < a.layers_.size(); ++i) {
            if (a.layers_[i].weight != b.layers_[i].weight || a.layers_[i].bias != b.layers_[i].bias) return false;
        }
        return true;
    }

private:
    void check_input(std::size_t width) const {
        if (width != input_width_)
            throw ShapeError("network expects input width " + std::to_string(input_width_) + ", got " +
                             std::to_string(width));
    }

    std::size_t input_width_ = 0;
    std::vector<Dense> layers_;
};

/// Lookup table of dense key vectors. Row `id` is the embedding of key `id`.
struct Embedding {
    std::size_t rows = 0;
    std::size_t width = 0;
    std::vector<double> table;

    Embedding() = default;
    Embedding(std::size_t rows_, std::size_t width_, Rng& rng) : rows(rows_), width(width_), table(rows_ * width_) {
        if (rows == 0 || width == 0) throw ShapeError("embedding needs positive rows and width");
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        for (auto& v : table) v = u(rng);
    }

    std::span<const double> row(std::int64_t id) const {
        check(id);
        return {table.data() + static_cast<std::size_t>(id) * width, width};
    }
    std::span<double> row(std::int64_t id) {
        check(id);
        return {table.data() + static_cast<std::size_t>(id) * width, width};
    }

    void check(std::int64_t id) const {
        if (id < 0 || static_cast<std::size_t>(id) >= rows)
            throw ShapeError("embedding key " + std::to_string(id) + " outside [0, " + std::to_string(rows) + ")");
    }

    friend bool operator==(const Embedding&, const Embedding&) = default;
};

/// Gradients for touched embedding rows only.
struct SparseRowGrads {
    std::size_t width = 0;
    std::map<std::int64_t, std::vector<double>> rows;

    std::span<double> row(std::int64_t id) {
        auto& r = rows[id];
        if (r.empty()) r.assign(width, 0.0);
        return r;
    }
    void clear() { rows.clear(); }
};

/// Adam with bias correction over a fixed list of parameter tensors.
class Adam {
public:
    explicit Adam(double lr = 1e-3, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

    void step(const std::vector<ParamView>& params, const std::vector<ParamView>& grads) {
        if (params.size() != grads.size()) throw ShapeError("adam: parameter/gradient count mismatch");
        if (m_.empty()) {
            for (const auto& p : params) {
                m_.emplace_back(p.values.size(), 0.0);
                v_.emplace_back(p.values.size(), 0.0);
            }
        }
        if (m_.size() != params.size()) throw ShapeError("adam: parameter list changed between steps");
        ++t_;
        const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
        for (std::size_t k = 0; k < params.size(); ++k) {
            auto p = params[k].values;
            auto g = grads[k].values;
            if (p.size() != g.size() || p.size() != m_[k].size()) throw ShapeError("adam: tensor size mismatch");
            auto& m = m_[k];
            auto& v = v_[k];
            for (std::size_t i = 0; i < p.size(); ++i) {
                m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
                v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
                p[i] -= lr_ * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps_);
            }
        }
    }

    double learning_rate() const { return lr_; }
    std::int64_t steps() const { return t_; }

private:
    double lr_, beta1_, beta2_, eps_;
    std::int64_t t_ = 0;
    std::vector<std::vector<double>> m_, v_;
};

/// Lazy Adam for embedding tables: only rows present in the gradient move,
/// each row keeping its own step count for bias correction.
class SparseAdam {
public:
    explicit SparseAdam(double lr = 1e-3, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

    void step(Embedding& table, const SparseRowGrads& grads) {
        if (m_.size() != table.table.size()) {
            m_.assign(table.table.size(), 0.0);
            v_.assign(table.table.size(), 0.0);
            t_.assign(table.rows, 0);
        }
        for (const auto& [id, g] : grads.rows) {
            auto p = table.row(id);
            const auto r = static_cast<std::size_t>(id);
            const double t = static_cast<double>(++t_[r]);
            const double c1 = 1.0 - std::pow(beta1_, t);
            const double c2 = 1.0 - std::pow(beta2_, t);
            for (std::size_t i = 0; i < table.width; ++i) {
                const std::size_t k = r * table.width + i;
                m_[k] = beta1_ * m_[k] + (1.0 - beta1_) * g[i];
                v_[k] = beta2_ * v_[k] + (1.0 - beta2_) * g[i] * g[i];
                p[i] -= lr_ * (m_[k] / c1) / (std::sqrt(v_[k] / c2) + eps_);
            }
        }
    }

private:
    double lr_, beta1_, beta2_, eps_;
    std::vector<double> m_, v_;
    std::vector<std::int64_t> t_;
};

/// Global L2 norm over dense and sparse gradients.
inline double global_norm(const std::vector<ParamView>& grads, const SparseRowGrads* sparse = nullptr) {
    double sq = 0.0;
    for (const auto& g : grads)
        for (double v : g.values) sq += v * v;
    if (sparse)
        for (const auto& [id, r] : sparse->rows)
            for (double v : r) sq += v * v;
    return std::sqrt(sq);
}

/// Rescales gradients so their global norm is at most `max_norm`. Returns the pre-clip norm.
inline double clip_global_norm(const std::vector<ParamView>& grads, double max_norm,
                               SparseRowGrads* sparse = nullptr) {
    const double norm = global_norm(grads, sparse);
    if (max_norm > 0.0 && norm > max_norm) {
        const double s = max_norm / norm;
        for (const auto& g : grads)
            for (double& v : g.values) v *= s;
        if (sparse)
            for (auto& [id, r] : sparse->rows)
                for (double& v : r) v *= s;
    }
    return norm;
}

/// target <- tau * online + (1 - tau) * target.
inline void soft_update(Mlp& target, const Mlp& online, double tau) {
    if (!target.same_architecture(online)) throw ShapeError("soft_update: architecture mismatch");
    auto& tl = target.layers();
    const auto& ol = online.layers();
    for (std::size_t i = 0; i < tl.size(); ++i) {
        for (std::size_t k = 0; k < tl[i].weight.size(); ++k)
            tl[i].weight[k] = tau * ol[i].weight[k] + (1.0 - tau) * tl[i].weight[k];
        for (std::size_t k = 0; k < tl[i].bias.size(); ++k)
            tl[i].bias[k] = tau * ol[i].bias[k] + (1.0 - tau) * tl[i].bias[k];
    }
}

inline void soft_update(Embedding& target, const Embedding& online, double tau) {
    if (target.rows != online.rows || target.width != online.width)
        throw ShapeError("soft_update: embedding shape mismatch");
    for (std::size_t k = 0; k < target.table.size(); ++k)
        target.table[k] = tau * online.table[k] + (1.0 - tau) * target.table[k];
}

// ---------------------------------------------------------------------------
// Tensor serialization.
//
// Layout:
//   SCTENSORS 1\n
//   <count>\n
//   <name> <ndim> <dim0> ... <dimN-1>\n      (one line per tensor)
//   <payload>                                 (little-endian float64, header order)

struct NamedTensor {
    std::string name;
    std::vector<std::size_t> shape;
    std::vector<double> values;

    friend bool operator==(const NamedTensor&, const NamedTensor&) = default;
};

inline std::vector<NamedTensor> to_tensors(Mlp& net, const std::string& prefix) {
    std::vector<NamedTensor> out;
    for (const auto& p : net.parameters(prefix))
        out.push_back({p.name, p.shape, std::vector<double>(p.values.begin(), p.values.end())});
    return out;
}

inline NamedTensor to_tensor(const Embedding& e, const std::string& name) {
    return {name, {e.rows, e.width}, e.table};
}

inline void write_tensors(std::ostream& os, const std::vector<NamedTensor>& tensors) {
    os << "SCTENSORS 1\n" << tensors.size() << '\n';
    for (const auto& t : tensors) {
        if (t.name.empty() || t.name.find_first_of(" \t\n") != std::string::npos)
            throw ShapeError("tensor name must be a non-empty token");
        std::size_t n = 1;
        for (auto d : t.shape) n *= d;
        if (n != t.values.size()) throw ShapeError("tensor '" + t.name + "' shape does not match value count");
        os << t.name << ' ' << t.shape.size();
        for (auto d : t.shape) os << ' ' << d;
        os << '\n';
    }
    for (const auto& t : tensors) {
        for (double v : t.values) {
            std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
            unsigned char bytes[8];
            for (int i = 0; i < 8; ++i) bytes[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xffU);
            os.write(reinterpret_cast<const char*>(bytes), 8);
        }
    }
}

inline std::vector<NamedTensor> read_tensors(std::istream& is) {
    std::string line;
    if (!std::getline(is, line) || line != "SCTENSORS 1") throw ShapeError("not a tensor file");
    std::size_t count = 0;
    if (!std::getline(is, line)) throw ShapeError("truncated tensor header");
    count = std::stoul(line);
    std::vector<NamedTensor> out(count);
    for (auto& t : out) {
        if (!std::getline(is, line)) throw ShapeError("truncated tensor header");
        std::istringstream ls(line);
        std::size_t ndim = 0;
        if (!(ls >> t.name >> ndim)) throw ShapeError("bad tensor header line '" + line + "'");
        t.shape.resize(ndim);
        std::size_t n = 1;
        for (auto& d : t.shape) {
            if (!(ls >> d)) throw ShapeError("bad tensor header line '" + line + "'");
            n *= d;
        }
        t.values.resize(n);
    }
    for (auto& t : out) {
        for (double& v : t.values) {
            unsigned char bytes[8];
            if (!is.read(reinterpret_cast<char*>(bytes), 8)) throw ShapeError("truncated tensor payload");
            std::uint64_t bits = 0;
            for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
            v = std::bit_cast<double>(bits);
        }
    }
    return out;
}

/// Copies tensors named `<prefix>layerK.weight|bias` into `net`; shapes must match.
inline void load_tensors(Mlp& net, const std::vector<NamedTensor>& tensors, const std::string& prefix) {
    for (auto& p : net.parameters(prefix)) {
        auto it = std::find_if(tensors.begin(), tensors.end(), [&](const NamedTensor& t) { return t.name == p.name; });
        if (it == tensors.end()) throw ShapeError("missing tensor '" + p.name + "'");
        if (it->shape != p.shape) throw ShapeError("shape mismatch for tensor '" + p.name + "'");
        std::copy(it->values.begin(), it->values.end(), p.values.begin());
    }
}

inline void load_tensor(Embedding& e, const std::vector<NamedTensor>& tensors, const std::string& name) {
    auto it = std::find_if(tensors.begin(), tensors.end(), [&](const NamedTensor& t) { return t.name == name; });
    if (it == tensors.end()) throw ShapeError("missing tensor '" + name + "'");
    if (it->shape.size() != 2) throw ShapeError("embedding tensor must be 2-d");
    e.rows = it->shape[0];
    e.width = it->shape[1];
    e.table = it->values;
}

}  // namespace smartchoices::nn
