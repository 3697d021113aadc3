#pragma once

// Dueling multilayer perceptron with hand-written backprop.
//
// Topology:
//
//     input -> trunk[0] -> ... -> trunk[k-1] -+-> advantage head (linear, width A)
//                                             |
//                                             +-> [value hidden] -> value head (linear, width 1)
//
//     q_j = V + A_j - mean(A)
//
// Hidden layers use ReLU. All parameters live in one flat vector so
// optimizers, checkpoints and finite-difference checks can walk them
// uniformly. Layer order in that vector is: trunk layers, the optional
// value hidden layer, the value head, the advantage head. Each layer stores
// its weights row-major (out x in) followed by its bias.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "hadrl/errors.hpp"

namespace hadrl {

struct Architecture {
    std::size_t input_width = 0;
    std::vector<std::size_t> trunk;  // hidden widths shared by both heads
    std::size_t value_hidden = 0;    // 0: value head reads the trunk output directly
    std::size_t action_count = 1;

    bool operator==(const Architecture&) const = default;

    /// Width of the representation both heads read from.
    std::size_t penultimate_width() const { return trunk.empty() ? input_width : trunk.back(); }
};

/// Paper-scale widths: two 2048-wide trunk layers, a 512-wide value layer.
inline Architecture large_preset(std::size_t input_width, std::size_t action_count) {
    return Architecture{input_width, {2048, 2048}, 512, action_count};
}

/// Desk-scale default widths.
inline Architecture desk_preset(std::size_t input_width, std::size_t action_count) {
    return Architecture{input_width, {128, 128}, 64, action_count};
}

struct LayerSlot {
    std::size_t in = 0;
    std::size_t out = 0;
    std::size_t weight_offset = 0;
    std::size_t bias_offset = 0;
};

/// Read-only window onto one layer of a parameter vector.
struct LayerView {
    std::size_t in;
    std::size_t out;
    std::span<const double> weights;
    std::span<const double> bias;

    double weight(std::size_t row, std::size_t col) const { return weights[row * in + col]; }
};

class QNetwork {
public:
    QNetwork() = default;

    explicit QNetwork(Architecture arch) : arch_(std::move(arch)) {
        validate(arch_);
        std::size_t offset = 0;
        auto add = [&](std::size_t in, std::size_t out) {
            LayerSlot s{in, out, offset, offset + in * out};
            offset += in * out + out;
            slots_.push_back(s);
        };
        std::size_t width = arch_.input_width;
        for (auto w : arch_.trunk) {
            add(width, w);
            width = w;
        }
        if (arch_.value_hidden > 0) add(width, arch_.value_hidden);
        add(arch_.value_hidden > 0 ? arch_.value_hidden : width, 1);
        add(width, arch_.action_count);
        params_.assign(offset, 0.0);
    }

    const Architecture& architecture() const { return arch_; }
    std::span<double> parameters() { return params_; }
    std::span<const double> parameters() const { return params_; }
    std::size_t parameter_count() const { return params_.size(); }
    const std::vector<LayerSlot>& slots() const { return slots_; }

    std::size_t trunk_layers() const { return arch_.trunk.size(); }
    bool has_value_hidden() const { return arch_.value_hidden > 0; }

    LayerView layer(std::size_t k) const {
        const auto& s = slots_.at(k);
        return LayerView{s.in, s.out, std::span<const double>(params_).subspan(s.weight_offset, s.in * s.out),
                         std::span<const double>(params_).subspan(s.bias_offset, s.out)};
    }
    LayerView trunk_layer(std::size_t k) const { return layer(k); }
    LayerView value_hidden_layer() const {
        if (!has_value_hidden()) throw std::logic_error("network has no value hidden layer");
        return layer(trunk_layers());
    }
    LayerView value_head() const { return layer(trunk_layers() + (has_value_hidden() ? 1 : 0)); }
    LayerView advantage_head() const { return layer(slots_.size() - 1); }

    std::size_t value_head_index() const { return trunk_layers() + (has_value_hidden() ? 1 : 0); }
    std::size_t advantage_head_index() const { return slots_.size() - 1; }

    bool same_shape(const QNetwork& other) const { return arch_ == other.arch_; }
    bool operator==(const QNetwork& other) const {
        return arch_ == other.arch_ && params_ == other.params_;
    }

    static void validate(const Architecture& a) {
        if (a.input_width == 0) throw std::invalid_argument("input width must be >= 1");
        if (a.action_count == 0) throw std::invalid_argument("action count must be >= 1");
        for (auto w : a.trunk)
            if (w == 0) throw std::invalid_argument("hidden widths must be >= 1");
    }

private:
    Architecture arch_;
    std::vector<LayerSlot> slots_;
    std::vector<double> params_;
};

/// Delayed copy of a QNetwork; only sync_target writes it.
class TargetNetwork {
public:
    TargetNetwork() = default;
    explicit TargetNetwork(const QNetwork& source) : net_(source) {}

    const QNetwork& network() const { return net_; }

    friend void sync_target(const QNetwork& net, TargetNetwork& target);

private:
    QNetwork net_;
};

inline void sync_target(const QNetwork& net, TargetNetwork& target) {
    if (!net.same_shape(target.net_)) throw std::invalid_argument("target shape differs from source");
    std::copy(net.parameters().begin(), net.parameters().end(), target.net_.parameters().begin());
}

/// Glorot-uniform weights, zero biases. Deterministic in seed.
inline QNetwork init_network(const Architecture& arch, std::uint64_t seed) {
    QNetwork net(arch);
    std::mt19937_64 rng(seed);
    auto params = net.parameters();
    for (const auto& s : net.slots()) {
        double bound = std::sqrt(6.0 / static_cast<double>(s.in + s.out));
        std::uniform_real_distribution<double> dist(-bound, bound);
        for (std::size_t i = 0; i < s.in * s.out; ++i) params[s.weight_offset + i] = dist(rng);
    }
    return net;
}

/// `widths` is [input, hidden...]; the value head reads the last hidden
/// layer directly.
inline QNetwork init_network(std::span<const std::size_t> widths, std::size_t action_count,
                             std::uint64_t seed) {
    if (widths.empty()) throw std::invalid_argument("architecture must list at least the input width");
    Architecture arch;
    arch.input_width = widths[0];
    arch.trunk.assign(widths.begin() + 1, widths.end());
    arch.action_count = action_count;
    return init_network(arch, seed);
}

inline QNetwork init_network(std::initializer_list<std::size_t> widths, std::size_t action_count,
                             std::uint64_t seed) {
    std::vector<std::size_t> w(widths);
    return init_network(std::span<const std::size_t>(w), action_count, seed);
}

namespace detail {

// y = W x + b
inline void dense_forward(std::span<const double> params, const LayerSlot& s, const double* x, double* y) {
    const double* w = params.data() + s.weight_offset;
    const double* b = params.data() + s.bias_offset;
    for (std::size_t o = 0; o < s.out; ++o) {
        const double* row = w + o * s.in;
        double acc = 0.0;
        for (std::size_t i = 0; i < s.in; ++i) acc += row[i] * x[i];
        y[o] = acc + b[o];
    }
}

inline void relu_inplace(double* v, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) v[i] = v[i] > 0.0 ? v[i] : 0.0;
}

// Accumulates dW += dy x^T, db += dy and, when dx is non-null, writes dx = W^T dy.
inline void dense_backward(std::span<const double> params, std::span<double> grads, const LayerSlot& s,
                           const double* x, const double* dy, double* dx) {
    const double* w = params.data() + s.weight_offset;
    double* gw = grads.data() + s.weight_offset;
    double* gb = grads.data() + s.bias_offset;
    if (dx) std::fill(dx, dx + s.in, 0.0);
    for (std::size_t o = 0; o < s.out; ++o) {
        const double d = dy[o];
        if (d == 0.0) continue;
        gb[o] += d;
        double* grow = gw + o * s.in;
        for (std::size_t i = 0; i < s.in; ++i) grow[i] += d * x[i];
        if (dx) {
            const double* row = w + o * s.in;
            for (std::size_t i = 0; i < s.in; ++i) dx[i] += d * row[i];
        }
    }
}

}  // namespace detail

/// Per-sample activations kept for backprop.
struct ForwardTrace {
    std::vector<std::vector<double>> trunk;  // post-ReLU outputs of each trunk layer
    std::vector<double> value_hidden;        // post-ReLU
    double value = 0.0;
    std::vector<double> advantage;
    std::vector<double> q;
};

inline void forward_trace(const QNetwork& net, std::span<const double> state, ForwardTrace& t) {
    const auto& arch = net.architecture();
    if (state.size() != arch.input_width)
        throw std::invalid_argument("state length " + std::to_string(state.size()) +
                                    " does not match input width " + std::to_string(arch.input_width));
    auto params = net.parameters();
    const auto& slots = net.slots();
    t.trunk.resize(arch.trunk.size());
    const double* x = state.data();
    for (std::size_t k = 0; k < arch.trunk.size(); ++k) {
        t.trunk[k].resize(slots[k].out);
        detail::dense_forward(params, slots[k], x, t.trunk[k].data());
        detail::relu_inplace(t.trunk[k].data(), slots[k].out);
        x = t.trunk[k].data();
    }
    const double* features = x;
    const double* value_in = features;
    if (net.has_value_hidden()) {
        const auto& s = slots[net.trunk_layers()];
        t.value_hidden.resize(s.out);
        detail::dense_forward(params, s, features, t.value_hidden.data());
        detail::relu_inplace(t.value_hidden.data(), s.out);
        value_in = t.value_hidden.data();
    }
    detail::dense_forward(params, slots[net.value_head_index()], value_in, &t.value);

    const std::size_t n = arch.action_count;
    t.advantage.resize(n);
    detail::dense_forward(params, slots[net.advantage_head_index()], features, t.advantage.data());
    double mean = 0.0;
    for (double a : t.advantage) mean += a;
    mean /= static_cast<double>(n);
    t.q.resize(n);
    for (std::size_t j = 0; j < n; ++j) t.q[j] = t.value + t.advantage[j] - mean;
}

inline std::vector<double> forward(const QNetwork& net, std::span<const double> state) {
    ForwardTrace t;
    forward_trace(net, state, t);
    return std::move(t.q);
}

inline std::vector<double> forward(const TargetNetwork& target, std::span<const double> state) {
    return forward(target.network(), state);
}

/// Activations of the layer both heads read from.
inline std::vector<double> penultimate(const QNetwork& net, std::span<const double> state) {
    ForwardTrace t;
    forward_trace(net, state, t);
    if (t.trunk.empty()) return std::vector<double>(state.begin(), state.end());
    return t.trunk.back();
}

/// Dense row-major batch of states.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

    std::span<double> row(std::size_t i) { return std::span<double>(data).subspan(i * cols, cols); }
    std::span<const double> row(std::size_t i) const {
        return std::span<const double>(data).subspan(i * cols, cols);
    }
};

struct LossAndGrads {
    double loss = 0.0;
    std::vector<double> grads;
};

/// Mean squared TD error over the batch, restricted to each sample's taken
/// action, and its gradient with respect to every parameter.
inline LossAndGrads td_loss_and_grads(const QNetwork& net, const Matrix& states,
                                      std::span<const std::uint32_t> actions,
                                      std::span<const double> targets) {
    const std::size_t batch = states.rows;
    if (batch == 0) throw std::invalid_argument("empty batch");
    if (actions.size() != batch || targets.size() != batch)
        throw std::invalid_argument("batch component sizes disagree");
    const auto& arch = net.architecture();
    const std::size_t n = arch.action_count;

    LossAndGrads out;
    out.grads.assign(net.parameter_count(), 0.0);
    auto params = net.parameters();
    std::span<double> grads(out.grads);
    const auto& slots = net.slots();

    ForwardTrace t;
    std::vector<double> d_adv(n), d_features, d_value_hidden, scratch;
    const double scale = 2.0 / static_cast<double>(batch);

    for (std::size_t b = 0; b < batch; ++b) {
        const std::uint32_t a = actions[b];
        if (a >= n) throw std::invalid_argument("action " + std::to_string(a) + " outside head width");
        auto state = states.row(b);
        forward_trace(net, state, t);
        const double err = t.q[a] - targets[b];
        out.loss += err * err;

        const double g = scale * err;  // dL/dq_a
        if (g == 0.0) continue;

        const double* features = t.trunk.empty() ? state.data() : t.trunk.back().data();
        const std::size_t fw = arch.penultimate_width();
        d_features.assign(fw, 0.0);

        // q_a = V + A_a - mean(A)
        const double inv_n = 1.0 / static_cast<double>(n);
        for (std::size_t k = 0; k < n; ++k) d_adv[k] = -g * inv_n;
        d_adv[a] += g;
        scratch.resize(fw);
        detail::dense_backward(params, grads, slots[net.advantage_head_index()], features, d_adv.data(),
                               scratch.data());
        for (std::size_t i = 0; i < fw; ++i) d_features[i] += scratch[i];

        const double d_value = g;
        if (net.has_value_hidden()) {
            const auto& hs = slots[net.trunk_layers()];
            d_value_hidden.resize(hs.out);
            detail::dense_backward(params, grads, slots[net.value_head_index()], t.value_hidden.data(), &d_value,
                                   d_value_hidden.data());
            for (std::size_t i = 0; i < hs.out; ++i)
                if (t.value_hidden[i] <= 0.0) d_value_hidden[i] = 0.0;
            detail::dense_backward(params, grads, hs, features, d_value_hidden.data(), scratch.data());
            for (std::size_t i = 0; i < fw; ++i) d_features[i] += scratch[i];
        } else {
            detail::dense_backward(params, grads, slots[net.value_head_index()], features, &d_value,
                                   scratch.data());
            for (std::size_t i = 0; i < fw; ++i) d_features[i] += scratch[i];
        }

        // Back through the trunk.
        std::vector<double>& dy = d_features;
        for (std::size_t k = arch.trunk.size(); k-- > 0;) {
            for (std::size_t i = 0; i < slots[k].out; ++i)
                if (t.trunk[k][i] <= 0.0) dy[i] = 0.0;
            const double* x = k == 0 ? state.data() : t.trunk[k - 1].data();
            if (k == 0) {
                detail::dense_backward(params, grads, slots[k], x, dy.data(), nullptr);
            } else {
                scratch.resize(slots[k].in);
                detail::dense_backward(params, grads, slots[k], x, dy.data(), scratch.data());
                dy.assign(scratch.begin(), scratch.begin() + static_cast<std::ptrdiff_t>(slots[k].in));
            }
        }
    }
    out.loss /= static_cast<double>(batch);
    return out;
}

/// Loss only; used by the finite-difference harness.
inline double td_loss(const QNetwork& net, const Matrix& states, std::span<const std::uint32_t> actions,
                      std::span<const double> targets) {
    if (states.rows == 0) throw std::invalid_argument("empty batch");
    double loss = 0.0;
    for (std::size_t b = 0; b < states.rows; ++b) {
        auto q = forward(net, states.row(b));
        const double err = q.at(actions[b]) - targets[b];
        loss += err * err;
    }
    return loss / static_cast<double>(states.rows);
}

enum class OptimizerKind { adam, sgd };

struct OptimizerState {
    OptimizerKind kind = OptimizerKind::adam;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::uint64_t step = 0;
    std::vector<double> first_moment;
    std::vector<double> second_moment;

    static OptimizerState adam() { return {}; }
    static OptimizerState sgd() {
        OptimizerState s;
        s.kind = OptimizerKind::sgd;
        return s;
    }
};

/// Applies one update in place. Rejects the whole update, leaving the
/// network and state untouched, if any gradient entry is non-finite.
inline void optimizer_step(QNetwork& net, std::span<const double> grads, OptimizerState& state, double lr) {
    auto params = net.parameters();
    if (grads.size() != params.size()) throw std::invalid_argument("gradient shape does not match parameters");
    for (double g : grads)
        if (!std::isfinite(g)) throw NumericError("non-finite gradient; update rejected");

    if (state.kind == OptimizerKind::sgd) {
        for (std::size_t i = 0; i < params.size(); ++i) params[i] -= lr * grads[i];
    } else {
        if (state.first_moment.size() != params.size()) {
            state.first_moment.assign(params.size(), 0.0);
            state.second_moment.assign(params.size(), 0.0);
        }
        ++state.step;
        const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
        const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
        for (std::size_t i = 0; i < params.size(); ++i) {
            const double g = grads[i];
            double& m = state.first_moment[i];
            double& v = state.second_moment[i];
            m = state.beta1 * m + (1.0 - state.beta1) * g;
            v = state.beta2 * v + (1.0 - state.beta2) * g * g;
            params[i] -= lr * (m / c1) / (std::sqrt(v / c2) + state.epsilon);
        }
    }
    for (double p : params)
        if (!std::isfinite(p)) throw NumericError("non-finite parameter after update");
}

/// Largest relative disagreement between `analytic` and central differences
/// of the batch loss. Pairs where both magnitudes are below 1e-12 count as 0.
inline double finite_diff_compare(const QNetwork& net, const Matrix& states, std::span<const std::uint32_t> actions,
                                  std::span<const double> targets, std::span<const double> analytic,
                                  double epsilon) {
    if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");
    QNetwork probe = net;
    auto p = probe.parameters();
    double worst = 0.0;
    // Round-off in the central difference is about |loss| * 1e-16 / epsilon;
    // the denominator floor keeps it from reading as a 100% error on
    // vanishing gradients.
    const double floor = 1e-6 * std::max(1.0, std::abs(td_loss(net, states, actions, targets)));
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double saved = p[i];
        p[i] = saved + epsilon;
        const double up = td_loss(probe, states, actions, targets);
        p[i] = saved - epsilon;
        const double down = td_loss(probe, states, actions, targets);
        p[i] = saved;
        const double numeric = (up - down) / (2.0 * epsilon);
        const double a = std::abs(analytic[i]);
        const double b = std::abs(numeric);
        if (a < 1e-12 && b < 1e-12) continue;
        worst = std::max(worst, std::abs(analytic[i] - numeric) / std::max({a, b, floor}));
    }
    return worst;
}

inline double finite_diff_check(const QNetwork& net, const Matrix& states, std::span<const std::uint32_t> actions,
                                std::span<const double> targets, double epsilon) {
    auto lg = td_loss_and_grads(net, states, actions, targets);
    return finite_diff_compare(net, states, actions, targets, lg.grads, epsilon);
}

inline double finite_diff_check(const QNetwork& net, std::span<const double> state, std::uint32_t action,
                                double target, double epsilon) {
    Matrix m(1, state.size());
    std::copy(state.begin(), state.end(), m.data.begin());
    return finite_diff_check(net, m, std::span<const std::uint32_t>(&action, 1),
                             std::span<const double>(&target, 1), epsilon);
}

// ---------------------------------------------------------------------------
// Checkpoint container
//
//   bytes 0..8   "HADRLNET1"
//   u32          input width
//   u32          trunk layer count k
//   u32 x k      trunk widths
//   u32          value hidden width (0 = none)
//   u32          action count
//   u64          parameter count
//   f64 x count  parameters in the flat layer order documented above
//
// All integers and floats little-endian.

inline constexpr char kCheckpointMagic[] = "HADRLNET1";

namespace detail {

template <typename T>
void write_le(std::ostream& os, T value) {
    static_assert(std::is_trivially_copyable_v<T>);
    unsigned char buf[sizeof(T)];
    std::memcpy(buf, &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
    os.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <typename T>
T read_le(std::istream& is) {
    unsigned char buf[sizeof(T)];
    if (!is.read(reinterpret_cast<char*>(buf), sizeof(T))) throw std::runtime_error("truncated checkpoint");
    if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
    T value;
    std::memcpy(&value, buf, sizeof(T));
    return value;
}

}  // namespace detail

inline void save_network(std::ostream& os, const QNetwork& net) {
    const auto& a = net.architecture();
    os.write(kCheckpointMagic, sizeof(kCheckpointMagic) - 1);
    detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(a.input_width));
    detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(a.trunk.size()));
    for (auto w : a.trunk) detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(w));
    detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(a.value_hidden));
    detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(a.action_count));
    detail::write_le<std::uint64_t>(os, net.parameter_count());
    for (double p : net.parameters()) detail::write_le<double>(os, p);
}

inline QNetwork load_network(std::istream& is) {
    char magic[sizeof(kCheckpointMagic) - 1];
    if (!is.read(magic, sizeof(magic)) || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0)
        throw std::runtime_error("not a network checkpoint (bad magic)");
    Architecture a;
    a.input_width = detail::read_le<std::uint32_t>(is);
    const auto k = detail::read_le<std::uint32_t>(is);
    for (std::uint32_t i = 0; i < k; ++i) a.trunk.push_back(detail::read_le<std::uint32_t>(is));
    a.value_hidden = detail::read_le<std::uint32_t>(is);
    a.action_count = detail::read_le<std::uint32_t>(is);
    QNetwork net(a);
    const auto count = detail::read_le<std::uint64_t>(is);
    if (count != net.parameter_count()) throw std::runtime_error("checkpoint parameter count mismatch");
    for (double& p : net.parameters()) p = detail::read_le<double>(is);
    return net;
}

inline void save_network(const std::string& path, const QNetwork& net) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + path);
    save_network(os, net);
}

inline QNetwork load_network(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot read " + path);
    return load_network(is);
}

}  // namespace hadrl
