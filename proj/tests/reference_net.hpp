#pragma once

// Straight-line re-implementation of the dueling forward pass, used as an
// oracle for nn_core. Shares only the parameter accessors.

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "hadrl/nn_core.hpp"

namespace hadrl::testing {

struct ReferenceForward {
    std::vector<double> q;
    double min_abs_preactivation = std::numeric_limits<double>::infinity();
};

inline std::vector<double> affine(const LayerView& l, const std::vector<double>& x) {
    std::vector<double> y(l.out);
    for (std::size_t o = 0; o < l.out; ++o) {
        double s = l.bias[o];
        for (std::size_t i = 0; i < l.in; ++i) s += l.weight(o, i) * x[i];
        y[o] = s;
    }
    return y;
}

inline ReferenceForward reference_forward(const QNetwork& net, const std::vector<double>& state) {
    ReferenceForward r;
    auto relu = [&](std::vector<double> v) {
        for (double& z : v) {
            r.min_abs_preactivation = std::min(r.min_abs_preactivation, std::abs(z));
            z = std::max(0.0, z);
        }
        return v;
    };
    std::vector<double> h = state;
    for (std::size_t k = 0; k < net.trunk_layers(); ++k) h = relu(affine(net.trunk_layer(k), h));
    std::vector<double> vin = h;
    if (net.has_value_hidden()) vin = relu(affine(net.value_hidden_layer(), h));
    const double v = affine(net.value_head(), vin)[0];
    auto a = affine(net.advantage_head(), h);
    double mean = 0.0;
    for (double x : a) mean += x;
    mean /= static_cast<double>(a.size());
    for (double x : a) r.q.push_back(v + x - mean);
    return r;
}

/// Random architecture small enough for exhaustive finite differences.
inline Architecture random_architecture(std::mt19937_64& rng) {
    std::uniform_int_distribution<std::size_t> width(1, 6), depth(0, 2), heads(1, 5), value(0, 4);
    Architecture a;
    a.input_width = width(rng);
    const auto d = depth(rng);
    for (std::size_t i = 0; i < d; ++i) a.trunk.push_back(width(rng));
    a.value_hidden = value(rng);
    a.action_count = heads(rng);
    return a;
}

/// Fills every parameter, biases included, from N(0, 0.7).
inline void randomize(QNetwork& net, std::mt19937_64& rng) {
    std::normal_distribution<double> n(0.0, 0.7);
    for (double& p : net.parameters()) p = n(rng);
}

inline std::vector<double> random_state(std::size_t width, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<double> s(width);
    for (double& x : s) x = u(rng);
    return s;
}

}  // namespace hadrl::testing
