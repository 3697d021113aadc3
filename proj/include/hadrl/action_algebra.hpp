#pragma once

// Mixed-radix factorization of a flat discrete action space.
//
// A plan with radices r_1..r_L maps a digit vector (d_1..d_L), d_i < r_i,
// onto the composed id
//
//     out_1     = d_1
//     out_{i+1} = out_i * r_{i+1} + d_{i+1}
//
// so the first level is the most significant digit. r_1 is stored but never
// used as a multiplier.

#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace hadrl {

using ActionId = std::uint64_t;

struct DecompositionPlan {
    ActionId total_actions = 1;
    std::vector<std::uint32_t> radices{1};
    ActionId capacity = 1;

    std::size_t levels() const { return radices.size(); }
    bool operator==(const DecompositionPlan&) const = default;
};

struct PrimitiveActionVector {
    std::vector<std::uint32_t> digits;
    bool operator==(const PrimitiveActionVector&) const = default;
};

namespace detail {

inline ActionId checked_mul(ActionId a, ActionId b) {
    if (b != 0 && a > std::numeric_limits<ActionId>::max() / b)
        throw std::overflow_error("action capacity overflows 64 bits");
    return a * b;
}

// base^exp, saturating at limit + 1 so comparisons against limit stay exact.
inline ActionId saturating_pow(ActionId base, std::size_t exp, ActionId limit) {
    ActionId acc = 1;
    for (std::size_t i = 0; i < exp; ++i) {
        if (base != 0 && acc > limit / base) return limit + 1;
        acc *= base;
    }
    return acc;
}

}  // namespace detail

/// Builds a plan from explicit radices; capacity is their product.
inline DecompositionPlan make_plan(ActionId total_actions, std::vector<std::uint32_t> radices) {
    if (radices.empty()) throw std::invalid_argument("plan needs at least one level");
    if (total_actions < 1) throw std::invalid_argument("total_actions must be >= 1");
    ActionId capacity = 1;
    for (auto r : radices) {
        if (r < 1) throw std::invalid_argument("radix must be >= 1");
        capacity = detail::checked_mul(capacity, r);
    }
    if (capacity < total_actions)
        throw std::invalid_argument("radices cover " + std::to_string(capacity) + " < " +
                                    std::to_string(total_actions) + " actions");
    return DecompositionPlan{total_actions, std::move(radices), capacity};
}

/// Balanced plan: the fewest levels L with max_branch^L >= total_actions,
/// each radix the integer L-th root ceiling of total_actions, and the last
/// radix shrunk to the smallest value that still covers total_actions.
inline DecompositionPlan plan_decomposition(ActionId total_actions, std::uint32_t max_branch = 10) {
    if (total_actions < 1) throw std::invalid_argument("total_actions must be >= 1");
    if (max_branch < 2) throw std::invalid_argument("max_branch must be >= 2");

    std::size_t levels = 1;
    while (detail::saturating_pow(max_branch, levels, total_actions) < total_actions) ++levels;

    // Smallest r with r^L >= total_actions; r <= max_branch by choice of L.
    ActionId lo = 1, hi = max_branch;
    while (lo < hi) {
        ActionId mid = lo + (hi - lo) / 2;
        if (detail::saturating_pow(mid, levels, total_actions) >= total_actions)
            hi = mid;
        else
            lo = mid + 1;
    }
    std::vector<std::uint32_t> radices(levels, static_cast<std::uint32_t>(lo));

    ActionId prefix = detail::saturating_pow(lo, levels - 1, total_actions);
    ActionId last = (total_actions + prefix - 1) / prefix;
    radices.back() = static_cast<std::uint32_t>(std::max<ActionId>(1, last));

    return make_plan(total_actions, std::move(radices));
}

inline ActionId compose(const DecompositionPlan& plan, std::span<const std::uint32_t> digits) {
    if (digits.size() != plan.radices.size())
        throw std::invalid_argument("digit count " + std::to_string(digits.size()) +
                                    " does not match plan levels " +
                                    std::to_string(plan.radices.size()));
    ActionId out = 0;
    for (std::size_t i = 0; i < digits.size(); ++i) {
        if (digits[i] >= plan.radices[i])
            throw std::invalid_argument("digit " + std::to_string(digits[i]) + " at level " +
                                        std::to_string(i) + " exceeds radix " +
                                        std::to_string(plan.radices[i]));
        out = out * plan.radices[i] + digits[i];
    }
    return out;
}

inline ActionId compose(const DecompositionPlan& plan, const PrimitiveActionVector& v) {
    return compose(plan, std::span<const std::uint32_t>(v.digits));
}

inline PrimitiveActionVector decompose(const DecompositionPlan& plan, ActionId id) {
    if (id >= plan.capacity)
        throw std::invalid_argument("action id " + std::to_string(id) + " outside capacity " +
                                    std::to_string(plan.capacity));
    PrimitiveActionVector v;
    v.digits.resize(plan.radices.size());
    for (std::size_t i = plan.radices.size(); i-- > 0;) {
        v.digits[i] = static_cast<std::uint32_t>(id % plan.radices[i]);
        id /= plan.radices[i];
    }
    return v;
}

}  // namespace hadrl
