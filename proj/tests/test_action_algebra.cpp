#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "hadrl/action_algebra.hpp"

using namespace hadrl;

namespace {

// Advances `digits` to the next tuple in lexicographic order; false on wrap.
bool next_tuple(std::vector<std::uint32_t>& digits, const std::vector<std::uint32_t>& radices) {
    for (std::size_t i = digits.size(); i-- > 0;) {
        if (++digits[i] < radices[i]) return true;
        digits[i] = 0;
    }
    return false;
}

// Smallest L with base^L >= n, by repeated multiplication.
std::size_t levels_by_multiplication(std::uint64_t n, std::uint64_t base) {
    std::size_t l = 1;
    for (std::uint64_t p = base; p < n; p *= base) ++l;
    return l;
}

}  // namespace

TEST(PlanDecomposition, ThousandActionsBaseTen) {
    auto plan = plan_decomposition(1000, 10);
    EXPECT_EQ(plan.radices, (std::vector<std::uint32_t>{10, 10, 10}));
    EXPECT_EQ(plan.capacity, 1000u);
}

TEST(PlanDecomposition, SingleAction) {
    auto plan = plan_decomposition(1, 10);
    EXPECT_EQ(plan.radices, (std::vector<std::uint32_t>{1}));
    EXPECT_EQ(plan.capacity, 1u);
}

TEST(PlanDecomposition, LargestTableScenario) {
    // ceil(log10 4646) = 4; 8^4 = 4096 < 4646 <= 9^4 = 6561; last radix
    // ceil(4646 / 729) = 7.
    auto plan = plan_decomposition(4646, 10);
    EXPECT_EQ(plan.levels(), 4u);
    EXPECT_EQ(plan.radices, (std::vector<std::uint32_t>{9, 9, 9, 7}));
    EXPECT_EQ(plan.capacity, 5103u);
    EXPECT_GE(plan.capacity, 4646u);
}

TEST(PlanDecomposition, RejectsBadArguments) {
    EXPECT_THROW(plan_decomposition(0, 10), std::invalid_argument);
    EXPECT_THROW(plan_decomposition(10, 1), std::invalid_argument);
    EXPECT_THROW(make_plan(10, {3, 3}), std::invalid_argument);
    EXPECT_THROW(make_plan(10, {}), std::invalid_argument);
}

TEST(PlanDecomposition, LevelCountIsLogarithmic) {
    for (std::uint64_t n = 2; n <= 1'000'000; n += (n < 2000 ? 1 : 997)) {
        auto plan = plan_decomposition(n, 10);
        ASSERT_EQ(plan.levels(), levels_by_multiplication(n, 10)) << n;
        ASSERT_GE(plan.capacity, n);
        for (auto r : plan.radices) ASSERT_LE(r, 10u);
    }
}

TEST(PlanDecomposition, InvariantsAcrossBranchBounds) {
    for (std::uint32_t b = 2; b <= 40; ++b) {
        for (std::uint64_t n : {1ull, 2ull, 7ull, 49ull, 550ull, 1326ull, 4646ull, 99999ull}) {
            auto plan = plan_decomposition(n, b);
            std::uint64_t prod = 1;
            for (auto r : plan.radices) {
                ASSERT_GE(r, 1u);
                ASSERT_LE(r, b);
                prod *= r;
            }
            ASSERT_EQ(prod, plan.capacity);
            ASSERT_GE(plan.capacity, n);
            // Shrinking the last radix by one more would no longer cover n.
            if (plan.radices.back() > 1) ASSERT_LT(plan.capacity / plan.radices.back() * (plan.radices.back() - 1), n);
        }
    }
}

TEST(Compose, WorkedExamples) {
    auto p1000 = plan_decomposition(1000, 10);
    EXPECT_EQ(compose(p1000, PrimitiveActionVector{{9, 9, 9}}), 999u);
    EXPECT_EQ(compose(p1000, PrimitiveActionVector{{0, 0, 0}}), 0u);

    auto p = make_plan(120, {4, 5, 6});
    EXPECT_EQ(compose(p, PrimitiveActionVector{{1, 2, 3}}), 45u);  // ((1*5)+2)*6+3
    EXPECT_EQ(compose(p, PrimitiveActionVector{{0, 0, 0}}), 0u);
}

TEST(Compose, MatchesLexicographicEnumeration) {
    auto p = make_plan(120, {4, 5, 6});
    std::vector<std::uint32_t> d(3, 0);
    std::uint64_t expected = 0;
    do {
        ASSERT_EQ(compose(p, std::span<const std::uint32_t>(d)), expected);
        ++expected;
    } while (next_tuple(d, p.radices));
    EXPECT_EQ(expected, 120u);
}

TEST(Compose, RejectsOutOfRangeDigits) {
    auto p = make_plan(120, {4, 5, 6});
    EXPECT_THROW(compose(p, PrimitiveActionVector{{4, 0, 0}}), std::invalid_argument);
    EXPECT_THROW(compose(p, PrimitiveActionVector{{0, 0, 6}}), std::invalid_argument);
    EXPECT_THROW(compose(p, PrimitiveActionVector{{0, 0}}), std::invalid_argument);
}

TEST(Decompose, WorkedExamples) {
    EXPECT_EQ(decompose(plan_decomposition(1000, 10), 999).digits, (std::vector<std::uint32_t>{9, 9, 9}));
    auto p = make_plan(120, {4, 5, 6});
    EXPECT_EQ(decompose(p, 0).digits, (std::vector<std::uint32_t>{0, 0, 0}));
    EXPECT_EQ(decompose(p, 45).digits, (std::vector<std::uint32_t>{1, 2, 3}));
    EXPECT_THROW(decompose(p, 120), std::invalid_argument);
}

TEST(Bijection, ExhaustiveOnSmallPlansAndSampledOnLarge) {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 60; ++trial) {
        std::uniform_int_distribution<std::uint32_t> levels(1, 5), radix(1, 12);
        std::vector<std::uint32_t> radices(levels(rng));
        for (auto& r : radices) r = radix(rng);
        std::uint64_t cap = 1;
        for (auto r : radices) cap *= r;
        auto p = make_plan(cap, radices);
        std::vector<std::uint32_t> d(radices.size(), 0);
        std::uint64_t counter = 0;
        do {
            auto id = compose(p, std::span<const std::uint32_t>(d));
            ASSERT_EQ(id, counter);
            ASSERT_EQ(decompose(p, id).digits, d);
            ++counter;
        } while (next_tuple(d, radices));
        ASSERT_EQ(counter, cap);
    }
}
