#include "adpm/error.hpp"
#include "adpm/oracle.hpp"
#include "test_helpers.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

using namespace adpm;
using namespace adpm::oracle;
using adpm::testing::lik_from_weights;
using adpm::testing::uninformative;

namespace {

Policy constant_policy(int n_parts, Action a, CostParams costs) {
    const BeliefGrid grid(11);
    Policy p{n_parts, grid, costs, BeliefRule::Normalized, {}, {}};
    p.actions = ActionTable::Constant(static_cast<Eigen::Index>(p.n_masks()), 11, a.code());
    p.values = ValueTable::Zero(static_cast<Eigen::Index>(p.n_masks()), 11);
    return p;
}

}  // namespace

TEST(Exhaustive, NoPartsLeft) {
    TinyInstance inst;
    inst.likelihoods = {lik_from_weights(0, {1, 2}, {2, 1}), lik_from_weights(1, {1, 3}, {3, 1})};
    inst.costs = {3.0, 7.0};
    for (double p : {0.0, 0.2, 0.5, 0.9, 1.0})
        EXPECT_DOUBLE_EQ(exhaustive_optimal_value(inst, p, PartMask::full(2)),
                         std::min(7.0 * p, 3.0 * (1 - p)));
}

TEST(Exhaustive, UninformativePartStops) {
    TinyInstance inst;
    inst.likelihoods = {uninformative(0, 2)};
    inst.costs = {10.0, 10.0};
    EXPECT_DOUBLE_EQ(exhaustive_optimal_value(inst, 0.5), 5.0);
}

TEST(Exhaustive, SeparatingPartCostsAboutOne) {
    TinyInstance inst;
    inst.likelihoods = {lik_from_weights(0, {0.0, 1.0}, {1.0, 0.0})};
    inst.costs = {100.0, 100.0};
    const double v = exhaustive_optimal_value(inst, 0.5);
    EXPECT_GE(v, 1.0);
    EXPECT_LT(v, 1.01);
}

TEST(Exhaustive, RejectsLargeInstances) {
    TinyInstance inst;
    for (int k = 0; k < 4; ++k) inst.likelihoods.push_back(uninformative(k, 2));
    inst.costs = {1, 1};
    try {
        exhaustive_optimal_value(inst, 0.5);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Capacity);
    }
    inst.likelihoods = {uninformative(0, 5)};
    EXPECT_THROW(exhaustive_optimal_value(inst, 0.5), Error);
}

TEST(Certification, DpMatchesEnumerationOnManySeeds) {
    for (std::uint64_t seed = 1; seed <= 60; ++seed) {
        const auto rec = certify(seed, 0);
        EXPECT_LE(rec.abs_diff, 1e-6) << "seed " << seed;
    }
}

TEST(Certification, PerturbationIsDetected) {
    EXPECT_GT(certify(3, 0, 0.01).abs_diff, 1e-6);
}

TEST(Simulate, ForcedNegativeOnPositivePrior) {
    const std::vector<ScoreLikelihood> liks{uninformative(0)};
    const CostParams costs{3.0, 8.0};
    const auto est =
        simulate_policy(constant_policy(1, Action::label_neg(), costs), liks, 1.0, costs, 500, 1);
    EXPECT_EQ(est.fn_rate, 1.0);
    EXPECT_EQ(est.mean_tau, 0.0);
    EXPECT_DOUBLE_EQ(est.mean_cost, 8.0);
    EXPECT_EQ(est.std_error, 0.0);
}

TEST(Simulate, ForcedPositiveOnNegativePrior) {
    const std::vector<ScoreLikelihood> liks{uninformative(0)};
    const CostParams costs{3.0, 8.0};
    const auto est =
        simulate_policy(constant_policy(1, Action::label_pos(), costs), liks, 0.0, costs, 500, 1);
    EXPECT_EQ(est.fp_rate, 1.0);
    EXPECT_DOUBLE_EQ(est.mean_cost, 3.0);
}

TEST(Simulate, TrainedPolicyMatchesDpValue) {
    for (std::uint64_t seed : {2u, 7u, 13u}) {
        const auto inst = make_tiny_instance(seed);
        const auto policy = train_tiny(inst);
        const auto est = simulate_policy(policy, inst.likelihoods, 0.5, inst.costs, 200000, seed,
                                         SimulationMode::BeliefChain);
        EXPECT_NEAR(est.mean_cost, exhaustive_optimal_value(inst, 0.5), 3.0 * est.std_error + 1e-12)
            << "seed " << seed;
    }
}

TEST(Simulate, ReproducibleAndErrorShrinks) {
    const auto inst = make_tiny_instance(5);
    const auto policy = train_tiny(inst);
    const auto a = simulate_policy(policy, inst.likelihoods, 0.5, inst.costs, 40000, 99);
    const auto b = simulate_policy(policy, inst.likelihoods, 0.5, inst.costs, 40000, 99);
    EXPECT_EQ(a.mean_cost, b.mean_cost);
    EXPECT_EQ(a.std_error, b.std_error);
    const auto c = simulate_policy(policy, inst.likelihoods, 0.5, inst.costs, 80000, 99);
    if (a.std_error > 0) EXPECT_NEAR(c.std_error / a.std_error, 1.0 / std::sqrt(2.0), 0.2 / std::sqrt(2.0));
}

TEST(Simulate, NoFixedOrderPolicyBeatsOptimum) {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto inst = make_tiny_instance(seed);
        const double opt = exhaustive_optimal_value(inst, 0.5);
        std::vector<int> order(static_cast<std::size_t>(inst.n_parts()));
        std::iota(order.begin(), order.end(), 0);
        do {
            for (auto [lo, hi] : {std::pair{0.1, 0.9}, std::pair{0.3, 0.7}, std::pair{0.05, 0.5}}) {
                const auto policy = fixed_order_policy(inst, order, lo, hi);
                const auto est = simulate_policy(policy, inst.likelihoods, 0.5, inst.costs, 20000,
                                                 seed, SimulationMode::BeliefChain);
                EXPECT_GE(est.mean_cost, opt - 3.0 * est.std_error);
            }
        } while (std::next_permutation(order.begin(), order.end()));
    }
}

TEST(StepTrace, LabelFirstIgnoresScript) {
    const std::vector<ScoreLikelihood> liks{uninformative(0)};
    const auto policy = constant_policy(1, Action::label_neg(), {1, 1});
    const auto trace = step_trace(policy, liks, {});
    ASSERT_EQ(trace.size(), 1u);
    EXPECT_TRUE(trace[0].action.is_neg());
}

TEST(StepTrace, UninformativeKeepsBeliefAtHalf) {
    const std::vector<ScoreLikelihood> liks{uninformative(0), uninformative(1)};
    auto policy = constant_policy(2, Action::label_neg(), {1, 1});
    policy.actions.row(0).setConstant(Action::part(1).code());
    policy.actions.row(2).setConstant(Action::part(0).code());
    const std::vector<double> script{0.1, 0.9};
    const auto trace = step_trace(policy, liks, script);
    ASSERT_EQ(trace.size(), 3u);
    for (const auto& s : trace) EXPECT_DOUBLE_EQ(s.belief, 0.5);
}

TEST(StepTrace, ExhaustedScript) {
    const std::vector<ScoreLikelihood> liks{uninformative(0), uninformative(1)};
    auto policy = constant_policy(2, Action::label_neg(), {1, 1});
    policy.actions.row(0).setConstant(Action::part(1).code());
    const std::vector<double> script{0.3};
    try {
        step_trace(policy, liks, script);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::InsufficientScript);
    }
}

TEST(TinyInstance, GeneratorRespectsBounds) {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const auto inst = make_tiny_instance(seed);
        EXPECT_NO_THROW(inst.validate());
        EXPECT_EQ(inst.grid.size() % 2, 1);
    }
}
