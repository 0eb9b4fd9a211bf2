#pragma once

#include "adpm/inference.hpp"
#include "adpm/likelihoods.hpp"
#include "adpm/policy.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace adpm::oracle {

inline constexpr std::int64_t kMaxEnumerationNodes = 10'000'000;

/// A problem small enough to enumerate every decision tree.
struct TinyInstance {
    std::vector<ScoreLikelihood> likelihoods;
    CostParams costs;
    BeliefGrid grid{11};

    int n_parts() const { return static_cast<int>(likelihoods.size()); }
    /// Upper bound on the number of tree nodes visited from one start state.
    std::int64_t enumeration_size() const;
    void validate() const;
};

/// Random instance with 1-3 parts, 2-4 score bins and an odd grid of 5-21 beliefs.
TinyInstance make_tiny_instance(std::uint64_t seed);

/// Minimum expected cost over all decision trees from (start, p0), by plain
/// recursion over every part choice and score bin. Successor beliefs are
/// snapped to the nearest grid center, matching the trained tables.
double exhaustive_optimal_value(const TinyInstance& inst, double p0, PartMask start = {});

Policy train_tiny(const TinyInstance& inst);

/// Evaluate parts in a fixed order; stop with background at p <= lower and
/// foreground at p >= upper.
Policy fixed_order_policy(const TinyInstance& inst, std::span<const int> order, double lower,
                          double upper);

struct PolicyCostEstimate {
    double mean_cost = 0.0;
    double std_error = 0.0;
    double mean_tau = 0.0;
    double fp_rate = 0.0;
    double fn_rate = 0.0;
    std::int64_t n_trials = 0;
};

enum class SimulationMode {
    /// Draw the label once from the prior, draw every score from that class
    /// and carry the exact posterior, as the inference engine does.
    FixedLabel,
    /// Simulate the discretized belief process the tables were solved on:
    /// scores come from the belief-weighted mixture, beliefs snap to the grid
    /// after each update, and the label is drawn from the final belief.
    BeliefChain,
};

PolicyCostEstimate simulate_policy(const Policy& policy, std::span<const ScoreLikelihood> liks,
                                   double prior, const CostParams& costs, std::int64_t n_trials,
                                   std::uint64_t seed,
                                   SimulationMode mode = SimulationMode::FixedLabel);

/// Replay the inference decision loop on per-part scripted scores
/// (script[k] is the response of part k).
std::vector<TraceStep> step_trace(const Policy& policy, std::span<const ScoreLikelihood> liks,
                                  std::span<const double> script);

struct CertificationRecord {
    std::uint64_t seed = 0;
    double optimal_value = 0.0;  // exhaustive value at p = 0.5
    double dp_value = 0.0;       // trained V(empty, 0.5)
    double abs_diff = 0.0;       // max over every grid belief
    std::int64_t trials = 0;
    double mean_cost = 0.0;
    double std_error = 0.0;
};

/// Train on a seeded tiny instance and compare against the exhaustive value at
/// every grid belief. `perturb` is added to the DP values before comparing.
CertificationRecord certify(std::uint64_t seed, std::int64_t trials, double perturb = 0.0);

}  // namespace adpm::oracle
