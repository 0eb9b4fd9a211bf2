#pragma once

#include "adpm/likelihoods.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <vector>

namespace adpm {

inline constexpr int kMaxParts = 24;
inline constexpr int kDefaultBeliefBins = 101;

/// Lagrangian costs of a wrong declaration. One part evaluation costs 1.
struct CostParams {
    double lambda_fp = 1.0;
    double lambda_fn = 1.0;

    /// Throws ErrorKind::InvalidCost unless both are strictly positive and finite.
    void validate() const;
    bool operator==(const CostParams&) const = default;
};

/// Set of already-evaluated parts; bit k set means part k was used.
struct PartMask {
    std::uint32_t bits = 0;

    static PartMask full(int n_parts) { return {(std::uint32_t{1} << n_parts) - 1u}; }
    bool contains(int k) const { return (bits >> k) & 1u; }
    PartMask with(int k) const { return {bits | (std::uint32_t{1} << k)}; }
    int count() const;
    bool operator==(const PartMask&) const = default;
};

/// Uniform grid of d beliefs with centers k/(d-1), so 0 and 1 are exact.
class BeliefGrid {
public:
    explicit BeliefGrid(int d = kDefaultBeliefBins);

    int size() const { return d_; }
    double center(int i) const;
    /// Nearest center; an exact midpoint resolves to the lower bin.
    int nearest(double p) const;
    bool operator==(const BeliefGrid&) const = default;

private:
    int d_;
};

/// Policy action: stop with a label, or evaluate a part. Encoded as one byte,
/// 0 = background, 1 = foreground, 2 + k = evaluate part k.
class Action {
public:
    constexpr Action() = default;
    static constexpr Action label_neg() { return Action(0); }
    static constexpr Action label_pos() { return Action(1); }
    static constexpr Action part(int k) { return Action(static_cast<std::uint8_t>(2 + k)); }
    static constexpr Action from_code(std::uint8_t c) { return Action(c); }

    constexpr bool is_neg() const { return code_ == 0; }
    constexpr bool is_pos() const { return code_ == 1; }
    constexpr bool is_label() const { return code_ < 2; }
    constexpr bool is_part() const { return code_ >= 2; }
    constexpr int part_index() const { return static_cast<int>(code_) - 2; }
    constexpr std::uint8_t code() const { return code_; }

    constexpr bool operator==(const Action&) const = default;

private:
    constexpr explicit Action(std::uint8_t c) : code_(c) {}
    std::uint8_t code_ = 0;
};

/// Posterior update rule. Normalized is the Bayes posterior
/// h+ p / (h+ p + h- (1-p)); Literal is h+ p / (h+ + h-), kept only for
/// comparison experiments.
enum class BeliefRule : std::uint8_t { Normalized = 0, Literal = 1 };

using ActionTable = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ValueTable = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Lookup tables indexed by (mask bits, belief bin).
struct Policy {
    int n_parts = 0;
    BeliefGrid grid;
    CostParams costs;
    BeliefRule rule = BeliefRule::Normalized;
    ActionTable actions;
    ValueTable values;

    std::size_t n_masks() const { return std::size_t{1} << n_parts; }
    Action action(PartMask s, int belief_bin) const {
        return Action::from_code(actions(s.bits, belief_bin));
    }
    double value(PartMask s, double p) const { return values(s.bits, grid.nearest(p)); }
};

struct TrainOptions {
    BeliefRule rule = BeliefRule::Normalized;
    unsigned threads = 1;
};

/// Stop-now costs and labels for the full mask. Ties go to the background label.
struct TerminalRow {
    Eigen::VectorXd values;
    std::vector<Action> actions;
};
TerminalRow terminal_stage(const CostParams& costs, const BeliefGrid& grid);

double belief_update(double p, double m, const ScoreLikelihood& lik,
                     BeliefRule rule = BeliefRule::Normalized);

/// Same update with the likelihood heights already looked up.
double belief_update(double p, double h_pos, double h_neg, BeliefRule rule);

/// Expected successor value of evaluating part k from (mask, p): a sum over
/// score bins weighted by the belief-weighted mixture p h+ + (1-p) h-.
/// `next_values` is the value row of mask + {k}, read by nearest belief bin.
double expected_q(PartMask mask, double p, int k, const ScoreLikelihood& lik,
                  const Eigen::Ref<const Eigen::VectorXd>& next_values, const BeliefGrid& grid,
                  BeliefRule rule = BeliefRule::Normalized);

/// Row-stochastic d x d matrix T with T(i, j) = probability that evaluating the
/// part from belief center i lands in belief bin j. Expected successor values
/// for a whole row of beliefs are then T * V(next).
Eigen::MatrixXd belief_transition(const ScoreLikelihood& lik, const BeliefGrid& grid,
                                  BeliefRule rule = BeliefRule::Normalized);

/// Backward induction over masks from the full mask down to the empty one.
Policy train_policy(std::span<const ScoreLikelihood> liks, const CostParams& costs,
                    const BeliefGrid& grid, const TrainOptions& opts = {});

Action query_policy(const Policy& policy, PartMask mask, double p);

}  // namespace adpm
