#include "adpm/policy.hpp"

#include "adpm/error.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <new>
#include <string>
#include <thread>

namespace adpm {

void CostParams::validate() const {
    if (!(lambda_fp > 0.0 && std::isfinite(lambda_fp)))
        throw Error(ErrorKind::InvalidCost, "lambda_fp must be strictly positive and finite");
    if (!(lambda_fn > 0.0 && std::isfinite(lambda_fn)))
        throw Error(ErrorKind::InvalidCost, "lambda_fn must be strictly positive and finite");
}

int PartMask::count() const { return std::popcount(bits); }

BeliefGrid::BeliefGrid(int d) : d_(d) {
    if (d < 2) throw Error(ErrorKind::InvalidInput, "belief grid needs d >= 2");
}

double BeliefGrid::center(int i) const {
    if (i == d_ - 1) return 1.0;
    return static_cast<double>(i) / static_cast<double>(d_ - 1);
}

int BeliefGrid::nearest(double p) const {
    const double x = p * static_cast<double>(d_ - 1);
    if (!(x > 0.5)) return 0;
    const double idx = std::ceil(x - 0.5);
    return idx >= static_cast<double>(d_ - 1) ? d_ - 1 : static_cast<int>(idx);
}

TerminalRow terminal_stage(const CostParams& costs, const BeliefGrid& grid) {
    TerminalRow row{Eigen::VectorXd(grid.size()), std::vector<Action>(grid.size())};
    for (int i = 0; i < grid.size(); ++i) {
        const double p = grid.center(i);
        const double neg = costs.lambda_fn * p;
        const double pos = costs.lambda_fp * (1.0 - p);
        if (neg <= pos) {
            row.values[i] = neg;
            row.actions[i] = Action::label_neg();
        } else {
            row.values[i] = pos;
            row.actions[i] = Action::label_pos();
        }
    }
    return row;
}

double belief_update(double p, double h_pos, double h_neg, BeliefRule rule) {
    if (p <= 0.0) return 0.0;
    if (p >= 1.0) return 1.0;
    if (rule == BeliefRule::Literal) {
        const double den = h_pos + h_neg;
        return den > 0.0 ? std::clamp(h_pos * p / den, 0.0, 1.0) : p;
    }
    const double num = h_pos * p;
    const double den = num + h_neg * (1.0 - p);
    return den > 0.0 ? std::clamp(num / den, 0.0, 1.0) : p;
}

double belief_update(double p, double m, const ScoreLikelihood& lik, BeliefRule rule) {
    return belief_update(p, eval_pdf(lik.pos, m), eval_pdf(lik.neg, m), rule);
}

double expected_q(PartMask mask, double p, int k, const ScoreLikelihood& lik,
                  const Eigen::Ref<const Eigen::VectorXd>& next_values, const BeliefGrid& grid,
                  BeliefRule rule) {
    if (mask.contains(k))
        throw Error(ErrorKind::InvalidAction,
                    "expected_q: part " + std::to_string(k) + " already used");
    if (next_values.size() != grid.size())
        throw Error(ErrorKind::Configuration, "expected_q: value row does not match grid");
    const double w_pos = lik.pos.bin_width();
    const double w_neg = lik.neg.bin_width();
    double q = 0.0;
    for (int j = 0; j < lik.bin_count(); ++j) {
        const double hp = lik.pos.bins[j];
        const double hn = lik.neg.bins[j];
        const double weight = p * hp * w_pos + (1.0 - p) * hn * w_neg;
        q += weight * next_values[grid.nearest(belief_update(p, hp, hn, rule))];
    }
    return q;
}

Eigen::MatrixXd belief_transition(const ScoreLikelihood& lik, const BeliefGrid& grid,
                                  BeliefRule rule) {
    const int d = grid.size();
    Eigen::MatrixXd t = Eigen::MatrixXd::Zero(d, d);
    const double w_pos = lik.pos.bin_width();
    const double w_neg = lik.neg.bin_width();
    for (int i = 0; i < d; ++i) {
        const double p = grid.center(i);
        for (int j = 0; j < lik.bin_count(); ++j) {
            const double hp = lik.pos.bins[j];
            const double hn = lik.neg.bins[j];
            t(i, grid.nearest(belief_update(p, hp, hn, rule))) +=
                p * hp * w_pos + (1.0 - p) * hn * w_neg;
        }
    }
    return t;
}

namespace {

void check_likelihoods(std::span<const ScoreLikelihood> liks) {
    if (liks.empty()) throw Error(ErrorKind::InvalidInput, "train_policy: no likelihoods");
    if (liks.size() > static_cast<std::size_t>(kMaxParts))
        throw Error(ErrorKind::Capacity, "train_policy: " + std::to_string(liks.size()) +
                                             " parts exceeds the limit of " +
                                             std::to_string(kMaxParts));
    const int bins = liks.front().bin_count();
    for (const auto& l : liks) {
        if (l.pos.size() != l.neg.size() || l.pos.lo != l.neg.lo || l.pos.hi != l.neg.hi)
            throw Error(ErrorKind::Configuration,
                        "part " + std::to_string(l.part_id) + ": pos/neg supports differ");
        if (l.bin_count() != bins)
            throw Error(ErrorKind::Configuration, "likelihoods do not share a bin count");
    }
}

template <typename Fn>
void parallel_for(std::size_t n, unsigned threads, Fn&& fn) {
    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(n)));
    if (threads <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (unsigned w = 0; w < threads; ++w) {
        pool.emplace_back([&, w] {
            for (std::size_t i = w; i < n; i += threads) fn(i);
        });
    }
}

}  // namespace

Policy train_policy(std::span<const ScoreLikelihood> liks, const CostParams& costs,
                    const BeliefGrid& grid, const TrainOptions& opts) {
    check_likelihoods(liks);
    costs.validate();

    const int n_parts = static_cast<int>(liks.size());
    const int d = grid.size();
    Policy policy{n_parts, grid, costs, opts.rule, {}, {}};
    try {
        policy.actions.resize(static_cast<Eigen::Index>(policy.n_masks()), d);
        policy.values.resize(static_cast<Eigen::Index>(policy.n_masks()), d);
    } catch (const std::bad_alloc&) {
        throw Error(ErrorKind::Capacity, "train_policy: policy tables do not fit in memory");
    }

    std::vector<Eigen::MatrixXd> transitions;
    transitions.reserve(liks.size());
    for (const auto& l : liks) transitions.push_back(belief_transition(l, grid, opts.rule));

    Eigen::VectorXd stop_neg(d), stop_pos(d);
    for (int i = 0; i < d; ++i) {
        stop_neg[i] = costs.lambda_fn * grid.center(i);
        stop_pos[i] = costs.lambda_fp * (1.0 - grid.center(i));
    }

    const auto full = PartMask::full(n_parts);
    const auto terminal = terminal_stage(costs, grid);
    policy.values.row(full.bits) = terminal.values.transpose();
    for (int i = 0; i < d; ++i) policy.actions(full.bits, i) = terminal.actions[i].code();

    // Stage t only reads rows of stage t + 1, so rows within a stage are independent.
    std::vector<std::vector<std::uint32_t>> stages(static_cast<std::size_t>(n_parts));
    for (std::uint32_t s = 0; s < full.bits; ++s)
        stages[static_cast<std::size_t>(std::popcount(s))].push_back(s);

    for (int t = n_parts - 1; t >= 0; --t) {
        const auto& rows = stages[static_cast<std::size_t>(t)];
        parallel_for(rows.size(), opts.threads, [&](std::size_t r) {
            const PartMask s{rows[r]};
            Eigen::VectorXd best_q = Eigen::VectorXd::Constant(d, INFINITY);
            Eigen::VectorXi best_k = Eigen::VectorXi::Constant(d, -1);
            for (int k = 0; k < n_parts; ++k) {
                if (s.contains(k)) continue;
                const Eigen::VectorXd q =
                    transitions[k] * policy.values.row(s.with(k).bits).transpose();
                for (int i = 0; i < d; ++i) {
                    if (q[i] < best_q[i]) {
                        best_q[i] = q[i];
                        best_k[i] = k;
                    }
                }
            }
            for (int i = 0; i < d; ++i) {
                const double cont = 1.0 + best_q[i];
                Action a;
                double v;
                if (stop_neg[i] <= stop_pos[i] && stop_neg[i] <= cont) {
                    a = Action::label_neg();
                    v = stop_neg[i];
                } else if (stop_pos[i] <= cont) {
                    a = Action::label_pos();
                    v = stop_pos[i];
                } else {
                    a = Action::part(best_k[i]);
                    v = cont;
                }
                policy.values(s.bits, i) = v;
                policy.actions(s.bits, i) = a.code();
            }
        });
    }
    return policy;
}

Action query_policy(const Policy& policy, PartMask mask, double p) {
    if (mask.bits >= policy.n_masks())
        throw Error(ErrorKind::InvalidState, "query_policy: mask " + std::to_string(mask.bits) +
                                                 " out of range for " +
                                                 std::to_string(policy.n_parts) + " parts");
    if (std::isnan(p)) throw Error(ErrorKind::InvalidState, "query_policy: belief is NaN");
    return policy.action(mask, policy.grid.nearest(p));
}

}  // namespace adpm
