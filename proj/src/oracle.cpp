#include "adpm/oracle.hpp"

#include "adpm/error.hpp"
#include "adpm/random.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace adpm::oracle {

std::int64_t TinyInstance::enumeration_size() const {
    std::int64_t bins = 0;
    for (const auto& l : likelihoods) bins = std::max<std::int64_t>(bins, l.bin_count());
    std::int64_t nodes = 1;
    for (int r = 1; r <= n_parts(); ++r) nodes = 1 + r * bins * nodes;
    return nodes;
}

void TinyInstance::validate() const {
    if (likelihoods.empty() || n_parts() > 3)
        throw Error(ErrorKind::Capacity, "tiny instance needs 1..3 parts");
    for (const auto& l : likelihoods)
        if (l.bin_count() > 4 || l.pos.size() != l.neg.size())
            throw Error(ErrorKind::Capacity, "tiny instance likelihoods need <= 4 score bins");
    if (grid.size() > 21) throw Error(ErrorKind::Capacity, "tiny instance grid needs d <= 21");
    if (enumeration_size() * grid.size() > kMaxEnumerationNodes)
        throw Error(ErrorKind::Capacity, "tiny instance enumeration too large");
    costs.validate();
}

TinyInstance make_tiny_instance(std::uint64_t seed) {
    Rng rng(seed);
    TinyInstance inst;
    const int n_parts = rng.uniform_int(1, 3);
    const int bins = rng.uniform_int(2, 4);
    inst.grid = BeliefGrid(2 * rng.uniform_int(2, 10) + 1);
    inst.costs = {rng.uniform(1.0, 20.0), rng.uniform(1.0, 20.0)};
    for (int k = 0; k < n_parts; ++k) {
        Eigen::VectorXd wp(bins), wn(bins);
        for (int j = 0; j < bins; ++j) {
            wp[j] = rng.uniform(0.05, 1.0);
            wn[j] = rng.uniform(0.05, 1.0);
        }
        inst.likelihoods.push_back({k, pdf_from_weights(wp, 0.0, 1.0),
                                    pdf_from_weights(wn, 0.0, 1.0)});
    }
    return inst;
}

namespace {

class Enumerator {
public:
    explicit Enumerator(const TinyInstance& inst) : inst_(inst), d_(inst.grid.size()) {}

    double value(std::uint32_t used, double p) {
        if (++nodes_ > kMaxEnumerationNodes)
            throw Error(ErrorKind::Capacity, "exhaustive enumeration exceeded node budget");
        const auto& c = inst_.costs;
        const double stop = std::min(c.lambda_fn * p, c.lambda_fp * (1.0 - p));
        double best_continue = INFINITY;
        for (int k = 0; k < inst_.n_parts(); ++k) {
            if (used & (1u << k)) continue;
            const auto& lik = inst_.likelihoods[static_cast<std::size_t>(k)];
            double expectation = 0.0;
            for (int j = 0; j < lik.bin_count(); ++j) {
                const double hp = lik.pos.bins[j];
                const double hn = lik.neg.bins[j];
                const double prob =
                    p * hp * lik.pos.bin_width() + (1.0 - p) * hn * lik.neg.bin_width();
                double next = p;
                if (p > 0.0 && p < 1.0) next = hp * p / (hp * p + hn * (1.0 - p));
                expectation += prob * value(used | (1u << k), snap(next));
            }
            best_continue = std::min(best_continue, 1.0 + expectation);
        }
        return std::min(stop, best_continue);
    }

private:
    // Nearest grid center by direct search; the first (lower) center wins ties.
    double snap(double p) const {
        double best = 0.0;
        double best_dist = INFINITY;
        for (int i = 0; i < d_; ++i) {
            const double c = i == d_ - 1 ? 1.0 : static_cast<double>(i) / (d_ - 1);
            const double dist = std::abs(p - c);
            if (dist < best_dist) {
                best_dist = dist;
                best = c;
            }
        }
        return best;
    }

    const TinyInstance& inst_;
    int d_;
    std::int64_t nodes_ = 0;
};

// Inverse-CDF draw of a bin index from a vector of masses.
int draw_bin(Rng& rng, const Eigen::Ref<const Eigen::VectorXd>& masses) {
    const double u = rng.uniform() * masses.sum();
    double acc = 0.0;
    for (Eigen::Index j = 0; j < masses.size(); ++j) {
        acc += masses[j];
        if (u < acc) return static_cast<int>(j);
    }
    return static_cast<int>(masses.size() - 1);
}

}  // namespace

double exhaustive_optimal_value(const TinyInstance& inst, double p0, PartMask start) {
    inst.validate();
    Enumerator e(inst);
    return e.value(start.bits, p0);
}

Policy train_tiny(const TinyInstance& inst) {
    return train_policy(inst.likelihoods, inst.costs, inst.grid);
}

Policy fixed_order_policy(const TinyInstance& inst, std::span<const int> order, double lower,
                          double upper) {
    const int n = inst.n_parts();
    if (static_cast<int>(order.size()) != n)
        throw Error(ErrorKind::InvalidInput, "fixed order must list every part once");
    const int d = inst.grid.size();
    Policy policy{n, inst.grid, inst.costs, BeliefRule::Normalized, {}, {}};
    policy.actions.resize(static_cast<Eigen::Index>(policy.n_masks()), d);
    policy.values = ValueTable::Zero(static_cast<Eigen::Index>(policy.n_masks()), d);
    const auto terminal = terminal_stage(inst.costs, inst.grid);

    std::vector<std::uint32_t> prefix(static_cast<std::size_t>(n) + 1, 0);
    for (int t = 0; t < n; ++t) prefix[t + 1] = prefix[t] | (1u << order[t]);

    for (std::uint32_t s = 0; s < policy.n_masks(); ++s) {
        const int t = PartMask{s}.count();
        const bool on_path = t < n && prefix[static_cast<std::size_t>(t)] == s;
        for (int i = 0; i < d; ++i) {
            const double p = inst.grid.center(i);
            Action a = terminal.actions[static_cast<std::size_t>(i)];
            if (on_path) {
                if (p <= lower)
                    a = Action::label_neg();
                else if (p >= upper)
                    a = Action::label_pos();
                else
                    a = Action::part(order[t]);
            }
            policy.actions(s, i) = a.code();
        }
    }
    return policy;
}

PolicyCostEstimate simulate_policy(const Policy& policy, std::span<const ScoreLikelihood> liks,
                                   double prior, const CostParams& costs, std::int64_t n_trials,
                                   std::uint64_t seed, SimulationMode mode) {
    if (n_trials < 1) throw Error(ErrorKind::InvalidInput, "simulate_policy: n_trials >= 1");
    if (static_cast<int>(liks.size()) != policy.n_parts)
        throw Error(ErrorKind::ArityMismatch, "simulate_policy: likelihood count != policy parts");

    std::vector<Eigen::VectorXd> pos_mass, neg_mass;
    for (const auto& l : liks) {
        pos_mass.push_back(l.pos.masses());
        neg_mass.push_back(l.neg.masses());
    }

    Rng rng(seed);
    double sum = 0.0, sum_sq = 0.0;
    std::int64_t tau_sum = 0, fp = 0, fn = 0, n_pos = 0, n_neg = 0;
    const auto& grid = policy.grid;

    for (std::int64_t trial = 0; trial < n_trials; ++trial) {
        bool y = false;
        double p = prior;
        if (mode == SimulationMode::FixedLabel)
            y = rng.bernoulli(prior);
        else
            p = grid.center(grid.nearest(prior));

        PartMask mask;
        int tau = 0;
        Action a = query_policy(policy, mask, p);
        while (a.is_part()) {
            const int k = a.part_index();
            const auto& lik = liks[static_cast<std::size_t>(k)];
            int bin;
            if (mode == SimulationMode::FixedLabel) {
                bin = draw_bin(rng, y ? pos_mass[k] : neg_mass[k]);
                p = belief_update(p, lik.pos.bin_center(bin), lik, policy.rule);
            } else {
                const Eigen::VectorXd mix = p * pos_mass[k] + (1.0 - p) * neg_mass[k];
                bin = draw_bin(rng, mix);
                p = grid.center(grid.nearest(
                    belief_update(p, lik.pos.bins[bin], lik.neg.bins[bin], policy.rule)));
            }
            mask = mask.with(k);
            ++tau;
            if (tau > policy.n_parts)
                throw Error(ErrorKind::Configuration, "policy does not terminate");
            a = query_policy(policy, mask, p);
        }
        if (mode == SimulationMode::BeliefChain) y = rng.bernoulli(p);

        double cost = tau;
        if (y) {
            ++n_pos;
            if (a.is_neg()) {
                ++fn;
                cost += costs.lambda_fn;
            }
        } else {
            ++n_neg;
            if (a.is_pos()) {
                ++fp;
                cost += costs.lambda_fp;
            }
        }
        sum += cost;
        sum_sq += cost * cost;
        tau_sum += tau;
    }

    const double n = static_cast<double>(n_trials);
    PolicyCostEstimate est;
    est.n_trials = n_trials;
    est.mean_cost = sum / n;
    const double var = n > 1 ? std::max(0.0, (sum_sq - n * est.mean_cost * est.mean_cost) / (n - 1))
                             : 0.0;
    est.std_error = std::sqrt(var / n);
    est.mean_tau = static_cast<double>(tau_sum) / n;
    est.fp_rate = n_neg ? static_cast<double>(fp) / static_cast<double>(n_neg) : 0.0;
    est.fn_rate = n_pos ? static_cast<double>(fn) / static_cast<double>(n_pos) : 0.0;
    return est;
}

std::vector<TraceStep> step_trace(const Policy& policy, std::span<const ScoreLikelihood> liks,
                                  std::span<const double> script) {
    std::vector<TraceStep> trace;
    PartMask mask;
    double p = 0.5;
    for (;;) {
        const Action a = query_policy(policy, mask, p);
        trace.push_back({a, p});
        if (a.is_label()) return trace;
        const int k = a.part_index();
        if (k >= static_cast<int>(script.size()))
            throw Error(ErrorKind::InsufficientScript,
                        "script has no score for part " + std::to_string(k));
        p = belief_update(p, script[static_cast<std::size_t>(k)],
                          liks[static_cast<std::size_t>(k)], policy.rule);
        mask = mask.with(k);
    }
}

CertificationRecord certify(std::uint64_t seed, std::int64_t trials, double perturb) {
    const auto inst = make_tiny_instance(seed);
    const auto policy = train_tiny(inst);
    CertificationRecord rec;
    rec.seed = seed;
    for (int i = 0; i < inst.grid.size(); ++i) {
        const double opt = exhaustive_optimal_value(inst, inst.grid.center(i));
        rec.abs_diff = std::max(rec.abs_diff, std::abs(policy.values(0, i) + perturb - opt));
    }
    rec.optimal_value = exhaustive_optimal_value(inst, 0.5);
    rec.dp_value = policy.value({}, 0.5) + perturb;
    if (trials > 0) {
        const auto est = simulate_policy(policy, inst.likelihoods, 0.5, inst.costs, trials,
                                         derive_seed(seed, 1), SimulationMode::BeliefChain);
        rec.trials = est.n_trials;
        rec.mean_cost = est.mean_cost;
        rec.std_error = est.std_error;
    }
    return rec;
}

}  // namespace adpm::oracle
