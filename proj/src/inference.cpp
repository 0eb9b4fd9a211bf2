#include "adpm/inference.hpp"

#include "adpm/error.hpp"

#include <algorithm>
#include <limits>
#include <optional>
#include <string>
#include <thread>

namespace adpm {

double MatrixResponses::response(int location_id, int part_id) const {
    if (location_id < 0 || location_id >= n_locations() || part_id < 0 || part_id >= n_parts())
        throw Error(ErrorKind::Provider, "no response for location " +
                                             std::to_string(location_id) + ", part " +
                                             std::to_string(part_id));
    return scores_(location_id, part_id);
}

CountingProvider::CountingProvider(const ResponseProvider& inner)
    : inner_(inner),
      per_pair_(std::make_unique<std::atomic<std::uint32_t>[]>(
          static_cast<std::size_t>(inner.n_locations()) *
          static_cast<std::size_t>(inner.n_parts()))) {}

double CountingProvider::response(int location_id, int part_id) const {
    const double m = inner_.response(location_id, part_id);
    per_pair_[static_cast<std::size_t>(location_id) * static_cast<std::size_t>(n_parts()) +
              static_cast<std::size_t>(part_id)]
        .fetch_add(1);
    total_.fetch_add(1);
    if (part_id != 0) non_root_.fetch_add(1);
    return m;
}

std::uint32_t CountingProvider::requests(int location_id, int part_id) const {
    return per_pair_[static_cast<std::size_t>(location_id) * static_cast<std::size_t>(n_parts()) +
                     static_cast<std::size_t>(part_id)]
        .load();
}

std::uint32_t CountingProvider::max_requests_per_pair() const {
    std::uint32_t mx = 0;
    const std::size_t n =
        static_cast<std::size_t>(n_locations()) * static_cast<std::size_t>(n_parts());
    for (std::size_t i = 0; i < n; ++i) mx = std::max(mx, per_pair_[i].load());
    return mx;
}

void DetectorModel::validate() const {
    if (n_parts < 1) throw Error(ErrorKind::Configuration, "model needs at least one part");
    if (static_cast<int>(likelihoods.size()) != n_parts)
        throw Error(ErrorKind::ArityMismatch,
                    "model has " + std::to_string(n_parts) + " parts but " +
                        std::to_string(likelihoods.size()) + " likelihoods");
    for (int k = 0; k < n_parts; ++k)
        if (likelihoods[static_cast<std::size_t>(k)].part_id != k)
            throw Error(ErrorKind::Configuration, "likelihoods must be ordered by part id 0..n");
    costs.validate();
}

void InferenceStats::add(const DetectionResult& r) {
    ++n_locations;
    total_evaluations += static_cast<std::int64_t>(r.parts_evaluated.size());
    part_evaluations += static_cast<std::int64_t>(
        std::count_if(r.parts_evaluated.begin(), r.parts_evaluated.end(),
                      [](int k) { return k != 0; }));
    if (r.label == Label::Pos) ++positives;
    tau_sum += r.tau;
}

void InferenceStats::merge(const InferenceStats& o) {
    n_locations += o.n_locations;
    part_evaluations += o.part_evaluations;
    total_evaluations += o.total_evaluations;
    positives += o.positives;
    tau_sum += o.tau_sum;
}

namespace {

void check_arity(const DetectorModel& model, const Policy& policy,
                 const ResponseProvider& provider) {
    if (policy.n_parts != model.n_parts || provider.n_parts() != model.n_parts)
        throw Error(ErrorKind::ArityMismatch,
                    "arity mismatch: model " + std::to_string(model.n_parts) + ", policy " +
                        std::to_string(policy.n_parts) + ", responses " +
                        std::to_string(provider.n_parts()));
    if (static_cast<int>(model.likelihoods.size()) != model.n_parts)
        throw Error(ErrorKind::ArityMismatch, "model likelihood count differs from part count");
}

double fetch(const ResponseProvider& provider, int location_id, int k) {
    try {
        return provider.response(location_id, k);
    } catch (const std::exception& e) {
        throw Error(ErrorKind::Provider, "location " + std::to_string(location_id) + ", part " +
                                             std::to_string(k) + ": " + e.what());
    }
}

}  // namespace

DetectionResult run_location(const DetectorModel& model, const Policy& policy,
                             const ResponseProvider& provider, int location_id) {
    check_arity(model, policy, provider);

    DetectionResult out;
    out.location_id = location_id;
    std::vector<std::optional<double>> cache(static_cast<std::size_t>(model.n_parts));
    auto response = [&](int k) {
        auto& slot = cache[static_cast<std::size_t>(k)];
        if (!slot) slot = fetch(provider, location_id, k);
        return *slot;
    };

    PartMask mask;
    double p = 0.5;
    double score = 0.0;
    for (;;) {
        const Action a = query_policy(policy, mask, p);
        out.trace.push_back({a, p});
        if (a.is_part()) {
            const int k = a.part_index();
            if (k >= model.n_parts || mask.contains(k))
                throw Error(ErrorKind::Configuration,
                            "policy selected invalid part " + std::to_string(k));
            const double m = response(k);
            score += m;
            p = belief_update(p, m, model.likelihoods[static_cast<std::size_t>(k)], policy.rule);
            mask = mask.with(k);
            out.parts_evaluated.push_back(k);
            continue;
        }
        out.tau = static_cast<int>(out.parts_evaluated.size());
        out.final_belief = p;
        out.partial_score = score;
        if (a.is_pos()) {
            for (int k = 0; k < model.n_parts; ++k) {
                if (mask.contains(k)) continue;
                score += response(k);
                mask = mask.with(k);
                out.parts_evaluated.push_back(k);
            }
            out.label = Label::Pos;
            out.score = score + model.bias;
        } else {
            out.label = Label::Neg;
            out.score = -std::numeric_limits<double>::infinity();
        }
        return out;
    }
}

GridResult run_grid(const DetectorModel& model, const Policy& policy,
                    const ResponseProvider& provider, unsigned threads) {
    check_arity(model, policy, provider);
    const int n = provider.n_locations();
    GridResult out;
    out.results.resize(static_cast<std::size_t>(n));

    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max(n, 1))));
    if (threads == 1) {
        for (int x = 0; x < n; ++x)
            out.results[static_cast<std::size_t>(x)] = run_location(model, policy, provider, x);
    } else {
        std::vector<std::exception_ptr> errors(threads);
        {
            std::vector<std::jthread> pool;
            for (unsigned w = 0; w < threads; ++w) {
                pool.emplace_back([&, w] {
                    try {
                        for (int x = static_cast<int>(w); x < n; x += static_cast<int>(threads))
                            out.results[static_cast<std::size_t>(x)] =
                                run_location(model, policy, provider, x);
                    } catch (...) {
                        errors[w] = std::current_exception();
                    }
                });
            }
        }
        for (auto& e : errors)
            if (e) std::rethrow_exception(e);
    }
    for (const auto& r : out.results) out.stats.add(r);
    return out;
}

double full_score(const DetectorModel& model, const ResponseProvider& provider, int location_id) {
    double score = 0.0;
    for (int k = 0; k < model.n_parts; ++k) score += fetch(provider, location_id, k);
    return score + model.bias;
}

}  // namespace adpm
