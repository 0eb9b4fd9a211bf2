#pragma once

#include "adpm/likelihoods.hpp"
#include "adpm/policy.hpp"

#include <Eigen/Dense>

#include <atomic>
#include <cstdint>
#include <memory>
#include <vector>

namespace adpm {

/// Source of part responses m_k(x). Responses must be deterministic per
/// (location, part); the engine asks for each pair at most once per pass.
class ResponseProvider {
public:
    virtual ~ResponseProvider() = default;
    virtual int n_parts() const = 0;
    virtual int n_locations() const = 0;
    virtual double response(int location_id, int part_id) const = 0;
};

/// Dense precomputed responses, one row per location.
class MatrixResponses final : public ResponseProvider {
public:
    MatrixResponses() = default;
    explicit MatrixResponses(Eigen::MatrixXd scores) : scores_(std::move(scores)) {}

    int n_parts() const override { return static_cast<int>(scores_.cols()); }
    int n_locations() const override { return static_cast<int>(scores_.rows()); }
    double response(int location_id, int part_id) const override;

    const Eigen::MatrixXd& scores() const { return scores_; }

private:
    Eigen::MatrixXd scores_;
};

/// Wraps another provider and counts every request, per pair and in total.
class CountingProvider final : public ResponseProvider {
public:
    explicit CountingProvider(const ResponseProvider& inner);

    int n_parts() const override { return inner_.n_parts(); }
    int n_locations() const override { return inner_.n_locations(); }
    double response(int location_id, int part_id) const override;

    std::uint64_t total_requests() const { return total_.load(); }
    std::uint64_t non_root_requests() const { return non_root_.load(); }
    std::uint32_t requests(int location_id, int part_id) const;
    std::uint32_t max_requests_per_pair() const;

private:
    const ResponseProvider& inner_;
    std::unique_ptr<std::atomic<std::uint32_t>[]> per_pair_;
    mutable std::atomic<std::uint64_t> total_{0};
    mutable std::atomic<std::uint64_t> non_root_{0};
};

struct DetectorModel {
    int n_parts = 0;
    double bias = 0.0;
    std::vector<ScoreLikelihood> likelihoods;
    CostParams costs;

    void validate() const;
};

enum class Label : std::uint8_t { Neg = 0, Pos = 1 };

struct TraceStep {
    Action action;
    double belief = 0.5;
    bool operator==(const TraceStep&) const = default;
};

struct DetectionResult {
    int location_id = 0;
    Label label = Label::Neg;
    double score = 0.0;  // -inf for background
    std::vector<int> parts_evaluated;
    int tau = 0;
    double final_belief = 0.5;
    double partial_score = 0.0;  // running sum at the stop decision
    std::vector<TraceStep> trace;
};

struct InferenceStats {
    std::int64_t n_locations = 0;
    std::int64_t part_evaluations = 0;  // non-root parts only
    std::int64_t total_evaluations = 0;
    std::int64_t positives = 0;
    std::int64_t tau_sum = 0;

    double mean_tau() const {
        return n_locations ? static_cast<double>(tau_sum) / static_cast<double>(n_locations) : 0.0;
    }
    void add(const DetectionResult& r);
    void merge(const InferenceStats& other);
};

struct GridResult {
    std::vector<DetectionResult> results;
    InferenceStats stats;
};

DetectionResult run_location(const DetectorModel& model, const Policy& policy,
                             const ResponseProvider& provider, int location_id);

GridResult run_grid(const DetectorModel& model, const Policy& policy,
                    const ResponseProvider& provider, unsigned threads = 1);

/// Exhaustive score, sum of all part responses plus bias.
double full_score(const DetectorModel& model, const ResponseProvider& provider, int location_id);

}  // namespace adpm
