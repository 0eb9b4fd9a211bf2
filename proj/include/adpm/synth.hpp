#pragma once

#include "adpm/inference.hpp"
#include "adpm/likelihoods.hpp"
#include "adpm/policy.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace adpm::synth {

/// Gaussian part responses: h+ = N(+sep*mult_k/2, 1), h- = N(-sep*mult_k/2, 1).
struct SyntheticSpec {
    int n_parts = 9;
    double separation = 3.0;
    std::vector<double> informativeness_profile;  // empty: geometric default
    double prior_positive = 0.5;
    int n_locations = 1000;
    std::uint64_t seed = 1;
    int n_train_samples = 1000;  // held-out draws per class per part for fitting
    double bias = 0.0;
    int n_bins = kDefaultScoreBins;

    void validate() const;
    /// Per-part separation multipliers; the default profile is 0.8^k rescaled
    /// to unit mean, so part 0 is the most informative.
    std::vector<double> multipliers() const;
};

struct SyntheticDetector {
    DetectorModel model;
    MatrixResponses responses;
    std::vector<Label> truth;
    std::vector<ScoreSampleSet> training_samples;
};

SyntheticDetector make_synthetic(const SyntheticSpec& spec, const CostParams& costs = {});

/// R_DPM / R_ADPM with the root excluded from both counts.
double compute_rnpe(const InferenceStats& stats, int n_parts, std::int64_t n_locations);

struct PrPoint {
    double threshold = 0.0;
    double precision = 0.0;
    double recall = 0.0;
};

struct PrCurve {
    std::vector<PrPoint> points;
    double average_precision = 0.0;
};

/// Location-level precision/recall over finite scores; -inf scores are not
/// detections. AP is the area under the monotone precision envelope.
PrCurve precision_recall(std::span<const double> scores, std::span<const Label> truth);
PrCurve precision_recall(std::span<const DetectionResult> results, std::span<const Label> truth);

struct Evaluation {
    double ap = 0.0;
    double rnpe = 0.0;  // +inf when no non-root part was evaluated
    double mean_tau = 0.0;
    double fp_rate = 0.0;  // false positives / true negatives
    double fn_rate = 0.0;  // false negatives / true positives
    double error_rate = 0.0;  // (fp + fn) / n_locations
    std::int64_t false_positives = 0;
    std::int64_t false_negatives = 0;
    std::int64_t n_truth_pos = 0;
    std::int64_t n_truth_neg = 0;
    InferenceStats stats;
};

Evaluation evaluate(const DetectorModel& model, const Policy& policy,
                    const ResponseProvider& provider, std::span<const Label> truth,
                    unsigned threads = 1);

/// AP of the exhaustive classifier (full score at every location).
double full_evaluation_ap(const DetectorModel& model, const ResponseProvider& provider,
                          std::span<const Label> truth);

struct SweepRow {
    double lambda_fp = 0.0;
    double lambda_fn = 0.0;
    Evaluation eval;
    std::string error;  // non-empty when this row failed
};

struct MonotonicityCheck {
    double lambda_lo = 0.0;
    double lambda_hi = 0.0;
    std::string metric;
    bool ok = true;
};

struct SweepResult {
    std::vector<SweepRow> rows;
    std::vector<MonotonicityCheck> diagonal_checks;
};

struct SweepOptions {
    int belief_bins = kDefaultBeliefBins;
    unsigned threads = 1;
};

/// One policy per grid point, trained on the same fitted likelihoods and run
/// on the same locations.
SweepResult lambda_sweep(const SyntheticSpec& spec,
                         std::span<const std::pair<double, double>> lambda_grid,
                         const SweepOptions& opts = {});

/// Same as above on an already generated detector.
SweepResult lambda_sweep(const SyntheticDetector& det,
                         std::span<const std::pair<double, double>> lambda_grid,
                         const SweepOptions& opts = {});

}  // namespace adpm::synth
