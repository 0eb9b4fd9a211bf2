#pragma once

#include <Eigen/Dense>

#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace adpm {

inline constexpr int kDefaultScoreBins = 201;
inline constexpr double kPdfFloor = 1e-6;

/// Labeled part responses collected for one part.
struct ScoreSampleSet {
    int part_id = 0;
    std::vector<double> positives;
    std::vector<double> negatives;
};

/// Histogram density on [lo, hi] with equal-width bins. Bin values are
/// density heights, so sum(bins) * bin_width() == 1.
struct DiscretePdf {
    double lo = 0.0;
    double hi = 1.0;
    Eigen::VectorXd bins;

    int size() const { return static_cast<int>(bins.size()); }
    double bin_width() const { return (hi - lo) / static_cast<double>(bins.size()); }
    double bin_center(int i) const { return lo + (static_cast<double>(i) + 0.5) * bin_width(); }

    /// Bin containing m, clamped to the edge bins. NaN maps to bin 0.
    int bin_index(double m) const;

    /// Probability mass of every bin (bins * bin_width).
    Eigen::VectorXd masses() const { return bins * bin_width(); }

    bool operator==(const DiscretePdf&) const = default;
};

/// h_k(m | foreground) and h_k(m | background) on a shared support.
struct ScoreLikelihood {
    int part_id = 0;
    DiscretePdf pos;
    DiscretePdf neg;

    int bin_count() const { return pos.size(); }
    bool operator==(const ScoreLikelihood&) const = default;
};

/// Gaussian-kernel density estimate over a fixed sample.
class KernelDensity {
public:
    KernelDensity(std::vector<double> samples, double bandwidth);

    double operator()(double x) const;
    double bandwidth() const { return bandwidth_; }
    std::span<const double> samples() const { return samples_; }

private:
    std::vector<double> samples_;
    double bandwidth_;
};

using DensityFn = std::function<double(double)>;

/// Silverman's rule of thumb, 1.06 * sigma * N^(-1/5).
double silverman_bandwidth(std::span<const double> samples);

KernelDensity fit_kde(std::span<const double> samples,
                      std::optional<double> bandwidth = std::nullopt);

/// Sample the density at bin centers, floor at kPdfFloor and renormalize.
DiscretePdf discretize(const DensityFn& density, double lo, double hi,
                       int n_bins = kDefaultScoreBins);

/// Build a pdf straight from (unnormalized) bin weights, applying the same
/// floor and normalization as discretize().
DiscretePdf pdf_from_weights(const Eigen::Ref<const Eigen::VectorXd>& weights,
                             double lo, double hi);

double eval_pdf(const DiscretePdf& pdf, double m);

ScoreLikelihood fit_part_likelihood(const ScoreSampleSet& set,
                                    int n_bins = kDefaultScoreBins);

/// Group (part_id, is_positive, score) rows by part and fit each part.
/// Parts are returned in ascending part_id order and must be 0..n dense.
std::vector<ScoreLikelihood> fit_likelihoods(std::span<const ScoreSampleSet> sets,
                                             int n_bins = kDefaultScoreBins);

}  // namespace adpm
