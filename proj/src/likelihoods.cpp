#include "adpm/likelihoods.hpp"

#include "adpm/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

namespace adpm {

namespace {

double sample_stddev(std::span<const double> xs) {
    const double n = static_cast<double>(xs.size());
    const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    return std::sqrt(ss / (n - 1.0));
}

void check_samples(std::span<const double> samples, const char* what) {
    if (samples.size() < 2)
        throw Error(ErrorKind::InsufficientData,
                    std::string(what) + ": need at least 2 samples, got " +
                        std::to_string(samples.size()));
    for (double x : samples)
        if (!std::isfinite(x))
            throw Error(ErrorKind::InvalidInput, std::string(what) + ": non-finite sample");
}

}  // namespace

int DiscretePdf::bin_index(double m) const {
    const int last = size() - 1;
    const double pos = (m - lo) / bin_width();
    if (!(pos >= 0.0)) return 0;  // also catches NaN
    if (pos >= static_cast<double>(last)) return last;
    return static_cast<int>(std::floor(pos));
}

KernelDensity::KernelDensity(std::vector<double> samples, double bandwidth)
    : samples_(std::move(samples)), bandwidth_(bandwidth) {}

double KernelDensity::operator()(double x) const {
    const double inv_h = 1.0 / bandwidth_;
    double acc = 0.0;
    for (double s : samples_) {
        const double u = (x - s) * inv_h;
        acc += std::exp(-0.5 * u * u);
    }
    return acc * inv_h * std::numbers::inv_sqrtpi / std::numbers::sqrt2 /
           static_cast<double>(samples_.size());
}

double silverman_bandwidth(std::span<const double> samples) {
    check_samples(samples, "silverman_bandwidth");
    double sigma = sample_stddev(samples);
    // All samples identical: fall back to unit scale.
    if (sigma == 0.0) sigma = 1.0;
    return 1.06 * sigma * std::pow(static_cast<double>(samples.size()), -0.2);
}

KernelDensity fit_kde(std::span<const double> samples, std::optional<double> bandwidth) {
    check_samples(samples, "fit_kde");
    if (bandwidth && !(*bandwidth > 0.0 && std::isfinite(*bandwidth)))
        throw Error(ErrorKind::InvalidInput, "fit_kde: bandwidth must be positive and finite");
    const double h = bandwidth ? *bandwidth : silverman_bandwidth(samples);
    return KernelDensity(std::vector<double>(samples.begin(), samples.end()), h);
}

DiscretePdf pdf_from_weights(const Eigen::Ref<const Eigen::VectorXd>& weights, double lo,
                             double hi) {
    if (!(hi > lo) || !std::isfinite(lo) || !std::isfinite(hi))
        throw Error(ErrorKind::InvalidRange, "discretize: require finite hi > lo");
    const Eigen::Index n = weights.size();
    if (n < 1) throw Error(ErrorKind::InvalidRange, "discretize: need at least one bin");

    const double width = (hi - lo) / static_cast<double>(n);
    const double target = 1.0 / width;  // required sum of bin heights
    if (kPdfFloor * static_cast<double>(n) >= target)
        throw Error(ErrorKind::InvalidRange, "discretize: support too wide for the pdf floor");

    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        if (std::isnan(weights[i]))
            throw Error(ErrorKind::InvalidInput, "discretize: density returned NaN");
        v[i] = std::max(weights[i], 0.0);
    }

    DiscretePdf pdf{lo, hi, Eigen::VectorXd::Constant(n, target / static_cast<double>(n))};
    if (v.sum() <= 0.0 || !std::isfinite(v.sum())) return pdf;

    // Find c with sum_i max(floor, c * v_i) == target. The floored set only
    // grows as c shrinks, so this settles in at most n passes.
    std::vector<char> floored(static_cast<std::size_t>(n), 0);
    double c = target / v.sum();
    for (Eigen::Index pass = 0; pass <= n; ++pass) {
        bool changed = false;
        double free_mass = 0.0;
        Eigen::Index n_floored = 0;
        for (Eigen::Index i = 0; i < n; ++i) {
            auto& f = floored[static_cast<std::size_t>(i)];
            if (!f && c * v[i] < kPdfFloor) {
                f = true;
                changed = true;
            }
            if (f)
                ++n_floored;
            else
                free_mass += v[i];
        }
        c = (target - kPdfFloor * static_cast<double>(n_floored)) / free_mass;
        if (!changed) break;
    }
    for (Eigen::Index i = 0; i < n; ++i)
        pdf.bins[i] = floored[static_cast<std::size_t>(i)] ? kPdfFloor : c * v[i];
    return pdf;
}

DiscretePdf discretize(const DensityFn& density, double lo, double hi, int n_bins) {
    if (!(hi > lo)) throw Error(ErrorKind::InvalidRange, "discretize: require hi > lo");
    if (n_bins < 1) throw Error(ErrorKind::InvalidRange, "discretize: need at least one bin");
    const double width = (hi - lo) / n_bins;
    Eigen::VectorXd w(n_bins);
    for (int i = 0; i < n_bins; ++i) w[i] = density(lo + (i + 0.5) * width);
    return pdf_from_weights(w, lo, hi);
}

double eval_pdf(const DiscretePdf& pdf, double m) { return pdf.bins[pdf.bin_index(m)]; }

ScoreLikelihood fit_part_likelihood(const ScoreSampleSet& set, int n_bins) {
    const auto pos = fit_kde(set.positives);
    const auto neg = fit_kde(set.negatives);

    std::vector<double> pooled(set.positives);
    pooled.insert(pooled.end(), set.negatives.begin(), set.negatives.end());
    const auto [mn, mx] = std::minmax_element(pooled.begin(), pooled.end());
    double sigma = sample_stddev(pooled);
    if (sigma == 0.0) sigma = 1.0 / 3.0;
    const double lo = *mn - 3.0 * sigma;
    const double hi = *mx + 3.0 * sigma;

    return ScoreLikelihood{set.part_id, discretize(std::cref(pos), lo, hi, n_bins),
                           discretize(std::cref(neg), lo, hi, n_bins)};
}

std::vector<ScoreLikelihood> fit_likelihoods(std::span<const ScoreSampleSet> sets, int n_bins) {
    std::vector<const ScoreSampleSet*> by_id(sets.size(), nullptr);
    for (const auto& s : sets) {
        if (s.part_id < 0 || static_cast<std::size_t>(s.part_id) >= sets.size() ||
            by_id[static_cast<std::size_t>(s.part_id)] != nullptr)
            throw Error(ErrorKind::InvalidInput,
                        "part ids must be dense 0..n without duplicates (offending part " +
                            std::to_string(s.part_id) + ")");
        by_id[static_cast<std::size_t>(s.part_id)] = &s;
    }
    std::vector<ScoreLikelihood> out;
    out.reserve(sets.size());
    for (const auto* s : by_id) {
        try {
            out.push_back(fit_part_likelihood(*s, n_bins));
        } catch (const Error& e) {
            throw Error(e.kind(), "part " + std::to_string(s->part_id) + ": " + e.what());
        }
    }
    return out;
}

}  // namespace adpm
