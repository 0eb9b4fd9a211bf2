#include "adpm/synth.hpp"

#include "adpm/error.hpp"
#include "adpm/random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <thread>

namespace adpm::synth {

void SyntheticSpec::validate() const {
    if (n_parts < 1 || n_parts > kMaxParts)
        throw Error(ErrorKind::InvalidInput, "synthetic spec: n_parts must be in 1..24");
    if (!(separation >= 0.0) || !std::isfinite(separation))
        throw Error(ErrorKind::InvalidInput, "synthetic spec: separation must be >= 0");
    if (!informativeness_profile.empty() &&
        static_cast<int>(informativeness_profile.size()) != n_parts)
        throw Error(ErrorKind::InvalidInput,
                    "synthetic spec: informativeness_profile needs one entry per part");
    for (double m : informativeness_profile)
        if (!(m >= 0.0) || !std::isfinite(m))
            throw Error(ErrorKind::InvalidInput, "synthetic spec: multipliers must be >= 0");
    if (!(prior_positive >= 0.0 && prior_positive <= 1.0))
        throw Error(ErrorKind::InvalidInput, "synthetic spec: prior_positive must be in [0,1]");
    if (n_locations < 1) throw Error(ErrorKind::InvalidInput, "synthetic spec: n_locations >= 1");
    if (n_train_samples < 2)
        throw Error(ErrorKind::InvalidInput, "synthetic spec: n_train_samples >= 2");
    if (n_bins < 2) throw Error(ErrorKind::InvalidInput, "synthetic spec: n_bins >= 2");
}

std::vector<double> SyntheticSpec::multipliers() const {
    if (!informativeness_profile.empty()) return informativeness_profile;
    std::vector<double> m(static_cast<std::size_t>(n_parts));
    double r = 1.0;
    for (auto& v : m) {
        v = r;
        r *= 0.8;
    }
    const double mean = std::accumulate(m.begin(), m.end(), 0.0) / n_parts;
    for (auto& v : m) v /= mean;
    return m;
}

SyntheticDetector make_synthetic(const SyntheticSpec& spec, const CostParams& costs) {
    spec.validate();
    const auto mult = spec.multipliers();
    std::vector<double> half_gap(mult.size());
    for (std::size_t k = 0; k < mult.size(); ++k) half_gap[k] = spec.separation * mult[k] / 2.0;

    SyntheticDetector det;
    Rng train_rng(derive_seed(spec.seed, 0));
    for (int k = 0; k < spec.n_parts; ++k) {
        ScoreSampleSet set{k, {}, {}};
        set.positives.reserve(static_cast<std::size_t>(spec.n_train_samples));
        set.negatives.reserve(static_cast<std::size_t>(spec.n_train_samples));
        for (int i = 0; i < spec.n_train_samples; ++i)
            set.positives.push_back(train_rng.normal(half_gap[k], 1.0));
        for (int i = 0; i < spec.n_train_samples; ++i)
            set.negatives.push_back(train_rng.normal(-half_gap[k], 1.0));
        det.training_samples.push_back(std::move(set));
    }
    det.model.n_parts = spec.n_parts;
    det.model.bias = spec.bias;
    det.model.costs = costs;
    det.model.likelihoods = fit_likelihoods(det.training_samples, spec.n_bins);

    Rng test_rng(derive_seed(spec.seed, 1));
    Eigen::MatrixXd scores(spec.n_locations, spec.n_parts);
    det.truth.resize(static_cast<std::size_t>(spec.n_locations));
    for (int x = 0; x < spec.n_locations; ++x) {
        const bool pos = test_rng.bernoulli(spec.prior_positive);
        det.truth[static_cast<std::size_t>(x)] = pos ? Label::Pos : Label::Neg;
        for (int k = 0; k < spec.n_parts; ++k)
            scores(x, k) = test_rng.normal(pos ? half_gap[k] : -half_gap[k], 1.0);
    }
    det.responses = MatrixResponses(std::move(scores));
    return det;
}

double compute_rnpe(const InferenceStats& stats, int n_parts, std::int64_t n_locations) {
    if (stats.part_evaluations == 0)
        throw Error(ErrorKind::UndefinedRatio, "RNPE undefined: no non-root part evaluations");
    return static_cast<double>(n_parts - 1) * static_cast<double>(n_locations) /
           static_cast<double>(stats.part_evaluations);
}

PrCurve precision_recall(std::span<const double> scores, std::span<const Label> truth) {
    if (scores.size() != truth.size())
        throw Error(ErrorKind::InvalidInput, "precision_recall: scores and truth differ in size");
    const auto n_pos = std::count(truth.begin(), truth.end(), Label::Pos);
    if (n_pos == 0) throw Error(ErrorKind::UndefinedAp, "precision_recall: no positives in truth");

    std::vector<std::size_t> order;
    for (std::size_t i = 0; i < scores.size(); ++i)
        if (std::isfinite(scores[i])) order.push_back(i);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    PrCurve curve;
    std::int64_t tp = 0, fp = 0;
    for (std::size_t i = 0; i < order.size();) {
        const double thr = scores[order[i]];
        for (; i < order.size() && scores[order[i]] == thr; ++i)
            (truth[order[i]] == Label::Pos ? tp : fp) += 1;
        curve.points.push_back({thr, static_cast<double>(tp) / static_cast<double>(tp + fp),
                                static_cast<double>(tp) / static_cast<double>(n_pos)});
    }

    double envelope = 0.0;
    std::vector<double> interp(curve.points.size());
    for (std::size_t i = curve.points.size(); i-- > 0;) {
        envelope = std::max(envelope, curve.points[i].precision);
        interp[i] = envelope;
    }
    double prev_recall = 0.0;
    for (std::size_t i = 0; i < curve.points.size(); ++i) {
        curve.average_precision += (curve.points[i].recall - prev_recall) * interp[i];
        prev_recall = curve.points[i].recall;
    }
    return curve;
}

PrCurve precision_recall(std::span<const DetectionResult> results, std::span<const Label> truth) {
    std::vector<double> scores(results.size());
    for (std::size_t i = 0; i < results.size(); ++i) scores[i] = results[i].score;
    return precision_recall(scores, truth);
}

Evaluation evaluate(const DetectorModel& model, const Policy& policy,
                    const ResponseProvider& provider, std::span<const Label> truth,
                    unsigned threads) {
    if (static_cast<int>(truth.size()) != provider.n_locations())
        throw Error(ErrorKind::InvalidInput, "evaluate: truth size differs from location count");
    auto grid = run_grid(model, policy, provider, threads);

    Evaluation ev;
    ev.stats = grid.stats;
    for (std::size_t x = 0; x < truth.size(); ++x) {
        const bool y = truth[x] == Label::Pos;
        const bool yhat = grid.results[x].label == Label::Pos;
        ev.n_truth_pos += y;
        ev.n_truth_neg += !y;
        ev.false_positives += !y && yhat;
        ev.false_negatives += y && !yhat;
    }
    const auto n = static_cast<double>(truth.size());
    ev.fp_rate = ev.n_truth_neg ? static_cast<double>(ev.false_positives) /
                                      static_cast<double>(ev.n_truth_neg)
                                : 0.0;
    ev.fn_rate = ev.n_truth_pos ? static_cast<double>(ev.false_negatives) /
                                      static_cast<double>(ev.n_truth_pos)
                                : 0.0;
    ev.error_rate = n > 0 ? static_cast<double>(ev.false_positives + ev.false_negatives) / n : 0.0;
    ev.mean_tau = grid.stats.mean_tau();
    try {
        ev.rnpe = compute_rnpe(grid.stats, model.n_parts, grid.stats.n_locations);
    } catch (const Error&) {
        ev.rnpe = std::numeric_limits<double>::infinity();
    }
    ev.ap = ev.n_truth_pos ? precision_recall(grid.results, truth).average_precision
                           : std::numeric_limits<double>::quiet_NaN();
    return ev;
}

double full_evaluation_ap(const DetectorModel& model, const ResponseProvider& provider,
                          std::span<const Label> truth) {
    std::vector<double> scores(static_cast<std::size_t>(provider.n_locations()));
    for (int x = 0; x < provider.n_locations(); ++x)
        scores[static_cast<std::size_t>(x)] = full_score(model, provider, x);
    return precision_recall(scores, truth).average_precision;
}

namespace {

std::vector<MonotonicityCheck> diagonal_checks(const std::vector<SweepRow>& rows) {
    std::vector<const SweepRow*> diag;
    for (const auto& r : rows)
        if (r.lambda_fp == r.lambda_fn && r.error.empty()) diag.push_back(&r);
    std::sort(diag.begin(), diag.end(),
              [](const SweepRow* a, const SweepRow* b) { return a->lambda_fp < b->lambda_fp; });

    std::vector<MonotonicityCheck> out;
    for (std::size_t i = 1; i < diag.size(); ++i) {
        const auto& lo = diag[i - 1]->eval;
        const auto& hi = diag[i]->eval;
        const double n = static_cast<double>(lo.stats.n_locations);
        const double se = std::sqrt((lo.error_rate * (1 - lo.error_rate) +
                                     hi.error_rate * (1 - hi.error_rate)) / n);
        out.push_back({diag[i - 1]->lambda_fp, diag[i]->lambda_fp, "error_rate",
                       hi.error_rate <= lo.error_rate + 2.0 * se});
        out.push_back({diag[i - 1]->lambda_fp, diag[i]->lambda_fp, "rnpe", hi.rnpe <= lo.rnpe});
    }
    return out;
}

}  // namespace

SweepResult lambda_sweep(const SyntheticDetector& det,
                         std::span<const std::pair<double, double>> lambda_grid,
                         const SweepOptions& opts) {
    if (lambda_grid.empty()) throw Error(ErrorKind::InvalidInput, "lambda_sweep: empty grid");
    std::set<std::pair<double, double>> seen;
    for (const auto& g : lambda_grid)
        if (!seen.insert(g).second)
            throw Error(ErrorKind::InvalidInput, "lambda_sweep: duplicate grid point");

    const BeliefGrid grid(opts.belief_bins);
    SweepResult out;
    out.rows.resize(lambda_grid.size());

    auto run_row = [&](std::size_t i) {
        auto& row = out.rows[i];
        row.lambda_fp = lambda_grid[i].first;
        row.lambda_fn = lambda_grid[i].second;
        try {
            DetectorModel model = det.model;
            model.costs = {row.lambda_fp, row.lambda_fn};
            const auto policy = train_policy(model.likelihoods, model.costs, grid);
            row.eval = evaluate(model, policy, det.responses, det.truth);
        } catch (const std::exception& e) {
            row.error = e.what();
        }
    };

    const unsigned threads =
        std::max(1u, std::min<unsigned>(opts.threads, static_cast<unsigned>(lambda_grid.size())));
    if (threads == 1) {
        for (std::size_t i = 0; i < lambda_grid.size(); ++i) run_row(i);
    } else {
        std::vector<std::jthread> pool;
        for (unsigned w = 0; w < threads; ++w)
            pool.emplace_back([&, w] {
                for (std::size_t i = w; i < lambda_grid.size(); i += threads) run_row(i);
            });
    }
    out.diagonal_checks = diagonal_checks(out.rows);
    return out;
}

SweepResult lambda_sweep(const SyntheticSpec& spec,
                         std::span<const std::pair<double, double>> lambda_grid,
                         const SweepOptions& opts) {
    return lambda_sweep(make_synthetic(spec), lambda_grid, opts);
}

}  // namespace adpm::synth
