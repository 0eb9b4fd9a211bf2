#include "cli.hpp"

#include "adpm/error.hpp"
#include "adpm/inference.hpp"
#include "adpm/io.hpp"
#include "adpm/likelihoods.hpp"
#include "adpm/oracle.hpp"
#include "adpm/policy.hpp"
#include "adpm/synth.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <bitset>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <thread>

namespace adpm::cli {

namespace {

struct Failure {
    int code;
    std::string message;
};

[[noreturn]] void die(int code, const std::string& msg) { throw Failure{code, msg}; }

int exit_code_for(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::Capacity: return kCapacity;
        case ErrorKind::Format:
        case ErrorKind::InsufficientData:
        case ErrorKind::Provider: return kInputFormat;
        case ErrorKind::ArityMismatch: return kArityMismatch;
        default: return kInvalidParameter;
    }
}

std::ofstream open_out(const std::string& path) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) die(kInvalidParameter, "cannot write " + path);
    return f;
}

std::ifstream open_in(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) die(kInputFormat, "cannot open " + path);
    return f;
}

std::string action_name(Action a) {
    if (a.is_neg()) return "neg";
    if (a.is_pos()) return "pos";
    return "part " + std::to_string(a.part_index());
}

unsigned default_threads() { return std::max(1u, std::thread::hardware_concurrency()); }

// "fp:fn,fp:fn,..."
std::vector<std::pair<double, double>> parse_grid(const std::string& text) {
    std::vector<std::pair<double, double>> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto colon = item.find(':');
        if (colon == std::string::npos) die(kInvalidParameter, "grid entry '" + item + "' is not fp:fn");
        try {
            out.emplace_back(std::stod(item.substr(0, colon)), std::stod(item.substr(colon + 1)));
        } catch (const std::exception&) {
            die(kInvalidParameter, "grid entry '" + item + "' is not numeric");
        }
    }
    return out;
}

// --------------------------------------------------------------------------

struct FitArgs {
    std::string samples, out;
    int bins = kDefaultScoreBins;
};

int cmd_fit(const FitArgs& a, std::ostream& out) {
    auto in = open_in(a.samples);
    const auto sets = io::read_samples_csv(in);
    if (sets.empty()) die(kInputFormat, "no samples in " + a.samples);
    for (const auto& s : sets) {
        if (s.positives.empty() || s.negatives.empty())
            die(kInputFormat, "part " + std::to_string(s.part_id) + " is missing " +
                                  (s.positives.empty() ? "positive" : "negative") + " samples");
    }
    std::vector<ScoreLikelihood> liks;
    try {
        liks = fit_likelihoods(sets, a.bins);
    } catch (const Error& e) {
        die(kInputFormat, e.what());
    }
    auto f = open_out(a.out);
    io::write_likelihoods_json(f, liks);
    out << "fitted " << liks.size() << " parts, " << a.bins << " bins\n";
    for (std::size_t k = 0; k < liks.size(); ++k)
        out << "part " << k << ": pos " << sets[k].positives.size() << ", neg "
            << sets[k].negatives.size() << ", support [" << io::format_double(liks[k].pos.lo)
            << ", " << io::format_double(liks[k].pos.hi) << "]\n";
    return kOk;
}

struct TrainArgs {
    std::string likelihoods, out, rule = "normalized";
    double lambda_fp = 0.0, lambda_fn = 0.0;
    int d = kDefaultBeliefBins;
    unsigned threads = default_threads();
};

int cmd_train(const TrainArgs& a, std::ostream& out) {
    const CostParams costs{a.lambda_fp, a.lambda_fn};
    costs.validate();
    const auto liks = io::load_likelihoods(a.likelihoods);
    if (liks.empty()) die(kInputFormat, "likelihood file lists no parts");
    TrainOptions opts;
    opts.threads = a.threads;
    opts.rule = a.rule == "literal" ? BeliefRule::Literal : BeliefRule::Normalized;
    const auto policy = train_policy(liks, costs, BeliefGrid(a.d), opts);
    auto f = open_out(a.out);
    io::write_policy(f, policy);
    out << "parts " << policy.n_parts << ", masks " << policy.n_masks() << ", belief bins "
        << policy.grid.size() << ", table entries " << policy.actions.size() << '\n';
    out << "V(empty, 0.5) = " << io::format_double(policy.value({}, 0.5)) << '\n';
    return kOk;
}

struct InferArgs {
    std::string policy, likelihoods, responses, out;
    double bias = 0.0;
    unsigned threads = default_threads();
};

int cmd_infer(const InferArgs& a, std::ostream& out) {
    const auto policy = io::load_policy(a.policy);
    const auto liks = io::load_likelihoods(a.likelihoods);
    const auto responses = io::load_responses(a.responses);

    DetectorModel model{static_cast<int>(liks.size()), a.bias, liks, policy.costs};
    if (policy.n_parts != model.n_parts)
        die(kArityMismatch, "policy has " + std::to_string(policy.n_parts) +
                                " parts, likelihoods have " + std::to_string(model.n_parts));

    GridResult grid;
    if (responses.n_locations() > 0) {
        if (responses.n_parts() != model.n_parts)
            die(kArityMismatch, "responses have " + std::to_string(responses.n_parts()) +
                                    " parts, model has " + std::to_string(model.n_parts));
        grid = run_grid(model, policy, responses, a.threads);
    }
    auto f = open_out(a.out);
    io::write_results_csv(f, grid.results);

    std::string rnpe = "inf";
    if (grid.stats.part_evaluations > 0)
        rnpe = io::format_double(
            synth::compute_rnpe(grid.stats, model.n_parts, grid.stats.n_locations));
    out << "locations " << grid.stats.n_locations << " positives " << grid.stats.positives
        << " R_ADPM " << grid.stats.part_evaluations << " R_DPM "
        << static_cast<std::int64_t>(model.n_parts - 1) * grid.stats.n_locations << " RNPE "
        << rnpe << " mean_tau " << io::format_double(grid.stats.mean_tau()) << '\n';
    return kOk;
}

struct SimulateArgs {
    std::string policy, likelihoods, out, mode = "fixed-label";
    double prior = 0.5;
    std::int64_t trials = 100000;
    std::uint64_t seed = 1;
};

int cmd_simulate(const SimulateArgs& a, std::ostream& out) {
    const auto policy = io::load_policy(a.policy);
    const auto liks = io::load_likelihoods(a.likelihoods);
    if (!(a.prior >= 0.0 && a.prior <= 1.0)) die(kInvalidParameter, "--prior must be in [0,1]");
    const auto mode = a.mode == "belief-chain" ? oracle::SimulationMode::BeliefChain
                                               : oracle::SimulationMode::FixedLabel;
    const auto est =
        oracle::simulate_policy(policy, liks, a.prior, policy.costs, a.trials, a.seed, mode);
    nlohmann::json doc{{"mean_cost", est.mean_cost}, {"std_error", est.std_error},
                       {"mean_tau", est.mean_tau},   {"fp_rate", est.fp_rate},
                       {"fn_rate", est.fn_rate},     {"trials", est.n_trials},
                       {"dp_value", policy.value({}, policy.grid.center(policy.grid.nearest(a.prior)))}};
    if (a.out.empty()) {
        out << doc.dump(2) << '\n';
    } else {
        auto f = open_out(a.out);
        f << doc.dump(2) << '\n';
    }
    return kOk;
}

struct SweepArgs {
    std::string spec, grid, diagonal, out;
    int d = kDefaultBeliefBins;
    unsigned threads = default_threads();
};

int cmd_sweep(const SweepArgs& a, std::ostream& out) {
    auto in = open_in(a.spec);
    const auto spec = io::read_synthetic_spec(in);
    auto points = parse_grid(a.grid);
    if (!a.diagonal.empty()) {
        std::stringstream ss(a.diagonal);
        std::string item;
        while (std::getline(ss, item, ',')) {
            try {
                const double l = std::stod(item);
                points.emplace_back(l, l);
            } catch (const std::exception&) {
                die(kInvalidParameter, "bad --diagonal value '" + item + "'");
            }
        }
    }
    if (points.empty()) die(kInvalidParameter, "sweep needs --grid or --diagonal");

    const auto result = synth::lambda_sweep(spec, points, {a.d, a.threads});
    {
        auto f = open_out(a.out);
        io::write_sweep_csv(f, result);
    }
    nlohmann::json meta;
    {
        std::stringstream spec_json;
        io::write_synthetic_spec(spec_json, spec);
        meta["spec"] = nlohmann::json::parse(spec_json.str());
    }
    meta["seed"] = spec.seed;
    meta["belief_bins"] = a.d;
    meta["accuracy_metric"] = "location-level average precision";
    nlohmann::json checks = nlohmann::json::array();
    for (const auto& c : result.diagonal_checks)
        checks.push_back({{"lambda_lo", c.lambda_lo}, {"lambda_hi", c.lambda_hi},
                          {"metric", c.metric}, {"non_increasing", c.ok}});
    meta["diagonal_checks"] = std::move(checks);
    nlohmann::json errors = nlohmann::json::array();
    for (const auto& r : result.rows)
        if (!r.error.empty())
            errors.push_back({{"lambda_fp", r.lambda_fp}, {"lambda_fn", r.lambda_fn},
                              {"error", r.error}});
    meta["row_errors"] = std::move(errors);
    auto f = open_out(a.out + ".json");
    f << meta.dump(2) << '\n';
    out << "sweep rows " << result.rows.size() << " written to " << a.out << '\n';
    return kOk;
}

struct VerifyArgs {
    int seeds = 20;
    std::uint64_t seed_base = 1;
    std::int64_t trials = 10000;
    double perturb = 0.0;
    double tolerance = 1e-6;
    std::string out;
};

int cmd_verify(const VerifyArgs& a, std::ostream& out, std::ostream& err) {
    std::vector<oracle::CertificationRecord> records;
    for (int i = 0; i < a.seeds; ++i)
        records.push_back(oracle::certify(a.seed_base + static_cast<std::uint64_t>(i), a.trials,
                                          a.perturb));
    const auto report = io::certification_report_json(records, a.tolerance);
    if (a.out.empty()) {
        out << report << '\n';
    } else {
        auto f = open_out(a.out);
        f << report << '\n';
    }
    for (const auto& r : records) {
        if (r.abs_diff > a.tolerance) {
            err << "certification failed for seed " << r.seed << ": |diff| = "
                << io::format_double(r.abs_diff) << '\n';
            return kVerificationFailed;
        }
    }
    return kOk;
}

struct InspectArgs {
    std::string policy;
    int max_masks = 64;
};

int cmd_inspect(const InspectArgs& a, std::ostream& out) {
    const auto policy = io::load_policy(a.policy);
    out << "parts " << policy.n_parts << ", belief bins " << policy.grid.size()
        << ", lambda_fp " << io::format_double(policy.costs.lambda_fp) << ", lambda_fn "
        << io::format_double(policy.costs.lambda_fn) << '\n';
    out << "initial action at p=0.5: " << action_name(query_policy(policy, {}, 0.5))
        << ", V = " << io::format_double(policy.value({}, 0.5)) << '\n';
    const auto shown = std::min<std::size_t>(policy.n_masks(), static_cast<std::size_t>(a.max_masks));
    for (std::size_t s = 0; s < shown; ++s) {
        int neg = 0, pos = 0, part = 0;
        for (int i = 0; i < policy.grid.size(); ++i) {
            const auto act = policy.action({static_cast<std::uint32_t>(s)}, i);
            (act.is_neg() ? neg : act.is_pos() ? pos : part) += 1;
        }
        std::string bits;
        for (int k = 0; k < policy.n_parts; ++k) bits += ((s >> k) & 1u) ? '1' : '0';
        out << "mask " << bits << ": neg " << neg << " pos " << pos << " part " << part
            << ", at p=0.5 " << action_name(query_policy(policy, {static_cast<std::uint32_t>(s)}, 0.5))
            << '\n';
    }
    if (shown < policy.n_masks())
        out << "(" << policy.n_masks() - shown << " more masks not shown)\n";
    return kOk;
}

struct SynthArgs {
    std::string spec, samples_out, responses_out, truth_out;
};

int cmd_synth(const SynthArgs& a, std::ostream& out) {
    auto in = open_in(a.spec);
    const auto spec = io::read_synthetic_spec(in);
    const auto det = synth::make_synthetic(spec);
    if (!a.samples_out.empty()) {
        auto f = open_out(a.samples_out);
        io::write_samples_csv(f, det.training_samples);
    }
    if (!a.responses_out.empty()) {
        auto f = open_out(a.responses_out);
        if (a.responses_out.ends_with(".bin"))
            io::write_responses_bin(f, det.responses);
        else
            io::write_responses_csv(f, det.responses);
    }
    if (!a.truth_out.empty()) {
        auto f = open_out(a.truth_out);
        f << "location_id,label\n";
        for (std::size_t x = 0; x < det.truth.size(); ++x)
            f << x << ',' << (det.truth[x] == Label::Pos ? "pos" : "neg") << '\n';
    }
    out << "generated " << spec.n_locations << " locations, " << spec.n_parts << " parts\n";
    return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Active part-selection engine for additive part-based detectors", "adpm"};
    app.require_subcommand(1);

    FitArgs fit;
    auto* fit_cmd = app.add_subcommand("fit", "Fit score likelihoods from labeled samples");
    fit_cmd->add_option("--samples", fit.samples, "CSV part_id,label,score")->required();
    fit_cmd->add_option("--out", fit.out, "Likelihood JSON output")->required();
    fit_cmd->add_option("--bins", fit.bins, "Histogram bins")->check(CLI::Range(2, 100000));

    TrainArgs train;
    auto* train_cmd = app.add_subcommand("train-policy", "Compute the part-selection policy");
    train_cmd->add_option("--likelihoods", train.likelihoods)->required();
    train_cmd->add_option("--lambda-fp", train.lambda_fp, "False positive cost")->required();
    train_cmd->add_option("--lambda-fn", train.lambda_fn, "False negative cost")->required();
    train_cmd->add_option("--d", train.d, "Belief bins")->check(CLI::Range(2, 100000));
    train_cmd->add_option("--threads", train.threads)->check(CLI::Range(1u, 1024u));
    train_cmd->add_option("--belief-rule", train.rule)
        ->check(CLI::IsMember({"normalized", "literal"}));
    train_cmd->add_option("--out", train.out, "Policy file output")->required();

    InferArgs infer;
    auto* infer_cmd = app.add_subcommand("infer", "Run active inference over all locations");
    infer_cmd->add_option("--policy", infer.policy)->required();
    infer_cmd->add_option("--likelihoods", infer.likelihoods)->required();
    infer_cmd->add_option("--responses", infer.responses, "CSV or .bin responses")->required();
    infer_cmd->add_option("--bias", infer.bias, "Detector bias b");
    infer_cmd->add_option("--threads", infer.threads)->check(CLI::Range(1u, 1024u));
    infer_cmd->add_option("--out", infer.out, "Results CSV output")->required();

    SimulateArgs sim;
    auto* sim_cmd = app.add_subcommand("simulate", "Monte Carlo cost of a policy");
    sim_cmd->add_option("--policy", sim.policy)->required();
    sim_cmd->add_option("--likelihoods", sim.likelihoods)->required();
    sim_cmd->add_option("--prior", sim.prior);
    sim_cmd->add_option("--trials", sim.trials)->check(CLI::PositiveNumber);
    sim_cmd->add_option("--seed", sim.seed);
    sim_cmd->add_option("--mode", sim.mode)->check(CLI::IsMember({"fixed-label", "belief-chain"}));
    sim_cmd->add_option("--out", sim.out);

    SweepArgs sweep;
    auto* sweep_cmd = app.add_subcommand("sweep", "Sweep costs on a synthetic detector");
    sweep_cmd->add_option("--spec", sweep.spec, "Synthetic spec JSON")->required();
    sweep_cmd->add_option("--grid", sweep.grid, "fp:fn pairs, comma separated");
    sweep_cmd->add_option("--diagonal", sweep.diagonal, "lambda values with fp = fn");
    sweep_cmd->add_option("--d", sweep.d)->check(CLI::Range(2, 100000));
    sweep_cmd->add_option("--threads", sweep.threads)->check(CLI::Range(1u, 1024u));
    sweep_cmd->add_option("--out", sweep.out, "Sweep CSV output")->required();

    VerifyArgs verify;
    auto* verify_cmd = app.add_subcommand("verify", "Certify the DP against brute force");
    verify_cmd->add_option("--seeds", verify.seeds)->check(CLI::Range(1, 100000));
    verify_cmd->add_option("--seed-base", verify.seed_base);
    verify_cmd->add_option("--trials", verify.trials)->check(CLI::NonNegativeNumber);
    verify_cmd->add_option("--perturb-values", verify.perturb, "Test hook: offset DP values");
    verify_cmd->add_option("--out", verify.out);

    InspectArgs inspect;
    auto* inspect_cmd = app.add_subcommand("inspect", "Summarize a policy file");
    inspect_cmd->add_option("--policy", inspect.policy)->required();
    inspect_cmd->add_option("--max-masks", inspect.max_masks)->check(CLI::NonNegativeNumber);

    SynthArgs syn;
    auto* synth_cmd = app.add_subcommand("synth", "Generate synthetic samples and responses");
    synth_cmd->add_option("--spec", syn.spec)->required();
    synth_cmd->add_option("--samples-out", syn.samples_out);
    synth_cmd->add_option("--responses-out", syn.responses_out);
    synth_cmd->add_option("--truth-out", syn.truth_out);

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << e.what() << '\n';
        return kInvalidParameter;
    }

    try {
        if (*fit_cmd) return cmd_fit(fit, out);
        if (*train_cmd) return cmd_train(train, out);
        if (*infer_cmd) return cmd_infer(infer, out);
        if (*sim_cmd) return cmd_simulate(sim, out);
        if (*sweep_cmd) return cmd_sweep(sweep, out);
        if (*verify_cmd) return cmd_verify(verify, out, err);
        if (*inspect_cmd) return cmd_inspect(inspect, out);
        if (*synth_cmd) return cmd_synth(syn, out);
    } catch (const Failure& f) {
        err << "error: " << f.message << '\n';
        return f.code;
    } catch (const Error& e) {
        err << "error (" << to_string(e.kind()) << "): " << e.what() << '\n';
        return exit_code_for(e.kind());
    }
    return kInvalidParameter;
}

}  // namespace adpm::cli
