#include "adpm/io.hpp"

#include "adpm/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

namespace adpm::io {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& msg) { throw Error(ErrorKind::Format, msg); }

std::vector<std::string> split(const std::string& line, char sep = ',') {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == sep) {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

double parse_double(const std::string& s, std::size_t line_no) {
    double v = 0.0;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    if (!s.empty() && s.front() == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last || s.empty())
        fail("line " + std::to_string(line_no) + ": bad number '" + s + "'");
    return v;
}

long long parse_int(const std::string& s, std::size_t line_no) {
    long long v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
        fail("line " + std::to_string(line_no) + ": bad integer '" + s + "'");
    return v;
}

bool getline_nonempty(std::istream& in, std::string& line, std::size_t& line_no) {
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) return true;
    }
    return false;
}

void expect_header(std::istream& in, const std::string& header, std::size_t& line_no) {
    std::string line;
    if (!getline_nonempty(in, line, line_no)) fail("missing header '" + header + "'");
    if (line != header) fail("expected header '" + header + "', got '" + line + "'");
}

void write_le_double(std::ostream& out, double v) {
    auto bits = std::bit_cast<std::uint64_t>(v);
    char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((bits >> (8 * i)) & 0xffu);
    out.write(buf, 8);
}

double read_le_double(std::istream& in) {
    unsigned char buf[8];
    if (!in.read(reinterpret_cast<char*>(buf), 8)) fail("truncated binary section");
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    return std::bit_cast<double>(bits);
}

json pdf_bins_json(const DiscretePdf& pdf) {
    json arr = json::array();
    for (Eigen::Index i = 0; i < pdf.bins.size(); ++i) arr.push_back(pdf.bins[i]);
    return arr;
}

const char* rule_name(BeliefRule r) {
    return r == BeliefRule::Literal ? "literal" : "normalized";
}

std::ifstream open_in(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) fail("cannot open " + p.string());
    return in;
}

}  // namespace

std::string format_double(double v) {
    if (std::isinf(v)) return v < 0 ? "-inf" : "inf";
    if (std::isnan(v)) return "nan";
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

std::vector<ScoreSampleSet> read_samples_csv(std::istream& in) {
    std::size_t line_no = 0;
    expect_header(in, "part_id,label,score", line_no);
    std::map<int, ScoreSampleSet> parts;
    std::string line;
    while (getline_nonempty(in, line, line_no)) {
        const auto f = split(line);
        if (f.size() != 3) fail("line " + std::to_string(line_no) + ": expected 3 fields");
        const auto id = parse_int(f[0], line_no);
        if (id < 0 || id >= kMaxParts * 1000)
            fail("line " + std::to_string(line_no) + ": bad part_id");
        const double score = parse_double(f[2], line_no);
        if (!std::isfinite(score)) fail("line " + std::to_string(line_no) + ": non-finite score");
        auto& set = parts[static_cast<int>(id)];
        set.part_id = static_cast<int>(id);
        if (f[1] == "pos")
            set.positives.push_back(score);
        else if (f[1] == "neg")
            set.negatives.push_back(score);
        else
            fail("line " + std::to_string(line_no) + ": label must be pos or neg");
    }
    std::vector<ScoreSampleSet> out;
    for (auto& [id, set] : parts) out.push_back(std::move(set));
    return out;
}

void write_samples_csv(std::ostream& out, std::span<const ScoreSampleSet> sets) {
    out << "part_id,label,score\n";
    for (const auto& s : sets) {
        for (double x : s.positives) out << s.part_id << ",pos," << format_double(x) << '\n';
        for (double x : s.negatives) out << s.part_id << ",neg," << format_double(x) << '\n';
    }
}

std::vector<ScoreLikelihood> read_likelihoods_json(std::istream& in) {
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        fail(std::string("likelihood file: ") + e.what());
    }
    if (!doc.is_array()) fail("likelihood file: expected a JSON array");
    std::vector<ScoreLikelihood> out;
    try {
        for (const auto& item : doc) {
            ScoreLikelihood lik;
            lik.part_id = item.at("part_id").get<int>();
            const double lo = item.at("lo").get<double>();
            const double hi = item.at("hi").get<double>();
            const auto pos = item.at("pos").get<std::vector<double>>();
            const auto neg = item.at("neg").get<std::vector<double>>();
            if (!(hi > lo)) fail("likelihood part " + std::to_string(lik.part_id) + ": hi <= lo");
            if (pos.size() != neg.size() || pos.size() < 2)
                fail("likelihood part " + std::to_string(lik.part_id) + ": bad bin arrays");
            auto to_pdf = [&](const std::vector<double>& bins) {
                DiscretePdf pdf{lo, hi, Eigen::Map<const Eigen::VectorXd>(
                                            bins.data(), static_cast<Eigen::Index>(bins.size()))};
                if ((pdf.bins.array() <= 0.0).any() || !pdf.bins.allFinite())
                    fail("likelihood part " + std::to_string(lik.part_id) +
                         ": bins must be positive");
                if (std::abs(pdf.bins.sum() * pdf.bin_width() - 1.0) > 1e-6)
                    fail("likelihood part " + std::to_string(lik.part_id) + ": not normalized");
                return pdf;
            };
            lik.pos = to_pdf(pos);
            lik.neg = to_pdf(neg);
            out.push_back(std::move(lik));
        }
    } catch (const json::exception& e) {
        fail(std::string("likelihood file: ") + e.what());
    }
    for (std::size_t k = 0; k < out.size(); ++k)
        if (out[k].part_id != static_cast<int>(k))
            fail("likelihood file: parts must be listed in order 0..n");
    return out;
}

void write_likelihoods_json(std::ostream& out, std::span<const ScoreLikelihood> liks) {
    json doc = json::array();
    for (const auto& l : liks) {
        json item;
        item["part_id"] = l.part_id;
        item["lo"] = l.pos.lo;
        item["hi"] = l.pos.hi;
        item["pos"] = pdf_bins_json(l.pos);
        item["neg"] = pdf_bins_json(l.neg);
        doc.push_back(std::move(item));
    }
    out << doc.dump() << '\n';
}

void write_policy(std::ostream& out, const Policy& policy) {
    json header;
    header["n_parts"] = policy.n_parts;
    header["d"] = policy.grid.size();
    header["lambda_fp"] = policy.costs.lambda_fp;
    header["lambda_fn"] = policy.costs.lambda_fn;
    header["belief_rule"] = rule_name(policy.rule);
    out << header.dump() << '\n';
    out.write(reinterpret_cast<const char*>(policy.actions.data()),
              static_cast<std::streamsize>(policy.actions.size()));
    for (Eigen::Index i = 0; i < policy.values.size(); ++i)
        write_le_double(out, policy.values.data()[i]);
}

Policy read_policy(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) fail("policy file: missing header");
    Policy policy;
    try {
        const auto header = json::parse(line);
        policy.n_parts = header.at("n_parts").get<int>();
        policy.grid = BeliefGrid(header.at("d").get<int>());
        policy.costs = {header.at("lambda_fp").get<double>(), header.at("lambda_fn").get<double>()};
        const auto rule = header.value("belief_rule", std::string("normalized"));
        if (rule == "literal")
            policy.rule = BeliefRule::Literal;
        else if (rule != "normalized")
            fail("policy file: unknown belief_rule '" + rule + "'");
    } catch (const json::exception& e) {
        fail(std::string("policy file header: ") + e.what());
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::Format) throw;
        fail(std::string("policy file header: ") + e.what());
    }
    if (policy.n_parts < 1 || policy.n_parts > kMaxParts) fail("policy file: bad n_parts");

    const auto rows = static_cast<Eigen::Index>(policy.n_masks());
    const Eigen::Index d = policy.grid.size();
    policy.actions.resize(rows, d);
    if (!in.read(reinterpret_cast<char*>(policy.actions.data()),
                 static_cast<std::streamsize>(policy.actions.size())))
        fail("policy file: truncated action table");
    if ((policy.actions.array() >= static_cast<std::uint8_t>(2 + policy.n_parts)).any())
        fail("policy file: action code out of range");
    policy.values.resize(rows, d);
    for (Eigen::Index i = 0; i < policy.values.size(); ++i)
        policy.values.data()[i] = read_le_double(in);
    if (in.peek() != std::char_traits<char>::eof()) fail("policy file: trailing bytes");
    return policy;
}

MatrixResponses read_responses_csv(std::istream& in) {
    std::size_t line_no = 0;
    expect_header(in, "location_id,part_id,score", line_no);
    std::vector<std::tuple<long long, long long, double>> rows;
    long long max_loc = -1, max_part = -1;
    std::string line;
    while (getline_nonempty(in, line, line_no)) {
        const auto f = split(line);
        if (f.size() != 3) fail("line " + std::to_string(line_no) + ": expected 3 fields");
        const auto loc = parse_int(f[0], line_no);
        const auto part = parse_int(f[1], line_no);
        if (loc < 0 || part < 0 || part >= kMaxParts)
            fail("line " + std::to_string(line_no) + ": id out of range");
        rows.emplace_back(loc, part, parse_double(f[2], line_no));
        max_loc = std::max(max_loc, loc);
        max_part = std::max(max_part, part);
    }
    const auto n_loc = static_cast<Eigen::Index>(max_loc + 1);
    const auto n_part = static_cast<Eigen::Index>(max_part + 1);
    if (static_cast<Eigen::Index>(rows.size()) != n_loc * n_part)
        fail("responses file: expected a dense location x part table");
    Eigen::MatrixXd m(n_loc, n_part);
    Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> seen =
        Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(n_loc, n_part, false);
    for (const auto& [loc, part, v] : rows) {
        if (seen(loc, part))
            fail("responses file: duplicate entry for location " + std::to_string(loc) +
                 ", part " + std::to_string(part));
        seen(loc, part) = true;
        m(loc, part) = v;
    }
    return MatrixResponses(std::move(m));
}

void write_responses_csv(std::ostream& out, const MatrixResponses& responses) {
    out << "location_id,part_id,score\n";
    const auto& m = responses.scores();
    for (Eigen::Index x = 0; x < m.rows(); ++x)
        for (Eigen::Index k = 0; k < m.cols(); ++k)
            out << x << ',' << k << ',' << format_double(m(x, k)) << '\n';
}

MatrixResponses read_responses_bin(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) fail("binary responses: missing header");
    const auto f = split(line);
    if (f.size() != 2) fail("binary responses: header must be 'n_locations,n_parts'");
    const auto n_loc = parse_int(f[0], 1);
    const auto n_part = parse_int(f[1], 1);
    if (n_loc < 0 || n_part < 0 || n_part > kMaxParts) fail("binary responses: bad dimensions");
    Eigen::MatrixXd m(n_loc, n_part);
    for (Eigen::Index x = 0; x < m.rows(); ++x)
        for (Eigen::Index k = 0; k < m.cols(); ++k) m(x, k) = read_le_double(in);
    if (in.peek() != std::char_traits<char>::eof()) fail("binary responses: trailing bytes");
    return MatrixResponses(std::move(m));
}

void write_responses_bin(std::ostream& out, const MatrixResponses& responses) {
    const auto& m = responses.scores();
    out << m.rows() << ',' << m.cols() << '\n';
    for (Eigen::Index x = 0; x < m.rows(); ++x)
        for (Eigen::Index k = 0; k < m.cols(); ++k) write_le_double(out, m(x, k));
}

void write_results_csv(std::ostream& out, std::span<const DetectionResult> results) {
    out << "location_id,label,score,tau,parts_order\n";
    for (const auto& r : results) {
        out << r.location_id << ',' << (r.label == Label::Pos ? "pos" : "neg") << ','
            << format_double(r.score) << ',' << r.tau << ',';
        for (std::size_t i = 0; i < r.parts_evaluated.size(); ++i)
            out << (i ? ";" : "") << r.parts_evaluated[i];
        out << '\n';
    }
}

synth::SyntheticSpec read_synthetic_spec(std::istream& in) {
    synth::SyntheticSpec spec;
    try {
        json doc;
        in >> doc;
        if (!doc.is_object()) fail("synthetic spec: expected a JSON object");
        spec.n_parts = doc.value("n_parts", spec.n_parts);
        spec.separation = doc.value("separation", spec.separation);
        spec.informativeness_profile =
            doc.value("informativeness_profile", spec.informativeness_profile);
        spec.prior_positive = doc.value("prior_positive", spec.prior_positive);
        spec.n_locations = doc.value("n_locations", spec.n_locations);
        spec.seed = doc.value("seed", spec.seed);
        spec.n_train_samples = doc.value("n_train_samples", spec.n_train_samples);
        spec.bias = doc.value("bias", spec.bias);
        spec.n_bins = doc.value("n_bins", spec.n_bins);
    } catch (const json::exception& e) {
        fail(std::string("synthetic spec: ") + e.what());
    }
    try {
        spec.validate();
    } catch (const Error& e) {
        fail(e.what());
    }
    return spec;
}

void write_synthetic_spec(std::ostream& out, const synth::SyntheticSpec& spec) {
    json doc;
    doc["n_parts"] = spec.n_parts;
    doc["separation"] = spec.separation;
    doc["informativeness_profile"] = spec.informativeness_profile;
    doc["prior_positive"] = spec.prior_positive;
    doc["n_locations"] = spec.n_locations;
    doc["seed"] = spec.seed;
    doc["n_train_samples"] = spec.n_train_samples;
    doc["bias"] = spec.bias;
    doc["n_bins"] = spec.n_bins;
    out << doc.dump(2) << '\n';
}

void write_sweep_csv(std::ostream& out, const synth::SweepResult& sweep) {
    out << "lambda_fp,lambda_fn,ap,rnpe,mean_tau,fp_rate,fn_rate\n";
    for (const auto& r : sweep.rows) {
        out << format_double(r.lambda_fp) << ',' << format_double(r.lambda_fn) << ',';
        if (!r.error.empty()) {
            out << "nan,nan,nan,nan,nan\n";
            continue;
        }
        out << format_double(r.eval.ap) << ',' << format_double(r.eval.rnpe) << ','
            << format_double(r.eval.mean_tau) << ',' << format_double(r.eval.fp_rate) << ','
            << format_double(r.eval.fn_rate) << '\n';
    }
}

std::string certification_report_json(std::span<const oracle::CertificationRecord> records,
                                      double tolerance) {
    json doc;
    json items = json::array();
    double max_diff = 0.0;
    for (const auto& r : records) {
        items.push_back({{"seed", r.seed},
                         {"optimal_value", r.optimal_value},
                         {"dp_value", r.dp_value},
                         {"abs_diff", r.abs_diff},
                         {"trials", r.trials},
                         {"mean_cost", r.mean_cost},
                         {"std_error", r.std_error}});
        max_diff = std::max(max_diff, r.abs_diff);
    }
    doc["instances"] = std::move(items);
    doc["max_abs_diff"] = max_diff;
    doc["tolerance"] = tolerance;
    doc["passed"] = max_diff <= tolerance;
    return doc.dump(2);
}

std::vector<ScoreLikelihood> load_likelihoods(const std::filesystem::path& p) {
    auto in = open_in(p);
    return read_likelihoods_json(in);
}

Policy load_policy(const std::filesystem::path& p) {
    auto in = open_in(p);
    return read_policy(in);
}

MatrixResponses load_responses(const std::filesystem::path& p) {
    auto in = open_in(p);
    return p.extension() == ".bin" ? read_responses_bin(in) : read_responses_csv(in);
}

}  // namespace adpm::io
