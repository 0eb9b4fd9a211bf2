#include "adpm/error.hpp"
#include "adpm/io.hpp"
#include "adpm/random.hpp"
#include "test_helpers.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

using namespace adpm;
using adpm::testing::lik_from_weights;

namespace {

template <typename Read, typename Write>
void expect_byte_round_trip(const std::string& bytes, Read read, Write write) {
    std::istringstream in(bytes);
    const auto value = read(in);
    std::ostringstream out;
    write(out, value);
    EXPECT_EQ(out.str(), bytes);
}

std::vector<ScoreLikelihood> sample_likelihoods() {
    Rng rng(1);
    std::vector<ScoreSampleSet> sets;
    for (int k = 0; k < 3; ++k) {
        ScoreSampleSet s{k, {}, {}};
        for (int i = 0; i < 50; ++i) s.positives.push_back(rng.normal(1.0, 1.0));
        for (int i = 0; i < 50; ++i) s.negatives.push_back(rng.normal(-1.0, 1.0));
        sets.push_back(s);
    }
    return fit_likelihoods(sets);
}

}  // namespace

TEST(FormatDouble, ShortestRoundTrip) {
    EXPECT_EQ(io::format_double(-INFINITY), "-inf");
    EXPECT_EQ(io::format_double(0.1), "0.1");
    EXPECT_EQ(io::format_double(1.0), "1");
    const double x = 1.0 / 3.0;
    EXPECT_EQ(std::stod(io::format_double(x)), x);
}

TEST(SamplesCsv, ParsesAndRoundTrips) {
    const std::string text = "part_id,label,score\n0,pos,1.5\n0,neg,-2\n1,pos,0.25\n1,neg,3\n";
    std::istringstream in(text);
    const auto sets = io::read_samples_csv(in);
    ASSERT_EQ(sets.size(), 2u);
    EXPECT_EQ(sets[1].positives, std::vector<double>{0.25});
    std::ostringstream out;
    io::write_samples_csv(out, sets);
    EXPECT_EQ(out.str(), text);
}

TEST(SamplesCsv, RejectsMalformedInput) {
    for (const std::string bad : {"wrong,header\n", "part_id,label,score\n0,maybe,1\n",
                                  "part_id,label,score\n0,pos,abc\n",
                                  "part_id,label,score\n0,pos\n",
                                  "part_id,label,score\n0,pos,inf\n"}) {
        std::istringstream in(bad);
        try {
            io::read_samples_csv(in);
            ADD_FAILURE() << bad;
        } catch (const Error& e) {
            EXPECT_EQ(e.kind(), ErrorKind::Format);
        }
    }
}

TEST(LikelihoodJson, RoundTripsByteForByte) {
    const auto liks = sample_likelihoods();
    std::ostringstream out;
    io::write_likelihoods_json(out, liks);
    std::istringstream in(out.str());
    EXPECT_EQ(io::read_likelihoods_json(in), liks);
    expect_byte_round_trip(out.str(), io::read_likelihoods_json,
                           [](std::ostream& o, const auto& v) { io::write_likelihoods_json(o, v); });
}

TEST(LikelihoodJson, RejectsMalformedInput) {
    for (const std::string bad :
         {"{}", "[{\"part_id\":0}]", "not json",
          "[{\"part_id\":0,\"lo\":1,\"hi\":0,\"pos\":[1,1],\"neg\":[1,1]}]",
          "[{\"part_id\":0,\"lo\":0,\"hi\":1,\"pos\":[5,5],\"neg\":[1,1]}]",
          "[{\"part_id\":1,\"lo\":0,\"hi\":1,\"pos\":[1,1],\"neg\":[1,1]}]"}) {
        std::istringstream in(bad);
        try {
            io::read_likelihoods_json(in);
            ADD_FAILURE() << bad;
        } catch (const Error& e) {
            EXPECT_EQ(e.kind(), ErrorKind::Format);
        }
    }
}

TEST(PolicyFile, RoundTripsByteForByte) {
    const auto liks = sample_likelihoods();
    const auto policy = train_policy(liks, {20.0, 5.0}, BeliefGrid(31));
    std::ostringstream out;
    io::write_policy(out, policy);
    std::istringstream in(out.str());
    const auto back = io::read_policy(in);
    EXPECT_EQ(back.n_parts, policy.n_parts);
    EXPECT_EQ(back.costs, policy.costs);
    EXPECT_EQ(back.actions, policy.actions);
    EXPECT_EQ(back.values, policy.values);
    expect_byte_round_trip(out.str(), io::read_policy,
                           [](std::ostream& o, const Policy& p) { io::write_policy(o, p); });

    // Header is one JSON line; the binary tables follow.
    const auto header = out.str().substr(0, out.str().find('\n'));
    EXPECT_NE(header.find("\"n_parts\":3"), std::string::npos);
    EXPECT_EQ(out.str().size(), header.size() + 1 + 8 * 31 * 9);
}

TEST(PolicyFile, RejectsTruncatedAndCorrupt) {
    const std::vector<ScoreLikelihood> liks{lik_from_weights(0, {1, 2}, {2, 1})};
    const auto policy = train_policy(liks, {2.0, 2.0}, BeliefGrid(5));
    std::ostringstream out;
    io::write_policy(out, policy);
    const std::string bytes = out.str();

    std::istringstream truncated(bytes.substr(0, bytes.size() - 3));
    EXPECT_THROW(io::read_policy(truncated), Error);

    std::string corrupt = bytes;
    corrupt[bytes.find('\n') + 1] = 9;  // part 7 in a one-part policy
    std::istringstream bad(corrupt);
    EXPECT_THROW(io::read_policy(bad), Error);

    std::istringstream trailing(bytes + "x");
    EXPECT_THROW(io::read_policy(trailing), Error);
}

TEST(ResponsesFiles, CsvAndBinaryAgree) {
    Eigen::MatrixXd m(3, 2);
    m << 0.5, -1.25, 2.0, 1e-300, -7.0, 3.141592653589793;
    const MatrixResponses r(m);
    std::ostringstream csv, bin;
    io::write_responses_csv(csv, r);
    io::write_responses_bin(bin, r);
    std::istringstream csv_in(csv.str()), bin_in(bin.str());
    EXPECT_EQ(io::read_responses_csv(csv_in).scores(), m);
    EXPECT_EQ(io::read_responses_bin(bin_in).scores(), m);
    EXPECT_EQ(bin.str().substr(0, 4), "3,2\n");
    expect_byte_round_trip(csv.str(), io::read_responses_csv,
                           [](std::ostream& o, const MatrixResponses& v) { io::write_responses_csv(o, v); });
}

TEST(ResponsesFiles, RejectSparseOrDuplicate) {
    std::istringstream sparse("location_id,part_id,score\n0,0,1\n1,1,2\n");
    EXPECT_THROW(io::read_responses_csv(sparse), Error);
    std::istringstream dup("location_id,part_id,score\n0,0,1\n0,0,2\n");
    EXPECT_THROW(io::read_responses_csv(dup), Error);
    std::istringstream empty("location_id,part_id,score\n");
    EXPECT_EQ(io::read_responses_csv(empty).n_locations(), 0);
}

TEST(ResultsCsv, Format) {
    DetectionResult a;
    a.location_id = 0;
    a.label = Label::Neg;
    a.score = -INFINITY;
    a.tau = 2;
    a.parts_evaluated = {3, 1};
    DetectionResult b;
    b.location_id = 1;
    b.label = Label::Pos;
    b.score = 1.75;
    b.tau = 0;
    b.parts_evaluated = {0, 1, 2};
    const std::vector<DetectionResult> rs{a, b};
    std::ostringstream out;
    io::write_results_csv(out, rs);
    EXPECT_EQ(out.str(),
              "location_id,label,score,tau,parts_order\n0,neg,-inf,2,3;1\n1,pos,1.75,0,0;1;2\n");
}

TEST(SyntheticSpecJson, RoundTripAndValidation) {
    synth::SyntheticSpec s;
    s.n_parts = 4;
    s.informativeness_profile = {1, 0.5, 0.25, 0.125};
    s.seed = 99;
    std::ostringstream out;
    io::write_synthetic_spec(out, s);
    expect_byte_round_trip(out.str(), io::read_synthetic_spec,
                           [](std::ostream& o, const synth::SyntheticSpec& v) {
                               io::write_synthetic_spec(o, v);
                           });
    std::istringstream bad("{\"n_parts\": -3}");
    EXPECT_THROW(io::read_synthetic_spec(bad), Error);
}
