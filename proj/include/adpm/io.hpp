#pragma once

#include "adpm/inference.hpp"
#include "adpm/likelihoods.hpp"
#include "adpm/oracle.hpp"
#include "adpm/policy.hpp"
#include "adpm/synth.hpp"

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

// On-disk formats. Every reader throws Error(ErrorKind::Format) on malformed input.
namespace adpm::io {

/// Shortest text that parses back to the same double; -inf is written "-inf".
std::string format_double(double v);

// part_id,label,score with label in {pos,neg}. Parts come back sorted by id;
// a part with an empty class is kept so the caller can report it.
std::vector<ScoreSampleSet> read_samples_csv(std::istream& in);
void write_samples_csv(std::ostream& out, std::span<const ScoreSampleSet> sets);

// [{"part_id":k,"lo":..,"hi":..,"pos":[...],"neg":[...]}, ...]
std::vector<ScoreLikelihood> read_likelihoods_json(std::istream& in);
void write_likelihoods_json(std::ostream& out, std::span<const ScoreLikelihood> liks);

// One JSON header line, then actions (1 byte each) and values (8-byte
// little-endian doubles), both row-major by mask then belief bin.
Policy read_policy(std::istream& in);
void write_policy(std::ostream& out, const Policy& policy);

// location_id,part_id,score, dense. Locations and parts must be 0..N-1.
MatrixResponses read_responses_csv(std::istream& in);
void write_responses_csv(std::ostream& out, const MatrixResponses& responses);

// ASCII line "n_locations,n_parts" then row-major little-endian doubles.
MatrixResponses read_responses_bin(std::istream& in);
void write_responses_bin(std::ostream& out, const MatrixResponses& responses);

// location_id,label,score,tau,parts_order
void write_results_csv(std::ostream& out, std::span<const DetectionResult> results);

synth::SyntheticSpec read_synthetic_spec(std::istream& in);
void write_synthetic_spec(std::ostream& out, const synth::SyntheticSpec& spec);

// lambda_fp,lambda_fn,ap,rnpe,mean_tau,fp_rate,fn_rate
void write_sweep_csv(std::ostream& out, const synth::SweepResult& sweep);

std::string certification_report_json(std::span<const oracle::CertificationRecord> records,
                                      double tolerance);

// Path helpers; they open the file in binary mode and throw Format on failure.
std::vector<ScoreLikelihood> load_likelihoods(const std::filesystem::path& p);
Policy load_policy(const std::filesystem::path& p);
/// Dispatches on extension: ".bin" is the binary matrix, anything else CSV.
MatrixResponses load_responses(const std::filesystem::path& p);

}  // namespace adpm::io
