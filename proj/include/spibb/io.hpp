#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "spibb/baseline.hpp"
#include "spibb/benchmark.hpp"
#include "spibb/bounds.hpp"
#include "spibb/data.hpp"
#include "spibb/mdp.hpp"

namespace spibb::io {

using json = nlohmann::json;

inline constexpr int kMdpFormatVersion = 1;

inline const char* kRecordsHeader =
    "seed,dataset_size,algorithm,baseline_mode,raw_perf,baseline_perf,optimal_perf,normalized_perf,zeta,zeta_hat,"
    "delta_hat,penalty";
inline const char* kSummaryHeader = "algorithm,baseline_mode,dataset_size,mean,quantile_01,quantile_10,n";

json mdp_to_json(const FiniteMdp& mdp);
/// Throws ValidationError on schema problems or an unsupported format_version.
FiniteMdp mdp_from_json(const json& j);

json policy_to_json(const Policy& pi);
Policy policy_from_json(const json& j);

json bounds_to_json(const BoundReport& report);

/// Parses the benchmark config document; unknown keys are rejected.
BenchmarkConfig config_from_json(const json& j);

/// Shortest decimal text that parses back to the same double; "inf"/"-inf"/"nan".
std::string format_double(double v);

void write_dataset_jsonl(std::ostream& out, const Dataset& ds);
/// Trajectory count is recovered from the t == 0 entries.
Dataset read_dataset_jsonl(std::istream& in);

VectorDataset read_vector_dataset_jsonl(std::istream& in, int n_actions);

void write_records_csv(std::ostream& out, const std::vector<ExperimentRecord>& records);
std::vector<ExperimentRecord> read_records_csv(std::istream& in);
void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows);
std::vector<SummaryRow> read_summary_csv(std::istream& in);

/// Hex SHA-256 of `bytes`.
std::string sha256_hex(const std::string& bytes);

std::string read_text_file(const std::filesystem::path& path);
/// Throws IoError when the file cannot be opened or written.
void write_text_file(const std::filesystem::path& path, const std::string& text);

json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const json& j);

} // namespace spibb::io
