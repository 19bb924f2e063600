#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "sac/pipeline.hpp"

namespace sac::cli {

enum ExitCode : int { kOk = 0, kVerifyFailed = 1, kUsage = 2 };

inline constexpr double kVerifyTolerance = 1e-5;

struct RunReport {
    std::string mode;
    std::optional<std::string> input, output;
    std::size_t sample_rate = 0;
    double chunk_seconds = 0.0;
    std::size_t input_samples = 0;
    std::size_t output_samples = 0;
    std::optional<double> max_abs_diff;
    std::optional<std::size_t> first_mismatch;
    bool realtime = false;
    std::optional<double> mock_rtf;
    ReceptiveField receptive_field;
    std::optional<LatencySummary> latency;
    std::vector<bool> speech;
};

// Single JSON object with "schema": 1.
std::string report_json(const RunReport& r);

struct InitWeightsOptions {
    std::optional<std::string> config;
    std::uint64_t seed = 1;
    std::string out;
};

struct ConvertOptions {
    std::string input, output;
    std::string mode = "streaming";
    bool realtime = false;
    std::optional<std::string> config;
    std::string weights;
    std::optional<std::string> report;
    std::optional<double> mock_rtf;
};

struct VerifyOptions {
    std::string input;
    std::optional<std::string> config;
    std::string weights;
    std::optional<std::string> report;
    std::optional<std::size_t> corrupt_cache_after;  // test hook
};

struct BenchOptions {
    std::optional<std::string> config;
    std::optional<std::string> weights;  // seeded random weights when absent
    double seconds = 5.0;
    std::uint64_t seed = 1;
    std::optional<double> mock_rtf;
    std::optional<std::string> report;
};

// Each command returns an exit code; errors derived from sac::Error are
// reported on `err` and mapped to kUsage.
int cmd_init_weights(const InitWeightsOptions& o, std::ostream& out, std::ostream& err);
int cmd_convert(const ConvertOptions& o, std::ostream& out, std::ostream& err);
int cmd_verify(const VerifyOptions& o, std::ostream& out, std::ostream& err);
int cmd_bench(const BenchOptions& o, std::ostream& out, std::ostream& err);

// Largest difference and the first index above the tolerance (or a length mismatch).
struct Comparison {
    double max_abs_diff = 0.0;
    std::optional<std::size_t> first_mismatch;
};
Comparison compare(const std::vector<float>& a, const std::vector<float>& b, double tol = kVerifyTolerance);

// Argument parsing and dispatch; args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace sac::cli
