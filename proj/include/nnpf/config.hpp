#pragma once

#include <memory>
#include <optional>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "nnpf/baselines.hpp"
#include "nnpf/prefetcher.hpp"
#include "nnpf/simulator.hpp"
#include "nnpf/study.hpp"
#include "nnpf/trace.hpp"

namespace nnpf {

// Raised for malformed configs; the CLI maps it to exit code 1.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
    uint64_t seed = 1;

    std::optional<PatternSpec> trace_spec;
    uint64_t trace_length = 100000;
    std::optional<std::string> trace_path;

    CacheConfig cache;
    double warmup_fraction = 0.0;

    std::string prefetcher_name = "nn";
    BaselineParams baseline;
    NnPrefetcherConfig nn;

    StudyConfig study;
    std::vector<std::string> compare_prefetchers{"nn", "stride", "markov", "ghb_pcdc", "sms",
                                                 "vldp"};

    std::string output_dir = "out";
    uint64_t config_hash = 0;  // over the canonical serialized form
};

ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);

// Apply a dotted-path override ("prefetcher.nn.learning_rate=0.1") onto raw
// JSON before parsing; values parse as JSON scalars, falling back to strings.
void apply_override(nlohmann::json& j, const std::string& assignment);

std::vector<AccessRecord> obtain_trace(const ExperimentConfig& cfg);
std::unique_ptr<Prefetcher> make_prefetcher(const ExperimentConfig& cfg,
                                            const std::string& name);

}  // namespace nnpf
