#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "nnpf/nn.hpp"
#include "nnpf/trace.hpp"

namespace nnpf {

// Sequence-learning association modes: how each element of a value series is
// presented to the network.
enum class StudyMode {
    FunctionEstimation,  // n            -> x_n
    NextElement,         // x_{n-1}      -> x_n
    NextWithHistory,     // x_{n-2},x_{n-1} -> x_n
    DeltaPrediction,     // x_{n-1}-x_{n-2} -> x_n - x_{n-1}
};

const char* study_mode_name(StudyMode m);
std::optional<StudyMode> study_mode_from_name(const std::string& s);

struct StudyCellConfig {
    std::vector<int> hidden{32};
    int lstm_cells = 0;
    Precision precision = Precision::Full;
    double learning_rate = 0.3;  // tuned on the sequence study
    uint64_t max_phases = 5000;
    uint64_t early_stop_window = 500;  // stop once the floor is stable this long
    uint64_t rng_seed = 1;
};

struct StudyCurve {
    std::vector<double> error_per_phase;  // average square error per element
    double final_error = 0;
    double final_bit_accuracy = 0;  // rounded output bits matching targets

    double floor() const;
    double initial() const;
    // First phase at which the error has closed `fraction` of the gap between
    // the initial error and the floor; error_per_phase.size() when never.
    uint64_t gap_crossing(double fraction) const;
};

// Train a fresh network on one value sequence under one mode and record the
// per-phase average square error (summed over the 16 output bits).
StudyCurve run_study_cell(const std::vector<uint64_t>& values, StudyMode mode,
                          const StudyCellConfig& cfg);

// Named default benchmark sequences: the function series plus the classic
// access patterns rendered as 16-bit value streams.
std::vector<std::string> study_sequence_names();
std::vector<uint64_t> study_sequence(const std::string& name, uint64_t length = 0);

struct StudyCellResult {
    std::string sequence;
    StudyMode mode;
    std::string shape;  // e.g. "32" or "96-64"
    StudyCurve curve;
};

struct StudyConfig {
    std::vector<std::string> sequences;
    std::vector<StudyMode> modes;
    std::vector<std::vector<int>> shapes{{32}};
    int lstm_cells = 0;
    Precision precision = Precision::Full;
    double learning_rate = 0.3;
    uint64_t phases = 5000;
    uint64_t early_stop_window = 500;
    uint64_t length = 0;  // 0: per-sequence default
    uint64_t seed = 1;
    int workers = 0;  // 0: hardware concurrency
};

// Runs the full (sequence x mode x shape) matrix, fanning cells out over
// worker threads; results come back in deterministic key order.
std::vector<StudyCellResult> run_study(const StudyConfig& cfg);

std::string study_to_json(const std::vector<StudyCellResult>& results);
std::string study_to_csv(const std::vector<StudyCellResult>& results);
std::vector<StudyCellResult> study_from_json(const std::string& text);

}  // namespace nnpf
