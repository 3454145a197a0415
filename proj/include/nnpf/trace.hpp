#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace nnpf {

enum class AccessKind : uint8_t { Load = 0, Store = 1 };

// One memory access of a trace. `seq` is strictly increasing within a trace.
struct AccessRecord {
    uint64_t seq = 0;
    uint64_t pc = 0;
    uint64_t addr = 0;
    AccessKind kind = AccessKind::Load;

    bool operator==(const AccessRecord&) const = default;
};

enum class PatternKind {
    // address patterns
    Streamer,
    Strider,
    Sms,
    Markov,
    Vldp,
    GhbPc,
    // value series
    Sine,
    Polynomial,
    Linear,
    Lfsr,
    // kernels
    ListChase,
    BstSearch,
    MatmulIndex,
    ArraySum,
    IndexJump,
};

const char* pattern_kind_name(PatternKind k);
std::optional<PatternKind> pattern_kind_from_name(const std::string& name);
bool is_value_series(PatternKind k);
bool is_kernel(PatternKind k);

// Kind-specific parameters; unused fields are ignored by each generator.
// validate() rejects inconsistent specs with a descriptive message.
struct PatternSpec {
    PatternKind kind = PatternKind::Streamer;

    uint64_t base = 0x100000;  // base byte address
    uint64_t line = 64;        // cache-line size used by line-unit patterns

    int64_t stride = 1;                   // strider: lines per step
    std::vector<int64_t> deltas{2, 1};    // vldp: repeating line-delta cycle

    std::vector<uint64_t> offsets{0, 2, 5};  // sms: line offsets within a region
    uint64_t region_bytes = 2048;            // sms: region size
    uint64_t region_hop = 2048;              // sms: distance between region bases

    // markov: state addresses plus either an explicit cyclic state-index
    // sequence (replayed verbatim) or a row-stochastic transition matrix.
    std::vector<uint64_t> states;
    std::vector<size_t> cycle;
    std::vector<std::vector<double>> transitions;

    uint64_t base2 = 0x900000;  // ghb_pc: base of the second interleaved stream
    int64_t stride2 = 1;        // ghb_pc: lines per step of the second stream

    // value series
    unsigned width_bits = 16;                 // W for all value series
    double linear_a = 3.0, linear_b = 5.0;    // linear: x_n = a*n + b
    std::vector<double> poly_coeffs{0, 0, 1}; // polynomial: sum_k c_k * n^k
    uint64_t sine_period = 256;
    uint64_t lfsr_seed = 0xACE1;
    std::vector<unsigned> lfsr_taps{16, 14, 13, 11};

    // kernels
    uint64_t elem_count = 1024;
    uint64_t elem_size = 8;
    uint64_t node_size = 64;
    uint64_t repeats = 1;
    bool shuffle_layout = true;  // list_chase: random node placement vs identity
    uint64_t block_nodes = 0;    // list_chase: shuffle whole blocks, keeping
                                 // runs of this many consecutive nodes intact

    std::string validate() const;  // empty string when valid
};

// Deterministic synthetic access-pattern generator.
std::vector<AccessRecord> gen_pattern(const PatternSpec& spec, uint64_t len, uint64_t seed);

// Deterministic value series (sine/polynomial/linear/lfsr), W-bit unsigned values.
std::vector<uint64_t> gen_function_series(const PatternSpec& spec, uint64_t len);

// Deterministic kernel address streams (list_chase/bst_search/matmul_index/...).
std::vector<AccessRecord> gen_kernel(const PatternSpec& spec, uint64_t seed);

// Single LFSR step (Fibonacci, right-shift form). Exposed for tests.
uint64_t lfsr_step(uint64_t state, unsigned width, const std::vector<unsigned>& taps);

// Fixed-width binary trace file IO. read(write(t)) == t.
void write_trace(const std::string& path, const std::vector<AccessRecord>& records);
std::vector<AccessRecord> read_trace(const std::string& path);

}  // namespace nnpf
