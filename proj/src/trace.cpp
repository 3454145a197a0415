#include "nnpf/trace.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <random>
#include <stdexcept>

namespace nnpf {

namespace {

struct KindName {
    PatternKind kind;
    const char* name;
};

constexpr std::array<KindName, 15> kKindNames{{
    {PatternKind::Streamer, "streamer"},
    {PatternKind::Strider, "strider"},
    {PatternKind::Sms, "sms"},
    {PatternKind::Markov, "markov"},
    {PatternKind::Vldp, "vldp"},
    {PatternKind::GhbPc, "ghb_pc"},
    {PatternKind::Sine, "sine"},
    {PatternKind::Polynomial, "polynomial"},
    {PatternKind::Linear, "linear"},
    {PatternKind::Lfsr, "lfsr"},
    {PatternKind::ListChase, "list_chase"},
    {PatternKind::BstSearch, "bst_search"},
    {PatternKind::MatmulIndex, "matmul_index"},
    {PatternKind::ArraySum, "array_sum"},
    {PatternKind::IndexJump, "index_jump"},
}};

// Synthetic PCs: one per logical sub-stream so PC-localized prefetchers can
// distinguish them.
constexpr uint64_t kPcStreamA = 0x400100;
constexpr uint64_t kPcStreamB = 0x400200;
constexpr uint64_t kPcStreamC = 0x400300;

uint64_t value_mask(unsigned width_bits) {
    return width_bits >= 64 ? ~0ull : ((1ull << width_bits) - 1);
}

}  // namespace

const char* pattern_kind_name(PatternKind k) {
    for (const auto& e : kKindNames)
        if (e.kind == k) return e.name;
    return "?";
}

std::optional<PatternKind> pattern_kind_from_name(const std::string& name) {
    for (const auto& e : kKindNames)
        if (name == e.name) return e.kind;
    return std::nullopt;
}

bool is_value_series(PatternKind k) {
    return k == PatternKind::Sine || k == PatternKind::Polynomial ||
           k == PatternKind::Linear || k == PatternKind::Lfsr;
}

bool is_kernel(PatternKind k) {
    switch (k) {
        case PatternKind::ListChase:
        case PatternKind::BstSearch:
        case PatternKind::MatmulIndex:
        case PatternKind::ArraySum:
        case PatternKind::IndexJump:
            return true;
        default:
            return false;
    }
}

std::string PatternSpec::validate() const {
    if (line == 0) return "line size must be > 0";
    switch (kind) {
        case PatternKind::Strider:
            if (stride == 0) return "strider: stride must be nonzero";
            break;
        case PatternKind::Vldp:
            if (deltas.empty()) return "vldp: delta cycle must be non-empty";
            break;
        case PatternKind::Sms:
            if (offsets.empty()) return "sms: offsets must be non-empty";
            if (region_bytes == 0 || region_hop == 0) return "sms: region sizes must be > 0";
            for (uint64_t o : offsets)
                if (o * line >= region_bytes) return "sms: offset outside region";
            break;
        case PatternKind::Markov: {
            if (states.empty()) return "markov: states must be non-empty";
            if (!cycle.empty()) {
                for (size_t idx : cycle)
                    if (idx >= states.size()) return "markov: cycle index out of range";
            } else {
                if (transitions.size() != states.size())
                    return "markov: transition matrix must be square over states";
                for (const auto& row : transitions) {
                    if (row.size() != states.size())
                        return "markov: transition matrix must be square over states";
                    double sum = 0;
                    for (double p : row) {
                        if (p < 0) return "markov: negative transition probability";
                        sum += p;
                    }
                    if (std::abs(sum - 1.0) > 1e-9)
                        return "markov: transition probabilities must sum to 1";
                }
            }
            break;
        }
        case PatternKind::Lfsr: {
            if (width_bits == 0 || width_bits > 64) return "lfsr: width must be in [1,64]";
            if (lfsr_seed == 0) return "lfsr: seed must be nonzero";
            if (lfsr_seed > value_mask(width_bits)) return "lfsr: seed wider than width";
            if (lfsr_taps.empty()) return "lfsr: taps must be non-empty";
            for (unsigned t : lfsr_taps)
                if (t == 0 || t > width_bits) return "lfsr: tap outside [1,width]";
            break;
        }
        case PatternKind::Sine:
            if (sine_period == 0) return "sine: period must be > 0";
            break;
        case PatternKind::Polynomial:
            if (poly_coeffs.empty()) return "polynomial: coefficients must be non-empty";
            break;
        case PatternKind::ListChase:
            if (block_nodes > 1 && elem_count % block_nodes != 0)
                return "list_chase: block_nodes must divide elem_count";
            [[fallthrough]];
        case PatternKind::BstSearch:
        case PatternKind::ArraySum:
        case PatternKind::IndexJump:
            if (elem_count == 0) return "kernel: element count must be > 0";
            if (elem_size == 0) return "kernel: element size must be > 0";
            if (repeats == 0) return "kernel: repeat count must be > 0";
            break;
        case PatternKind::MatmulIndex:
            if (elem_count == 0) return "matmul_index: dimension must be > 0";
            if (elem_size == 0) return "matmul_index: element size must be > 0";
            break;
        default:
            break;
    }
    return {};
}

namespace {

void require_valid(const PatternSpec& spec) {
    std::string err = spec.validate();
    if (!err.empty()) throw std::invalid_argument("invalid pattern spec: " + err);
}

std::vector<AccessRecord> finish(std::vector<std::pair<uint64_t, uint64_t>> pc_addr) {
    std::vector<AccessRecord> out;
    out.reserve(pc_addr.size());
    uint64_t seq = 0;
    for (auto [pc, addr] : pc_addr)
        out.push_back({seq++, pc, addr, AccessKind::Load});
    return out;
}

}  // namespace

uint64_t lfsr_step(uint64_t state, unsigned width, const std::vector<unsigned>& taps) {
    uint64_t bit = 0;
    for (unsigned t : taps) bit ^= (state >> (width - t)) & 1ull;
    return (state >> 1) | (bit << (width - 1));
}

std::vector<AccessRecord> gen_pattern(const PatternSpec& spec, uint64_t len, uint64_t seed) {
    require_valid(spec);
    if (is_kernel(spec.kind)) return gen_kernel(spec, seed);
    if (is_value_series(spec.kind))
        throw std::invalid_argument("gen_pattern: value series have no address stream; use gen_function_series");

    std::vector<std::pair<uint64_t, uint64_t>> pa;
    pa.reserve(len);
    switch (spec.kind) {
        case PatternKind::Streamer:
            for (uint64_t i = 0; i < len; ++i)
                pa.emplace_back(kPcStreamA, spec.base + i * spec.line);
            break;
        case PatternKind::Strider:
            for (uint64_t i = 0; i < len; ++i)
                pa.emplace_back(kPcStreamA, spec.base + i * spec.stride * spec.line);
            break;
        case PatternKind::Vldp: {
            uint64_t addr = spec.base;
            for (uint64_t i = 0; i < len; ++i) {
                pa.emplace_back(kPcStreamA, addr);
                addr += spec.deltas[i % spec.deltas.size()] * static_cast<int64_t>(spec.line);
            }
            break;
        }
        case PatternKind::Sms: {
            uint64_t emitted = 0;
            for (uint64_t r = 0; emitted < len; ++r) {
                uint64_t region_base = spec.base + r * spec.region_hop;
                for (uint64_t off : spec.offsets) {
                    if (emitted++ >= len) break;
                    pa.emplace_back(kPcStreamA, region_base + off * spec.line);
                }
            }
            pa.resize(len);
            break;
        }
        case PatternKind::Markov: {
            if (!spec.cycle.empty()) {
                for (uint64_t i = 0; i < len; ++i)
                    pa.emplace_back(kPcStreamA, spec.states[spec.cycle[i % spec.cycle.size()]]);
            } else {
                std::mt19937_64 rng(seed);
                std::uniform_real_distribution<double> uni(0.0, 1.0);
                size_t state = 0;
                for (uint64_t i = 0; i < len; ++i) {
                    pa.emplace_back(kPcStreamA, spec.states[state]);
                    double u = uni(rng), acc = 0;
                    size_t next = spec.states.size() - 1;
                    for (size_t j = 0; j < spec.states.size(); ++j) {
                        acc += spec.transitions[state][j];
                        if (u < acc) {
                            next = j;
                            break;
                        }
                    }
                    state = next;
                }
            }
            break;
        }
        case PatternKind::GhbPc: {
            for (uint64_t i = 0; i < len; ++i) {
                uint64_t k = i / 2;
                if (i % 2 == 0)
                    pa.emplace_back(kPcStreamA, spec.base + k * spec.stride * spec.line);
                else
                    pa.emplace_back(kPcStreamB, spec.base2 + k * spec.stride2 * spec.line);
            }
            break;
        }
        default:
            throw std::invalid_argument("gen_pattern: unsupported kind");
    }
    return finish(std::move(pa));
}

std::vector<uint64_t> gen_function_series(const PatternSpec& spec, uint64_t len) {
    require_valid(spec);
    if (!is_value_series(spec.kind))
        throw std::invalid_argument("gen_function_series: kind is not a value series");
    const uint64_t mask = value_mask(spec.width_bits);
    std::vector<uint64_t> out;
    out.reserve(len);
    switch (spec.kind) {
        case PatternKind::Linear:
            for (uint64_t n = 1; n <= len; ++n)
                out.push_back(static_cast<uint64_t>(std::llround(spec.linear_a * double(n) + spec.linear_b)) & mask);
            break;
        case PatternKind::Polynomial:
            for (uint64_t n = 1; n <= len; ++n) {
                double v = 0, xp = 1;
                for (double c : spec.poly_coeffs) {
                    v += c * xp;
                    xp *= double(n);
                }
                out.push_back(static_cast<uint64_t>(std::llround(v)) & mask);
            }
            break;
        case PatternKind::Sine: {
            const double scale = double(mask);
            for (uint64_t n = 1; n <= len; ++n) {
                double s = std::sin(2.0 * std::numbers::pi * double(n) / double(spec.sine_period));
                out.push_back(static_cast<uint64_t>(std::llround((s + 1.0) / 2.0 * scale)) & mask);
            }
            break;
        }
        case PatternKind::Lfsr: {
            uint64_t state = spec.lfsr_seed;
            for (uint64_t n = 0; n < len; ++n) {
                state = lfsr_step(state, spec.width_bits, spec.lfsr_taps);
                out.push_back(state);
            }
            break;
        }
        default:
            break;
    }
    return out;
}

std::vector<AccessRecord> gen_kernel(const PatternSpec& spec, uint64_t seed) {
    require_valid(spec);
    std::vector<std::pair<uint64_t, uint64_t>> pa;
    switch (spec.kind) {
        case PatternKind::ArraySum: {
            for (uint64_t r = 0; r < spec.repeats; ++r)
                for (uint64_t i = 0; i < spec.elem_count; ++i)
                    pa.emplace_back(kPcStreamA, spec.base + i * spec.elem_size);
            break;
        }
        case PatternKind::ListChase: {
            std::vector<uint64_t> slot(spec.elem_count);
            for (uint64_t i = 0; i < spec.elem_count; ++i) slot[i] = i;
            if (spec.shuffle_layout) {
                std::mt19937_64 rng(seed);
                if (spec.block_nodes > 1) {
                    // fractured layout: consecutive runs stay intact, the runs
                    // themselves land in shuffled order
                    const uint64_t nb = spec.elem_count / spec.block_nodes;
                    std::vector<uint64_t> blocks(nb);
                    for (uint64_t b = 0; b < nb; ++b) blocks[b] = b;
                    std::shuffle(blocks.begin(), blocks.end(), rng);
                    uint64_t i = 0;
                    for (uint64_t b = 0; b < nb; ++b)
                        for (uint64_t k = 0; k < spec.block_nodes; ++k)
                            slot[i++] = blocks[b] * spec.block_nodes + k;
                } else {
                    std::shuffle(slot.begin(), slot.end(), rng);
                }
            }
            for (uint64_t r = 0; r < spec.repeats; ++r)
                for (uint64_t i = 0; i < spec.elem_count; ++i)
                    pa.emplace_back(kPcStreamA, spec.base + slot[i] * spec.node_size);
            break;
        }
        case PatternKind::BstSearch: {
            // Repeated binary searches over a sorted array; array[i] == i.
            std::mt19937_64 rng(seed);
            std::uniform_int_distribution<uint64_t> keys(0, spec.elem_count - 1);
            for (uint64_t r = 0; r < spec.repeats; ++r) {
                uint64_t key = keys(rng);
                uint64_t lo = 0, hi = spec.elem_count;
                while (lo < hi) {
                    uint64_t mid = lo + (hi - lo) / 2;
                    pa.emplace_back(kPcStreamA, spec.base + mid * spec.elem_size);
                    if (key == mid) break;
                    if (key < mid)
                        hi = mid;
                    else
                        lo = mid + 1;
                }
            }
            break;
        }
        case PatternKind::MatmulIndex: {
            // Row-by-column index stream of C = A * B over n x n operands.
            const uint64_t n = spec.elem_count;
            const uint64_t base_a = spec.base;
            const uint64_t base_b = spec.base + n * n * spec.elem_size;
            const uint64_t base_c = spec.base + 2 * n * n * spec.elem_size;
            uint64_t seq = 0;
            std::vector<AccessRecord> out;
            out.reserve(2 * n * n * n + n * n);
            for (uint64_t i = 0; i < n; ++i)
                for (uint64_t j = 0; j < n; ++j) {
                    for (uint64_t k = 0; k < n; ++k) {
                        out.push_back({seq++, kPcStreamA, base_a + (i * n + k) * spec.elem_size, AccessKind::Load});
                        out.push_back({seq++, kPcStreamB, base_b + (k * n + j) * spec.elem_size, AccessKind::Load});
                    }
                    out.push_back({seq++, kPcStreamC, base_c + (i * n + j) * spec.elem_size, AccessKind::Store});
                }
            return out;
        }
        case PatternKind::IndexJump: {
            uint64_t idx = 0;
            for (uint64_t t = 0; t < spec.elem_count; ++t) {
                pa.emplace_back(kPcStreamA, spec.base + idx * spec.elem_size);
                idx += t + 1;
            }
            break;
        }
        default:
            throw std::invalid_argument("gen_kernel: kind is not a kernel");
    }
    return finish(std::move(pa));
}

// ---------------------------------------------------------------------------
// Trace file format: 16-byte header (8B magic, u32 version, u32 reserved)
// followed by fixed 25-byte records (u64 seq, u64 pc, u64 addr, u8 kind),
// all little-endian.

namespace {

constexpr char kMagic[8] = {'N', 'N', 'P', 'F', 'T', 'R', 'C', '1'};
constexpr uint32_t kVersion = 1;
constexpr size_t kHeaderSize = 16;
constexpr size_t kRecordSize = 25;

void put_u32(std::string& buf, uint32_t v) {
    for (int i = 0; i < 4; ++i) buf.push_back(char((v >> (8 * i)) & 0xFF));
}

void put_u64(std::string& buf, uint64_t v) {
    for (int i = 0; i < 8; ++i) buf.push_back(char((v >> (8 * i)) & 0xFF));
}

uint64_t get_u64(const unsigned char* p) {
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= uint64_t(p[i]) << (8 * i);
    return v;
}

uint32_t get_u32(const unsigned char* p) {
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= uint32_t(p[i]) << (8 * i);
    return v;
}

}  // namespace

void write_trace(const std::string& path, const std::vector<AccessRecord>& records) {
    std::string buf;
    buf.reserve(kHeaderSize + records.size() * kRecordSize);
    buf.append(kMagic, sizeof(kMagic));
    put_u32(buf, kVersion);
    put_u32(buf, 0);
    for (const auto& r : records) {
        put_u64(buf, r.seq);
        put_u64(buf, r.pc);
        put_u64(buf, r.addr);
        buf.push_back(char(static_cast<uint8_t>(r.kind)));
    }
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open trace file for writing: " + path);
    f.write(buf.data(), std::streamsize(buf.size()));
    if (!f) throw std::runtime_error("short write to trace file: " + path);
}

std::vector<AccessRecord> read_trace(const std::string& path) {
    std::ifstream f(path, std::ios::binary | std::ios::ate);
    if (!f) throw std::runtime_error("cannot open trace file: " + path);
    const auto size = static_cast<size_t>(f.tellg());
    f.seekg(0);
    if (size < kHeaderSize)
        throw std::runtime_error(path + ": truncated header at byte offset " + std::to_string(size));
    std::vector<unsigned char> buf(size);
    f.read(reinterpret_cast<char*>(buf.data()), std::streamsize(size));
    if (!f) throw std::runtime_error("short read from trace file: " + path);

    if (std::memcmp(buf.data(), kMagic, sizeof(kMagic)) != 0)
        throw std::runtime_error(path + ": bad magic at byte offset 0");
    if (get_u32(buf.data() + 8) != kVersion)
        throw std::runtime_error(path + ": unsupported trace version");

    const size_t payload = size - kHeaderSize;
    if (payload % kRecordSize != 0)
        throw std::runtime_error(path + ": truncated record at byte offset " +
                                 std::to_string(kHeaderSize + (payload / kRecordSize) * kRecordSize));

    std::vector<AccessRecord> out;
    out.reserve(payload / kRecordSize);
    for (size_t off = kHeaderSize; off < size; off += kRecordSize) {
        const unsigned char* p = buf.data() + off;
        AccessRecord r;
        r.seq = get_u64(p);
        r.pc = get_u64(p + 8);
        r.addr = get_u64(p + 16);
        uint8_t kind = p[24];
        if (kind > 1)
            throw std::runtime_error(path + ": invalid access kind at byte offset " + std::to_string(off + 24));
        r.kind = static_cast<AccessKind>(kind);
        if (!out.empty() && r.seq <= out.back().seq)
            throw std::runtime_error(path + ": non-increasing seq at byte offset " + std::to_string(off));
        out.push_back(r);
    }
    return out;
}

}  // namespace nnpf
