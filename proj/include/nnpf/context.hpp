#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <string>
#include <vector>

#include "nnpf/trace.hpp"

namespace nnpf {

// Fixed 128-bit program-context snapshot. Bit i lives in word i/64, bit i%64.
struct ContextState {
    std::array<uint64_t, 2> words{0, 0};

    static constexpr int kBits = 128;

    bool get_bit(int i) const { return (words[size_t(i) / 64] >> (i % 64)) & 1ull; }
    void set_bit(int i, bool v) {
        uint64_t m = 1ull << (i % 64);
        if (v)
            words[size_t(i) / 64] |= m;
        else
            words[size_t(i) / 64] &= ~m;
    }
    // Place the low `width` bits of `value` at bit offset `off`.
    void set_slice(int off, int width, uint64_t value);

    bool operator==(const ContextState&) const = default;
};

enum class ContextSource {
    LipHistory,    // stored 8-bit PC slices, most recent first
    DeltaHistory,  // stored 13-bit address-delta slices, most recent first
    KindHistory,   // 1-bit access kinds, most recent first
    BranchHistory, // reserved; zero when the trace carries no branch bits
    CurrentPc,
    LastAddr,
};

struct LayoutField {
    ContextSource source;
    int bit_lo;       // slice of the source element, inclusive
    int bit_hi;       // slice of the source element, inclusive
    int count;        // number of history elements (1 for scalar sources)
    int dest_offset;  // destination bit offset in the 128-bit state

    int slice_width() const { return bit_hi - bit_lo + 1; }
    int total_width() const { return slice_width() * count; }
};

// Placement plan for the 128-bit snapshot. Destination slices must be
// disjoint and fit in 128 bits.
struct ContextLayout {
    std::vector<LayoutField> fields;

    std::string validate() const;  // empty when valid
    int max_history_depth(ContextSource src) const;

    // 6x8 LIP slices, 5x13 delta slices, 8 kind bits, 7 low PC bits = 128.
    static ContextLayout fig5_default();
};

// Running history fed by one access stream. Shift registers hold the already
// sliced attribute values; depth is fixed at construction.
class ContextHistory {
public:
    explicit ContextHistory(int depth = 8);

    void update(const AccessRecord& r);
    ContextState snapshot(const ContextLayout& layout) const;

    // Most recent element first; index 0 is the latest pushed value.
    uint64_t history_at(ContextSource src, int idx) const;
    uint64_t current_pc() const { return current_pc_; }
    uint64_t last_addr() const { return last_addr_; }
    int depth() const { return depth_; }

    static constexpr uint64_t kLipSliceMask = 0xFF;      // pc bits [8:1]
    static constexpr uint64_t kDeltaSliceMask = 0x1FFF;  // delta bits [14:2]
    static uint64_t lip_slice(uint64_t pc) { return (pc >> 1) & kLipSliceMask; }
    static uint64_t delta_slice(int64_t delta) {
        return (static_cast<uint64_t>(delta) >> 2) & kDeltaSliceMask;
    }

private:
    int depth_;
    std::deque<uint64_t> lip_;
    std::deque<uint64_t> delta_;
    std::deque<uint64_t> kind_;
    std::deque<uint64_t> branch_;
    uint64_t current_pc_ = 0;
    uint64_t last_addr_ = 0;
    bool seen_any_ = false;
};

// Maps a context state to a table index in [0, 2^table_bits). All 128 input
// bits influence the result; table_bits must be in [1, 24].
uint32_t hash_context(const ContextState& s, int table_bits);

// Short fingerprint used to tag context-hash entries.
uint16_t context_fingerprint(const ContextState& s);

}  // namespace nnpf
