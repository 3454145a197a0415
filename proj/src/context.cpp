#include "nnpf/context.hpp"

#include <stdexcept>

#include "nnpf/bits.hpp"

namespace nnpf {

void ContextState::set_slice(int off, int width, uint64_t value) {
    for (int i = 0; i < width; ++i) set_bit(off + i, (value >> i) & 1ull);
}

std::string ContextLayout::validate() const {
    std::array<bool, ContextState::kBits> used{};
    for (const auto& f : fields) {
        if (f.bit_lo < 0 || f.bit_hi < f.bit_lo || f.bit_hi > 63)
            return "layout field has an invalid source slice";
        if (f.count <= 0) return "layout field count must be positive";
        if (f.dest_offset < 0 || f.dest_offset + f.total_width() > ContextState::kBits)
            return "layout field exceeds the 128-bit state";
        for (int b = f.dest_offset; b < f.dest_offset + f.total_width(); ++b) {
            if (used[size_t(b)]) return "layout destination slices overlap";
            used[size_t(b)] = true;
        }
        if ((f.source == ContextSource::CurrentPc || f.source == ContextSource::LastAddr) &&
            f.count != 1)
            return "scalar layout sources take count 1";
    }
    return {};
}

int ContextLayout::max_history_depth(ContextSource src) const {
    int depth = 0;
    for (const auto& f : fields)
        if (f.source == src) depth = std::max(depth, f.count);
    return depth;
}

ContextLayout ContextLayout::fig5_default() {
    ContextLayout l;
    l.fields = {
        {ContextSource::LipHistory, 0, 7, 6, 0},      // 48 bits
        {ContextSource::DeltaHistory, 0, 12, 5, 48},  // 65 bits
        {ContextSource::KindHistory, 0, 0, 8, 113},   // 8 bits
        {ContextSource::CurrentPc, 0, 6, 1, 121},     // 7 bits
    };
    return l;
}

ContextHistory::ContextHistory(int depth) : depth_(depth) {
    if (depth <= 0) throw std::invalid_argument("context history depth must be positive");
    lip_.assign(size_t(depth), 0);
    delta_.assign(size_t(depth), 0);
    kind_.assign(size_t(depth), 0);
    branch_.assign(size_t(depth), 0);
}

void ContextHistory::update(const AccessRecord& r) {
    const int64_t delta = seen_any_ ? int64_t(r.addr - last_addr_) : 0;
    auto push = [this](std::deque<uint64_t>& q, uint64_t v) {
        q.push_front(v);
        q.resize(size_t(depth_));
    };
    push(lip_, lip_slice(r.pc));
    push(delta_, delta_slice(delta));
    push(kind_, r.kind == AccessKind::Store ? 1 : 0);
    push(branch_, 0);
    current_pc_ = r.pc;
    last_addr_ = r.addr;
    seen_any_ = true;
}

uint64_t ContextHistory::history_at(ContextSource src, int idx) const {
    if (idx < 0 || idx >= depth_) throw std::out_of_range("context history index");
    switch (src) {
        case ContextSource::LipHistory: return lip_[size_t(idx)];
        case ContextSource::DeltaHistory: return delta_[size_t(idx)];
        case ContextSource::KindHistory: return kind_[size_t(idx)];
        case ContextSource::BranchHistory: return branch_[size_t(idx)];
        default: throw std::invalid_argument("history_at: scalar source");
    }
}

ContextState ContextHistory::snapshot(const ContextLayout& layout) const {
    std::string err = layout.validate();
    if (!err.empty()) throw std::invalid_argument("invalid context layout: " + err);
    ContextState s;
    for (const auto& f : layout.fields) {
        const int w = f.slice_width();
        auto place = [&](int elem, uint64_t value) {
            uint64_t sliced = (value >> f.bit_lo) & ((w == 64) ? ~0ull : ((1ull << w) - 1));
            s.set_slice(f.dest_offset + elem * w, w, sliced);
        };
        switch (f.source) {
            case ContextSource::CurrentPc: place(0, current_pc_); break;
            case ContextSource::LastAddr: place(0, last_addr_); break;
            default: {
                if (f.count > depth_)
                    throw std::invalid_argument("layout reads deeper than the configured history");
                for (int i = 0; i < f.count; ++i) place(i, history_at(f.source, i));
                break;
            }
        }
    }
    return s;
}

uint32_t hash_context(const ContextState& s, int table_bits) {
    if (table_bits < 1 || table_bits > 24)
        throw std::invalid_argument("hash_context: table_bits must be in [1,24]");
    uint32_t folded = uint32_t(s.words[0]) ^ uint32_t(s.words[0] >> 32) ^
                      uint32_t(s.words[1]) ^ uint32_t(s.words[1] >> 32);
    return mix32(folded) & ((1u << table_bits) - 1);
}

uint16_t context_fingerprint(const ContextState& s) {
    // A second fold with a different mix constant so tag and index bits are
    // not trivially correlated.
    uint32_t folded = uint32_t(s.words[0] * 0x9E3779B97F4A7C15ull >> 32) ^
                      uint32_t(s.words[1] * 0xC2B2AE3D27D4EB4Full >> 32);
    return uint16_t(mix32(folded) & 0xFFFF);
}

}  // namespace nnpf
