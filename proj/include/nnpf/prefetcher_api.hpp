#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "nnpf/trace.hpp"

namespace nnpf {

struct PrefetchRequest {
    uint64_t addr = 0;   // line-aligned byte address
    bool shadow = false; // tracked for feedback, never sent to memory
};

// Common behavioral surface for every prefetcher. Implementations observe the
// demand stream strictly in order; none may look ahead.
class Prefetcher {
public:
    virtual ~Prefetcher() = default;

    // Called once per demand access, before on_access, so prediction-tracking
    // prefetchers can resolve their queues against the demand address.
    virtual void feedback(const AccessRecord&) {}

    virtual std::vector<PrefetchRequest> on_access(const AccessRecord& r, bool l1_hit,
                                                   bool hit_prefetched_line) = 0;

    // True when `line_addr` sits in an internal queue as a triggered but
    // unsent prediction (shadow or below the confidence gate).
    virtual bool has_pending_prediction(uint64_t /*line_addr*/) const { return false; }

    virtual std::map<std::string, int64_t> stats() const { return {}; }

    // Windowed training bit-error curve for learning prefetchers; empty for
    // the table-based ones.
    virtual std::vector<std::pair<uint64_t, double>> convergence_curve() const { return {}; }

    virtual std::string name() const = 0;
};

}  // namespace nnpf
