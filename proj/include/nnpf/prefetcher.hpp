#pragma once

#include <cstdint>
#include <deque>
#include <list>
#include <memory>
#include <optional>
#include <unordered_map>
#include <vector>

#include "nnpf/context.hpp"
#include "nnpf/nn.hpp"
#include "nnpf/prefetcher_api.hpp"

namespace nnpf {

struct NnPrefetcherConfig {
    NetworkConfig net;
    int context_depth = 8;
    uint64_t line = 64;

    size_t assoc_queue_capacity = 128;  // association depth N
    int candidate_window = 8;           // d most recent miss-marked addresses

    size_t prefetch_queue_capacity = 512;
    double threshold_hi = 0.7;
    double threshold_lo = 0.3;
    double confidence_gate = 0.6;  // below this a prediction stays a shadow
    bool force_shadow = false;

    bool hash_enabled = true;
    int hash_table_bits = 12;

    uint64_t max_delta_min = 0x2000;
    uint64_t max_delta_step = 0x2000;
    uint64_t max_delta_ceiling = 1ull << 20;
    uint64_t usefulness_window = 4096;  // triggering accesses per adapt step
    double usefulness_threshold = 0.20;
    int max_delta_sweeps = 2;

    uint64_t curve_window = 1024;  // accesses per convergence-curve point

    std::string validate() const;
};

struct AssociationEntry {
    ContextState context;
    uint64_t addr = 0;
    uint64_t pc = 0;
    bool selectable = false;  // false for plain L1 hits (depth tracking only)
    std::shared_ptr<const InferenceResult> cached;
};

struct TrainingCandidate {
    int64_t delta_lines = 0;
    uint64_t addr = 0;
};

// Policy selectors, pure over the candidate window (newest first).
size_t select_mse_candidate(uint16_t network_bits, const std::vector<TrainingCandidate>& c);
size_t select_hash_candidate(std::optional<int64_t> hash_delta,
                             const std::vector<TrainingCandidate>& c);

// Dynamic maximal-delta control: raise the limit while prefetches stay
// useless, sweep the range cyclically, then settle on the best-performing
// value.
class MaxDeltaController {
public:
    MaxDeltaController(uint64_t min, uint64_t step, uint64_t ceiling, double threshold,
                       int sweeps);

    uint64_t limit() const { return limit_; }
    bool settled() const { return settled_; }
    int sweeps_done() const { return sweeps_done_; }
    const std::vector<std::pair<uint64_t, double>>& history() const { return history_; }

    void note_resolved(bool useful);
    void adapt();  // call at usefulness-window boundaries only

private:
    uint64_t min_, step_, ceiling_;
    double threshold_;
    int max_sweeps_;
    uint64_t limit_;
    bool settled_ = false;
    int sweeps_done_ = 0;
    uint64_t window_resolved_ = 0;
    uint64_t window_useful_ = 0;
    std::vector<std::pair<uint64_t, double>> history_;
};

struct PrefetcherStateDump {
    size_t assoc_queue_size = 0;
    size_t prefetch_queue_size = 0;
    uint64_t max_delta_limit = 0;
    bool max_delta_settled = false;
    int sweeps_done = 0;
    size_t hash_valid_entries = 0;
    size_t hash_capacity = 0;
    uint64_t step_count = 0;
};

class NnPrefetcher final : public Prefetcher {
public:
    explicit NnPrefetcher(const NnPrefetcherConfig& config);

    void feedback(const AccessRecord& r) override;
    std::vector<PrefetchRequest> on_access(const AccessRecord& r, bool l1_hit,
                                           bool hit_prefetched_line) override;
    bool has_pending_prediction(uint64_t line_addr) const override;
    std::map<std::string, int64_t> stats() const override;
    std::vector<std::pair<uint64_t, double>> convergence_curve() const override;
    std::string name() const override { return "nn"; }

    const Network& network() const { return net_; }
    const MaxDeltaController& max_delta() const { return controller_; }
    PrefetcherStateDump dump_state() const;

private:
    struct QueueEntry {
        uint64_t line_addr = 0;
        uint64_t base_addr = 0;
        int64_t delta_lines = 0;
        int policy = 0;
        bool shadow = true;
        uint64_t push_index = 0;
        ContextState context;
        std::shared_ptr<const InferenceResult> cached;
    };
    struct HashEntry {
        uint16_t tag = 0;
        int64_t delta_lines = 0;
        bool valid = false;
    };

    void train_association(const AssociationEntry& popped, uint64_t seq);
    void resolve_entry(const QueueEntry& e, double depth_weight, uint64_t seq);
    void push_prediction(const AccessRecord& r, int policy, const Prediction& p,
                         const ContextState& ctx,
                         const std::shared_ptr<const InferenceResult>& cached,
                         std::vector<PrefetchRequest>& out);
    double depth_weight(uint64_t depth) const;
    void curve_account(uint64_t seq, int bit_error);

    NnPrefetcherConfig cfg_;
    Network net_;
    ContextHistory history_;
    ContextLayout layout_;
    std::deque<AssociationEntry> assoc_;
    std::list<QueueEntry> queue_;
    std::unordered_map<uint64_t, std::list<QueueEntry>::iterator> queue_index_;
    std::vector<HashEntry> hash_;
    MaxDeltaController controller_;

    uint64_t push_count_ = 0;
    uint64_t trigger_count_ = 0;

    // counters surfaced through stats()
    int64_t trainings_ = 0;
    int64_t starved_trainings_ = 0;
    int64_t skipped_uncached_ = 0;
    int64_t predictions_real_ = 0;
    int64_t predictions_shadow_ = 0;
    int64_t feedback_positive_ = 0;
    int64_t feedback_negative_ = 0;
    int64_t aged_out_ = 0;
    int64_t hash_hits_ = 0;
    int64_t hash_writes_ = 0;
    int64_t first_useful_seq_ = -1;
    int64_t hit_marked_candidates_ = 0;  // audit: must stay zero

    // convergence curve accumulation
    std::vector<std::pair<uint64_t, double>> curve_;
    uint64_t curve_boundary_;
    double curve_sum_ = 0;
    uint64_t curve_cnt_ = 0;
};

}  // namespace nnpf
