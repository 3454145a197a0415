#include "nnpf/prefetcher.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "nnpf/bits.hpp"

namespace nnpf {

std::string NnPrefetcherConfig::validate() const {
    std::string err = net.validate();
    if (!err.empty()) return err;
    if (net.subset_width() != 16) return "the output layer must split into 16-wide subsets";
    if (line == 0 || (line & (line - 1)) != 0) return "line size must be a power of two";
    if (assoc_queue_capacity == 0) return "association queue capacity must be positive";
    if (candidate_window <= 0) return "candidate window must be positive";
    if (prefetch_queue_capacity == 0) return "prefetch queue capacity must be positive";
    if (hash_table_bits < 1 || hash_table_bits > 24) return "hash table bits must be in [1,24]";
    if (threshold_lo >= threshold_hi) return "thresholds must satisfy lo < hi";
    if (max_delta_min == 0 || max_delta_step == 0) return "max-delta steps must be positive";
    if (max_delta_ceiling < max_delta_min) return "max-delta ceiling below its minimum";
    if (usefulness_window == 0) return "usefulness window must be positive";
    if (curve_window == 0) return "curve window must be positive";
    return {};
}

size_t select_mse_candidate(uint16_t network_bits, const std::vector<TrainingCandidate>& c) {
    size_t best = 0;
    int best_dist = 1 << 20;
    for (size_t i = 0; i < c.size(); ++i) {
        int d = bit_match_distance({network_bits, 15}, {delta_to_bits(c[i].delta_lines), 15});
        if (d < best_dist) {
            best_dist = d;
            best = i;
        }
    }
    return best;
}

size_t select_hash_candidate(std::optional<int64_t> hash_delta,
                             const std::vector<TrainingCandidate>& c) {
    if (hash_delta) {
        for (size_t i = 0; i < c.size(); ++i)
            if (c[i].delta_lines == *hash_delta) return i;
    }
    return 0;  // most recent address
}

MaxDeltaController::MaxDeltaController(uint64_t min, uint64_t step, uint64_t ceiling,
                                       double threshold, int sweeps)
    : min_(min), step_(step), ceiling_(ceiling), threshold_(threshold), max_sweeps_(sweeps),
      limit_(min) {}

void MaxDeltaController::note_resolved(bool useful) {
    ++window_resolved_;
    if (useful) ++window_useful_;
}

void MaxDeltaController::adapt() {
    const double usefulness =
        window_resolved_ > 0 ? double(window_useful_) / double(window_resolved_) : 0.0;
    history_.emplace_back(limit_, usefulness);
    window_resolved_ = 0;
    window_useful_ = 0;
    if (settled_) return;

    if (usefulness >= threshold_) return;  // current limit is earning its keep

    if (limit_ + step_ > ceiling_) {
        ++sweeps_done_;
        if (sweeps_done_ >= max_sweeps_) {
            auto best = std::max_element(
                history_.begin(), history_.end(),
                [](const auto& a, const auto& b) { return a.second < b.second; });
            limit_ = best->first;
            settled_ = true;
            return;
        }
        limit_ = min_;
    } else {
        limit_ += step_;
    }
}

NnPrefetcher::NnPrefetcher(const NnPrefetcherConfig& config)
    : cfg_(config), net_(Network::init(config.net)), history_(config.context_depth),
      layout_(ContextLayout::fig5_default()),
      controller_(config.max_delta_min, config.max_delta_step, config.max_delta_ceiling,
                  config.usefulness_threshold, config.max_delta_sweeps),
      curve_boundary_(config.curve_window) {
    std::string err = cfg_.validate();
    if (!err.empty()) throw std::invalid_argument("invalid prefetcher config: " + err);
    hash_.assign(size_t(1) << cfg_.hash_table_bits, HashEntry{});
}

double NnPrefetcher::depth_weight(uint64_t depth) const {
    const double cap = double(cfg_.prefetch_queue_capacity);
    const double half = cap / 2.0;
    if (depth == 0 || double(depth) >= cap) return 0.0;
    return 1.0 - std::abs(double(depth) - half) / half;
}

void NnPrefetcher::curve_account(uint64_t seq, int bit_error) {
    while (seq >= curve_boundary_) {
        if (curve_cnt_ > 0) curve_.emplace_back(curve_boundary_, curve_sum_ / double(curve_cnt_));
        curve_sum_ = 0;
        curve_cnt_ = 0;
        curve_boundary_ += cfg_.curve_window;
    }
    curve_sum_ += bit_error;
    ++curve_cnt_;
}

void NnPrefetcher::resolve_entry(const QueueEntry& e, double weight, uint64_t /*seq*/) {
    const bool useful = weight > 0.0;
    controller_.note_resolved(useful);
    const Eigen::VectorXd input = context_to_input(e.context);
    Eigen::VectorXd targets = Eigen::VectorXd::Zero(16);
    std::vector<bool> mask(16, false);
    if (useful) {
        // strengthen the pair that was hit: delta bits plus a confidence level
        // scaled by how useful the depth was
        const uint16_t bits = delta_to_bits(e.delta_lines);
        for (int k = 0; k < 15; ++k) {
            targets(k) = (bits >> (14 - k)) & 1 ? 1.0 : 0.0;
            mask[size_t(k)] = true;
        }
        targets(15) = 0.5 + 0.5 * weight;
        mask[15] = true;
        ++feedback_positive_;
    } else {
        // only the confidence neuron can absorb negative feedback
        targets(15) = 0.0;
        mask[15] = true;
        ++feedback_negative_;
    }
    net_.train(*e.cached, input, e.policy, targets, mask, cfg_.net.learning_rate);
}

void NnPrefetcher::feedback(const AccessRecord& r) {
    const uint64_t line = r.addr / cfg_.line;
    auto it = queue_index_.find(line);
    if (it == queue_index_.end()) return;
    const QueueEntry e = *it->second;
    queue_.erase(it->second);
    queue_index_.erase(it);

    const uint64_t depth = push_count_ - e.push_index;
    const double w = depth_weight(depth);
    if (w > 0.0 && first_useful_seq_ < 0) first_useful_seq_ = int64_t(r.seq);
    resolve_entry(e, w, r.seq);
}

void NnPrefetcher::push_prediction(const AccessRecord& r, int policy, const Prediction& p,
                                   const ContextState& ctx,
                                   const std::shared_ptr<const InferenceResult>& cached,
                                   std::vector<PrefetchRequest>& out) {
    const int64_t base_line = int64_t(r.addr / cfg_.line);
    const int64_t target_line = base_line + p.delta_lines;
    if (target_line < 0) return;
    const uint64_t addr = uint64_t(target_line) * cfg_.line;
    const bool shadow = cfg_.force_shadow || p.confidence < cfg_.confidence_gate;

    for (const auto& req : out)
        if (req.addr == addr) return;  // both subsets agreed; the first one owns it

    QueueEntry e;
    e.line_addr = uint64_t(target_line);
    e.base_addr = r.addr;
    e.delta_lines = p.delta_lines;
    e.policy = policy;
    e.shadow = shadow;
    e.push_index = ++push_count_;
    e.context = ctx;
    e.cached = cached;

    if (auto it = queue_index_.find(e.line_addr); it != queue_index_.end()) {
        // re-predicted address refreshes instead of duplicating
        queue_.erase(it->second);
        queue_index_.erase(it);
    } else if (queue_.size() >= cfg_.prefetch_queue_capacity) {
        const QueueEntry& oldest = queue_.front();
        ++aged_out_;
        resolve_entry(oldest, 0.0, r.seq);  // dropped off the queue unhit
        queue_index_.erase(oldest.line_addr);
        queue_.pop_front();
    }
    queue_.push_back(e);
    queue_index_[e.line_addr] = std::prev(queue_.end());

    out.push_back({addr, shadow});
    if (shadow)
        ++predictions_shadow_;
    else
        ++predictions_real_;
}

std::vector<PrefetchRequest> NnPrefetcher::on_access(const AccessRecord& r, bool l1_hit,
                                                     bool hit_prefetched_line) {
    history_.update(r);
    const ContextState s0 = history_.snapshot(layout_);
    const bool trigger = !l1_hit || hit_prefetched_line;

    std::vector<PrefetchRequest> out;
    std::shared_ptr<const InferenceResult> cached;
    if (trigger) {
        ++trigger_count_;
        cached = std::make_shared<const InferenceResult>(net_.infer(s0));
        for (int subset = 0; subset < cfg_.net.subsets; ++subset) {
            auto pred =
                interpret_output(*cached, cfg_.net, subset, cfg_.threshold_hi, cfg_.threshold_lo);
            if (pred) push_prediction(r, subset, *pred, s0, cached, out);
        }
        if (trigger_count_ % cfg_.usefulness_window == 0) controller_.adapt();
    }

    assoc_.push_back(AssociationEntry{s0, r.addr, r.pc, trigger, cached});
    if (assoc_.size() > cfg_.assoc_queue_capacity) {
        AssociationEntry popped = std::move(assoc_.front());
        assoc_.pop_front();
        if (popped.cached)
            train_association(popped, r.seq);
        else
            ++skipped_uncached_;
    }
    return out;
}

void NnPrefetcher::train_association(const AssociationEntry& popped, uint64_t seq) {
    // Candidate window: the d most recent miss-marked addresses, kept only
    // when they fall inside the current maximal-delta limit and the
    // 15-bit delta encoding.
    std::vector<TrainingCandidate> candidates;
    const uint64_t limit = controller_.limit();
    int window = 0;
    for (auto it = assoc_.rbegin();
         it != assoc_.rend() && window < cfg_.candidate_window; ++it) {
        if (!it->selectable) continue;
        ++window;  // only the most recent d miss-marked entries qualify
        const int64_t byte_delta = int64_t(it->addr) - int64_t(popped.addr);
        if (std::abs(byte_delta) > int64_t(limit)) continue;
        const int64_t lines =
            int64_t(it->addr / cfg_.line) - int64_t(popped.addr / cfg_.line);
        if (lines < twos_complement_min(15) || lines > twos_complement_max(15)) continue;
        candidates.push_back({lines, it->addr});
    }
    if (candidates.empty()) {
        ++starved_trainings_;
        return;
    }

    const Eigen::VectorXd input = context_to_input(popped.context);
    auto value_target = [](int64_t delta_lines) {
        Eigen::VectorXd t = Eigen::VectorXd::Zero(16);
        const uint16_t bits = delta_to_bits(delta_lines);
        for (int k = 0; k < 15; ++k) t(k) = (bits >> (14 - k)) & 1 ? 1.0 : 0.0;
        return t;
    };
    std::vector<bool> value_mask(16, true);
    value_mask[15] = false;  // confidence learns from feedback only

    // subset 0: the candidate closest to the network's own output
    const uint16_t out_bits = rounded_subset_bits(*popped.cached, cfg_.net, 0);
    const auto& mse_pick = candidates[select_mse_candidate(out_bits, candidates)];
    net_.train(*popped.cached, input, 0, value_target(mse_pick.delta_lines), value_mask,
               cfg_.net.learning_rate);
    curve_account(seq, bit_match_distance({out_bits, 15}, {delta_to_bits(mse_pick.delta_lines), 15}));

    // subset 1: prefer the candidate remembered by the context hash, falling
    // back to the most recent one. Disabling the hash keeps the policy but
    // drops its memory, so the pick follows every candidate-window change.
    std::optional<int64_t> hash_delta;
    size_t slot = 0;
    uint16_t tag = 0;
    if (cfg_.hash_enabled) {
        slot = hash_context(popped.context, cfg_.hash_table_bits);
        tag = context_fingerprint(popped.context);
        const HashEntry& h = hash_[slot];
        if (h.valid && h.tag == tag) hash_delta = h.delta_lines;
    }
    const size_t hash_idx = select_hash_candidate(hash_delta, candidates);
    if (hash_delta && candidates[hash_idx].delta_lines == *hash_delta) ++hash_hits_;
    const auto& hash_pick = candidates[hash_idx];
    net_.train(*popped.cached, input, 1, value_target(hash_pick.delta_lines), value_mask,
               cfg_.net.learning_rate);
    if (cfg_.hash_enabled) {
        hash_[slot] = HashEntry{tag, hash_pick.delta_lines, true};
        ++hash_writes_;
    }

    ++trainings_;
}

bool NnPrefetcher::has_pending_prediction(uint64_t line_addr) const {
    auto it = queue_index_.find(line_addr);
    return it != queue_index_.end() && it->second->shadow;
}

std::map<std::string, int64_t> NnPrefetcher::stats() const {
    return {
        {"trainings", trainings_},
        {"starved_trainings", starved_trainings_},
        {"skipped_uncached", skipped_uncached_},
        {"predictions_real", predictions_real_},
        {"predictions_shadow", predictions_shadow_},
        {"feedback_positive", feedback_positive_},
        {"feedback_negative", feedback_negative_},
        {"aged_out", aged_out_},
        {"hash_hits", hash_hits_},
        {"hash_writes", hash_writes_},
        {"first_useful_seq", first_useful_seq_},
        {"hit_marked_candidates", hit_marked_candidates_},
        {"max_delta_limit", int64_t(controller_.limit())},
        {"max_delta_settled", controller_.settled() ? 1 : 0},
        {"assoc_queue_size", int64_t(assoc_.size())},
        {"prefetch_queue_size", int64_t(queue_.size())},
    };
}

std::vector<std::pair<uint64_t, double>> NnPrefetcher::convergence_curve() const {
    auto curve = curve_;
    if (curve_cnt_ > 0) curve.emplace_back(curve_boundary_, curve_sum_ / double(curve_cnt_));
    return curve;
}

PrefetcherStateDump NnPrefetcher::dump_state() const {
    PrefetcherStateDump d;
    d.assoc_queue_size = assoc_.size();
    d.prefetch_queue_size = queue_.size();
    d.max_delta_limit = controller_.limit();
    d.max_delta_settled = controller_.settled();
    d.sweeps_done = controller_.sweeps_done();
    d.hash_capacity = hash_.size();
    for (const auto& h : hash_)
        if (h.valid) ++d.hash_valid_entries;
    d.step_count = net_.step_count();
    return d;
}

}  // namespace nnpf
