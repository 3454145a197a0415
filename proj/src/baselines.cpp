#include "nnpf/baselines.hpp"

#include <algorithm>
#include <stdexcept>

namespace nnpf {

namespace {

int64_t to_line(uint64_t addr, uint64_t line) { return int64_t(addr / line); }

uint64_t line_addr(int64_t line, uint64_t line_size) { return uint64_t(line) * line_size; }

}  // namespace

std::unique_ptr<Prefetcher> make_baseline(const std::string& name, const BaselineParams& p) {
    if (name == "none") return std::make_unique<NonePrefetcher>();
    if (name == "stride") return std::make_unique<StridePrefetcher>(p);
    if (name == "markov") return std::make_unique<MarkovPrefetcher>(p);
    if (name == "ghb_pcdc") return std::make_unique<GhbPcdcPrefetcher>(p);
    if (name == "sms") return std::make_unique<SmsPrefetcher>(p);
    if (name == "vldp") return std::make_unique<VldpPrefetcher>(p);
    throw std::invalid_argument("unknown baseline prefetcher: " + name);
}

// --- stride ------------------------------------------------------------------

StridePrefetcher::StridePrefetcher(const BaselineParams& p) : p_(p), table_(p.stride_table) {}

std::vector<PrefetchRequest> StridePrefetcher::on_access(const AccessRecord& r, bool, bool) {
    const int64_t line = to_line(r.addr, p_.line);
    Entry* e = table_.find(r.pc);
    if (!e) {
        table_.insert(r.pc, Entry{line, 0, 0, line});
        return {};
    }
    const int64_t d = line - e->last_line;
    e->last_line = line;
    if (d == 0) return {};
    if (d == e->stride) {
        e->confirms = std::min(e->confirms + 1, 8);
    } else {
        e->stride = d;
        e->confirms = 1;
        e->frontier = line;
    }
    if (e->confirms < 2) return {};

    // Run ahead of the demand stream: continue from the furthest line already
    // predicted so the lead keeps growing by one stride per access, up to the
    // lead cap.
    int64_t start = (e->stride > 0) ? std::max(e->frontier, line) : std::min(e->frontier, line);
    std::vector<PrefetchRequest> out;
    for (int k = 1; k <= p_.degree; ++k) {
        int64_t target = start + k * e->stride;
        if (std::abs(target - line) > p_.max_lead_lines) break;
        out.push_back({line_addr(target, p_.line), false});
        e->frontier = target;
    }
    issued_ += int64_t(out.size());
    return out;
}

std::map<std::string, int64_t> StridePrefetcher::stats() const {
    return {{"issued", issued_}, {"table_size", int64_t(table_.size())},
            {"table_capacity_ok", table_.size() <= table_.capacity()}};
}

// --- markov --------------------------------------------------------------------

MarkovPrefetcher::MarkovPrefetcher(const BaselineParams& p) : p_(p), table_(p.markov_table) {}

std::vector<PrefetchRequest> MarkovPrefetcher::on_access(const AccessRecord& r, bool, bool) {
    const uint64_t line = uint64_t(to_line(r.addr, p_.line));
    if (prev_line_) {
        Entry* e = table_.find(*prev_line_);
        if (!e) e = &table_.insert(*prev_line_, Entry{});
        auto it = std::find_if(e->succ.begin(), e->succ.end(),
                               [&](const Successor& s) { return s.line == line; });
        if (it != e->succ.end()) {
            it->count = std::min(it->count + 1, 15);
        } else if (int(e->succ.size()) < p_.markov_successors) {
            e->succ.push_back({line, 1});
        } else {
            auto weakest = std::min_element(e->succ.begin(), e->succ.end(),
                                            [](const Successor& a, const Successor& b) {
                                                return a.count < b.count;
                                            });
            *weakest = {line, 1};
        }
    }
    prev_line_ = line;

    std::vector<PrefetchRequest> out;
    if (Entry* e = table_.find(line)) {
        std::vector<Successor> ranked = e->succ;
        std::stable_sort(ranked.begin(), ranked.end(),
                         [](const Successor& a, const Successor& b) { return a.count > b.count; });
        for (int k = 0; k < p_.degree && k < int(ranked.size()); ++k)
            out.push_back({line_addr(int64_t(ranked[size_t(k)].line), p_.line), false});
    }
    issued_ += int64_t(out.size());
    return out;
}

std::map<std::string, int64_t> MarkovPrefetcher::stats() const {
    return {{"issued", issued_}, {"table_size", int64_t(table_.size())},
            {"table_capacity_ok", table_.size() <= table_.capacity()}};
}

// --- GHB PC/DC -----------------------------------------------------------------

GhbPcdcPrefetcher::GhbPcdcPrefetcher(const BaselineParams& p)
    : p_(p), buffer_(p.ghb_size), index_(p.ghb_index) {}

const GhbPcdcPrefetcher::GhbEntry* GhbPcdcPrefetcher::entry_for_serial(uint64_t serial) const {
    if (serial == 0 || serial + p_.ghb_size < next_serial_) return nullptr;  // overwritten
    if (serial >= next_serial_) return nullptr;
    const GhbEntry& e = buffer_[serial % p_.ghb_size];
    return e.serial == serial ? &e : nullptr;
}

std::vector<PrefetchRequest> GhbPcdcPrefetcher::on_access(const AccessRecord& r, bool, bool) {
    const int64_t line = to_line(r.addr, p_.line);

    IndexEntry* idx = index_.find(r.pc);
    const uint64_t serial = next_serial_++;
    buffer_[serial % p_.ghb_size] = {line, serial, idx ? idx->serial : 0};
    if (idx)
        idx->serial = serial;
    else
        idx = &index_.insert(r.pc, IndexEntry{serial, line});

    // Walk the per-PC chain, newest first, collecting line deltas.
    std::vector<int64_t> deltas;  // chronological after reversal
    const GhbEntry* cur = entry_for_serial(serial);
    while (cur && deltas.size() < 64) {
        const GhbEntry* prev = entry_for_serial(cur->prev_serial);
        if (!prev) break;
        deltas.push_back(cur->line - prev->line);
        cur = prev;
    }
    std::reverse(deltas.begin(), deltas.end());

    const size_t h = size_t(p_.ghb_history);
    if (deltas.size() < h + 1) return {};

    // Most recent occurrence of the latest h-delta pattern, then replay what
    // followed it (cyclically) past the run-ahead frontier.
    ptrdiff_t match = -1;
    for (ptrdiff_t i = ptrdiff_t(deltas.size()) - ptrdiff_t(h) - 1; i >= 0; --i) {
        bool ok = true;
        for (size_t k = 0; k < h; ++k)
            if (deltas[size_t(i) + k] != deltas[deltas.size() - h + k]) {
                ok = false;
                break;
            }
        if (ok) {
            match = i;
            break;
        }
    }
    if (match < 0) return {};

    const size_t replay_begin = size_t(match) + h;
    int64_t net = 0;
    for (size_t j = replay_begin; j < deltas.size(); ++j) net += deltas[j];
    const bool forward = net >= 0;

    std::vector<PrefetchRequest> out;
    int64_t cum = line;
    size_t j = replay_begin;
    int64_t frontier = idx->frontier;
    const int guard_max = int(p_.max_lead_lines) + 16;  // replay can walk the whole lead
    for (int guard = 0; guard < guard_max && int(out.size()) < p_.degree; ++guard) {
        cum += deltas[j];
        ++j;
        if (j >= deltas.size()) j = replay_begin;
        if (std::abs(cum - line) > p_.max_lead_lines) break;
        const bool beyond = forward ? cum > std::max(frontier, line) : cum < std::min(frontier, line);
        if (beyond) {
            out.push_back({line_addr(cum, p_.line), false});
            frontier = cum;
        }
    }
    idx->frontier = frontier;
    issued_ += int64_t(out.size());
    return out;
}

std::map<std::string, int64_t> GhbPcdcPrefetcher::stats() const {
    return {{"issued", issued_}, {"index_size", int64_t(index_.size())},
            {"index_capacity_ok", index_.size() <= index_.capacity()}};
}

// --- SMS -------------------------------------------------------------------------

SmsPrefetcher::SmsPrefetcher(const BaselineParams& p)
    : p_(p), region_lines_(p.sms_region / p.line), agt_(p.sms_agt), filter_(p.sms_filter),
      pht_(p.sms_pht) {
    if (region_lines_ == 0 || region_lines_ > 64)
        throw std::invalid_argument("sms: region must span 1..64 lines");
}

uint64_t SmsPrefetcher::pht_key(uint64_t pc, uint64_t offset) const {
    return (pc << 6) ^ offset;
}

void SmsPrefetcher::train(uint64_t, const Accumulation& acc) {
    if ((acc.bits & ~1ull) == 0) return;  // a lone trigger access carries no pattern
    pht_.insert(pht_key(acc.trigger_pc, acc.trigger_offset), acc.bits);
}

std::vector<PrefetchRequest> SmsPrefetcher::on_access(const AccessRecord& r, bool, bool) {
    const uint64_t region = r.addr / p_.sms_region;
    const uint64_t offset = (r.addr % p_.sms_region) / p_.line;

    if (Accumulation* acc = agt_.find(region)) {
        uint64_t rel = (offset + region_lines_ - acc->trigger_offset) % region_lines_;
        acc->bits |= 1ull << rel;
        return {};
    }
    if (FilterEntry* f = filter_.find(region)) {
        if (f->offset != offset) {
            // second distinct offset: start accumulating a pattern
            Accumulation acc;
            acc.trigger_pc = f->pc;
            acc.trigger_offset = f->offset;
            acc.bits = 1ull;  // the trigger itself
            uint64_t rel = (offset + region_lines_ - f->offset) % region_lines_;
            acc.bits |= 1ull << rel;
            if (auto evicted = agt_.insert_evict(region, acc))
                train(evicted->first, evicted->second);  // generation ends on displacement
        }
        return {};
    }

    // New region: predict from the trained pattern, then start tracking it.
    std::vector<PrefetchRequest> out;
    if (uint64_t* pattern = pht_.find(pht_key(r.pc, offset))) {
        const uint64_t region_base_line = region * region_lines_;
        for (uint64_t rel = 1; rel < region_lines_; ++rel) {
            if ((*pattern >> rel) & 1ull) {
                uint64_t off = (offset + rel) % region_lines_;
                out.push_back({line_addr(int64_t(region_base_line + off), p_.line), false});
            }
        }
    }
    filter_.insert(region, FilterEntry{r.pc, offset});
    issued_ += int64_t(out.size());
    return out;
}

std::map<std::string, int64_t> SmsPrefetcher::stats() const {
    return {{"issued", issued_},
            {"pht_size", int64_t(pht_.size())},
            {"pht_capacity_ok", pht_.size() <= pht_.capacity()},
            {"agt_capacity_ok", agt_.size() <= agt_.capacity()}};
}

// --- VLDP ---------------------------------------------------------------------

VldpPrefetcher::VldpPrefetcher(const BaselineParams& p)
    : p_(p), page_lines_(p.vldp_page / p.line), dhb_(p.vldp_dhb), opt_(p.vldp_opt) {
    for (int i = 0; i < 3; ++i) dpt_.emplace_back(p.vldp_dpt);
}

uint64_t VldpPrefetcher::pack_deltas(const std::vector<int64_t>& d, size_t n) {
    // keys the n most recent deltas (16 bits each, two's complement)
    uint64_t key = uint64_t(n) << 48;
    for (size_t i = 0; i < n; ++i)
        key = (key << 16) | (uint64_t(d[d.size() - 1 - i]) & 0xFFFF);
    return key;
}

std::optional<std::pair<int64_t, int>> VldpPrefetcher::predict(
    const std::vector<int64_t>& history) {
    for (int t = int(std::min(history.size(), size_t(3))); t >= 1; --t) {
        if (DptEntry* e = dpt_[size_t(t - 1)].find(pack_deltas(history, size_t(t))))
            return std::make_pair(e->pred, t - 1);
    }
    return std::nullopt;
}

void VldpPrefetcher::update_tables(DhbEntry& e) {
    // Every history length stays predictive; the lookup side prefers the
    // longest matching one. Saturating accuracy counters arbitrate replacement.
    const int64_t observed = e.deltas.back();
    std::vector<int64_t> prior(e.deltas.begin(), e.deltas.end() - 1);
    for (size_t t = 1; t <= std::min(prior.size(), size_t(3)); ++t) {
        const uint64_t key = pack_deltas(prior, t);
        if (DptEntry* cur = dpt_[t - 1].find(key)) {
            if (cur->pred == observed) {
                cur->accuracy = std::min(cur->accuracy + 1, 3);
            } else if (--cur->accuracy < 0) {
                cur->pred = observed;
                cur->accuracy = 0;
            }
        } else {
            dpt_[t - 1].insert(key, DptEntry{observed, 0});
        }
    }
}

std::vector<PrefetchRequest> VldpPrefetcher::on_access(const AccessRecord& r, bool, bool) {
    const uint64_t page = r.addr / p_.vldp_page;
    const int64_t offset = int64_t((r.addr % p_.vldp_page) / p_.line);
    const int64_t abs_line = to_line(r.addr, p_.line);

    DhbEntry* e = dhb_.find(page);
    if (!e) {
        dhb_.insert(page, DhbEntry{offset, {}, 0, 1});
        // first touch of a page: the offset table can seed one prefetch
        std::vector<PrefetchRequest> out;
        const OptEntry& o = opt_[size_t(offset) % opt_.size()];
        if (o.valid && o.accurate && o.pred != 0)
            out.push_back({line_addr(abs_line + o.pred, p_.line), false});
        issued_ += int64_t(out.size());
        return out;
    }

    const int64_t delta = offset - e->last_offset;
    if (delta == 0) return {};
    e->last_offset = offset;
    e->deltas.push_back(delta);
    if (e->deltas.size() > 4) e->deltas.erase(e->deltas.begin());
    e->times_used++;

    if (e->times_used == 2) {
        OptEntry& o = opt_[size_t(offset - delta) % opt_.size()];
        if (o.valid && o.pred == delta)
            o.accurate = true;
        else if (o.valid && !o.accurate)
            o = {delta, false, true};
        else if (!o.valid)
            o = {delta, false, true};
        else
            o.accurate = false;
    } else if (e->times_used > 2) {
        update_tables(*e);
    }

    // Cascaded prediction, longest history first. The stream frontier (and
    // the delta phase recorded at it) keeps prefetches ahead of the demand,
    // crossing page boundaries when the pattern does.
    std::vector<PrefetchRequest> out;
    if (frontier_ <= abs_line || frontier_ > abs_line + p_.max_lead_lines) {
        frontier_ = abs_line;
        frontier_hist_ = e->deltas;
    }
    std::vector<int64_t> hist = frontier_hist_;
    int64_t cum = frontier_;
    for (int k = 0; k < p_.degree; ++k) {
        auto pred = predict(hist);
        if (!pred) break;
        auto [d, table] = *pred;
        if (k == 0) e->last_predictor = table;
        if (d == 0 || (k > 0 && table == 0)) break;
        cum += d;
        if (std::abs(cum - abs_line) > p_.max_lead_lines) break;
        out.push_back({line_addr(cum, p_.line), false});
        hist.push_back(d);
        if (hist.size() > 4) hist.erase(hist.begin());
    }
    if (!out.empty()) {
        frontier_ = to_line(out.back().addr, p_.line);
        frontier_hist_ = hist;
    }
    issued_ += int64_t(out.size());
    return out;
}

std::map<std::string, int64_t> VldpPrefetcher::stats() const {
    int64_t dpt_ok = 1;
    for (const auto& t : dpt_)
        if (t.size() > t.capacity()) dpt_ok = 0;
    return {{"issued", issued_}, {"dhb_size", int64_t(dhb_.size())},
            {"dhb_capacity_ok", dhb_.size() <= dhb_.capacity()}, {"dpt_capacity_ok", dpt_ok}};
}

}  // namespace nnpf
