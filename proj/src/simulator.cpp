#include "nnpf/simulator.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace nnpf {

std::string CacheConfig::validate() const {
    if (line == 0 || (line & (line - 1)) != 0) return "line size must be a power of two";
    if (ways <= 0) return "ways must be positive";
    if (size == 0 || size % (uint64_t(ways) * line) != 0)
        return "cache size must divide evenly into ways x line";
    if (miss_latency <= 0 || hit_latency <= 0 || prefetch_latency <= 0)
        return "latencies must be positive";
    return {};
}

CacheModel::CacheModel(const CacheConfig& cfg) {
    std::string err = cfg.validate();
    if (!err.empty()) throw std::invalid_argument("invalid cache config: " + err);
    sets_ = cfg.size / (uint64_t(cfg.ways) * cfg.line);
    ways_ = cfg.ways;
    lines_.assign(sets_ * uint64_t(ways_), Line{});
}

CacheModel::Line* CacheModel::find(uint64_t line_addr) {
    const uint64_t set = line_addr % sets_;
    Line* base = &lines_[set * uint64_t(ways_)];
    for (int w = 0; w < ways_; ++w)
        if (base[w].valid && base[w].tag == line_addr) return &base[w];
    return nullptr;
}

const CacheModel::Line* CacheModel::find(uint64_t line_addr) const {
    return const_cast<CacheModel*>(this)->find(line_addr);
}

CacheModel::AccessResult CacheModel::access(uint64_t line_addr) {
    ++tick_;
    AccessResult res;
    if (Line* l = find(line_addr)) {
        res.hit = true;
        res.prefetched_first_hit = l->prefetched;
        l->prefetched = false;  // cleared on first demand-hit classification
        l->lru = tick_;
    }
    return res;
}

bool CacheModel::install(uint64_t line_addr, bool prefetched) {
    ++tick_;
    if (Line* l = find(line_addr)) {  // refresh in place
        l->lru = tick_;
        return false;
    }
    const uint64_t set = line_addr % sets_;
    Line* base = &lines_[set * uint64_t(ways_)];
    Line* victim = &base[0];
    for (int w = 0; w < ways_; ++w) {
        if (!base[w].valid) {
            victim = &base[w];
            break;
        }
        if (base[w].lru < victim->lru) victim = &base[w];
    }
    const bool wasted = victim->valid && victim->prefetched;
    *victim = Line{line_addr, true, prefetched, tick_};
    return wasted;
}

bool CacheModel::contains(uint64_t line_addr) const { return find(line_addr) != nullptr; }

uint64_t CacheModel::wasted_resident_prefetches() const {
    uint64_t n = 0;
    for (const auto& l : lines_)
        if (l.valid && l.prefetched) ++n;
    return n;
}

MetricsReport run(const std::vector<AccessRecord>& trace, Prefetcher& prefetcher,
                  const SimConfig& config) {
    if (trace.empty()) throw std::invalid_argument("run: trace is empty");
    std::string err = config.cache.validate();
    if (!err.empty()) throw std::invalid_argument("invalid cache config: " + err);
    if (config.warmup_fraction < 0 || config.warmup_fraction >= 1)
        throw std::invalid_argument("warmup fraction must be in [0,1)");

    const uint64_t line_size = config.cache.line;
    const uint64_t warmup = uint64_t(config.warmup_fraction * double(trace.size()));

    CacheModel cache(config.cache);
    CacheModel baseline_cache(config.cache);
    std::map<uint64_t, double> inflight;  // line -> completion time (access units)

    MetricsReport rep;
    rep.prefetcher_name = prefetcher.name();

    for (size_t t = 0; t < trace.size(); ++t) {
        const AccessRecord& r = trace[t];
        const uint64_t line = r.addr / line_size;
        const bool counted = t >= warmup;

        // install prefetch fills that completed by now
        for (auto it = inflight.begin(); it != inflight.end();) {
            if (it->second <= double(t)) {
                if (cache.install(it->first, true) && counted) ++rep.useless_prefetches;
                it = inflight.erase(it);
            } else {
                ++it;
            }
        }

        auto probe = cache.access(line);
        DemandBucket bucket;
        double charge;
        if (probe.hit) {
            bucket = probe.prefetched_first_hit ? DemandBucket::UsefulPrefetchFirstHit
                                                : DemandBucket::SubsequentHits;
            charge = config.cache.hit_latency;
        } else if (auto it = inflight.find(line); it != inflight.end()) {
            bucket = DemandBucket::SentNotCompleted;
            charge = it->second - double(t);  // residual wait for the in-flight fill
            inflight.erase(it);
            if (cache.install(line, false) && counted) ++rep.useless_prefetches;
        } else {
            bucket = prefetcher.has_pending_prediction(line) ? DemandBucket::TriggeredNotSent
                                                             : DemandBucket::NeverPrefetchedMiss;
            charge = config.cache.miss_latency;
            if (cache.install(line, false) && counted) ++rep.useless_prefetches;
        }

        // prefetcher-free reference pass for the stall baseline
        double baseline_charge;
        {
            auto bp = baseline_cache.access(line);
            if (bp.hit) {
                baseline_charge = config.cache.hit_latency;
            } else {
                baseline_charge = config.cache.miss_latency;
                baseline_cache.install(line, false);
            }
        }

        if (counted) {
            ++rep.total_demands;
            ++rep.buckets[int(bucket)];
            rep.stall_units_actual += charge;
            rep.stall_units_baseline += baseline_charge;
        }

        prefetcher.feedback(r);
        auto requests = prefetcher.on_access(r, probe.hit, probe.prefetched_first_hit);
        for (const auto& req : requests) {
            if (req.shadow) continue;  // tracked by the prefetcher, never sent
            const uint64_t pf_line = req.addr / line_size;
            if (cache.contains(pf_line) || inflight.count(pf_line)) continue;
            inflight[pf_line] = double(t) + config.cache.prefetch_latency;
            ++rep.issued_prefetches;
        }
    }

    rep.useless_prefetches += cache.wasted_resident_prefetches();

    const double useful = double(rep.bucket(DemandBucket::UsefulPrefetchFirstHit));
    const double cov_den = useful + double(rep.bucket(DemandBucket::NeverPrefetchedMiss)) +
                           double(rep.bucket(DemandBucket::TriggeredNotSent)) +
                           double(rep.bucket(DemandBucket::SentNotCompleted));
    rep.coverage = cov_den > 0 ? useful / cov_den : 0.0;
    const double acc_den = useful + double(rep.useless_prefetches);
    rep.accuracy = acc_den > 0 ? useful / acc_den : 0.0;
    rep.mpki = rep.total_demands > 0 ? 1000.0 * double(rep.miss_count()) / double(rep.total_demands)
                                     : 0.0;
    rep.speedup_proxy =
        rep.stall_units_actual > 0 ? rep.stall_units_baseline / rep.stall_units_actual : 1.0;

    rep.prefetcher_stats = prefetcher.stats();
    rep.nn_error_curve = prefetcher.convergence_curve();
    return rep;
}

std::string MetricsReport::to_json() const {
    nlohmann::ordered_json j;
    j["version"] = 1;
    j["prefetcher"] = prefetcher_name;
    j["config_hash"] = config_hash;
    j["total_demands"] = total_demands;
    j["buckets"] = {
        {"never_prefetched_miss", buckets[0]},
        {"triggered_not_sent", buckets[1]},
        {"sent_not_completed", buckets[2]},
        {"useful_prefetch_first_hit", buckets[3]},
        {"subsequent_hits", buckets[4]},
    };
    j["useless_prefetches"] = useless_prefetches;
    j["issued_prefetches"] = issued_prefetches;
    j["coverage"] = coverage;
    j["accuracy"] = accuracy;
    j["mpki"] = mpki;
    j["stall_units_baseline"] = stall_units_baseline;
    j["stall_units_actual"] = stall_units_actual;
    j["speedup_proxy"] = speedup_proxy;
    auto curve = nlohmann::ordered_json::array();
    for (const auto& [x, e] : nn_error_curve) curve.push_back({{"access", x}, {"bit_error", e}});
    j["nn_error_curve"] = curve;
    nlohmann::ordered_json stats;
    for (const auto& [k, v] : prefetcher_stats) stats[k] = v;
    j["prefetcher_stats"] = stats;
    return j.dump(2);
}

std::string MetricsReport::to_text() const {
    std::ostringstream os;
    os << "prefetcher:            " << prefetcher_name << "\n"
       << "demands (counted):     " << total_demands << "\n"
       << "  never prefetched:    " << buckets[0] << "\n"
       << "  triggered not sent:  " << buckets[1] << "\n"
       << "  sent not completed:  " << buckets[2] << "\n"
       << "  useful first hits:   " << buckets[3] << "\n"
       << "  subsequent hits:     " << buckets[4] << "\n"
       << "useless prefetches:    " << useless_prefetches << "\n"
       << "issued prefetches:     " << issued_prefetches << "\n"
       << "coverage:              " << coverage << "\n"
       << "accuracy:              " << accuracy << "\n"
       << "mpki:                  " << mpki << "\n"
       << "stall units baseline:  " << stall_units_baseline << "\n"
       << "stall units actual:    " << stall_units_actual << "\n"
       << "speedup proxy:         " << speedup_proxy << "\n";
    return os.str();
}

}  // namespace nnpf
