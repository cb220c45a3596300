#pragma once

// Starting-configuration pools keyed by topological state, filled by
// harvesting the configurations visited during episodes.

#include <cstdint>
#include <random>
#include <unordered_map>
#include <vector>

#include "knotforge/episode.hpp"
#include "knotforge/moves.hpp"

namespace knotforge {

template <class Config>
struct Reservoir {
    std::vector<Config> items;
    std::uint64_t seen = 0;
};

/// Per-state reservoir samples (algorithm R) of configurations q with
/// Top(q) = key.
template <class Config = RopeConfig>
class ConfigPool {
public:
    explicit ConfigPool(std::size_t capacity = 512, std::uint64_t seed = 0) : capacity_(capacity), rng_(seed) {
        if (capacity_ == 0) throw InvalidConfig("pool capacity must be positive");
    }

    void insert(const TopoState& s, const Config& q) {
        auto& r = pools_[s];
        ++r.seen;
        if (r.items.size() < capacity_) {
            r.items.push_back(q);
            return;
        }
        std::uniform_int_distribution<std::uint64_t> pick(0, r.seen - 1);
        const std::uint64_t j = pick(rng_);
        if (j < capacity_) r.items[j] = q;
    }

    const std::vector<Config>* find(const TopoState& s) const {
        auto it = pools_.find(s);
        if (it == pools_.end() || it->second.items.empty()) return nullptr;
        return &it->second.items;
    }

    std::size_t size(const TopoState& s) const {
        auto p = find(s);
        return p ? p->size() : 0;
    }
    std::uint64_t seen(const TopoState& s) const {
        auto it = pools_.find(s);
        return it == pools_.end() ? 0 : it->second.seen;
    }
    std::size_t capacity() const { return capacity_; }
    const auto& states() const { return pools_; }
    auto& rng() { return rng_; }

    /// States with at least one pooled configuration, in code order.
    std::vector<TopoState> nonempty_states() const {
        std::vector<TopoState> out;
        for (const auto& [s, r] : pools_)
            if (!r.items.empty()) out.push_back(s);
        std::sort(out.begin(), out.end(), [](const TopoState& a, const TopoState& b) { return to_string(a) < to_string(b); });
        return out;
    }

    /// Restores a reservoir verbatim (checkpoint loading).
    void restore(const TopoState& s, std::vector<Config> items, std::uint64_t seen) {
        auto& r = pools_[s];
        r.items = std::move(items);
        r.seen = seen;
    }

private:
    std::size_t capacity_;
    std::mt19937_64 rng_;
    std::unordered_map<TopoState, Reservoir<Config>, TopoStateHash> pools_;
};

struct HarvestStats {
    int inserted = 0;
    int spot_checked = 0;
};

/// Inserts every configuration the episode reached (the start is already
/// pooled) under its observed state, including unintended states. States
/// with more drawn crossings than `max_crossings` cannot be planned from and
/// are skipped. A fraction of insertions re-runs Top to confirm the key.
template <class Env>
HarvestStats harvest(const Env& env, const EpisodeTrace<typename Env::Config>& trace,
                     ConfigPool<typename Env::Config>& pools, double spot_check_rate = 0.05,
                     int max_crossings = kMaxEnumerationPhi) {
    HarvestStats st;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (const auto& step : trace.steps) {
        if (step.degenerate || step.next.crossings() > max_crossings) continue;
        if (spot_check_rate > 0 && u(pools.rng()) < spot_check_rate) {
            ++st.spot_checked;
            if (!states_equal(env.top(step.after), step.next))
                throw Error("harvest: pooled configuration does not match its state " + to_string(step.next));
        }
        pools.insert(step.next, step.after);
        ++st.inserted;
    }
    return st;
}

}  // namespace knotforge
