#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <vector>

#include "fleet.hpp"

namespace evcs {

/// One EV as seen by the day planner.
struct PlanJob {
    int id = 0;
    int first_slot = 0; // first slot it may charge
    int end_slot = 0;   // departure
    double power_kw = 0.0;
    int slots = 0;      // charge slots still owed
    bool running = false;
    int starts_left = 0; // charging blocks it may still begin
};

struct PlanSettings {
    int restarts = 20;        // eager plans tried per slot
    double keep_bonus = 12.0; // slack credit, in slots, for a job already charging
    double jitter_sd = 2.0;   // slots of noise on the priority in restarts
};

struct PlanOutcome {
    int misses = 0;      // jobs left with slots owed
    long owed_slots = 0; // total of those slots
    std::vector<bool> now; // charging in the first planned slot
};

/// Eager on-off schedule from `from` to the end of the day: in each slot
/// jobs are served by least slack (plus `jitter`) while `capacity_kw[s]`
/// lasts.
inline PlanOutcome eager_plan(const std::vector<PlanJob>& jobs, const std::vector<double>& capacity_kw, int from,
                              double keep_bonus, const std::vector<double>& jitter = {}) {
    const std::size_t n = jobs.size();
    std::vector<int> owed(n);
    std::vector<int> starts(n);
    std::vector<bool> on(n);
    for (std::size_t i = 0; i < n; ++i) {
        owed[i] = jobs[i].slots;
        starts[i] = jobs[i].starts_left;
        on[i] = jobs[i].running;
    }
    PlanOutcome out;
    out.now.assign(n, false);
    std::vector<std::size_t> cand;
    for (int s = from; s < static_cast<int>(capacity_kw.size()); ++s) {
        cand.clear();
        for (std::size_t i = 0; i < n; ++i) {
            const auto& j = jobs[i];
            if (s < j.first_slot || s >= j.end_slot || owed[i] <= 0) {
                on[i] = false;
                continue;
            }
            if (on[i] || starts[i] > 0) cand.push_back(i);
        }
        // running jobs are preferred by `keep_bonus` slots of slack; jobs with
        // no slack, or running ones that could not start again, go first
        const auto locked = [&](std::size_t i) {
            return (on[i] && starts[i] <= 0) || jobs[i].end_slot - s - owed[i] <= 0;
        };
        const auto key = [&](std::size_t i) {
            return (jobs[i].end_slot - s - owed[i]) + (i < jitter.size() ? jitter[i] : 0.0) -
                   (on[i] ? keep_bonus : 0.0);
        };
        std::stable_sort(cand.begin(), cand.end(), [&](std::size_t a, std::size_t b) {
            if (locked(a) != locked(b)) return locked(a);
            return key(a) < key(b);
        });
        double left = capacity_kw[static_cast<std::size_t>(s)];
        std::vector<bool> next(n, false);
        for (std::size_t i : cand) {
            if (jobs[i].power_kw > left + 1e-9) continue;
            left -= jobs[i].power_kw;
            next[i] = true;
        }
        for (std::size_t i = 0; i < n; ++i) {
            if (next[i]) {
                if (!on[i]) --starts[i];
                --owed[i];
            }
            on[i] = next[i];
        }
        if (s == from) out.now = next;
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (owed[i] > 0) {
            ++out.misses;
            out.owed_slots += owed[i];
        }
    }
    return out;
}

namespace detail {

inline std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

} // namespace detail

/// Best of `restarts` eager plans (the first without jitter): fewest
/// misses, then fewest owed slots. A job's jitter depends only on `seed`,
/// the restart and its id, so replanning later in the day keeps the same
/// priorities.
inline PlanOutcome best_plan(const std::vector<PlanJob>& jobs, const std::vector<double>& capacity_kw, int from,
                             const PlanSettings& settings, std::uint64_t seed) {
    PlanOutcome best = eager_plan(jobs, capacity_kw, from, settings.keep_bonus);
    std::vector<double> jitter(jobs.size());
    for (int k = 1; k < settings.restarts && best.misses > 0; ++k) {
        for (std::size_t i = 0; i < jobs.size(); ++i) {
            std::mt19937_64 rng(detail::splitmix(seed ^ detail::splitmix(static_cast<std::uint64_t>(k) << 32 |
                                                                         static_cast<std::uint32_t>(jobs[i].id))));
            jitter[i] = std::normal_distribution<double>(0.0, settings.jitter_sd)(rng);
        }
        auto p = eager_plan(jobs, capacity_kw, from, settings.keep_bonus, jitter);
        if (p.misses < best.misses || (p.misses == best.misses && p.owed_slots < best.owed_slots)) best = std::move(p);
    }
    return best;
}

/// Charge candidates the day plan charges at slot t. Each EV is owed the
/// slots that bring it within one charge increment of its target; EVs that
/// have not arrived take part through their windows. Slot t uses the known
/// headroom `now_kw`, later slots `headroom_kw`.
inline std::vector<std::size_t> planned_charges(const std::vector<EvState>& fleet,
                                                const std::vector<std::size_t>& charge, int t,
                                                const std::vector<double>& headroom_kw, double now_kw,
                                                const FleetConfig& cfg, const PlanSettings& settings,
                                                std::uint64_t seed) {
    std::vector<PlanJob> jobs;
    std::vector<std::size_t> owner;
    for (std::size_t i = 0; i < fleet.size(); ++i) {
        const auto& ev = fleet[i];
        if (ev.mode == ChargingMode::M0 || ev.departure_slot <= t) continue;
        const bool is_candidate = std::find(charge.begin(), charge.end(), i) != charge.end();
        if (ev.arrival_slot <= t && !is_candidate) continue;
        PlanJob j;
        j.id = ev.id;
        j.first_slot = std::max(ev.arrival_slot, t);
        j.end_slot = ev.departure_slot;
        j.power_kw = ev.power_kw();
        j.slots = guaranteed_slots_needed(ev, cfg);
        if (j.slots <= 0) continue;
        j.running = ev.arrival_slot <= t && ev.last_op() == Op::charge;
        // a new block costs an on and an off switch, stopping a running one an off
        const int free = cfg.n_max_switches - ev.switch_events - (j.running ? 1 : 0);
        j.starts_left = std::max(0, free / 2);
        jobs.push_back(j);
        owner.push_back(i);
    }
    std::vector<double> capacity(headroom_kw.size(), 0.0);
    for (std::size_t s = static_cast<std::size_t>(t) + 1; s < capacity.size(); ++s) {
        capacity[s] = std::max(0.0, headroom_kw[s]);
    }
    if (static_cast<std::size_t>(t) < capacity.size()) capacity[static_cast<std::size_t>(t)] = std::max(0.0, now_kw);

    const auto plan = best_plan(jobs, capacity, t, settings, seed);
    std::vector<std::size_t> out;
    for (std::size_t k = 0; k < jobs.size(); ++k) {
        if (plan.now[k]) out.push_back(owner[k]);
    }
    return out;
}

} // namespace evcs
