#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "common.hpp"
#include "fleet.hpp"
#include "ga.hpp"
#include "powerflow.hpp"
#include "tariff.hpp"

namespace evcs {

struct SchedulerConfig {
    double pw_flag = 86.0;     // kW
    double dch_max_hi = 12.0;  // kW, discharge cap when the net load is high
    double dch_max_lo = 2.0;   // kW, otherwise
    double pw_max = 157.0;     // kW, grid consumption limit
    int lookahead_k = 7;       // slots beyond t in the proposed rule
    ga::GaConfig ga;
    /// cost, grid-minus-PV, remaining-time priority, SOC-gap priority, utilisation
    std::array<double, 5> weights{1.0, 0.2, 0.2, 0.2, 0.2};
    Scheme scheme = Scheme::proposed;

    void validate() const {
        // both caps at zero switches discharging off
        const bool disabled = dch_max_hi == 0.0 && dch_max_lo == 0.0;
        if (!disabled && !(dch_max_hi > dch_max_lo && dch_max_lo >= 0.0)) {
            throw ConfigError("scheduler: need dch_max_hi > dch_max_lo >= 0, or both zero");
        }
        if (!(pw_flag > 0.0)) throw ConfigError("scheduler.pw_flag must be positive");
        if (!(pw_max >= 0.0)) throw ConfigError("scheduler.pw_max must be >= 0");
        if (lookahead_k < 0) throw ConfigError("scheduler.lookahead_k must be >= 0");
        for (double w : weights) {
            if (!(w >= 0.0)) throw ConfigError("scheduler: objective weights must be >= 0");
        }
        if (!(weights[0] > 0.0)) throw ConfigError("scheduler: cost weight must be positive");
        ga.validate();
    }
};

/// Measured or forecast local load and PV output for one slot.
struct LoadPv {
    double load = 0.0;
    double pv = 0.0;
};

/// Cap from the instantaneous net load: high when load - PV reaches the flag.
inline double discharge_cap_conventional(double load, double pv, const SchedulerConfig& cfg) {
    return (load - pv >= cfg.pw_flag) ? cfg.dch_max_hi : cfg.dch_max_lo;
}

/// Cap from the net load summed over t..t+K, against (K+1) times the flag.
/// Slot t uses measured values, the rest come from `forecasts` (first K
/// entries). Returns nothing when fewer than K forecasts are available.
inline std::optional<double> discharge_cap_lookahead(LoadPv now, std::span<const LoadPv> forecasts,
                                                     const SchedulerConfig& cfg) {
    const auto k = static_cast<std::size_t>(cfg.lookahead_k);
    if (forecasts.size() < k) return std::nullopt;
    double sum = now.load - now.pv;
    for (std::size_t i = 0; i < k; ++i) sum += forecasts[i].load - forecasts[i].pv;
    return (sum >= static_cast<double>(cfg.lookahead_k + 1) * cfg.pw_flag) ? cfg.dch_max_hi : cfg.dch_max_lo;
}

/// The lookahead rule, falling back to the conventional rule when forecasts
/// are missing.
inline double discharge_cap_proposed(LoadPv now, std::span<const LoadPv> forecasts, const SchedulerConfig& cfg) {
    return discharge_cap_lookahead(now, forecasts, cfg).value_or(discharge_cap_conventional(now.load, now.pv, cfg));
}

/// A parked EV as seen by the slot optimiser.
struct EvCandidate {
    std::size_t fleet_index = 0;
    int id = 0;
    double power_kw = 0.0;
    double soc = 0.0;
    double target = 80.0;
    int remaining = 0; // slots until departure, this one included
    int slack = 0;     // remaining minus slots needed to reach target
    bool budget_locked = false; // pausing now would strand it below target
    bool was_charging = false;  // charged in the previous slot
    bool may_idle = true;
    bool may_charge = false;
    bool may_discharge = false;

    double soc_gap() const { return target - soc; }

    std::vector<std::uint8_t> alleles() const {
        std::vector<std::uint8_t> a;
        if (may_idle) a.push_back(static_cast<std::uint8_t>(Op::idle));
        if (may_charge) a.push_back(static_cast<std::uint8_t>(Op::charge));
        if (may_discharge) a.push_back(static_cast<std::uint8_t>(Op::discharge));
        if (a.empty()) a.push_back(static_cast<std::uint8_t>(Op::idle));
        return a;
    }
};

/// Everything the optimiser needs for one slot; read-only during the search.
struct SlotContext {
    int t = 0;
    double load = 0.0;
    double pv = 0.0;
    double tou = 0.0;
    double sell = 0.0;
    double dt_hours = kSlotHours;
    double cap = 0.0;
    double pw_max = 157.0;
    double soc_scale = 80.0 * 80.0; // target^2
    std::vector<EvCandidate> evs;   // in fleet (id) order
};

using Assignment = std::vector<Op>;
using Objectives = std::array<double, 5>;

struct Totals {
    double charge = 0.0;
    double discharge = 0.0;
};

inline Totals power_totals(const Assignment& a, const SlotContext& ctx) {
    Totals s;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i] == Op::charge) s.charge += ctx.evs[i].power_kw;
        if (a[i] == Op::discharge) s.discharge += ctx.evs[i].power_kw;
    }
    return s;
}

inline bool discharge_within_cap(const Assignment& a, const SlotContext& ctx) {
    const auto s = power_totals(a, ctx);
    return s.discharge <= ctx.cap && s.discharge <= s.charge + ctx.load + kBalanceTolKw;
}

/// Requires discharge_within_cap (the dispatch must exist).
inline bool within_grid_cap(const Assignment& a, const SlotContext& ctx) {
    const auto s = power_totals(a, ctx);
    return check_grid_cap(dispatch(ctx.load, ctx.pv, s.charge, s.discharge), ctx.pw_max);
}

inline bool feasible(const Assignment& a, const SlotContext& ctx) {
    return discharge_within_cap(a, ctx) && within_grid_cap(a, ctx);
}

inline SlotDispatch dispatch_for(const Assignment& a, const SlotContext& ctx) {
    const auto s = power_totals(a, ctx);
    return dispatch(ctx.load, ctx.pv, s.charge, s.discharge);
}

/// The five objective values, unscaled: operating cost (USD), grid use minus
/// PV use (kW), remaining-time priority, SOC-gap priority, negated EV
/// utilisation (kW).
inline Objectives objective_components(const Assignment& a, const SlotContext& ctx) {
    const SlotDispatch d = dispatch_for(a, ctx);
    Objectives o{};
    o[0] = slot_cost(d, ctx.tou, ctx.sell, ctx.dt_hours);
    o[1] = (d.pw_grid_load + d.pw_grid_ev) - (d.pw_pv_load + d.pw_pv_ev);
    for (std::size_t i = 0; i < a.size(); ++i) {
        const auto& ev = ctx.evs[i];
        const double gap2 = ev.soc_gap() * ev.soc_gap();
        if (a[i] == Op::charge) {
            o[2] += ev.remaining;
            o[3] -= gap2;
        } else if (a[i] == Op::discharge) {
            o[2] -= ev.remaining;
            o[3] += gap2;
        }
    }
    o[4] = -(d.ev_charge_total + d.ev_discharge_total);
    return o;
}

/// Per-slot scales that bring the objectives to comparable magnitude.
inline Objectives objective_scales(const SlotContext& ctx) {
    // bound on |slot cost|: every candidate charging from the grid, or the
    // whole load sold
    double offered = ctx.load;
    for (const auto& ev : ctx.evs) offered += ev.power_kw;
    double cost_scale = std::max(ctx.tou, ctx.sell) * offered * ctx.dt_hours;
    if (!(cost_scale > 0.0)) cost_scale = 1.0;
    const double power_scale = ctx.pw_max > 0.0 ? ctx.pw_max : 1.0;
    const double soc_scale = ctx.soc_scale > 0.0 ? ctx.soc_scale : 1.0;
    return {cost_scale, power_scale, static_cast<double>(kSlotsPerDay), soc_scale, power_scale};
}

inline double scalarize(const Objectives& o, const SlotContext& ctx, const std::array<double, 5>& weights) {
    const auto s = objective_scales(ctx);
    double f = 0.0;
    for (std::size_t j = 0; j < o.size(); ++j) f += weights[j] * o[j] / s[j];
    return f;
}

/// Scalar fitness of a feasible assignment.
inline double fitness(const Assignment& a, const SlotContext& ctx, const std::array<double, 5>& weights) {
    return scalarize(objective_components(a, ctx), ctx, weights);
}

/// Makes an assignment feasible by switching genes to idle: discharges with
/// the least remaining time first until the cap holds, then charges with
/// the smallest SOC gap first until the grid limit holds. EVs that may not
/// idle are never touched. Returns false if it runs out of genes to flip.
inline bool repair(Assignment& a, const SlotContext& ctx) {
    std::vector<std::size_t> dch_order;
    std::vector<std::size_t> ch_order;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (!ctx.evs[i].may_idle) continue;
        if (a[i] == Op::discharge) dch_order.push_back(i);
        if (a[i] == Op::charge) ch_order.push_back(i);
    }
    std::sort(dch_order.begin(), dch_order.end(), [&](std::size_t x, std::size_t y) {
        const auto& ex = ctx.evs[x];
        const auto& ey = ctx.evs[y];
        if (ex.remaining != ey.remaining) return ex.remaining < ey.remaining;
        if (ex.soc_gap() != ey.soc_gap()) return ex.soc_gap() > ey.soc_gap();
        return ex.id > ey.id;
    });
    std::sort(ch_order.begin(), ch_order.end(), [&](std::size_t x, std::size_t y) {
        const auto& ex = ctx.evs[x];
        const auto& ey = ctx.evs[y];
        if (ex.soc_gap() != ey.soc_gap()) return ex.soc_gap() < ey.soc_gap();
        if (ex.remaining != ey.remaining) return ex.remaining > ey.remaining;
        return ex.id > ey.id;
    });

    std::size_t di = 0;
    std::size_t ci = 0;
    while (true) {
        if (!discharge_within_cap(a, ctx)) {
            if (di == dch_order.size()) return false;
            a[dch_order[di++]] = Op::idle;
            continue;
        }
        if (!within_grid_cap(a, ctx)) {
            if (ci == ch_order.size()) return false;
            a[ch_order[ci++]] = Op::idle;
            continue;
        }
        return true;
    }
}

struct ScheduleDecision {
    Assignment ops; // aligned with SlotContext::evs
    SlotDispatch dispatch;
    double fitness = 0.0;
    Objectives components{};
    bool feasible = true;
    long evaluations = 0;
    int shed = 0; // charges that could not idle but were dropped for the grid limit
};

/// Drops charges of EVs that may not idle until the grid limit holds with
/// every other EV idle. EVs that would only be starting go first, then
/// running ones; within each group most slack first. EVs without room in
/// their switch budget go last. Returns how many were dropped.
inline int shed_forced_charges(Assignment& a, const SlotContext& ctx) {
    std::vector<std::size_t> order;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i] == Op::charge && !ctx.evs[i].may_idle) order.push_back(i);
    }
    std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
        const auto& ex = ctx.evs[x];
        const auto& ey = ctx.evs[y];
        if (ex.budget_locked != ey.budget_locked) return !ex.budget_locked;
        if (ex.was_charging != ey.was_charging) return !ex.was_charging;
        if (ex.slack != ey.slack) return ex.slack > ey.slack;
        if (ex.soc_gap() != ey.soc_gap()) return ex.soc_gap() < ey.soc_gap();
        return ex.id > ey.id;
    });
    int n = 0;
    for (std::size_t i : order) {
        if (within_grid_cap(a, ctx)) break;
        a[i] = Op::idle;
        ++n;
    }
    return n;
}

/// Chooses charge/discharge/idle for every candidate EV in one slot with the
/// genetic search. EVs with a single legal op are fixed and kept out of the
/// genome. Deterministic for a given seed.
inline ScheduleDecision optimize_slot(const SlotContext& ctx, const SchedulerConfig& cfg, std::uint64_t seed) {
    Assignment base(ctx.evs.size(), Op::idle);
    std::vector<std::size_t> genes;
    std::vector<std::vector<std::uint8_t>> alleles;
    for (std::size_t i = 0; i < ctx.evs.size(); ++i) {
        auto a = ctx.evs[i].alleles();
        base[i] = static_cast<Op>(a.front());
        if (a.size() > 1) {
            genes.push_back(i);
            alleles.push_back(std::move(a));
        }
    }

    ScheduleDecision out;
    {
        Assignment fixed(ctx.evs.size(), Op::idle);
        for (std::size_t i = 0; i < ctx.evs.size(); ++i) {
            if (!ctx.evs[i].may_idle) fixed[i] = base[i];
        }
        out.shed = shed_forced_charges(fixed, ctx);
        if (out.shed > 0) {
            // a dropped EV is pinned to idle and leaves the genome
            std::vector<std::size_t> kept_genes;
            std::vector<std::vector<std::uint8_t>> kept_alleles;
            for (std::size_t i = 0; i < ctx.evs.size(); ++i) {
                if (!ctx.evs[i].may_idle && fixed[i] == Op::idle) base[i] = Op::idle;
            }
            for (std::size_t k = 0; k < genes.size(); ++k) {
                const std::size_t i = genes[k];
                if (!ctx.evs[i].may_idle && fixed[i] == Op::idle) continue;
                kept_genes.push_back(i);
                kept_alleles.push_back(alleles[k]);
            }
            genes = std::move(kept_genes);
            alleles = std::move(kept_alleles);
        }
    }

    const auto expand = [&](const ga::Genome& g) {
        Assignment a = base;
        for (std::size_t k = 0; k < genes.size(); ++k) a[genes[k]] = static_cast<Op>(g[k]);
        return a;
    };
    const auto contract = [&](const Assignment& a, ga::Genome& g) {
        for (std::size_t k = 0; k < genes.size(); ++k) g[k] = static_cast<std::uint8_t>(a[genes[k]]);
    };

    if (genes.empty()) {
        out.ops = base;
        out.feasible = repair(out.ops, ctx);
    } else {
        std::mt19937_64 rng(seed);
        ga::Genome idle_seed(genes.size());
        for (std::size_t k = 0; k < genes.size(); ++k) idle_seed[k] = alleles[k].front();
        const auto result = ga::minimize(
            alleles, [&](const ga::Genome& g) { return fitness(expand(g), ctx, cfg.weights); },
            [&](ga::Genome& g) {
                Assignment a = expand(g);
                repair(a, ctx);
                contract(a, g);
            },
            cfg.ga, rng, {idle_seed});
        out.ops = expand(result.best.genome);
        out.evaluations = result.evaluations;
        out.feasible = feasible(out.ops, ctx);
    }
    out.dispatch = dispatch_for(out.ops, ctx);
    out.components = objective_components(out.ops, ctx);
    out.fitness = scalarize(out.components, ctx, cfg.weights);
    return out;
}

/// Builds the optimiser's view of slot t from the fleet and its candidate
/// sets. `cap` is the active discharge cap; discharge is offered only to EVs
/// whose own power fits under it and never in the charge-only scheme.
inline SlotContext make_context(const std::vector<EvState>& fleet, const Candidates& cand, int t, LoadPv now,
                                const TariffSchedule& tariff, double cap, const SchedulerConfig& cfg,
                                const FleetConfig& fleet_cfg) {
    SlotContext ctx;
    ctx.t = t;
    ctx.load = now.load;
    ctx.pv = now.pv;
    ctx.tou = tariff.purchase_price(t);
    ctx.sell = tariff.selling_price(t);
    ctx.dt_hours = fleet_cfg.dt_hours;
    ctx.cap = cap;
    ctx.pw_max = cfg.pw_max;
    ctx.soc_scale = fleet_cfg.target_soc * fleet_cfg.target_soc;

    const auto contains = [](const std::vector<std::size_t>& v, std::size_t i) {
        return std::find(v.begin(), v.end(), i) != v.end();
    };
    for (std::size_t i = 0; i < fleet.size(); ++i) {
        const auto& ev = fleet[i];
        if (!ev.parked_at(t)) continue;
        EvCandidate c;
        c.fleet_index = i;
        c.id = ev.id;
        c.power_kw = ev.power_kw();
        c.soc = ev.soc;
        c.target = ev.target;
        c.remaining = ev.remaining_slots(t);
        c.slack = c.remaining - charge_slots_needed(ev, fleet_cfg, ev.mode);
        c.budget_locked = !within_switch_budget(ev, Op::idle, fleet_cfg);
        c.was_charging = ev.last_op() == Op::charge;
        c.may_charge = contains(cand.charge, i);
        c.may_idle = !contains(cand.forced_charge, i);
        c.may_discharge = c.may_idle && cfg.scheme != Scheme::charge_only && contains(cand.discharge, i) && c.power_kw <= cap;
        ctx.evs.push_back(c);
    }
    return ctx;
}

} // namespace evcs
