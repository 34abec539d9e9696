#pragma once

// Independent reference computations used by the tests.

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include "evcs/evcs.hpp"

namespace oracle {

/// Every assignment in the cartesian product of the candidates' alleles.
inline std::vector<evcs::Assignment> all_assignments(const evcs::SlotContext& ctx) {
    std::vector<evcs::Assignment> out{evcs::Assignment{}};
    for (const auto& ev : ctx.evs) {
        std::vector<evcs::Assignment> next;
        for (const auto& partial : out) {
            for (auto a : ev.alleles()) {
                auto p = partial;
                p.push_back(static_cast<evcs::Op>(a));
                next.push_back(std::move(p));
            }
        }
        out = std::move(next);
    }
    return out;
}

struct Best {
    evcs::Assignment ops;
    double fitness = std::numeric_limits<double>::infinity();
    bool found = false;
};

/// Exhaustive minimum of the scalar fitness over feasible assignments.
inline Best brute_force(const evcs::SlotContext& ctx, const std::array<double, 5>& weights) {
    Best best;
    for (const auto& a : all_assignments(ctx)) {
        if (!evcs::feasible(a, ctx)) continue;
        const double f = evcs::fitness(a, ctx, weights);
        if (!best.found || f < best.fitness) {
            best = {a, f, true};
        }
    }
    return best;
}

/// Merit-order allocation written out case by case, for comparison with
/// the library's min-chain.
struct Flows {
    double grid_load, grid_ev, pv_load, pv_ev, ev_load, ev_ev;
};

inline Flows merit_order(double load, double pv, double ch, double dch) {
    Flows f{};
    if (dch >= ch) {
        f.ev_ev = ch;
        f.ev_load = dch - ch;
    } else {
        f.ev_ev = dch;
    }
    const double ev_left = ch - f.ev_ev;
    if (pv >= ev_left) {
        f.pv_ev = ev_left;
        const double pv_left = pv - ev_left;
        const double load_left = load - f.ev_load;
        f.pv_load = pv_left < load_left ? pv_left : load_left;
    } else {
        f.pv_ev = pv;
    }
    f.grid_ev = ev_left - f.pv_ev;
    f.grid_load = load - f.ev_load - f.pv_load;
    return f;
}

/// Random slot context with `n` candidates. Powers are M1 or M2; roughly
/// half are V2G-capable.
inline evcs::SlotContext random_context(std::mt19937_64& rng, int n, double cap, double pw_max = 157.0) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    evcs::SlotContext ctx;
    ctx.t = static_cast<int>(u(rng) * 96);
    ctx.load = 20.0 + 140.0 * u(rng);
    ctx.pv = 90.0 * u(rng);
    ctx.tou = u(rng) < 0.5 ? 0.055 : 0.179;
    ctx.sell = 0.16;
    ctx.cap = cap;
    ctx.pw_max = pw_max;
    for (int i = 0; i < n; ++i) {
        evcs::EvCandidate c;
        c.fleet_index = static_cast<std::size_t>(i);
        c.id = i;
        c.power_kw = u(rng) < 0.6 ? 7.0 : 19.2;
        c.soc = 10.0 + 65.0 * u(rng);
        c.remaining = 4 + static_cast<int>(u(rng) * 40);
        c.may_idle = true;
        c.may_charge = true;
        c.may_discharge = c.soc > 20.0 && u(rng) < 0.5 && c.power_kw <= cap;
        ctx.evs.push_back(c);
    }
    return ctx;
}

} // namespace oracle
