#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "common.hpp"
#include "csv.hpp"

namespace evcs {

/// Fixed on-off charger power levels.
enum class ChargingMode : std::uint8_t { M0 = 0, M1 = 1, M2 = 2 };

inline constexpr double mode_power_kw(ChargingMode m) {
    switch (m) {
    case ChargingMode::M0: return 0.0;
    case ChargingMode::M1: return 7.0;
    case ChargingMode::M2: return 19.2;
    }
    return 0.0;
}

inline constexpr std::string_view to_string(ChargingMode m) {
    switch (m) {
    case ChargingMode::M0: return "M0";
    case ChargingMode::M1: return "M1";
    case ChargingMode::M2: return "M2";
    }
    return "?";
}

struct FleetConfig {
    int n_evs = 50;
    double capacity_kwh = 64.0;
    double init_soc_mean = 15.0; // %
    double init_soc_std = 5.0;   // %
    double target_soc = 80.0;    // %
    double soc_min = 20.0;       // %
    double eta_ch = 0.95;
    double eta_dch = 0.95;
    int margin_time = 8;     // slots
    int n_max_switches = 4;  // on+off transitions, charge and discharge combined
    int v2g_min_park = 40;   // slots; V2G only for strictly longer parking windows
    double dt_hours = kSlotHours;
    std::uint64_t rng_seed = 1;

    // Commuter pattern: arrival at the workplace starts the parking window,
    // arrival at home ends it.
    double work_arrival_mean_h = 10.0 + 20.0 / 60.0;
    double work_arrival_sd_h = 2.0;
    double home_arrival_mean_h = 18.0;
    double home_arrival_sd_h = 2.0;

    void validate() const {
        if (n_evs < 1) throw ConfigError("fleet.n_evs must be >= 1");
        if (!(capacity_kwh > 0.0)) throw ConfigError("fleet.capacity_kwh must be positive");
        if (!(eta_ch > 0.0 && eta_ch <= 1.0) || !(eta_dch > 0.0 && eta_dch <= 1.0)) {
            throw ConfigError("fleet efficiencies must lie in (0, 1]");
        }
        if (!(soc_min >= 0.0 && soc_min <= target_soc && target_soc <= 100.0)) {
            throw ConfigError("fleet: need 0 <= soc_min <= target_soc <= 100");
        }
        if (init_soc_std < 0.0) throw ConfigError("fleet.init_soc_std must be >= 0");
        if (margin_time < 0 || n_max_switches < 0 || v2g_min_park < 0) {
            throw ConfigError("fleet: negative slot count");
        }
        if (!(dt_hours > 0.0)) throw ConfigError("fleet.dt_hours must be positive");
        if (work_arrival_sd_h < 0.0 || home_arrival_sd_h < 0.0) throw ConfigError("fleet: negative arrival sd");
    }
};

/// One vehicle's battery and parking state. Histories are indexed by slot
/// offset from arrival and hold one entry per simulated parked slot.
struct EvState {
    int id = 0;
    double capacity_kwh = 64.0;
    double soc = 15.0;
    double soc_min = 20.0;
    double target = 80.0;
    int arrival_slot = 0;
    int departure_slot = 0; // first slot the vehicle is gone
    ChargingMode mode = ChargingMode::M0;
    std::vector<std::uint8_t> o_ch;
    std::vector<std::uint8_t> o_dch;
    int switch_events = 0;
    bool v2g_eligible = false;
    double initial_soc = 15.0;

    int parking_slots() const { return departure_slot - arrival_slot; }
    int remaining_slots(int t) const { return departure_slot - t; }
    bool parked_at(int t) const { return mode != ChargingMode::M0 && t >= arrival_slot && t < departure_slot; }
    double power_kw() const { return mode_power_kw(mode); }

    Op last_op() const {
        if (o_ch.empty()) return Op::idle;
        if (o_ch.back() != 0) return Op::charge;
        if (o_dch.back() != 0) return Op::discharge;
        return Op::idle;
    }
};

/// Whole slots needed to lift `soc` to `target` at `power_kw`; 0 when
/// already there, max int when power is zero.
inline int charge_slots_needed(double soc, double target, double capacity_kwh, double eta_ch, double power_kw,
                               double dt_hours) {
    if (soc >= target) return 0;
    if (power_kw <= 0.0) return std::numeric_limits<int>::max();
    const double energy_kwh = (target - soc) / 100.0 * capacity_kwh;
    const double slots = energy_kwh / (eta_ch * power_kw * dt_hours);
    return static_cast<int>(std::ceil(slots - 1e-9));
}

inline int charge_slots_needed(const EvState& ev, const FleetConfig& cfg, ChargingMode mode) {
    return charge_slots_needed(ev.soc, ev.target, ev.capacity_kwh, cfg.eta_ch, mode_power_kw(mode), cfg.dt_hours);
}

/// Charge slots still required to come within one charge increment of the
/// target, the level the scheduler guarantees.
inline int guaranteed_slots_needed(const EvState& ev, const FleetConfig& cfg) {
    return std::max(0, charge_slots_needed(ev, cfg, ev.mode) - 1);
}

/// SOC change in percentage points for one slot of `op` at `power_kw`.
inline double soc_delta(Op op, double power_kw, double capacity_kwh, double eta_ch, double eta_dch,
                        double dt_hours) {
    switch (op) {
    case Op::charge: return 100.0 * eta_ch * power_kw * dt_hours / capacity_kwh;
    case Op::discharge: return -100.0 * (1.0 / eta_dch) * power_kw * dt_hours / capacity_kwh;
    case Op::idle: return 0.0;
    }
    return 0.0;
}

inline double soc_delta(const EvState& ev, Op op, const FleetConfig& cfg) {
    return soc_delta(op, ev.power_kw(), ev.capacity_kwh, cfg.eta_ch, cfg.eta_dch, cfg.dt_hours);
}

/// Smallest mode that still leaves the margin time for discharging:
/// M1 if it finishes within the window, else M2, else entry is denied.
inline ChargingMode assign_mode(const EvState& ev, const FleetConfig& cfg) {
    const int parked = ev.parking_slots();
    const int tc1 = charge_slots_needed(ev, cfg, ChargingMode::M1);
    const int tc2 = charge_slots_needed(ev, cfg, ChargingMode::M2);
    const auto fits = [&](int tc) {
        return tc != std::numeric_limits<int>::max() &&
               static_cast<long>(parked) >= static_cast<long>(tc) + cfg.margin_time;
    };
    if (fits(tc1)) return ChargingMode::M1;
    if (fits(tc2)) return ChargingMode::M2;
    return ChargingMode::M0;
}

/// Builds a vehicle from its window and initial SOC, assigning mode and
/// V2G eligibility.
inline EvState make_ev(int id, int arrival_slot, int departure_slot, double init_soc, const FleetConfig& cfg) {
    if (departure_slot <= arrival_slot) {
        throw ConfigError("fleet: EV " + std::to_string(id) + " departs before it arrives");
    }
    if (!(init_soc >= 0.0 && init_soc <= 100.0)) {
        throw ConfigError("fleet: EV " + std::to_string(id) + " initial SOC outside [0, 100]");
    }
    EvState ev;
    ev.id = id;
    ev.capacity_kwh = cfg.capacity_kwh;
    ev.soc = init_soc;
    ev.initial_soc = init_soc;
    ev.soc_min = cfg.soc_min;
    ev.target = cfg.target_soc;
    ev.arrival_slot = arrival_slot;
    ev.departure_slot = departure_slot;
    ev.mode = assign_mode(ev, cfg);
    ev.v2g_eligible = ev.parking_slots() > cfg.v2g_min_park;
    return ev;
}

/// Draws the commuter fleet. Arrival/departure are normal in time of day,
/// discretised to slots and clamped to the day; pairs with departure not
/// after arrival are redrawn.
inline std::vector<EvState> sample_fleet(const FleetConfig& cfg) {
    cfg.validate();
    std::mt19937_64 rng(cfg.rng_seed);
    const auto draw_normal = [&rng](double mean, double sd) {
        if (sd <= 0.0) return mean;
        std::normal_distribution<double> dist(mean, sd);
        return dist(rng);
    };
    const auto to_slot = [](double hours) {
        const long s = std::lround(hours * 60.0 / kMinutesPerSlot);
        return static_cast<int>(std::clamp<long>(s, 0, kSlotsPerDay - 1));
    };

    std::vector<EvState> fleet;
    fleet.reserve(static_cast<std::size_t>(cfg.n_evs));
    for (int i = 0; i < cfg.n_evs; ++i) {
        int arrival = 0;
        int departure = 0;
        for (int attempt = 0;; ++attempt) {
            arrival = to_slot(draw_normal(cfg.work_arrival_mean_h, cfg.work_arrival_sd_h));
            departure = to_slot(draw_normal(cfg.home_arrival_mean_h, cfg.home_arrival_sd_h));
            if (departure > arrival) break;
            if (attempt >= 1000) {
                arrival = std::min(arrival, kSlotsPerDay - 2);
                departure = arrival + 1;
                break;
            }
        }
        const double soc = std::clamp(draw_normal(cfg.init_soc_mean, cfg.init_soc_std), 1.0, cfg.target_soc - 1.0);
        fleet.push_back(make_ev(i, arrival, departure, soc, cfg));
    }
    return fleet;
}

/// Loads `id,arrival_slot,departure_slot,init_soc`.
inline std::vector<EvState> read_fleet_csv(const std::string& path, const FleetConfig& cfg) {
    cfg.validate();
    const auto table = csv::read_file(path);
    const int ci = table.require_column("id", path);
    const int ca = table.require_column("arrival_slot", path);
    const int cd = table.require_column("departure_slot", path);
    const int cs = table.require_column("init_soc", path);
    std::vector<EvState> fleet;
    for (const auto& row : table.rows) {
        fleet.push_back(make_ev(static_cast<int>(csv::to_long(row[ci], path)),
                                static_cast<int>(csv::to_long(row[ca], path)),
                                static_cast<int>(csv::to_long(row[cd], path)), csv::to_double(row[cs], path),
                                cfg));
    }
    return fleet;
}

/// Number of on/off transitions between two consecutive slots.
inline constexpr int transitions(Op from, Op to) {
    if (from == to) return 0;
    return (from != Op::idle ? 1 : 0) + (to != Op::idle ? 1 : 0);
}

/// Transitions still owed after choosing `op`, leaving the battery at
/// `soc_after`: the off-switch of any active process plus an on/off pair
/// for the charge that must still happen.
inline constexpr int reserved_transitions(Op op, double soc_after, double target) {
    const bool below = soc_after < target;
    switch (op) {
    case Op::charge: return 1;
    case Op::idle: return below ? 2 : 0;
    case Op::discharge: return 1 + (below ? 2 : 0);
    }
    return 0;
}

/// True when choosing `op` keeps enough switching budget to finish charging.
inline bool within_switch_budget(const EvState& ev, Op op, const FleetConfig& cfg) {
    const double after = ev.soc + soc_delta(ev, op, cfg);
    return ev.switch_events + transitions(ev.last_op(), op) + reserved_transitions(op, after, ev.target) <=
           cfg.n_max_switches;
}

/// Applies one slot of `op`, appending to the switching history.
inline EvState step_soc(const EvState& ev, Op op, const FleetConfig& cfg) {
    if (op != Op::idle && ev.mode == ChargingMode::M0) {
        throw ContractViolation("step_soc: EV " + std::to_string(ev.id) + " has no charger");
    }
    EvState next = ev;
    next.soc = ev.soc + soc_delta(ev, op, cfg);
    if (next.soc < 0.0 || next.soc > 100.0) {
        throw ContractViolation("step_soc: EV " + std::to_string(ev.id) + " SOC would leave [0, 100]");
    }
    next.switch_events += transitions(ev.last_op(), op);
    next.o_ch.push_back(op == Op::charge ? 1 : 0);
    next.o_dch.push_back(op == Op::discharge ? 1 : 0);
    return next;
}

/// Counts 0<->1 changes in a binary history that starts from "off".
inline int count_transitions(const std::vector<std::uint8_t>& history) {
    int n = 0;
    std::uint8_t prev = 0;
    for (auto v : history) {
        if (v != prev) ++n;
        prev = v;
    }
    return n;
}

struct Candidates {
    std::vector<std::size_t> charge;        // fleet indices
    std::vector<std::size_t> discharge;     // fleet indices
    std::vector<std::size_t> forced_charge; // subset of `charge` that may not idle
};

/// Per-slot candidate sets.
///
/// Charge: parked, mode != M0, SOC below target, switch budget left.
/// Discharge: parked, V2G-eligible, SOC above the minimum, switch budget left,
/// and enough parking time after this slot to recharge to target.
/// "Budget left" also reserves the transitions needed to finish charging, so
/// a candidate can never strand itself below target. A charge candidate
/// that needs every remaining slot to come within one increment of target,
/// or whose budget has no room for a pause, is a forced charge.
inline Candidates classify_candidates(const std::vector<EvState>& fleet, int t, const FleetConfig& cfg) {
    Candidates out;
    for (std::size_t i = 0; i < fleet.size(); ++i) {
        const auto& ev = fleet[i];
        if (!ev.parked_at(t)) continue;
        const int remaining = ev.remaining_slots(t);
        const bool below_cap = ev.switch_events < cfg.n_max_switches;

        const bool can_charge = below_cap && ev.soc < ev.target && within_switch_budget(ev, Op::charge, cfg);

        bool can_discharge = below_cap && ev.v2g_eligible && ev.soc > ev.soc_min &&
                             within_switch_budget(ev, Op::discharge, cfg);
        if (can_discharge) {
            const int need_now = charge_slots_needed(ev, cfg, ev.mode);
            EvState after = ev;
            after.soc = ev.soc + soc_delta(ev, Op::discharge, cfg);
            const int need_after = charge_slots_needed(after, cfg, ev.mode);
            can_discharge = after.soc >= 0.0 && remaining > need_now && remaining - 1 >= need_after;
        }

        const bool can_idle = within_switch_budget(ev, Op::idle, cfg) &&
                              !(ev.soc < ev.target && remaining <= guaranteed_slots_needed(ev, cfg));

        if (can_charge) {
            out.charge.push_back(i);
            if (!can_idle) out.forced_charge.push_back(i);
        }
        if (can_discharge) out.discharge.push_back(i);
    }
    return out;
}

} // namespace evcs
