#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "common.hpp"
#include "config.hpp"
#include "fleet.hpp"
#include "forecast.hpp"
#include "plan.hpp"
#include "powerflow.hpp"
#include "scheduler.hpp"
#include "tariff.hpp"

namespace evcs {

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
    // splitmix64 finaliser over a combined word
    std::uint64_t z = a * 0x9e3779b97f4a7c15ULL + b + 0x632be59bd9b4e019ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Load and PV series: `history_days` whole days followed by the simulated
/// day. Slot t of the simulated day is index `day_start + t`.
struct Profiles {
    std::vector<double> load;
    std::vector<double> pv;
    int day_start = 0;

    double load_at(int t) const { return load[static_cast<std::size_t>(day_start + t)]; }
    double pv_at(int t) const { return pv[static_cast<std::size_t>(day_start + t)]; }
    std::size_t history_len() const { return static_cast<std::size_t>(day_start); }
};

/// PV output for daylight hour `h`: a bell over 6:00-20:00, zero outside.
inline double clear_sky_pv(double hour, double peak_kw) {
    if (hour <= 6.0 || hour >= 20.0) return 0.0;
    return peak_kw * std::pow(std::sin(std::numbers::pi * (hour - 6.0) / 14.0), 1.3);
}

/// Weekday load of the microgrid: high through the night and evening,
/// dipping at mid-day. Net of PV it exceeds 86 kW early morning and evening
/// and stays below it around noon.
inline double base_load(double hour) {
    const auto bump = [](double h, double centre, double width) {
        const double d = (h - centre) / width;
        return std::exp(-d * d);
    };
    // plateaus and evening bump are repeated a day away so 00:00 and 24:00 agree
    const double night = bump(hour, 0.0, 4.0) + bump(hour, 24.0, 4.0);
    const double evening = bump(hour, 20.5, 1.6) + bump(hour, -3.5, 1.6);
    return 20.0 + 45.0 * night + 100.0 * bump(hour, 7.5, 1.5) + 90.0 * evening;
}

/// Synthetic profiles with seed-dependent weather and demand noise.
inline Profiles synth_profiles(std::uint64_t seed, int history_days = 14, double pv_capacity = 90.0) {
    std::mt19937_64 rng(mix_seed(seed, 0x5eedULL));
    std::normal_distribution<double> noise(0.0, 1.0);
    std::uniform_real_distribution<double> sky(0.88, 1.0);
    std::uniform_real_distribution<double> level(0.95, 1.05);

    Profiles p;
    p.day_start = history_days * kSlotsPerDay;
    const int days = history_days + 1;
    p.load.reserve(static_cast<std::size_t>(days * kSlotsPerDay));
    p.pv.reserve(static_cast<std::size_t>(days * kSlotsPerDay));
    for (int d = 0; d < days; ++d) {
        const double clearness = sky(rng);
        const double demand = level(rng);
        for (int s = 0; s < kSlotsPerDay; ++s) {
            const double hour = s * kSlotHours;
            const double pv_clear = clear_sky_pv(hour, 0.97 * pv_capacity);
            double pv = pv_clear * clearness * (1.0 + 0.03 * noise(rng));
            pv = std::clamp(pv, 0.0, pv_capacity);
            if (pv_clear == 0.0) pv = 0.0;
            double load = base_load(hour) * demand + 2.0 * noise(rng);
            load = std::max(0.0, load);
            p.load.push_back(load);
            p.pv.push_back(pv);
        }
    }
    return p;
}

/// Irradiance (W/m^2) and ambient temperature to PV output with a linear
/// temperature derate, clipped to [0, capacity].
inline double pv_from_weather(double irradiance_wm2, double temp_c, double capacity_kw, double temp_coeff = 0.004) {
    const double pv = capacity_kw * (irradiance_wm2 / 1000.0) * (1.0 - temp_coeff * (temp_c - 25.0));
    return std::clamp(pv, 0.0, capacity_kw);
}

inline std::vector<double> read_weather_csv(const std::string& path, double capacity_kw, double temp_coeff) {
    const auto table = csv::read_file(path);
    const int cs = table.require_column("slot", path);
    const int ci = table.require_column("irradiance_wm2", path);
    const int ct = table.require_column("temp_c", path);
    std::vector<double> pv;
    for (const auto& row : table.rows) {
        if (csv::to_long(row[cs], path) != static_cast<long>(pv.size())) {
            throw ConfigError(path + ": slots out of sequence");
        }
        pv.push_back(pv_from_weather(csv::to_double(row[ci], path), csv::to_double(row[ct], path), capacity_kw,
                                     temp_coeff));
    }
    return pv;
}

/// Builds profiles from CSV inputs. Series may hold several days; the last
/// 96 samples are simulated and anything before is history.
inline Profiles profiles_from_csv(const ScenarioConfig& sc) {
    Profiles p;
    p.load = csv::read_series(sc.load_csv, "value_kw");
    if (!sc.pv_csv.empty()) {
        p.pv = csv::read_series(sc.pv_csv, "value_kw");
    } else if (!sc.weather_csv.empty()) {
        p.pv = read_weather_csv(sc.weather_csv, sc.pv_capacity, sc.pv_temp_coeff);
    } else {
        throw ConfigError("scenario: load_csv given without pv_csv or weather_csv");
    }
    if (p.load.size() != p.pv.size()) throw ConfigError("scenario: load and PV series differ in length");
    if (p.load.size() < static_cast<std::size_t>(kSlotsPerDay) || p.load.size() % kSlotsPerDay != 0) {
        throw ConfigError("scenario: series length must be a positive multiple of 96");
    }
    for (std::size_t i = 0; i < p.load.size(); ++i) {
        if (p.load[i] < 0.0 || p.pv[i] < 0.0) throw ConfigError("scenario: negative load or PV sample");
        if (p.pv[i] > sc.pv_capacity + 1e-9) throw ConfigError("scenario: PV sample exceeds pv_capacity");
    }
    p.day_start = static_cast<int>(p.load.size()) - kSlotsPerDay;
    return p;
}

/// Returns the forecasts for slots t+1..t+K of the simulated day (fewer, or
/// none, when unavailable).
using Lookahead = std::function<std::vector<LoadPv>(int t)>;

/// Twelve-sample window ending at series index `end` (inclusive). Earlier
/// samples than the series holds are taken from the simulated day's tail.
inline std::array<double, forecast::kInputLen> window_ending(const std::vector<double>& series, const Profiles& p,
                                                             int end) {
    std::array<double, forecast::kInputLen> w{};
    for (int i = 0; i < forecast::kInputLen; ++i) {
        int idx = end - (forecast::kInputLen - 1) + i;
        if (idx < 0) idx = p.day_start + slot_of_day(idx);
        w[static_cast<std::size_t>(i)] = series[static_cast<std::size_t>(idx)];
    }
    return w;
}

/// Forecasts from two trained GRU models fed with the measured history.
inline Lookahead gru_lookahead(const forecast::ForecastModel& load_model, const forecast::ForecastModel& pv_model,
                               const Profiles& profiles, int k, double pv_capacity) {
    return [&load_model, &pv_model, &profiles, k, pv_capacity](int t) {
        const int end = profiles.day_start + t;
        const auto lw = window_ending(profiles.load, profiles, end);
        const auto pw = window_ending(profiles.pv, profiles, end);
        const auto lf = load_model.forward(lw);
        const auto pf = pv_model.forward(pw);
        std::vector<LoadPv> out;
        const int n = std::min(k, forecast::kOutputLen);
        for (int i = 0; i < n; ++i) {
            out.push_back({std::max(0.0, lf[static_cast<std::size_t>(i)]),
                           std::clamp(pf[static_cast<std::size_t>(i)], 0.0, pv_capacity)});
        }
        return out;
    };
}

/// Zero-error forecasts read from the series itself (wrapping the day).
inline Lookahead perfect_lookahead(const Profiles& profiles, int k) {
    return [&profiles, k](int t) {
        std::vector<LoadPv> out;
        for (int i = 1; i <= k; ++i) {
            const int s = slot_of_day(t + i);
            out.push_back({profiles.load_at(s), profiles.pv_at(s)});
        }
        return out;
    };
}

struct SlotRecord {
    int t = 0;
    double load = 0.0;
    double pv = 0.0;
    double cap = 0.0;
    SlotDispatch dispatch;
    double tou = 0.0;
    double sell = 0.0;
    double cost = 0.0;
    double grid_load_cost = 0.0;
    int n_parked = 0;
    int n_charging = 0;
    int n_discharging = 0;
    double sum_remaining_charging = 0.0;
    double sum_remaining_discharging = 0.0;
    Objectives components{};
    double fitness = 0.0;
    bool feasible = true;
};

/// One parked EV in one slot.
struct EvSlotRow {
    int id = 0;
    int t = 0;
    double soc_before = 0.0;
    Op op = Op::idle;
    double soc_after = 0.0;
    int switch_events = 0; // after the slot
};

struct EvOutcome {
    int id = 0;
    ChargingMode mode = ChargingMode::M0;
    int arrival = 0;
    int departure = 0;
    bool v2g_eligible = false;
    double initial_soc = 0.0;
    double final_soc = 0.0;
    int switch_events = 0;
    bool reached_target = false; // within one charge-slot increment
};

struct DayResult {
    Scheme scheme = Scheme::proposed;
    std::uint64_t seed = 0;
    std::vector<SlotRecord> slots;
    std::vector<EvSlotRow> ev_rows;
    std::vector<EvOutcome> evs;
    double total_cost = 0.0;
    double grid_purchase_kwh = 0.0;
    double pv_used_kwh = 0.0;
    double ev_charge_kwh = 0.0;
    double ev_discharge_kwh = 0.0;
    double grid_load_cost = 0.0;
    int forecast_fallbacks = 0;
    int shed_charges = 0; // required charges dropped to hold the grid limit
    std::vector<std::string> violations;

    int chargeable_evs() const {
        return static_cast<int>(std::count_if(evs.begin(), evs.end(),
                                              [](const EvOutcome& e) { return e.mode != ChargingMode::M0; }));
    }
    int evs_at_target() const {
        return static_cast<int>(std::count_if(evs.begin(), evs.end(), [](const EvOutcome& e) {
            return e.mode != ChargingMode::M0 && e.reached_target;
        }));
    }
    double pct_at_target() const {
        const int n = chargeable_evs();
        return n == 0 ? 100.0 : 100.0 * evs_at_target() / n;
    }
};

/// Re-checks a finished day from its records alone: SOC control limits,
/// discharge cap, grid limit, switching budget (replayed from the op
/// histories), power balances, and that totals equal the sum of slots.
inline std::vector<std::string> audit(const DayResult& r, const SimulationConfig& cfg) {
    std::vector<std::string> out;
    const auto add = [&out](int t, const std::string& what) {
        out.push_back("slot " + std::to_string(t) + ": " + what);
    };
    double cost = 0.0;
    for (const auto& s : r.slots) {
        const auto& d = s.dispatch;
        if (auto v = dispatch_violation(d); !v.empty()) add(s.t, v);
        if (d.ev_discharge_total > s.cap + kBalanceTolKw) add(s.t, "discharge above cap");
        if (!check_grid_cap(d, cfg.scheduler.pw_max)) add(s.t, "grid limit exceeded");
        if (r.scheme == Scheme::charge_only && d.ev_discharge_total > 0.0) add(s.t, "discharge in charge-only run");
        cost += s.cost;
    }
    if (std::abs(cost - r.total_cost) > 1e-6) out.push_back("total cost differs from the sum of slot costs");

    std::map<int, std::vector<Op>> history;
    std::map<int, int> recorded_switches;
    for (const auto& row : r.ev_rows) {
        if (row.op == Op::discharge && row.soc_before <= cfg.fleet.soc_min) {
            add(row.t, "EV " + std::to_string(row.id) + " discharged at or below minimum SOC");
        }
        if (row.op == Op::charge && row.soc_before >= cfg.fleet.target_soc) {
            add(row.t, "EV " + std::to_string(row.id) + " charged at or above target SOC");
        }
        history[row.id].push_back(row.op);
        recorded_switches[row.id] = row.switch_events;
    }
    for (const auto& [id, ops] : history) {
        std::vector<std::uint8_t> ch;
        std::vector<std::uint8_t> dch;
        for (Op op : ops) {
            ch.push_back(op == Op::charge ? 1 : 0);
            dch.push_back(op == Op::discharge ? 1 : 0);
        }
        const int n = count_transitions(ch) + count_transitions(dch);
        if (n > cfg.fleet.n_max_switches) {
            out.push_back("EV " + std::to_string(id) + ": " + std::to_string(n) + " switch transitions");
        }
        if (n != recorded_switches[id]) out.push_back("EV " + std::to_string(id) + ": switch count mismatch");
    }
    return out;
}

/// Grid power expected to be left for EV charging in each slot, taken from
/// the last history day (the simulated day itself when there is no history).
inline std::vector<double> expected_headroom(const Profiles& p, double pw_max) {
    const int base = p.day_start >= kSlotsPerDay ? p.day_start - kSlotsPerDay : p.day_start;
    std::vector<double> h(kSlotsPerDay);
    for (int s = 0; s < kSlotsPerDay; ++s) {
        const auto k = static_cast<std::size_t>(base + s);
        h[static_cast<std::size_t>(s)] = std::max(0.0, pw_max - p.load[k] + p.pv[k]);
    }
    return h;
}

/// Fleet for a run: the CSV override if configured, otherwise sampled with
/// the run seed.
inline std::vector<EvState> make_fleet(const SimulationConfig& cfg, std::uint64_t seed) {
    if (!cfg.fleet_csv.empty()) return read_fleet_csv(cfg.fleet_csv, cfg.fleet);
    FleetConfig fc = cfg.fleet;
    fc.rng_seed = seed;
    return sample_fleet(fc);
}

inline Profiles make_profiles(const SimulationConfig& cfg, std::uint64_t seed) {
    if (!cfg.scenario.load_csv.empty()) return profiles_from_csv(cfg.scenario);
    return synth_profiles(seed, cfg.scenario.history_days, cfg.scenario.pv_capacity);
}

/// Simulates one day slot by slot: candidate sets, the scheme's discharge
/// cap, the day plan's required charges, the genetic slot optimisation,
/// SOC update, dispatch and cost. The plan estimates later headroom from
/// the last history day.
/// `lookahead` is consulted only by the proposed scheme; when it is empty or
/// short the conventional cap is used for that slot and counted.
inline DayResult run_day(const SimulationConfig& cfg, const Profiles& profiles, std::vector<EvState> fleet,
                         Scheme scheme, std::uint64_t seed, const Lookahead& lookahead = {}) {
    cfg.validate();
    SchedulerConfig sched = cfg.scheduler;
    sched.scheme = scheme;
    const double dt = cfg.scenario.dt_hours;

    DayResult r;
    r.scheme = scheme;
    r.seed = seed;
    const auto headroom = expected_headroom(profiles, sched.pw_max);

    for (int t = 0; t < kSlotsPerDay; ++t) {
        const LoadPv now{profiles.load_at(t), profiles.pv_at(t)};
        double cap = 0.0;
        switch (scheme) {
        case Scheme::charge_only: cap = 0.0; break;
        case Scheme::conventional: cap = discharge_cap_conventional(now.load, now.pv, sched); break;
        case Scheme::proposed: {
            std::vector<LoadPv> ahead;
            if (lookahead) ahead = lookahead(t);
            const auto c = discharge_cap_lookahead(now, ahead, sched);
            if (!c) ++r.forecast_fallbacks;
            cap = c.value_or(discharge_cap_conventional(now.load, now.pv, sched));
            break;
        }
        }

        Candidates cand = classify_candidates(fleet, t, cfg.fleet);
        const auto planned = planned_charges(fleet, cand.charge, t, headroom, sched.pw_max - now.load + now.pv,
                                             cfg.fleet, cfg.plan, mix_seed(seed, 0x91a4ULL));
        for (std::size_t i : planned) {
            if (std::find(cand.forced_charge.begin(), cand.forced_charge.end(), i) == cand.forced_charge.end()) {
                cand.forced_charge.push_back(i);
            }
        }
        const SlotContext ctx = make_context(fleet, cand, t, now, cfg.tariff, cap, sched, cfg.fleet);
        const ScheduleDecision dec = optimize_slot(ctx, sched, mix_seed(seed, static_cast<std::uint64_t>(t) + 1));

        SlotRecord rec;
        rec.t = t;
        rec.load = now.load;
        rec.pv = now.pv;
        rec.cap = cap;
        rec.dispatch = dec.dispatch;
        rec.tou = ctx.tou;
        rec.sell = ctx.sell;
        rec.cost = slot_cost(dec.dispatch, ctx.tou, ctx.sell, dt);
        rec.grid_load_cost = local_load_grid_cost(dec.dispatch, ctx.tou, dt);
        rec.n_parked = static_cast<int>(ctx.evs.size());
        rec.components = dec.components;
        rec.fitness = dec.fitness;
        rec.feasible = dec.feasible;

        for (std::size_t i = 0; i < ctx.evs.size(); ++i) {
            const auto& c = ctx.evs[i];
            auto& ev = fleet[c.fleet_index];
            const Op op = dec.ops[i];
            if (op == Op::charge) {
                ++rec.n_charging;
                rec.sum_remaining_charging += c.remaining;
            } else if (op == Op::discharge) {
                ++rec.n_discharging;
                rec.sum_remaining_discharging += c.remaining;
            }
            EvSlotRow row;
            row.id = ev.id;
            row.t = t;
            row.soc_before = ev.soc;
            row.op = op;
            ev = step_soc(ev, op, cfg.fleet);
            row.soc_after = ev.soc;
            row.switch_events = ev.switch_events;
            r.ev_rows.push_back(row);
        }
        if (!dec.feasible) r.violations.push_back("slot " + std::to_string(t) + ": no feasible assignment");
        r.shed_charges += dec.shed;

        const auto g = grid_power(dec.dispatch);
        r.total_cost += rec.cost;
        r.grid_purchase_kwh += g.purchased * dt;
        r.pv_used_kwh += dec.dispatch.pv_used() * dt;
        r.ev_charge_kwh += dec.dispatch.ev_charge_total * dt;
        r.ev_discharge_kwh += dec.dispatch.ev_discharge_total * dt;
        r.grid_load_cost += rec.grid_load_cost;
        r.slots.push_back(rec);
    }

    for (const auto& ev : fleet) {
        EvOutcome o;
        o.id = ev.id;
        o.mode = ev.mode;
        o.arrival = ev.arrival_slot;
        o.departure = ev.departure_slot;
        o.v2g_eligible = ev.v2g_eligible;
        o.initial_soc = ev.initial_soc;
        o.final_soc = ev.soc;
        o.switch_events = ev.switch_events;
        const double increment = soc_delta(ev, Op::charge, cfg.fleet);
        o.reached_target = ev.mode != ChargingMode::M0 && ev.soc >= ev.target - increment - 1e-9;
        r.evs.push_back(o);
    }

    for (auto& v : audit(r, cfg)) r.violations.push_back(std::move(v));
    return r;
}

/// Trains the load and PV forecasters on the profile history (the simulated
/// day is never seen).
struct ForecastPair {
    forecast::ForecastModel load;
    forecast::ForecastModel pv;
    double load_rmse_valid = 0.0;
    double pv_rmse_valid = 0.0;
};

inline ForecastPair train_forecasters(const Profiles& profiles, const ForecastSettings& fs) {
    const std::span<const double> load(profiles.load.data(), profiles.history_len());
    const std::span<const double> pv(profiles.pv.data(), profiles.history_len());
    auto l = forecast::train(load, fs.shape, fs.train, fs.seed);
    auto p = forecast::train(pv, fs.shape, fs.train, mix_seed(fs.seed, 1));
    return ForecastPair{std::move(l.model), std::move(p.model), l.rmse_valid, p.rmse_valid};
}

} // namespace evcs
