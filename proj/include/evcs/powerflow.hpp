#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include "common.hpp"
#include "tariff.hpp"

namespace evcs {

/// The six power flows of one slot, in kW. A switch function O_x is 1
/// exactly when its flow is positive.
struct SlotDispatch {
    double pw_grid_load = 0.0;
    double pw_grid_ev = 0.0;
    double pw_pv_load = 0.0;
    double pw_pv_ev = 0.0;
    double pw_ev_load = 0.0;
    double pw_ev_ev = 0.0;

    double pw_load = 0.0;
    double pw_pv_avail = 0.0;
    double ev_charge_total = 0.0;
    double ev_discharge_total = 0.0;

    double pv_used() const { return pw_pv_load + pw_pv_ev; }
    double pv_curtailed() const { return pw_pv_avail - pv_used(); }
};

inline constexpr double kBalanceTolKw = 1e-9;

/// Allocates sources to demands in merit order: EV discharge serves EV
/// charging first, then the local load; PV serves the remaining EV charging
/// demand, then the load; the grid covers whatever is left. PV beyond both
/// demands is curtailed.
///
/// Discharge that neither EVs nor the load can absorb has nowhere to go, so
/// `ev_discharge_total <= ev_charge_total + load` is a precondition.
inline SlotDispatch dispatch(double load, double pv_avail, double ev_charge_total, double ev_discharge_total) {
    if (load < 0.0 || pv_avail < 0.0 || ev_charge_total < 0.0 || ev_discharge_total < 0.0) {
        throw UsageError("dispatch: negative input");
    }
    if (ev_discharge_total > ev_charge_total + load + kBalanceTolKw) {
        throw UsageError("dispatch: EV discharge exceeds what EVs and load can absorb");
    }
    SlotDispatch d;
    d.pw_load = load;
    d.pw_pv_avail = pv_avail;
    d.ev_charge_total = ev_charge_total;
    d.ev_discharge_total = ev_discharge_total;

    d.pw_ev_ev = std::min(ev_discharge_total, ev_charge_total);
    d.pw_ev_load = std::min(ev_discharge_total - d.pw_ev_ev, load);
    const double ev_unserved = ev_charge_total - d.pw_ev_ev;
    d.pw_pv_ev = std::min(pv_avail, ev_unserved);
    d.pw_pv_load = std::min(pv_avail - d.pw_pv_ev, load - d.pw_ev_load);
    d.pw_grid_ev = ev_unserved - d.pw_pv_ev;
    d.pw_grid_load = load - d.pw_ev_load - d.pw_pv_load;
    return d;
}

struct GridPower {
    double purchased = 0.0; // grid -> load + grid -> EV
    double sold = 0.0;      // PV -> load + EV -> load, credited at the selling price
    double net = 0.0;       // purchased - sold
};

inline GridPower grid_power(const SlotDispatch& d) {
    GridPower g;
    g.purchased = d.pw_grid_load + d.pw_grid_ev;
    g.sold = d.pw_pv_load + d.pw_ev_load;
    g.net = g.purchased - g.sold;
    return g;
}

/// Left-hand side of the grid-consumption limit: total demand net of PV
/// used and EV discharge.
inline double net_grid_demand(double load, double ev_charge_total, double pv_used, double ev_discharge_total) {
    return load + ev_charge_total - (pv_used + ev_discharge_total);
}

inline double net_grid_demand(const SlotDispatch& d) {
    return net_grid_demand(d.pw_load, d.ev_charge_total, d.pv_used(), d.ev_discharge_total);
}

inline bool check_grid_cap(const SlotDispatch& d, double pw_max) { return net_grid_demand(d) <= pw_max; }

/// Station operating cost of one slot in USD; negative is net revenue.
/// Grid energy bought for the local load is not part of it.
inline double slot_cost(const SlotDispatch& d, double tou_price, double sell_price, double dt_hours) {
    const double grid_charging = d.ev_charge_total - d.pw_pv_ev - d.pw_ev_ev;
    return tou_price * grid_charging * dt_hours - sell_price * (d.pw_pv_load + d.pw_ev_load) * dt_hours;
}

inline double slot_cost(const SlotDispatch& d, const TariffSchedule& tariff, int t, double dt_hours = kSlotHours) {
    return slot_cost(d, tariff.purchase_price(t), tariff.selling_price(t), dt_hours);
}

/// Utility bill for grid energy serving the local load (reported, never
/// added to the operating cost).
inline double local_load_grid_cost(const SlotDispatch& d, double tou_price, double dt_hours) {
    return tou_price * d.pw_grid_load * dt_hours;
}

/// Returns an empty string when every balance and bound holds, otherwise a
/// description of the first failure.
inline std::string dispatch_violation(const SlotDispatch& d, double tol = kBalanceTolKw) {
    const double flows[] = {d.pw_grid_load, d.pw_grid_ev, d.pw_pv_load, d.pw_pv_ev, d.pw_ev_load, d.pw_ev_ev};
    for (double f : flows) {
        if (f < -tol || !std::isfinite(f)) return "negative or non-finite flow";
    }
    if (std::abs(d.pw_grid_load + d.pw_pv_load + d.pw_ev_load - d.pw_load) > tol) return "load balance";
    if (std::abs(d.pw_grid_ev + d.pw_pv_ev + d.pw_ev_ev - d.ev_charge_total) > tol) return "EV charging balance";
    if (std::abs(d.pw_ev_load + d.pw_ev_ev - d.ev_discharge_total) > tol) return "EV discharging balance";
    if (d.pv_used() > d.pw_pv_avail + tol) return "PV over-use";
    return {};
}

} // namespace evcs
