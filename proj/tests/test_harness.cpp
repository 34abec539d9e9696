#include <catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "evcs/evcs.hpp"

using namespace evcs;
using Catch::Approx;

namespace {

SimulationConfig quick_config() {
    SimulationConfig cfg;
    cfg.scheduler.ga.population = 40;
    cfg.scheduler.ga.generations = 15;
    return cfg;
}

std::filesystem::path scratch_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / name;
    std::filesystem::remove_all(dir);
    return dir;
}

} // namespace

TEST_CASE("synthetic PV is zero outside daylight", "[harness][profiles]") {
    const auto p = synth_profiles(3);
    REQUIRE(p.load.size() == 15u * kSlotsPerDay);
    for (std::size_t i = 0; i < p.pv.size(); ++i) {
        const double hour = static_cast<double>(i % kSlotsPerDay) * kSlotHours;
        if (hour <= 6.0 || hour >= 20.0) CHECK(p.pv[i] == 0.0);
        CHECK(p.pv[i] >= 0.0);
        CHECK(p.pv[i] <= 90.0);
        CHECK(p.load[i] >= 0.0);
    }
}

TEST_CASE("synthetic profiles are deterministic per seed", "[harness][profiles]") {
    const auto a = synth_profiles(9);
    const auto b = synth_profiles(9);
    const auto c = synth_profiles(10);
    CHECK(a.load == b.load);
    CHECK(a.pv == b.pv);
    CHECK(a.load != c.load);
}

TEST_CASE("net load crosses the flag morning and evening but not at noon", "[harness][profiles]") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto p = synth_profiles(seed);
        const auto net = [&](int h) { return p.load_at(slot_at(h)) - p.pv_at(slot_at(h)); };
        CHECK(net(7) >= 86.0);
        CHECK(net(12) < 86.0);
        CHECK(net(21) >= 86.0);
        double pv_peak = 0.0;
        for (int t = 0; t < kSlotsPerDay; ++t) pv_peak = std::max(pv_peak, p.pv_at(t));
        CHECK(pv_peak > 70.0);
    }
}

TEST_CASE("weather to PV conversion", "[harness]") {
    CHECK(pv_from_weather(1000.0, 25.0, 90.0) == 90.0);
    CHECK(pv_from_weather(500.0, 25.0, 90.0) == 45.0);
    CHECK(pv_from_weather(1000.0, 35.0, 90.0, 0.004) == Approx(90.0 * 0.96));
    CHECK(pv_from_weather(1300.0, 0.0, 90.0) == 90.0);
    CHECK(pv_from_weather(0.0, 40.0, 90.0) == 0.0);
}

TEST_CASE("empty fleet earns only PV revenue", "[harness]") {
    const auto cfg = quick_config();
    const auto p = synth_profiles(2);
    const auto r = run_day(cfg, p, {}, Scheme::proposed, 2, perfect_lookahead(p, 7));
    double expected = 0.0;
    for (int t = 0; t < kSlotsPerDay; ++t) {
        expected -= cfg.tariff.selling_price(t) * std::min(p.pv_at(t), p.load_at(t)) * 0.25;
    }
    CHECK(r.total_cost == Approx(expected).epsilon(1e-12));
    CHECK(r.violations.empty());
    CHECK(r.pct_at_target() == 100.0);
}

TEST_CASE("no PV and no EVs costs nothing", "[harness]") {
    const auto cfg = quick_config();
    auto p = synth_profiles(2);
    std::fill(p.pv.begin(), p.pv.end(), 0.0);
    const auto r = run_day(cfg, p, {}, Scheme::conventional, 2);
    CHECK(r.total_cost == 0.0);
    CHECK(r.grid_load_cost > 0.0);
}

TEST_CASE("every scheme keeps every constraint", "[harness][property]") {
    const auto cfg = quick_config();
    for (std::uint64_t seed : {1u, 4u}) {
        const auto p = synth_profiles(seed);
        const auto fleet = make_fleet(cfg, seed);
        for (Scheme s : {Scheme::charge_only, Scheme::conventional, Scheme::proposed}) {
            INFO(to_string(s) << " seed " << seed);
            const auto r = run_day(cfg, p, fleet, s, seed, perfect_lookahead(p, 7));
            CHECK(r.violations.empty());
            CHECK(audit(r, cfg).empty());
            CHECK(r.slots.size() == 96);
            double cost = 0.0;
            double charge = 0.0;
            for (const auto& slot : r.slots) {
                cost += slot.cost;
                charge += slot.dispatch.ev_charge_total * 0.25;
                CHECK(slot.dispatch.ev_discharge_total <= slot.cap);
                if (s == Scheme::charge_only) CHECK(slot.dispatch.ev_discharge_total == 0.0);
            }
            CHECK(r.total_cost == Approx(cost).margin(1e-6));
            CHECK(r.ev_charge_kwh == Approx(charge).margin(1e-6));
            for (const auto& e : r.evs) CHECK(e.switch_events <= cfg.fleet.n_max_switches);
        }
    }
}

TEST_CASE("zero discharge caps reduce both schemes to charge-only", "[harness]") {
    auto cfg = quick_config();
    cfg.scheduler.dch_max_hi = 0.0;
    cfg.scheduler.dch_max_lo = 0.0;
    REQUIRE_NOTHROW(cfg.validate());
    const auto p = synth_profiles(5);
    const auto fleet = make_fleet(cfg, 5);
    const auto base = run_day(cfg, p, fleet, Scheme::charge_only, 5);
    for (Scheme s : {Scheme::conventional, Scheme::proposed}) {
        const auto r = run_day(cfg, p, fleet, s, 5, perfect_lookahead(p, 7));
        CHECK(r.ev_discharge_kwh == 0.0);
        for (const auto& slot : r.slots) {
            CHECK(slot.dispatch.pw_ev_load == 0.0);
            CHECK(slot.dispatch.pw_ev_ev == 0.0);
        }
        REQUIRE(r.ev_rows.size() == base.ev_rows.size());
        for (std::size_t i = 0; i < r.ev_rows.size(); ++i) CHECK(r.ev_rows[i].op == base.ev_rows[i].op);
        CHECK(r.total_cost == base.total_cost);
    }
}

TEST_CASE("a run is reproducible", "[harness]") {
    const auto cfg = quick_config();
    const auto p = synth_profiles(6);
    const auto fleet = make_fleet(cfg, 6);
    const auto a = run_day(cfg, p, fleet, Scheme::proposed, 6, perfect_lookahead(p, 7));
    const auto b = run_day(cfg, p, fleet, Scheme::proposed, 6, perfect_lookahead(p, 7));
    CHECK(a.total_cost == b.total_cost);
    REQUIRE(a.ev_rows.size() == b.ev_rows.size());
    for (std::size_t i = 0; i < a.ev_rows.size(); ++i) CHECK(a.ev_rows[i].op == b.ev_rows[i].op);
}

TEST_CASE("missing forecasts are counted as fallbacks", "[harness]") {
    const auto cfg = quick_config();
    const auto p = synth_profiles(1);
    const auto r = run_day(cfg, p, make_fleet(cfg, 1), Scheme::proposed, 1);
    CHECK(r.forecast_fallbacks == 96);
    const auto with = run_day(cfg, p, make_fleet(cfg, 1), Scheme::proposed, 1, perfect_lookahead(p, 7));
    CHECK(with.forecast_fallbacks == 0);
}

TEST_CASE("audit catches tampered records", "[harness]") {
    const auto cfg = quick_config();
    const auto p = synth_profiles(1);
    auto r = run_day(cfg, p, make_fleet(cfg, 1), Scheme::conventional, 1);
    REQUIRE(audit(r, cfg).empty());
    auto bad = r;
    bad.total_cost += 1.0;
    CHECK_FALSE(audit(bad, cfg).empty());
    bad = r;
    bad.slots[40].dispatch.ev_discharge_total = bad.slots[40].cap + 1.0;
    CHECK_FALSE(audit(bad, cfg).empty());
    bad = r;
    bad.ev_rows.front().op = Op::discharge;
    bad.ev_rows.front().soc_before = 10.0;
    CHECK_FALSE(audit(bad, cfg).empty());
}

TEST_CASE("reports round-trip", "[harness][report]") {
    const auto cfg = quick_config();
    const auto p = synth_profiles(7);
    const auto r = run_day(cfg, p, make_fleet(cfg, 7), Scheme::conventional, 7);
    const auto dir = scratch_dir("evcs_report_test");
    emit_reports(r, dir);

    const auto rows = read_summary((dir / "summary.csv").string());
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].scheme == Scheme::conventional);
    CHECK(rows[0].seed == 7);
    CHECK(rows[0].total_cost == r.total_cost);
    CHECK(rows[0].violations == 0);

    const auto costs = read_dispatch_costs((dir / "dispatch_conventional.csv").string());
    REQUIRE(costs.size() == 1);
    CHECK(std::abs(costs.at(7) - r.total_cost) <= 1e-6);

    const auto table = csv::read_file((dir / "dispatch_conventional.csv").string());
    CHECK(table.rows.size() == 96);
    CHECK(table.header == dispatch_columns());
    const auto fleet = csv::read_file((dir / "fleet_conventional.csv").string());
    CHECK(fleet.rows.size() == r.evs.size());

    emit_reports(r, dir, true);
    CHECK(csv::read_file((dir / "dispatch_conventional.csv").string()).rows.size() == 192);
    CHECK(read_summary((dir / "summary.csv").string()).size() == 2);
    std::filesystem::remove_all(dir);
}

TEST_CASE("profiles from CSV files", "[harness]") {
    const auto dir = scratch_dir("evcs_profile_test");
    std::filesystem::create_directories(dir);
    {
        std::ofstream load(dir / "load.csv");
        std::ofstream pv(dir / "pv.csv");
        std::ofstream wx(dir / "weather.csv");
        load << "slot,value_kw\n";
        pv << "slot,value_kw\n";
        wx << "slot,irradiance_wm2,temp_c\n";
        for (int s = 0; s < 2 * kSlotsPerDay; ++s) {
            load << s << "," << 100 + s % 7 << "\n";
            pv << s << "," << (s % kSlotsPerDay > 30 && s % kSlotsPerDay < 70 ? 40 : 0) << "\n";
            wx << s << "," << (s % kSlotsPerDay > 30 && s % kSlotsPerDay < 70 ? 800 : 0) << ",25\n";
        }
    }
    ScenarioConfig sc;
    sc.load_csv = (dir / "load.csv").string();
    sc.pv_csv = (dir / "pv.csv").string();
    auto p = profiles_from_csv(sc);
    CHECK(p.day_start == 96);
    CHECK(p.load_at(0) == 100 + 96 % 7);
    CHECK(p.pv_at(40) == 40.0);

    sc.pv_csv.clear();
    sc.weather_csv = (dir / "weather.csv").string();
    p = profiles_from_csv(sc);
    CHECK(p.pv_at(40) == Approx(72.0));
    CHECK(p.pv_at(10) == 0.0);

    sc.pv_capacity = 50.0;
    sc.weather_csv.clear();
    sc.pv_csv = (dir / "load.csv").string();
    CHECK_THROWS_AS(profiles_from_csv(sc), ConfigError);
    std::filesystem::remove_all(dir);
}
