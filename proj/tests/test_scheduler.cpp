#include <catch_amalgamated.hpp>

#include <random>

#include "evcs/scheduler.hpp"
#include "support/oracles.hpp"

using namespace evcs;
using Catch::Approx;

namespace {

EvCandidate candidate(int id, double power, double soc, int remaining) {
    EvCandidate c;
    c.fleet_index = static_cast<std::size_t>(id);
    c.id = id;
    c.power_kw = power;
    c.soc = soc;
    c.remaining = remaining;
    c.may_charge = true;
    return c;
}

SlotContext plain_context(double load, double pv) {
    SlotContext ctx;
    ctx.load = load;
    ctx.pv = pv;
    ctx.tou = 0.108;
    ctx.sell = 0.16;
    ctx.cap = 12.0;
    return ctx;
}

} // namespace

TEST_CASE("conventional cap", "[scheduler][cap]") {
    const SchedulerConfig cfg;
    CHECK(discharge_cap_conventional(100.0, 10.0, cfg) == 12.0);
    CHECK(discharge_cap_conventional(86.0, 0.0, cfg) == 12.0);
    CHECK(discharge_cap_conventional(50.0, 0.0, cfg) == 2.0);
    CHECK(discharge_cap_conventional(std::nextafter(86.0, 0.0), 0.0, cfg) == 2.0);
    CHECK(discharge_cap_conventional(96.0, 10.0, cfg) == 12.0);
}

TEST_CASE("look-ahead cap", "[scheduler][cap]") {
    const SchedulerConfig cfg;
    REQUIRE(cfg.lookahead_k == 7);
    SECTION("every difference exactly at the flag") {
        const std::vector<LoadPv> f(7, LoadPv{86.0, 0.0});
        CHECK(discharge_cap_lookahead({86.0, 0.0}, f, cfg) == 12.0);
        CHECK(discharge_cap_proposed({86.0, 0.0}, f, cfg) == 12.0);
    }
    SECTION("seven differences of 90 and one of 20 stay under 688") {
        std::vector<LoadPv> f(6, LoadPv{90.0, 0.0});
        f.push_back({20.0, 0.0});
        CHECK(discharge_cap_lookahead({90.0, 0.0}, f, cfg) == 2.0);
        CHECK(discharge_cap_lookahead({100.0, 10.0}, f, cfg) == 2.0);
    }
    SECTION("an instantaneous spike is outweighed by a quiet horizon") {
        const std::vector<LoadPv> f(7, LoadPv{0.0, 0.0});
        CHECK(discharge_cap_lookahead({200.0, 0.0}, f, cfg) == 2.0);
        CHECK(discharge_cap_conventional(200.0, 0.0, cfg) == 12.0);
    }
    SECTION("sum one ulp under the boundary") {
        std::vector<LoadPv> f(7, LoadPv{86.0, 0.0});
        f.back().load = 86.0 - (688.0 - std::nextafter(688.0, 0.0)); // the sum lands one ulp under 688
        CHECK(discharge_cap_lookahead({86.0, 0.0}, f, cfg) == 2.0);
    }
    SECTION("missing forecasts fall back to the instantaneous rule") {
        const std::vector<LoadPv> f(3, LoadPv{0.0, 0.0});
        CHECK_FALSE(discharge_cap_lookahead({200.0, 0.0}, f, cfg).has_value());
        CHECK(discharge_cap_proposed({200.0, 0.0}, f, cfg) == 12.0);
        CHECK(discharge_cap_proposed({20.0, 0.0}, {}, cfg) == 2.0);
    }
}

TEST_CASE("with no look-ahead the two cap rules agree", "[scheduler][cap][property]") {
    SchedulerConfig cfg;
    cfg.lookahead_k = 0;
    std::mt19937_64 rng(101);
    std::uniform_real_distribution<double> load(0.0, 250.0);
    std::uniform_real_distribution<double> pv(0.0, 90.0);
    for (int i = 0; i < 1000; ++i) {
        const LoadPv now{load(rng), pv(rng)};
        CHECK(discharge_cap_proposed(now, {}, cfg) == discharge_cap_conventional(now.load, now.pv, cfg));
    }
}

TEST_CASE("objective values of simple assignments", "[scheduler][objective]") {
    auto ctx = plain_context(60.0, 30.0);
    SECTION("everyone idle") {
        ctx.evs = {candidate(0, 7.0, 40.0, 20), candidate(1, 19.2, 50.0, 30)};
        const auto o = objective_components({Op::idle, Op::idle}, ctx);
        CHECK(o[0] == Approx(-0.16 * 30.0 * 0.25));
        CHECK(o[1] == Approx(30.0 - 30.0));
        CHECK(o[2] == 0.0);
        CHECK(o[3] == 0.0);
        CHECK(o[4] == 0.0);
    }
    SECTION("one EV charging from 20%") {
        ctx.evs = {candidate(0, 7.0, 20.0, 20)};
        const auto o = objective_components({Op::charge}, ctx);
        CHECK(o[3] == -3600.0);
        CHECK(o[2] == 20.0);
    }
    SECTION("one EV discharging") {
        ctx.evs = {candidate(0, 7.0, 50.0, 20)};
        ctx.evs[0].may_discharge = true;
        const auto o = objective_components({Op::discharge}, ctx);
        CHECK(o[4] == -7.0);
        CHECK(o[2] == -20.0);
        CHECK(o[3] == 900.0);
    }
}

TEST_CASE("the EV leaving sooner gets the single charging slot", "[scheduler]") {
    auto ctx = plain_context(100.0, 0.0);
    ctx.tou = 0.0;
    ctx.pw_max = 107.0; // room for one 7 kW charger only
    ctx.evs = {candidate(0, 7.0, 40.0, 40), candidate(1, 7.0, 40.0, 4)};
    const Assignment early{Op::idle, Op::charge};
    const Assignment late{Op::charge, Op::idle};
    CHECK_FALSE(feasible({Op::charge, Op::charge}, ctx));
    CHECK(objective_components(early, ctx)[2] == 4.0);
    CHECK(objective_components(late, ctx)[2] == 40.0);
    const auto dec = optimize_slot(ctx, SchedulerConfig{}, 9);
    REQUIRE(dec.feasible);
    CHECK(dec.ops == early);
}

TEST_CASE("larger SOC gap never lowers charging priority", "[scheduler][objective][property]") {
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> soc(0.0, 80.0);
    for (int i = 0; i < 500; ++i) {
        auto ctx = plain_context(50.0, 10.0);
        double s0 = soc(rng);
        double s1 = soc(rng);
        ctx.evs = {candidate(0, 7.0, s0, 20), candidate(1, 7.0, s1, 20)};
        const double first = objective_components({Op::charge, Op::idle}, ctx)[3];
        const double second = objective_components({Op::idle, Op::charge}, ctx)[3];
        if (s0 < s1) CHECK(first <= second);
        if (s1 < s0) CHECK(second <= first);
    }
}

TEST_CASE("no candidates gives an all-idle decision", "[scheduler]") {
    const auto ctx = plain_context(80.0, 40.0);
    const auto dec = optimize_slot(ctx, SchedulerConfig{}, 1);
    CHECK(dec.ops.empty());
    CHECK(dec.feasible);
    CHECK(dec.dispatch.pw_pv_load == 40.0);
    CHECK(dec.dispatch.pw_grid_load == 40.0);
}

TEST_CASE("repair restores feasibility without touching pinned EVs", "[scheduler][property]") {
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 300; ++trial) {
        auto ctx = oracle::random_context(rng, 8, trial % 2 ? 12.0 : 2.0, 120.0);
        ctx.evs[0].may_idle = false;
        ctx.evs[0].may_discharge = false;
        Assignment a(ctx.evs.size());
        for (std::size_t i = 0; i < a.size(); ++i) {
            a[i] = ctx.evs[i].may_discharge && (trial + i) % 2 ? Op::discharge : Op::charge;
        }
        const auto before = a;
        if (repair(a, ctx)) {
            CHECK(feasible(a, ctx));
        }
        CHECK(a[0] == before[0]);
        for (std::size_t i = 0; i < a.size(); ++i) CHECK((a[i] == before[i] || a[i] == Op::idle));
    }
}

TEST_CASE("repair drops the discharge leaving soonest first", "[scheduler]") {
    auto ctx = plain_context(100.0, 0.0);
    ctx.cap = 7.0;
    ctx.evs = {candidate(0, 7.0, 60.0, 30), candidate(1, 7.0, 60.0, 10)};
    for (auto& c : ctx.evs) c.may_discharge = true;
    Assignment a{Op::discharge, Op::discharge};
    REQUIRE(repair(a, ctx));
    CHECK(a == Assignment{Op::discharge, Op::idle});
}

TEST_CASE("optimised decisions respect caps", "[scheduler][property]") {
    std::mt19937_64 rng(8);
    SchedulerConfig cfg;
    cfg.ga.population = 30;
    cfg.ga.generations = 10;
    for (int trial = 0; trial < 100; ++trial) {
        const double cap = trial % 2 ? 12.0 : 2.0;
        auto ctx = oracle::random_context(rng, 10, cap);
        ctx.pw_max = std::max(0.0, ctx.load - ctx.pv) + 0.5 * trial;
        const auto dec = optimize_slot(ctx, cfg, static_cast<std::uint64_t>(trial));
        REQUIRE(dec.feasible);
        CHECK(dec.dispatch.ev_discharge_total <= cap);
        CHECK(check_grid_cap(dec.dispatch, ctx.pw_max));
        CHECK(dispatch_violation(dec.dispatch).empty());
        for (std::size_t i = 0; i < dec.ops.size(); ++i) {
            if (dec.ops[i] == Op::discharge) CHECK(ctx.evs[i].may_discharge);
            if (dec.ops[i] == Op::charge) CHECK(ctx.evs[i].may_charge);
        }
    }
}

TEST_CASE("the slot optimiser is deterministic for a seed", "[scheduler]") {
    std::mt19937_64 rng(12);
    const auto ctx = oracle::random_context(rng, 12, 12.0);
    const SchedulerConfig cfg;
    const auto a = optimize_slot(ctx, cfg, 5);
    const auto b = optimize_slot(ctx, cfg, 5);
    CHECK(a.ops == b.ops);
    CHECK(a.fitness == b.fitness);
}

TEST_CASE("GA matches exhaustive search on small slots", "[scheduler][oracle]") {
    std::mt19937_64 rng(2024);
    const SchedulerConfig cfg;
    int close = 0;
    for (int trial = 0; trial < 20; ++trial) {
        auto ctx = oracle::random_context(rng, 3, 12.0);
        ctx.pw_max = std::max(0.0, ctx.load - ctx.pv) + 5.0 * trial;
        const auto best = oracle::brute_force(ctx, cfg.weights);
        REQUIRE(best.found);
        const auto dec = optimize_slot(ctx, cfg, static_cast<std::uint64_t>(trial) + 1);
        CHECK(dec.fitness >= best.fitness - 1e-12);
        if (dec.fitness - best.fitness <= 0.05 * std::abs(best.fitness) + 1e-12) ++close;
    }
    CHECK(close >= 18);
}

TEST_CASE("pinned charges are shed to hold the grid limit", "[scheduler]") {
    auto ctx = plain_context(150.0, 0.0);
    ctx.evs = {candidate(0, 7.0, 40.0, 10), candidate(1, 7.0, 40.0, 30)};
    for (auto& c : ctx.evs) c.may_idle = false;
    ctx.evs[0].was_charging = true;
    const auto dec = optimize_slot(ctx, SchedulerConfig{}, 3);
    CHECK(dec.shed == 1);
    CHECK(dec.ops == Assignment{Op::charge, Op::idle});
    CHECK(dec.feasible);
}

TEST_CASE("context building follows the scheme", "[scheduler]") {
    FleetConfig fc;
    const auto ev = make_ev(0, 0, 80, 60.0, fc);
    const std::vector<EvState> fleet{ev};
    const auto cand = classify_candidates(fleet, 10, fc);
    REQUIRE(cand.discharge.size() == 1);
    const TariffSchedule tariff;
    SchedulerConfig sc;
    sc.scheme = Scheme::proposed;
    CHECK(make_context(fleet, cand, 10, {100, 0}, tariff, 12.0, sc, fc).evs[0].may_discharge);
    CHECK_FALSE(make_context(fleet, cand, 10, {100, 0}, tariff, 2.0, sc, fc).evs[0].may_discharge);
    CHECK_FALSE(make_context(fleet, cand, 10, {100, 0}, tariff, 0.0, sc, fc).evs[0].may_discharge);
    sc.scheme = Scheme::charge_only;
    CHECK_FALSE(make_context(fleet, cand, 10, {100, 0}, tariff, 12.0, sc, fc).evs[0].may_discharge);
}

TEST_CASE("scheduler settings are validated", "[scheduler]") {
    SchedulerConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.dch_max_lo = 12.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = SchedulerConfig{};
    cfg.weights[0] = 0.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = SchedulerConfig{};
    cfg.lookahead_k = -1;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}
