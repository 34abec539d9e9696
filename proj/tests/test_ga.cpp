#include <catch_amalgamated.hpp>

#include <numeric>
#include <random>

#include "evcs/ga.hpp"

using namespace evcs;

namespace {

const auto no_repair = [](ga::Genome&) {};

double distance_to(const ga::Genome& g, const ga::Genome& goal) {
    double d = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) d += g[i] == goal[i] ? 0.0 : 1.0;
    return d;
}

} // namespace

TEST_CASE("finds a planted genome", "[ga]") {
    const std::vector<std::vector<std::uint8_t>> alleles(20, {0, 1, 2});
    ga::Genome goal(20);
    for (std::size_t i = 0; i < goal.size(); ++i) goal[i] = static_cast<std::uint8_t>(i % 3);
    std::mt19937_64 rng(1);
    const auto r = ga::minimize(alleles, [&](const ga::Genome& g) { return distance_to(g, goal); }, no_repair,
                                ga::GaConfig{}, rng);
    CHECK(r.best.fitness == 0.0);
    CHECK(r.best.genome == goal);
    CHECK(r.evaluations == 100L * 41 - 40);
}

TEST_CASE("genes stay within their alleles", "[ga][property]") {
    std::vector<std::vector<std::uint8_t>> alleles{{0}, {0, 2}, {1, 2}, {0, 1, 2}, {2}};
    std::mt19937_64 rng(9);
    ga::GaConfig cfg;
    cfg.mutation = 0.5;
    cfg.generations = 20;
    bool ok = true;
    const auto check = [&](const ga::Genome& g) {
        for (std::size_t i = 0; i < g.size(); ++i) {
            ok &= std::find(alleles[i].begin(), alleles[i].end(), g[i]) != alleles[i].end();
        }
        return std::accumulate(g.begin(), g.end(), 0.0);
    };
    const auto r = ga::minimize(alleles, check, no_repair, cfg, rng);
    CHECK(ok);
    CHECK(r.best.genome == ga::Genome{0, 0, 1, 0, 2});
}

TEST_CASE("every evaluated genome has been repaired", "[ga]") {
    const std::vector<std::vector<std::uint8_t>> alleles(6, {0, 1});
    std::mt19937_64 rng(4);
    bool saw_unrepaired = false;
    const auto r = ga::minimize(
        alleles,
        [&](const ga::Genome& g) {
            saw_unrepaired |= g[0] != 0;
            return -std::accumulate(g.begin(), g.end(), 0.0);
        },
        [](ga::Genome& g) { g[0] = 0; }, ga::GaConfig{}, rng);
    CHECK_FALSE(saw_unrepaired);
    CHECK(r.best.genome == ga::Genome{0, 1, 1, 1, 1, 1});
}

TEST_CASE("a seeded optimum survives through elitism", "[ga]") {
    const std::vector<std::vector<std::uint8_t>> alleles(30, {0, 1});
    const ga::Genome best(30, 1);
    std::mt19937_64 rng(2);
    ga::GaConfig cfg;
    cfg.generations = 3;
    const auto r = ga::minimize(alleles, [&](const ga::Genome& g) { return distance_to(g, best); }, no_repair, cfg,
                                rng, {best});
    CHECK(r.best.genome == best);
}

TEST_CASE("same seed, same search", "[ga]") {
    const std::vector<std::vector<std::uint8_t>> alleles(15, {0, 1, 2});
    const auto f = [](const ga::Genome& g) {
        double s = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) s += std::sin(static_cast<double>(g[i] * (i + 1)));
        return s;
    };
    std::mt19937_64 a(77);
    std::mt19937_64 b(77);
    const auto ra = ga::minimize(alleles, f, no_repair, ga::GaConfig{}, a);
    const auto rb = ga::minimize(alleles, f, no_repair, ga::GaConfig{}, b);
    CHECK(ra.best.genome == rb.best.genome);
    CHECK(ra.best.fitness == rb.best.fitness);
}

TEST_CASE("ties go to the smaller genome", "[ga]") {
    CHECK(ga::better({{0, 1}, 1.0}, {{1, 0}, 1.0}));
    CHECK_FALSE(ga::better({{1, 0}, 1.0}, {{0, 1}, 1.0}));
    CHECK(ga::better({{1, 0}, 0.5}, {{0, 1}, 1.0}));
}

TEST_CASE("settings and inputs are validated", "[ga]") {
    std::mt19937_64 rng(1);
    const auto f = [](const ga::Genome&) { return 0.0; };
    ga::GaConfig bad;
    bad.population = 1;
    CHECK_THROWS_AS(ga::minimize(std::vector<std::vector<std::uint8_t>>{{0}}, f, no_repair, bad, rng), ConfigError);
    bad = ga::GaConfig{};
    bad.mutation = 1.5;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    CHECK_THROWS_AS(ga::minimize(std::vector<std::vector<std::uint8_t>>{{}}, f, no_repair, ga::GaConfig{}, rng),
                    UsageError);
    CHECK_THROWS_AS(ga::minimize(std::vector<std::vector<std::uint8_t>>{{0, 1}}, f, no_repair, ga::GaConfig{}, rng,
                                 {ga::Genome{0, 0}}),
                    UsageError);
    CHECK(ga::GaConfig::full().population == 500);
    CHECK(ga::GaConfig::full().generations == 100);
    CHECK(ga::GaConfig::full().crossover == 0.8);
    CHECK(ga::GaConfig::full().mutation == 0.01);
}
