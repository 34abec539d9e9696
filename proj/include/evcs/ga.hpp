#pragma once

#include <algorithm>
#include <concepts>
#include <cstdint>
#include <random>
#include <vector>

#include "common.hpp"

namespace evcs::ga {

struct GaConfig {
    int population = 100;
    int generations = 40;
    double crossover = 0.8;
    double mutation = 0.01; // per gene
    int tournament = 3;
    int elitism = 1;

    /// Population 500, 100 generations.
    static GaConfig full() {
        GaConfig c;
        c.population = 500;
        c.generations = 100;
        return c;
    }
    static GaConfig desk() { return GaConfig{}; }

    void validate() const {
        if (population < 2 || generations < 0 || tournament < 1 || elitism < 0 || elitism >= population) {
            throw ConfigError("ga: bad population/generation/tournament/elitism settings");
        }
        if (!(crossover >= 0.0 && crossover <= 1.0) || !(mutation >= 0.0 && mutation <= 1.0)) {
            throw ConfigError("ga: probabilities must lie in [0, 1]");
        }
    }
};

using Genome = std::vector<std::uint8_t>;

template <class F>
concept FitnessFn = requires(F f, const Genome& g) {
    { f(g) } -> std::convertible_to<double>;
};

template <class R>
concept RepairFn = requires(R r, Genome& g) { r(g); };

struct Individual {
    Genome genome;
    double fitness = 0.0;
};

/// Lower fitness wins; ties go to the lexicographically smaller genome so the
/// outcome never depends on evaluation order.
inline bool better(const Individual& a, const Individual& b) {
    if (a.fitness != b.fitness) return a.fitness < b.fitness;
    return a.genome < b.genome;
}

struct Result {
    Individual best;
    long evaluations = 0;
};

/// Minimises `fitness` over genomes whose gene i takes values from
/// `alleles[i]`. Every offspring passes through `repair` before evaluation.
/// Tournament selection, uniform crossover, per-gene resampling mutation,
/// elitist generational replacement. `seeds` are injected into the initial
/// population ahead of random individuals.
template <FitnessFn Fitness, RepairFn Repair>
Result minimize(const std::vector<std::vector<std::uint8_t>>& alleles, Fitness&& fitness, Repair&& repair,
                const GaConfig& cfg, std::mt19937_64& rng, const std::vector<Genome>& seeds = {}) {
    cfg.validate();
    for (const auto& a : alleles) {
        if (a.empty()) throw UsageError("ga: gene without alleles");
    }
    const std::size_t n = alleles.size();
    Result result;

    const auto evaluate = [&](Genome g) {
        repair(g);
        ++result.evaluations;
        const double f = fitness(g);
        return Individual{std::move(g), f};
    };

    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const auto random_allele = [&](std::size_t i) {
        const auto& a = alleles[i];
        std::uniform_int_distribution<std::size_t> pick(0, a.size() - 1);
        return a[pick(rng)];
    };

    std::vector<Individual> pop;
    pop.reserve(static_cast<std::size_t>(cfg.population));
    for (const auto& s : seeds) {
        if (pop.size() >= static_cast<std::size_t>(cfg.population)) break;
        if (s.size() != n) throw UsageError("ga: seed genome has the wrong length");
        pop.push_back(evaluate(s));
    }
    while (pop.size() < static_cast<std::size_t>(cfg.population)) {
        Genome g(n);
        for (std::size_t i = 0; i < n; ++i) g[i] = random_allele(i);
        pop.push_back(evaluate(std::move(g)));
    }

    const auto by_rank = [](const Individual& a, const Individual& b) { return better(a, b); };
    std::uniform_int_distribution<std::size_t> any(0, pop.size() - 1);
    const auto tournament = [&]() -> const Individual& {
        const Individual* winner = &pop[any(rng)];
        for (int k = 1; k < cfg.tournament; ++k) {
            const Individual& c = pop[any(rng)];
            if (better(c, *winner)) winner = &c;
        }
        return *winner;
    };

    for (int gen = 0; gen < cfg.generations; ++gen) {
        std::sort(pop.begin(), pop.end(), by_rank);
        std::vector<Individual> next(pop.begin(), pop.begin() + cfg.elitism);
        next.reserve(pop.size());
        while (next.size() < pop.size()) {
            const Individual& a = tournament();
            const Individual& b = tournament();
            Genome child = a.genome;
            if (unit(rng) < cfg.crossover) {
                for (std::size_t i = 0; i < n; ++i) {
                    if (unit(rng) < 0.5) child[i] = b.genome[i];
                }
            }
            for (std::size_t i = 0; i < n; ++i) {
                if (alleles[i].size() > 1 && unit(rng) < cfg.mutation) {
                    const auto current = child[i];
                    std::uint8_t v = current;
                    while (v == current) v = random_allele(i);
                    child[i] = v;
                }
            }
            next.push_back(evaluate(std::move(child)));
        }
        pop = std::move(next);
    }
    result.best = *std::min_element(pop.begin(), pop.end(), by_rank);
    return result;
}

} // namespace evcs::ga
