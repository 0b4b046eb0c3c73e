#ifndef EVO_GA_HPP
#define EVO_GA_HPP

#include <algorithm>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace evo {

/// Fixed-length integer vector over alphabet [0, A).
struct Genome {
    std::vector<int> genes;
    int alphabet = 0;

    bool operator==(const Genome&) const = default;
};

struct Individual {
    Genome genome;
    std::optional<double> fitness;

    bool evaluated() const { return fitness.has_value(); }
};

struct GaConfig {
    int pop_size = 64;
    int generations = 100;
    double crossover_prob = 0.9;
    double mutation_prob = 0.02;
    int tournament_k = 5;
    int elitism = 1;
    bool maximize = false;
    std::uint64_t seed = 0;

    void validate() const {
        if (pop_size <= 0 || generations < 0) throw std::invalid_argument("GaConfig: sizes must be positive");
        if (crossover_prob < 0 || crossover_prob > 1 || mutation_prob < 0 || mutation_prob > 1)
            throw std::invalid_argument("GaConfig: probabilities must be in [0,1]");
        if (elitism < 0 || elitism >= pop_size)
            throw std::invalid_argument("GaConfig: elitism must be < population size");
        if (tournament_k < 1) throw std::invalid_argument("GaConfig: tournament size must be >= 1");
    }
};

/// Monotone count of fitness-function invocations.
struct EvalCounter {
    long long count = 0;
    void increment() { ++count; }
};

struct GenerationStats {
    double best = 0.0;
    double mean = 0.0;
    long long evals = 0;  // cumulative
};

struct RunHistory {
    std::vector<GenerationStats> generations;
    Genome best_genome;
    double best_fitness = 0.0;
};

/// Problem seen by the GA loop: genome geometry plus a total fitness function.
struct GaProblem {
    int genome_len = 0;
    int alphabet = 0;
    bool maximize = false;
    std::function<double(const Genome&)> fitness;
    std::string name;
};

inline bool better(double a, double b, bool maximize) { return maximize ? a > b : a < b; }

using Population = std::vector<Individual>;

inline Population init_population(const GaConfig& cfg, int genome_len, int alphabet,
                                  std::mt19937_64& rng) {
    if (genome_len <= 0 || alphabet <= 0)
        throw std::invalid_argument("init_population: genome length and alphabet must be positive");
    Population pop(std::size_t(cfg.pop_size));
    std::uniform_int_distribution<int> gene(0, alphabet - 1);
    for (auto& ind : pop) {
        ind.genome.alphabet = alphabet;
        ind.genome.genes.resize(std::size_t(genome_len));
        for (auto& g : ind.genome.genes) g = gene(rng);
    }
    return pop;
}

inline const Individual& tournament_select(const Population& pop, int k, bool maximize,
                                           std::mt19937_64& rng) {
    if (pop.empty()) throw std::invalid_argument("tournament_select: empty population");
    std::uniform_int_distribution<std::size_t> pick(0, pop.size() - 1);
    const Individual* best = &pop[pick(rng)];
    for (int i = 1; i < k; ++i) {
        const Individual* cand = &pop[pick(rng)];
        if (better(*cand->fitness, *best->fitness, maximize)) best = cand;
    }
    return *best;
}

// ---------------------------------------------------------------------------
// Baseline crossover operators. Each produces a single child.
// ---------------------------------------------------------------------------

inline void check_parents(const Genome& a, const Genome& b) {
    if (a.genes.size() != b.genes.size())
        throw std::invalid_argument("crossover: parent lengths differ, " +
                                    std::to_string(a.genes.size()) + " vs " +
                                    std::to_string(b.genes.size()));
}

inline Genome one_point_crossover(const Genome& p1, const Genome& p2, std::mt19937_64& rng) {
    check_parents(p1, p2);
    std::size_t len = p1.genes.size();
    Genome child = p1;
    if (len < 2) return child;
    std::uniform_int_distribution<std::size_t> cut(1, len - 1);
    std::size_t c = cut(rng);
    for (std::size_t i = c; i < len; ++i) child.genes[i] = p2.genes[i];
    return child;
}

inline Genome equiprobable_uniform(const Genome& p1, const Genome& p2, std::mt19937_64& rng) {
    check_parents(p1, p2);
    Genome child = p1;
    std::bernoulli_distribution coin(0.5);
    for (std::size_t i = 0; i < child.genes.size(); ++i)
        if (coin(rng)) child.genes[i] = p2.genes[i];
    return child;
}

/// Per-locus inheritance probability weighted by the parents' fitness ratio:
/// p(from p1) = w1/(w1+w2) with w = fitness (maximization) or 1/(fitness+eps)
/// (minimization).
inline Genome adaptive_uniform(const Individual& p1, const Individual& p2, bool maximize,
                               std::mt19937_64& rng) {
    if (!p1.evaluated() || !p2.evaluated())
        throw std::invalid_argument("adaptive_uniform: both parents must be evaluated");
    check_parents(p1.genome, p2.genome);
    constexpr double eps = 1e-9;
    double w1 = maximize ? *p1.fitness : 1.0 / (*p1.fitness + eps);
    double w2 = maximize ? *p2.fitness : 1.0 / (*p2.fitness + eps);
    double prob1 = (w1 + w2) > 0.0 ? w1 / (w1 + w2) : 0.5;
    Genome child = p1.genome;
    std::bernoulli_distribution from1(prob1);
    for (std::size_t i = 0; i < child.genes.size(); ++i)
        if (!from1(rng)) child.genes[i] = p2.genome.genes[i];
    return child;
}

inline Genome multiparent_uniform(const std::vector<const Genome*>& parents, std::mt19937_64& rng) {
    if (parents.size() < 2) throw std::invalid_argument("multiparent_uniform: need m >= 2 parents");
    for (std::size_t p = 1; p < parents.size(); ++p) check_parents(*parents[0], *parents[p]);
    Genome child = *parents[0];
    std::uniform_int_distribution<std::size_t> pick(0, parents.size() - 1);
    for (std::size_t i = 0; i < child.genes.size(); ++i)
        child.genes[i] = parents[pick(rng)]->genes[i];
    return child;
}

inline Genome ga_point_mutation(Genome g, double p, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    std::uniform_int_distribution<int> gene(0, g.alphabet - 1);
    for (auto& v : g.genes)
        if (coin(rng) < p) v = gene(rng);
    return g;
}

// ---------------------------------------------------------------------------
// Generational loop
// ---------------------------------------------------------------------------

/// Crossover callback: given m selected parents, produce one child genome.
using CrossoverFn =
    std::function<Genome(const std::vector<const Individual*>&, std::mt19937_64&)>;

struct EvolveHooks {
    int parents_needed = 2;
    /// Called after each offspring evaluation; from_crossover marks children
    /// the crossover callback produced this generation.
    std::function<void(const Individual&, bool from_crossover)> offspring_evaluated;
    /// Called at the end of each generation (training point for learned ops).
    std::function<void()> generation_end;
};

inline RunHistory evolve(const GaConfig& cfg, const GaProblem& problem, const CrossoverFn& crossover,
                         EvalCounter& evals, const EvolveHooks& hooks = {}) {
    cfg.validate();
    std::mt19937_64 rng(cfg.seed);
    bool maximize = problem.maximize;

    Population pop = init_population(cfg, problem.genome_len, problem.alphabet, rng);
    for (auto& ind : pop) {
        ind.fitness = problem.fitness(ind.genome);
        evals.increment();
    }

    RunHistory history;
    auto record = [&](const Population& p) {
        GenerationStats s;
        s.best = *p[0].fitness;
        double sum = 0.0;
        for (const auto& ind : p) {
            sum += *ind.fitness;
            if (better(*ind.fitness, s.best, maximize)) s.best = *ind.fitness;
        }
        s.mean = sum / double(p.size());
        s.evals = evals.count;
        history.generations.push_back(s);
        if (history.generations.size() == 1 || better(s.best, history.best_fitness, maximize)) {
            history.best_fitness = s.best;
            for (const auto& ind : p)
                if (*ind.fitness == s.best) {
                    history.best_genome = ind.genome;
                    break;
                }
        }
    };
    record(pop);

    std::uniform_real_distribution<double> coin(0.0, 1.0);
    for (int gen = 0; gen < cfg.generations; ++gen) {
        Population next;
        next.reserve(pop.size());

        // elites carry their fitness; everything else is re-evaluated
        std::vector<std::size_t> order(pop.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return better(*pop[a].fitness, *pop[b].fitness, maximize);
        });
        for (int e = 0; e < cfg.elitism; ++e) next.push_back(pop[order[std::size_t(e)]]);

        std::vector<bool> from_crossover;
        while (next.size() < pop.size()) {
            Individual child;
            bool crossed = false;
            if (coin(rng) < cfg.crossover_prob) {
                std::vector<const Individual*> parents;
                for (int p = 0; p < hooks.parents_needed; ++p)
                    parents.push_back(&tournament_select(pop, cfg.tournament_k, maximize, rng));
                child.genome = crossover(parents, rng);
                crossed = true;
            } else {
                child.genome = tournament_select(pop, cfg.tournament_k, maximize, rng).genome;
            }
            if (cfg.mutation_prob > 0.0)
                child.genome = ga_point_mutation(std::move(child.genome), cfg.mutation_prob, rng);
            next.push_back(std::move(child));
            from_crossover.push_back(crossed);
        }

        for (std::size_t i = std::size_t(cfg.elitism); i < next.size(); ++i) {
            next[i].fitness = problem.fitness(next[i].genome);
            evals.increment();
            if (hooks.offspring_evaluated)
                hooks.offspring_evaluated(next[i], from_crossover[i - std::size_t(cfg.elitism)]);
        }
        if (hooks.generation_end) hooks.generation_end();

        pop = std::move(next);
        record(pop);
    }
    return history;
}

}  // namespace evo

#endif  // EVO_GA_HPP
