#include <doctest.h>

#include <evo/dnc.hpp>

#include <cstdio>

#include "test_util.hpp"

using namespace evo;

namespace {

DncConfig small_config(int m, int alphabet, int len) {
    DncConfig cfg;
    cfg.parent_count = m;
    cfg.alphabet = alphabet;
    cfg.genome_len = len;
    cfg.embed_dim = 8;
    cfg.hidden_dim = 8;
    cfg.attn_dim = 8;
    cfg.init_seed = 99;
    return cfg;
}

std::vector<Genome> random_parents(int m, int alphabet, int len, std::mt19937_64& rng) {
    std::uniform_int_distribution<int> gene(0, alphabet - 1);
    std::vector<Genome> out;
    out.resize(std::size_t(m));
    for (auto& g : out) {
        g.alphabet = alphabet;
        for (int i = 0; i < len; ++i) g.genes.push_back(gene(rng));
    }
    return out;
}

std::vector<double> flatten_params(DncOperator& op) {
    std::vector<double> out;
    for (Tensor* p : op.model().params())
        out.insert(out.end(), p->values.begin(), p->values.end());
    return out;
}

}  // namespace

TEST_CASE("dnc config validation") {
    CHECK_THROWS_AS(DncOperator{small_config(1, 4, 5)}, std::invalid_argument);
    auto bad = small_config(2, 4, 5);
    bad.batch_size = 0;
    CHECK_THROWS_AS(DncOperator{bad}, std::invalid_argument);
    bad = small_config(2, 0, 5);
    CHECK_THROWS_AS(DncOperator{bad}, std::invalid_argument);
    bad = small_config(2, 4, 5);
    bad.baseline_decay = 1.0;
    CHECK_THROWS_AS(DncOperator{bad}, std::invalid_argument);
}

TEST_CASE("dnc closure: every child gene comes from a parent at the same locus") {
    DncOperator op(small_config(3, 6, 8));
    op.set_frozen(true);
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 2000; ++trial) {
        auto parents = random_parents(3, 6, 8, rng);
        Genome child = op.crossover_genomes(parents, rng);
        REQUIRE(child.genes.size() == 8);
        for (std::size_t i = 0; i < 8; ++i) {
            bool from_some_parent = false;
            for (const auto& p : parents)
                if (p.genes[i] == child.genes[i]) from_some_parent = true;
            CHECK(from_some_parent);
        }
    }
}

TEST_CASE("dnc: identical parents produce a clone under any weights") {
    DncOperator op(small_config(2, 4, 6));
    op.set_frozen(true);
    std::mt19937_64 rng(7);
    Genome g{{1, 3, 0, 2, 2, 1}, 4};
    for (int trial = 0; trial < 50; ++trial)
        CHECK(op.crossover_genomes({g, g}, rng) == g);
}

TEST_CASE("dnc: deterministic given rng state") {
    DncOperator a(small_config(2, 5, 8));
    DncOperator b(small_config(2, 5, 8));
    std::mt19937_64 pr(11);
    auto parents = random_parents(2, 5, 8, pr);
    std::mt19937_64 r1(42), r2(42);
    CHECK(a.crossover_genomes(parents, r1) == b.crossover_genomes(parents, r2));
}

TEST_CASE("dnc input validation") {
    DncOperator op(small_config(2, 4, 5));
    std::mt19937_64 rng(1);
    Genome a{{0, 1, 2, 3, 0}, 4}, b{{1, 1, 1, 1, 1}, 4};
    CHECK_THROWS_AS(op.crossover_genomes({a}, rng), std::invalid_argument);
    Genome shorter{{0, 1}, 4};
    CHECK_THROWS_AS(op.crossover_genomes({a, shorter}, rng), std::invalid_argument);
    Genome hot{{0, 1, 2, 3, 9}, 4};
    CHECK_THROWS_AS(op.crossover_genomes({a, hot}, rng), std::invalid_argument);
}

TEST_CASE("dnc single-locus softmax bookkeeping") {
    DncOperator op(small_config(2, 2, 1));
    std::mt19937_64 rng(3);
    Genome p0{{0}, 2}, p1{{1}, 2};

    // every record's log-prob must match the two-way softmax: collecting the
    // distinct per-arm values, their exponentials sum to 1
    double lp_arm[2] = {0.0, 0.0};
    bool seen[2] = {false, false};
    int chose0 = 0;
    const int n = 10000;
    for (int i = 0; i < n; ++i) {
        Genome child = op.crossover_genomes({p0, p1}, rng);
        const CrossoverRecord& rec = op.pending().back();
        int arm = rec.choices[0];
        CHECK(child.genes[0] == arm);
        if (seen[arm]) CHECK(rec.logprob == doctest::Approx(lp_arm[arm]).epsilon(1e-12));
        lp_arm[arm] = rec.logprob;
        seen[arm] = true;
        if (arm == 0) ++chose0;
    }
    REQUIRE(seen[0]);
    REQUIRE(seen[1]);
    double psum = std::exp(lp_arm[0]) + std::exp(lp_arm[1]);
    CHECK(psum == doctest::Approx(1.0).epsilon(1e-9));

    // empirical arm frequency within 3 sigma of the recorded probability
    double p = std::exp(lp_arm[0]);
    double sigma = std::sqrt(p * (1.0 - p) * n);
    CHECK(std::abs(chose0 - p * n) < 3.0 * sigma);
}

TEST_CASE("dnc: zero pointer v gives the multiparent-uniform distribution") {
    for (int m : {2, 3}) {
        DncOperator op(small_config(m, 4, 8));
        op.set_frozen(true);
        for (double& v : op.model().pointer.v.values) v = 0.0;

        std::mt19937_64 rng(17);
        auto parents = random_parents(m, 4, 8, rng);
        // distinct genes per locus so the choice is recoverable from the child
        for (int p = 0; p < m; ++p)
            for (int i = 0; i < 8; ++i) parents[std::size_t(p)].genes[std::size_t(i)] = (i + p) % 4;

        const int n = 10000;
        std::vector<std::vector<long>> counts(8, std::vector<long>(std::size_t(m), 0));
        for (int t = 0; t < n; ++t) {
            Genome child = op.crossover_genomes(parents, rng);
            for (int i = 0; i < 8; ++i) {
                int arm = (child.genes[std::size_t(i)] - i % 4 + 4) % 4;
                REQUIRE(arm < m);
                ++counts[std::size_t(i)][std::size_t(arm)];
            }
        }
        for (int i = 0; i < 8; ++i)
            CHECK(testutil::chi2_uniform(counts[std::size_t(i)], double(n)) <
                  testutil::chi2_crit_p01(std::size_t(m - 1)));
    }
}

TEST_CASE("dnc reward plumbing") {
    auto cfg = small_config(2, 3, 4);
    cfg.batch_size = 2;

    SUBCASE("pending records move to cache with signed rewards") {
        cfg.maximize = true;
        DncOperator op(cfg);
        std::mt19937_64 rng(1);
        auto parents = random_parents(2, 3, 4, rng);
        op.crossover_genomes(parents, rng);
        op.crossover_genomes(parents, rng);
        CHECK(op.pending_count() == 2);
        op.deliver_reward_value(5.0);
        CHECK(op.pending_count() == 1);
        CHECK(op.cache_size() == 1);
        CHECK(op.cache()[0].reward == 5.0);
    }
    SUBCASE("minimization flips the sign") {
        cfg.maximize = false;
        DncOperator op(cfg);
        std::mt19937_64 rng(1);
        op.crossover_genomes(random_parents(2, 3, 4, rng), rng);
        op.deliver_reward_value(5.0);
        CHECK(op.cache()[0].reward == -5.0);
    }
    SUBCASE("unmatched delivery is an error") {
        DncOperator op(cfg);
        CHECK_THROWS_AS(op.deliver_reward_value(1.0), std::logic_error);
        Individual unevaluated;
        CHECK_THROWS_AS(op.deliver_reward(unevaluated), std::invalid_argument);
    }
    SUBCASE("frozen operator records nothing") {
        cfg.frozen = true;
        DncOperator op(cfg);
        std::mt19937_64 rng(1);
        op.crossover_genomes(random_parents(2, 3, 4, rng), rng);
        CHECK(op.pending_count() == 0);
        op.deliver_reward_value(1.0);  // silently ignored
        CHECK(op.cache_size() == 0);
    }
}

TEST_CASE("dnc reinforce_update bookkeeping") {
    auto cfg = small_config(2, 3, 4);
    cfg.batch_size = 4;
    cfg.maximize = true;
    DncOperator op(cfg);
    std::mt19937_64 rng(23);
    auto parents = random_parents(2, 3, 4, rng);

    SUBCASE("short cache is a no-op") {
        op.crossover_genomes(parents, rng);
        op.deliver_reward_value(1.0);
        CHECK(op.reinforce_update() == 0.0);
        CHECK(op.optimizer_steps() == 0);
        CHECK(op.cache_size() == 1);
    }
    SUBCASE("rewards equal to the baseline leave parameters untouched") {
        auto before = flatten_params(op);
        for (int i = 0; i < 4; ++i) {
            op.crossover_genomes(parents, rng);
            op.deliver_reward_value(0.0);  // baseline starts at 0
        }
        op.reinforce_update();
        CHECK(flatten_params(op) == before);
        CHECK(op.cache_size() == 0);
    }
    SUBCASE("full batch trains, drains the cache and updates the baseline") {
        for (int i = 0; i < 4; ++i) {
            op.crossover_genomes(parents, rng);
            op.deliver_reward_value(2.0);
        }
        auto before = flatten_params(op);
        op.reinforce_update();
        CHECK(op.optimizer_steps() == 1);
        CHECK(op.cache_size() == 0);
        CHECK(flatten_params(op) != before);
        CHECK(op.baseline() == doctest::Approx((1.0 - 0.9) * 2.0));
    }
    SUBCASE("frozen update leaves parameters bit-identical") {
        op.set_frozen(true);
        auto before = flatten_params(op);
        CHECK(op.reinforce_update() == 0.0);
        CHECK(flatten_params(op) == before);
        CHECK(op.optimizer_steps() == 0);
    }
}

TEST_CASE("dnc REINFORCE estimator moves mass toward the rewarded arm") {
    auto cfg = small_config(2, 2, 1);
    cfg.batch_size = 1000;
    cfg.maximize = true;
    DncOperator op(cfg);
    Genome p0{{0}, 2}, p1{{1}, 2};
    std::mt19937_64 rng(31);

    auto prob_arm0 = [&] {
        std::mt19937_64 r(1);
        Genome c = op.crossover_genomes({p0, p1}, r);
        const CrossoverRecord& rec = op.pending().back();
        double p = std::exp(rec.logprob);
        return rec.choices[0] == 0 ? p : 1.0 - p;
    };

    double before = prob_arm0();
    op.deliver_reward_value(0.0);  // complete the probe; zero advantage, no gradient
    for (int i = 0; i < 1000; ++i) {
        Genome child = op.crossover_genomes({p0, p1}, rng);
        op.deliver_reward_value(child.genes[0] == 0 ? 1.0 : 0.0);
    }
    op.reinforce_update();
    double after = prob_arm0();
    CHECK(after > before);
}

TEST_CASE("dnc bandit: 500 updates with B=32 reach P(parent 1) > 0.8") {
    Genome p0{{0}, 2}, p1{{1}, 2};
    double mean_p = 0.0;
    for (int seed = 0; seed < 5; ++seed) {
        auto cfg = small_config(2, 2, 1);
        cfg.batch_size = 32;
        cfg.learning_rate = 1e-3;
        cfg.maximize = true;
        cfg.init_seed = std::uint64_t(seed) + 1;
        DncOperator op(cfg);
        std::mt19937_64 rng(std::uint64_t(seed) * 7 + 3);
        for (int update = 0; update < 500; ++update) {
            for (int i = 0; i < 32; ++i) {
                Genome child = op.crossover_genomes({p0, p1}, rng);
                op.deliver_reward_value(child.genes[0] == 0 ? 1.0 : 0.0);
            }
            op.reinforce_update();
        }
        CHECK(op.optimizer_steps() == 500);
        op.set_frozen(true);
        int chose0 = 0;
        for (int i = 0; i < 1000; ++i)
            if (op.crossover_genomes({p0, p1}, rng).genes[0] == 0) ++chose0;
        mean_p += double(chose0) / 1000.0;
    }
    mean_p /= 5.0;
    CHECK(mean_p > 0.8);
}

TEST_CASE("dnc checkpoint transfer workflow") {
    auto cfg = small_config(2, 4, 6);
    DncOperator op(cfg);
    std::mt19937_64 rng(13);
    auto parents = random_parents(2, 4, 6, rng);
    std::string path = "dnc_ckpt_tmp.bin";
    op.save_checkpoint(path);

    SUBCASE("round trip reproduces the sampling distribution exactly") {
        auto frozen_cfg = cfg;
        frozen_cfg.frozen = true;
        DncOperator loaded = DncOperator::load_checkpoint(path, frozen_cfg);
        std::mt19937_64 r1(55), r2(55);
        for (int i = 0; i < 20; ++i)
            CHECK(op.crossover_genomes(parents, r1) == loaded.crossover_genomes(parents, r2));
        CHECK(loaded.optimizer_steps() == 0);
        loaded.reinforce_update();
        CHECK(loaded.optimizer_steps() == 0);
    }
    SUBCASE("alphabet mismatch is an explicit error") {
        auto other = small_config(2, 5, 6);
        CHECK_THROWS_AS(DncOperator::load_checkpoint(path, other), std::runtime_error);
    }
    SUBCASE("parent-count mismatch is an explicit error") {
        auto other = small_config(3, 4, 6);
        CHECK_THROWS_AS(DncOperator::load_checkpoint(path, other), std::runtime_error);
    }
    std::remove(path.c_str());
}

TEST_CASE("dnc inside the GA loop: eval counts match equiprobable uniform") {
    GaProblem onemax;
    onemax.genome_len = 10;
    onemax.alphabet = 2;
    onemax.maximize = true;
    onemax.fitness = [](const Genome& g) {
        double s = 0;
        for (int v : g.genes) s += v;
        return s;
    };

    GaConfig ga;
    ga.pop_size = 16;
    ga.generations = 10;
    ga.seed = 4;

    auto cfg = small_config(2, 2, 10);
    cfg.batch_size = 8;
    cfg.maximize = true;
    DncOperator op(cfg);

    EvalCounter dnc_evals;
    evolve(ga, onemax, [&](const std::vector<const Individual*>& ps, std::mt19937_64& rng) {
        return op.crossover(ps, rng);
    }, dnc_evals, op.make_hooks());
    CHECK(op.optimizer_steps() > 0);
    CHECK(op.pending_count() == 0);

    EvalCounter uni_evals;
    evolve(ga, onemax, [](const std::vector<const Individual*>& ps, std::mt19937_64& rng) {
        return equiprobable_uniform(ps[0]->genome, ps[1]->genome, rng);
    }, uni_evals);
    CHECK(dnc_evals.count == uni_evals.count);
}
