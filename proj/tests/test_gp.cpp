#include <doctest.h>

#include <evo/gp.hpp>

#include <cmath>
#include <random>

#include "test_util.hpp"

using namespace evo;

namespace {

// the worked example tree: (2.2 - (x/11)) + (7*cos(y))
GpTree example_tree(const PrimitiveSet& pset) {
    int add = pset.function_index("+");
    int sub = pset.function_index("-");
    int mul = pset.function_index("*");
    int div = pset.function_index("/");
    int cosf = pset.function_index("cos");
    GpNode left = GpNode::func(sub, {GpNode::constant(2.2),
                                     GpNode::func(div, {GpNode::var(0), GpNode::constant(11)})});
    GpNode right =
        GpNode::func(mul, {GpNode::constant(7), GpNode::func(cosf, {GpNode::var(1)})});
    return {GpNode::func(add, {std::move(left), std::move(right)})};
}

PrimitiveSet xy_pset() {
    PrimitiveSet p = PrimitiveSet::standard(2);
    p.variables = {"x", "y"};
    return p;
}

GpTree random_valid_tree(const PrimitiveSet& pset, std::mt19937_64& rng, int depth = 4) {
    return {random_tree_node(pset, depth, false, rng)};
}

}  // namespace

TEST_CASE("full method at fixed depth puts all leaves at that depth") {
    PrimitiveSet pset = PrimitiveSet::standard(1);
    std::mt19937_64 rng(1);
    for (int t = 0; t < 50; ++t) {
        GpTree tree{random_tree_node(pset, 2, true, rng)};
        CHECK(depth_of(tree.root) == 2);
        CHECK(tree_valid(tree.root, pset));
    }
}

TEST_CASE("ramped half-and-half trees are always arity-valid") {
    PrimitiveSet pset = PrimitiveSet::standard(3);
    std::mt19937_64 rng(2);
    RampedHalfAndHalf init(2, 6);
    for (int t = 0; t < 10000; ++t) {
        GpTree tree = init.next(pset, rng);
        CHECK(tree_valid(tree.root, pset));
        CHECK(depth_of(tree.root) <= 6);
    }
}

TEST_CASE("ramped initialization is seed-reproducible") {
    PrimitiveSet pset = PrimitiveSet::standard(2);
    std::mt19937_64 r1(99), r2(99);
    RampedHalfAndHalf i1(2, 5), i2(2, 5);
    for (int t = 0; t < 30; ++t) CHECK(tree_equal(i1.next(pset, r1).root, i2.next(pset, r2).root));
}

TEST_CASE("eval_tree on the worked example at x=0, y=0") {
    PrimitiveSet pset = xy_pset();
    GpTree t = example_tree(pset);
    std::vector<double> X = {0.0, 0.0};  // one row, two features
    auto out = eval_tree(t, pset, X, 2);
    // (2.2 - 0) + 7*cos(0) = 9.2
    CHECK(out[0] == doctest::Approx(9.2).epsilon(1e-12));
}

TEST_CASE("eval_tree: single variable tree is the identity on column 0") {
    PrimitiveSet pset = PrimitiveSet::standard(2);
    GpTree t{GpNode::var(0)};
    std::vector<double> X = {1.0, 9.0, 2.0, 8.0, 3.0, 7.0};
    auto out = eval_tree(t, pset, X, 2);
    CHECK(out == std::vector<double>{1.0, 2.0, 3.0});
}

TEST_CASE("protected division never yields NaN") {
    PrimitiveSet pset = PrimitiveSet::standard(2);
    GpTree t{GpNode::func(pset.function_index("/"), {GpNode::var(0), GpNode::var(1)})};
    std::vector<double> X = {1.0, 0.0, 5.0, 1e-9};
    auto out = eval_tree(t, pset, X, 2);
    CHECK(out[0] == 1.0);
    CHECK(out[1] == 1.0);
    for (double v : out) CHECK(std::isfinite(v));
}

TEST_CASE("eval_tree: variable out of range throws") {
    PrimitiveSet pset = PrimitiveSet::standard(3);
    GpTree t{GpNode::var(2)};
    std::vector<double> X = {1.0, 2.0};
    CHECK_THROWS_AS(eval_tree(t, pset, X, 2), std::out_of_range);
}

TEST_CASE("rmse") {
    CHECK(rmse({1.0, 2.0, 3.0}, {1.0, 2.0, 3.0}) == 0.0);
    CHECK(rmse({0.0, 0.0}, {3.0, 4.0}) == doctest::Approx(std::sqrt(12.5)).epsilon(1e-12));
    CHECK(rmse({std::nan(""), 0.0}, {1.0, 2.0}) == std::numeric_limits<double>::infinity());
}

TEST_CASE("serialize matches the worked example string") {
    PrimitiveSet pset = xy_pset();
    GpTree t = example_tree(pset);
    CHECK(serialize(t, pset) == "(2.2 - (x/11)) + (7*cos(y))");
}

TEST_CASE("serialize: single variable tree") {
    PrimitiveSet pset = PrimitiveSet::standard(1);
    GpTree t{GpNode::var(0)};
    CHECK(serialize(t, pset) == "x0");
}

TEST_CASE("tokenize: length equals node count, pre-order, constants share a token") {
    PrimitiveSet pset = xy_pset();
    TokenTable tt(pset);
    GpTree t = example_tree(pset);
    Tokenized tok = tokenize(t, tt);
    CHECK(tok.tokens.size() == node_count(t));
    CHECK(tok.nodes.size() == tok.tokens.size());
    // pre-order: root is first
    CHECK(tok.tokens[0] == tt.function_token(pset.function_index("+")));
    // constants 2.2, 11, 7 all map to the shared constant token
    int n_const = 0;
    for (std::size_t i = 0; i < tok.tokens.size(); ++i)
        if (tok.tokens[i] == tt.const_token()) ++n_const;
    CHECK(n_const == 3);
    // MASK never appears
    for (int v : tok.tokens) CHECK(v != TokenTable::kMask);
}

TEST_CASE("property: parse(serialize(t)) reproduces random trees") {
    PrimitiveSet pset = PrimitiveSet::standard(3);
    std::mt19937_64 rng(5);
    for (int t = 0; t < 500; ++t) {
        GpTree tree = random_valid_tree(pset, rng, 5);
        GpTree back = parse_tree(serialize(tree, pset), pset);
        CHECK(tree_equal(tree.root, back.root));
    }
}

TEST_CASE("property: detokenize(tokenize(t)) reproduces random trees") {
    PrimitiveSet pset = PrimitiveSet::standard(2);
    TokenTable tt(pset);
    std::mt19937_64 rng(6);
    for (int t = 0; t < 500; ++t) {
        GpTree tree = random_valid_tree(pset, rng, 5);
        Tokenized tok = tokenize(tree, tt);
        GpTree back = detokenize(tok.tokens, tt,
                                 [&](std::size_t pos) { return tok.nodes[pos]->value; });
        CHECK(tree_equal(tree.root, back.root));
    }
}

TEST_CASE("subtree_crossover") {
    PrimitiveSet pset = PrimitiveSet::standard(2);
    std::mt19937_64 rng(7);

    SUBCASE("identical single-node parents give the same node") {
        GpTree a{GpNode::var(1)};
        GpTree child = subtree_crossover(a, a, 64, rng);
        CHECK(tree_equal(child.root, a.root));
    }
    SUBCASE("children are arity-valid and within the size cap") {
        for (int t = 0; t < 2000; ++t) {
            GpTree a = random_valid_tree(pset, rng, 5);
            GpTree b = random_valid_tree(pset, rng, 5);
            GpTree child = subtree_crossover(a, b, 48, rng);
            CHECK(tree_valid(child.root, pset));
            CHECK(node_count(child) <= 48);
        }
    }
}

TEST_CASE("point_mutation_gp") {
    std::mt19937_64 rng(8);

    SUBCASE("no alternatives leaves the tree identical") {
        PrimitiveSet pset;
        pset.functions = {{"sin", 1, [](const double* a) { return std::sin(a[0]); }},
                          {"+", 2, [](const double* a) { return a[0] + a[1]; }}};
        pset.variables = {"x0"};
        pset.has_constants = false;
        GpTree t{GpNode::func(1, {GpNode::func(0, {GpNode::var(0)}), GpNode::var(0)})};
        GpTree out = point_mutation_gp(t, pset, 1.0, rng);
        CHECK(tree_equal(out.root, t.root));
    }
    SUBCASE("shape and node kinds preserved") {
        PrimitiveSet pset = PrimitiveSet::standard(2);
        for (int t = 0; t < 10000; ++t) {
            GpTree tree = random_valid_tree(pset, rng, 4);
            GpTree out = point_mutation_gp(tree, pset, 0.3, rng);
            CHECK(tree_valid(out.root, pset));
            CHECK(node_count(out) == node_count(tree));
            CHECK(depth_of(out.root) == depth_of(tree.root));
            // kind preservation: walk both trees in lockstep
            std::vector<const GpNode*> a_nodes, b_nodes;
            std::function<void(const GpNode&, std::vector<const GpNode*>&)> walk =
                [&](const GpNode& n, std::vector<const GpNode*>& out_nodes) {
                    out_nodes.push_back(&n);
                    for (const auto& ch : n.children) walk(ch, out_nodes);
                };
            walk(tree.root, a_nodes);
            walk(out.root, b_nodes);
            for (std::size_t i = 0; i < a_nodes.size(); ++i) {
                bool a_term = a_nodes[i]->kind != GpNode::Kind::Function;
                bool b_term = b_nodes[i]->kind != GpNode::Kind::Function;
                CHECK(a_term == b_term);
                CHECK(a_nodes[i]->children.size() == b_nodes[i]->children.size());
            }
        }
    }
}

TEST_CASE("subtree_mutation: validity, donor depth bound, root replaceable") {
    PrimitiveSet pset = PrimitiveSet::standard(2);
    std::mt19937_64 rng(9);
    for (int t = 0; t < 2000; ++t) {
        GpTree tree = random_valid_tree(pset, rng, 4);
        GpTree out = subtree_mutation(tree, pset, 2, 4, 64, rng);
        CHECK(tree_valid(out.root, pset));
        CHECK(node_count(out) <= 64);
    }
    // a single-node tree's only subtree is the root, so mutation regrows the whole tree
    bool saw_function_root = false;
    for (int t = 0; t < 100; ++t) {
        GpTree single{GpNode::var(0)};
        GpTree out = subtree_mutation(single, pset, 2, 4, 64, rng);
        if (out.root.kind == GpNode::Kind::Function) saw_function_root = true;
    }
    CHECK(saw_function_root);
}

TEST_CASE("hoist_mutation: never grows, single node unchanged, valid output") {
    PrimitiveSet pset = PrimitiveSet::standard(2);
    std::mt19937_64 rng(10);
    for (int t = 0; t < 2000; ++t) {
        GpTree tree = random_valid_tree(pset, rng, 5);
        std::size_t before = node_count(tree);
        GpTree out = hoist_mutation(tree, rng);
        CHECK(node_count(out) <= before);
        CHECK(tree_valid(out.root, pset));
    }
    GpTree single{GpNode::constant(1.5)};
    GpTree out = hoist_mutation(single, rng);
    CHECK(tree_equal(out.root, single.root));
}

TEST_CASE("mixed_mutation dispatches the three operators equally") {
    PrimitiveSet pset = PrimitiveSet::standard(2);
    std::mt19937_64 rng(11);
    std::vector<long> counts(3, 0);
    const int n = 10000;
    for (int t = 0; t < n; ++t) {
        GpTree tree = random_valid_tree(pset, rng, 4);
        int op = -1;
        GpTree out = mixed_mutation(tree, pset, 2, 4, 64, 0.1, rng, &op);
        CHECK(tree_valid(out.root, pset));
        ++counts[std::size_t(op)];
    }
    double p = 1.0 / 3.0;
    double sigma = std::sqrt(n * p * (1 - p));
    for (long c : counts) CHECK(std::abs(double(c) - n * p) < 3 * sigma);
}

TEST_CASE("mixed_mutation is deterministic per seed") {
    PrimitiveSet pset = PrimitiveSet::standard(2);
    std::mt19937_64 r1(12), r2(12);
    GpTree tree = random_valid_tree(pset, r1, 4);
    GpTree tree2 = random_valid_tree(pset, r2, 4);
    GpTree a = mixed_mutation(tree, pset, 2, 4, 64, 0.1, r1);
    GpTree b = mixed_mutation(tree2, pset, 2, 4, 64, 0.1, r2);
    CHECK(tree_equal(a.root, b.root));
}

namespace {

GpDataset toy_dataset() {
    // y = x0 * 2 on 20 points, no test split
    GpDataset d;
    d.n_features = 1;
    for (int i = 0; i < 20; ++i) {
        d.X_train.push_back(double(i) / 10.0);
        d.y_train.push_back(double(i) / 5.0);
    }
    return d;
}

}  // namespace

TEST_CASE("gp_evolve: zero variation with elitism keeps best fitness flat") {
    PrimitiveSet pset = PrimitiveSet::standard(1);
    GpConfig cfg;
    cfg.pop_size = 16;
    cfg.generations = 8;
    cfg.crossover_prob = 0.0;
    cfg.mutation_prob = 0.0;
    cfg.init_depth_lo = 2;
    cfg.init_depth_hi = 4;
    cfg.seed = 3;
    EvalCounter evals;
    auto hist = gp_evolve(cfg, pset, toy_dataset(),
                          [&](const GpIndividual& ind, std::mt19937_64&) { return ind.tree; }, evals);
    double first = hist.generations.front().best_train;
    for (const auto& s : hist.generations) CHECK(s.best_train == first);
}

TEST_CASE("gp_evolve: eval counter matches the closed form without mutation") {
    PrimitiveSet pset = PrimitiveSet::standard(1);
    GpConfig cfg;
    cfg.pop_size = 10;
    cfg.generations = 5;
    cfg.elitism = 2;
    cfg.mutation_prob = 0.0;
    cfg.init_depth_lo = 2;
    cfg.init_depth_hi = 3;
    cfg.seed = 4;
    EvalCounter evals;
    gp_evolve(cfg, pset, toy_dataset(),
              [&](const GpIndividual& ind, std::mt19937_64&) { return ind.tree; }, evals);
    CHECK(evals.count == 10 + 5 * (10 - 2));
}

TEST_CASE("gp_evolve: seed determinism") {
    PrimitiveSet pset = PrimitiveSet::standard(1);
    GpConfig cfg;
    cfg.pop_size = 12;
    cfg.generations = 6;
    cfg.init_depth_lo = 2;
    cfg.init_depth_hi = 4;
    cfg.mutation_prob = 0.2;
    cfg.seed = 21;
    auto run = [&]() {
        EvalCounter evals;
        return gp_evolve(cfg, pset, toy_dataset(),
                         [&](const GpIndividual& ind, std::mt19937_64& rng) {
                             return mixed_mutation(ind.tree, pset, 2, 4, cfg.size_cap, 0.1, rng);
                         },
                         evals);
    };
    auto h1 = run();
    auto h2 = run();
    REQUIRE(h1.generations.size() == h2.generations.size());
    for (std::size_t i = 0; i < h1.generations.size(); ++i) {
        CHECK(h1.generations[i].best_train == h2.generations[i].best_train);
        CHECK(h1.generations[i].mean_train == h2.generations[i].mean_train);
    }
    CHECK(tree_equal(h1.best_tree.root, h2.best_tree.root));
}
