#include <doctest.h>

#include <evo/problems.hpp>

#include <cstdio>
#include <fstream>

using namespace evo;

namespace {
Genome colors(std::vector<int> g, int k) { return {std::move(g), k}; }
}  // namespace

TEST_CASE("parse_dimacs: triangle") {
    GraphInstance g = parse_dimacs("p edge 3 3\ne 1 2\ne 2 3\ne 1 3\n");
    CHECK(g.n == 3);
    CHECK(g.edges.size() == 3);
    CHECK(g.edges[0] == std::pair<int, int>{0, 1});
}

TEST_CASE("parse_dimacs: comment lines ignored") {
    GraphInstance g = parse_dimacs("c a comment\np edge 2 1\nc another\ne 1 2\n");
    CHECK(g.n == 2);
    CHECK(g.edges.size() == 1);
}

TEST_CASE("parse_dimacs: vertex out of range names the line") {
    try {
        parse_dimacs("p edge 3 1\ne 1 4\n");
        FAIL("expected throw");
    } catch (const std::invalid_argument& e) {
        CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
    CHECK_THROWS_AS(parse_dimacs("p edge x 3\n"), std::invalid_argument);
    CHECK_THROWS_AS(parse_dimacs("e 1 2\n"), std::invalid_argument);
}

TEST_CASE("coloring_fitness") {
    GraphInstance tri = parse_dimacs("p edge 3 3\ne 1 2\ne 2 3\ne 1 3\n");

    SUBCASE("three distinct colors score 3") {
        CHECK(coloring_fitness(tri, colors({0, 1, 2}, 3), 3) == 3.0);
    }
    SUBCASE("all one color: 3 conflicts * n*k + 1 color = 28") {
        CHECK(coloring_fitness(tri, colors({0, 0, 0}, 3), 3) == 28.0);
    }
    SUBCASE("single-vertex graph scores 1") {
        GraphInstance one = parse_dimacs("p edge 1 0\n");
        CHECK(coloring_fitness(one, colors({0}, 2), 2) == 1.0);
    }
    SUBCASE("dominance: conflict-free always beats conflicted") {
        // exhaustive over all 27 assignments with k=3
        double worst_free = -1, best_conflicted = 1e18;
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b)
                for (int c = 0; c < 3; ++c) {
                    double f = coloring_fitness(tri, colors({a, b, c}, 3), 3);
                    bool conflict_free = a != b && b != c && a != c;
                    if (conflict_free) worst_free = std::max(worst_free, f);
                    else best_conflicted = std::min(best_conflicted, f);
                }
        CHECK(worst_free < best_conflicted);
    }
}

TEST_CASE("parse_bpp") {
    SUBCASE("basic instance") {
        BppInstance b = parse_bpp("2\n10\n5\n5\n");
        CHECK(b.capacity == 10.0);
        CHECK(b.sizes == std::vector<double>{5.0, 5.0});
    }
    SUBCASE("item larger than capacity rejected") {
        CHECK_THROWS_AS(parse_bpp("1\n10\n11\n"), std::invalid_argument);
    }
    SUBCASE("blank lines tolerated") {
        BppInstance b = parse_bpp("\n2\n\n10\n5\n\n5\n\n");
        CHECK(b.sizes.size() == 2);
    }
}

TEST_CASE("bpp_fitness") {
    BppInstance inst{10.0, {5.0, 5.0}};

    SUBCASE("perfect fill scores 1") {
        CHECK(bpp_fitness(inst, colors({0, 0}, 2)) == 1.0);
    }
    SUBCASE("two half-used bins score 0.25") {
        CHECK(bpp_fitness(inst, colors({0, 1}, 2)) == doctest::Approx(0.25));
    }
    SUBCASE("overflow scores minus the overflowing-bin count") {
        BppInstance big{10.0, {6.0, 6.0}};
        CHECK(bpp_fitness(big, colors({0, 0}, 2)) == -1.0);
    }
    SUBCASE("feasible fitness is in (0, 1], and 1 only at exact fill") {
        BppInstance inst3{10.0, {3.0, 4.0, 2.0}};
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b)
                for (int c = 0; c < 3; ++c) {
                    double f = bpp_fitness(inst3, colors({a, b, c}, 3));
                    CHECK(f > 0.0);
                    CHECK(f <= 1.0);
                    CHECK(f < 1.0);  // 9 total volume can never exactly fill used bins
                }
    }
}

TEST_CASE("gen_friedman: printed-formula point values") {
    SUBCASE("friedman-1 at all-0.5 inputs") {
        double x[5] = {0.5, 0.5, 0.5, 0.5, 0.5};
        double expected = 10.0 * std::sin(M_PI * 0.25) + 0.0 + 5.0 + 2.5;
        CHECK(regression_formulas::friedman1(x) == doctest::Approx(expected).epsilon(1e-12));
    }
    SUBCASE("friedman-1 vanishing point") {
        double x[5] = {0.0, 0.7, 0.5, 0.0, 0.0};
        CHECK(regression_formulas::friedman1(x) == 0.0);
    }
    SUBCASE("f2 vanishes at (3,2)") {
        double x[2] = {3.0, 2.0};
        CHECK(regression_formulas::f2(x) == 0.0);
    }
    SUBCASE("non-analytic at boundary and at 1") {
        double x0 = 0.0, x1 = 1.0;
        CHECK(regression_formulas::non_analytic(&x0) == 0.0);
        CHECK(regression_formulas::non_analytic(&x1) == 4.0);
    }
}

TEST_CASE("generators: noise=0 is deterministic and matches formula re-evaluation bitwise") {
    for (int which : {1, 2, 3}) {
        auto d1 = gen_friedman(which, 200, 0.0, 31);
        auto d2 = gen_friedman(which, 200, 0.0, 31);
        CHECK(d1.y == d2.y);
        for (std::size_t i = 0; i < d1.rows(); ++i) {
            const double* x = &d1.X[i * 5];
            double expected = which == 1   ? regression_formulas::friedman1(x)
                              : which == 2 ? regression_formulas::friedman2(x)
                                           : regression_formulas::friedman3(x);
            CHECK(d1.y[i] == expected);
        }
    }
    auto f = gen_f2(100, 5);
    for (std::size_t i = 0; i < f.rows(); ++i)
        CHECK(f.y[i] == regression_formulas::f2(&f.X[i * 2]));
    auto na = gen_nonanalytic(100, 5);
    for (std::size_t i = 0; i < na.rows(); ++i)
        CHECK(na.y[i] == regression_formulas::non_analytic(&na.X[i]));
    CHECK_THROWS_AS(gen_friedman(1, 0, 0.0, 1), std::invalid_argument);
}

TEST_CASE("load_csv") {
    std::string path = "test_csv_tmp.csv";

    SUBCASE("hand-written file round trip") {
        std::ofstream out(path);
        out << "1.5,2,3\n4,5.25,6\n7,8,9\n";
        out.close();
        auto d = load_csv(path);
        CHECK(d.n_features == 2);
        CHECK(d.rows() == 3);
        CHECK(d.X == std::vector<double>{1.5, 2, 4, 5.25, 7, 8});
        CHECK(d.y == std::vector<double>{3, 6, 9});
    }
    SUBCASE("header auto-detection") {
        std::ofstream out(path);
        out << "a,b,target\n1,2,3\n";
        out.close();
        auto d = load_csv(path);
        CHECK(d.rows() == 1);
        CHECK(d.y == std::vector<double>{3});
    }
    SUBCASE("ragged row reports the location") {
        std::ofstream out(path);
        out << "1,2,3\n4,5\n";
        out.close();
        try {
            load_csv(path);
            FAIL("expected throw");
        } catch (const std::invalid_argument& e) {
            CHECK(std::string(e.what()).find("line 2") != std::string::npos);
        }
    }
    SUBCASE("non-numeric cell reports the location") {
        std::ofstream out(path);
        out << "1,2,3\n4,oops,6\n";
        out.close();
        CHECK_THROWS_AS(load_csv(path), std::invalid_argument);
    }
    std::remove(path.c_str());
}

TEST_CASE("train_test_split") {
    SUBCASE("fraction 0 gives empty test set") {
        auto s = train_test_split(10, 0.0, 1);
        CHECK(s.test.empty());
        CHECK(s.train.size() == 10);
    }
    SUBCASE("disjoint and exhaustive") {
        auto s = train_test_split(100, 0.1, 7);
        CHECK(s.test.size() == 10);
        CHECK(s.train.size() == 90);
        std::vector<bool> seen(100, false);
        for (auto i : s.train) seen[i] = true;
        for (auto i : s.test) {
            CHECK_FALSE(seen[i]);
            seen[i] = true;
        }
        for (bool b : seen) CHECK(b);
    }
    SUBCASE("seed determinism") {
        auto a = train_test_split(50, 0.2, 3);
        auto b = train_test_split(50, 0.2, 3);
        CHECK(a.test == b.test);
        CHECK(a.train == b.train);
    }
}
