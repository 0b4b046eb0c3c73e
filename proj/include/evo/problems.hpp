#ifndef EVO_PROBLEMS_HPP
#define EVO_PROBLEMS_HPP

#include <evo/ga.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace evo {

// ---------------------------------------------------------------------------
// Graph coloring
// ---------------------------------------------------------------------------

struct GraphInstance {
    int n = 0;
    std::vector<std::pair<int, int>> edges;  // undirected, 0-indexed
    int color_budget = 0;
};

/// Standard DIMACS edge format: "p edge n m" header, "e u v" lines (1-indexed),
/// "c" comment lines ignored.
inline GraphInstance parse_dimacs(const std::string& text) {
    GraphInstance g;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    bool have_header = false;
    long declared_edges = -1;
    while (std::getline(in, line)) {
        ++lineno;
        std::istringstream ls(line);
        std::string tag;
        if (!(ls >> tag)) continue;  // blank line
        if (tag == "c") continue;
        if (tag == "p") {
            std::string fmt;
            long n = 0, m = 0;
            if (!(ls >> fmt >> n >> m) || fmt != "edge" || n <= 0 || m < 0)
                throw std::invalid_argument("dimacs: malformed header at line " +
                                            std::to_string(lineno));
            g.n = int(n);
            declared_edges = m;
            have_header = true;
        } else if (tag == "e") {
            if (!have_header)
                throw std::invalid_argument("dimacs: edge before header at line " +
                                            std::to_string(lineno));
            long u = 0, v = 0;
            if (!(ls >> u >> v))
                throw std::invalid_argument("dimacs: malformed edge at line " + std::to_string(lineno));
            if (u < 1 || u > g.n || v < 1 || v > g.n)
                throw std::invalid_argument("dimacs: vertex out of range at line " +
                                            std::to_string(lineno));
            if (u == v)
                throw std::invalid_argument("dimacs: self-loop at line " + std::to_string(lineno));
            g.edges.emplace_back(int(u) - 1, int(v) - 1);
        } else {
            throw std::invalid_argument("dimacs: unknown record '" + tag + "' at line " +
                                        std::to_string(lineno));
        }
    }
    if (!have_header) throw std::invalid_argument("dimacs: missing header");
    (void)declared_edges;  // some instances under-declare; accept what we read
    return g;
}

inline GraphInstance load_dimacs(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("dimacs: cannot open '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_dimacs(buf.str());
}

/// Minimized: P * conflicts + distinct colors used, with P = n*k so any
/// conflict-free coloring beats any conflicted one.
inline double coloring_fitness(const GraphInstance& g, const Genome& assignment, int k) {
    if (int(assignment.genes.size()) != g.n)
        throw std::invalid_argument("coloring_fitness: genome length != vertex count");
    long conflicts = 0;
    for (auto [u, v] : g.edges)
        if (assignment.genes[std::size_t(u)] == assignment.genes[std::size_t(v)]) ++conflicts;
    std::vector<bool> used(std::size_t(k), false);
    int distinct = 0;
    for (int c : assignment.genes) {
        if (c < 0 || c >= k) throw std::invalid_argument("coloring_fitness: color out of budget");
        if (!used[std::size_t(c)]) {
            used[std::size_t(c)] = true;
            ++distinct;
        }
    }
    double penalty = double(g.n) * double(k);
    return penalty * double(conflicts) + double(distinct);
}

inline GaProblem coloring_problem(const GraphInstance& g, int k, std::string name = "coloring") {
    GaProblem p;
    p.genome_len = g.n;
    p.alphabet = k;
    p.maximize = false;
    p.name = std::move(name);
    p.fitness = [g, k](const Genome& genome) { return coloring_fitness(g, genome, k); };
    return p;
}

// ---------------------------------------------------------------------------
// Bin packing
// ---------------------------------------------------------------------------

struct BppInstance {
    double capacity = 0.0;
    std::vector<double> sizes;
};

/// Text format: item count, capacity, then one size per line. Blank lines
/// tolerated.
inline BppInstance parse_bpp(const std::string& text) {
    std::istringstream in(text);
    std::vector<double> numbers;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::istringstream ls(line);
        std::string tok;
        if (!(ls >> tok)) continue;
        try {
            numbers.push_back(std::stod(tok));
        } catch (const std::exception&) {
            throw std::invalid_argument("bpp: non-numeric value at line " + std::to_string(lineno));
        }
    }
    if (numbers.size() < 2) throw std::invalid_argument("bpp: need item count and capacity");
    BppInstance inst;
    long n = long(numbers[0]);
    inst.capacity = numbers[1];
    if (n <= 0 || inst.capacity <= 0) throw std::invalid_argument("bpp: bad count or capacity");
    if (long(numbers.size()) - 2 != n)
        throw std::invalid_argument("bpp: expected " + std::to_string(n) + " sizes, got " +
                                    std::to_string(numbers.size() - 2));
    for (std::size_t i = 2; i < numbers.size(); ++i) {
        double s = numbers[i];
        if (s <= 0 || s > inst.capacity)
            throw std::invalid_argument("bpp: item size " + std::to_string(s) +
                                        " outside (0, capacity]");
        inst.sizes.push_back(s);
    }
    return inst;
}

inline BppInstance load_bpp(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("bpp: cannot open '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_bpp(buf.str());
}

/// Falkenauer fitness, maximized: (sum over used bins of (fill/C)^2) / N_used.
/// Overflowing assignments score -(number of overflowing bins).
inline double bpp_fitness(const BppInstance& inst, const Genome& assignment) {
    if (assignment.genes.size() != inst.sizes.size())
        throw std::invalid_argument("bpp_fitness: genome length != item count");
    std::size_t n = inst.sizes.size();
    std::vector<double> fill(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        int b = assignment.genes[i];
        if (b < 0 || std::size_t(b) >= n) throw std::invalid_argument("bpp_fitness: bin index out of range");
        fill[std::size_t(b)] += inst.sizes[i];
    }
    int used = 0, overflowing = 0;
    double sum = 0.0;
    for (double f : fill) {
        if (f <= 0.0) continue;
        ++used;
        if (f > inst.capacity) ++overflowing;
        double ratio = f / inst.capacity;
        sum += ratio * ratio;
    }
    if (overflowing > 0) return -double(overflowing);
    return sum / double(used);
}

inline GaProblem bpp_problem(const BppInstance& inst, std::string name = "bpp") {
    GaProblem p;
    p.genome_len = int(inst.sizes.size());
    p.alphabet = int(inst.sizes.size());
    p.maximize = true;
    p.name = std::move(name);
    p.fitness = [inst](const Genome& genome) { return bpp_fitness(inst, genome); };
    return p;
}

// ---------------------------------------------------------------------------
// Symbolic regression datasets
// ---------------------------------------------------------------------------

struct RegressionDataset {
    std::vector<double> X;  // row-major, n x k
    std::vector<double> y;
    std::size_t n_features = 0;
    std::string name;

    std::size_t rows() const { return n_features == 0 ? 0 : X.size() / n_features; }
};

namespace regression_formulas {

inline double friedman1(const double* x) {
    return 10.0 * std::sin(M_PI * x[0] * x[1]) + 20.0 * (x[2] - 0.5) * (x[2] - 0.5) + 10.0 * x[3] +
           5.0 * x[4];
}

// as printed: sqrt(x0^2 + (x1*x2 - 1/(x2*x4))^2)
inline double friedman2(const double* x) {
    double t = x[1] * x[2] - 1.0 / (x[2] * x[4]);
    return std::sqrt(x[0] * x[0] + t * t);
}

// as printed: arctan((x1*x2 - 1/(x1*x3)) / x0)
inline double friedman3(const double* x) {
    return std::atan((x[1] * x[2] - 1.0 / (x[1] * x[3])) / x[0]);
}

inline double f2(const double* x) {
    double a = x[0] - 3.0, b = x[1] - 2.0;
    return a * a * a * a + b * b * b;
}

inline double non_analytic(const double* x) {
    return x[0] > 0.0 ? (x[0] + 1.0) * (x[0] + 1.0) : std::sin(x[0]);
}

}  // namespace regression_formulas

inline RegressionDataset gen_friedman(int which, std::size_t n, double noise, std::uint64_t seed) {
    if (n == 0) throw std::invalid_argument("gen_friedman: n must be positive");
    if (which < 1 || which > 3) throw std::invalid_argument("gen_friedman: which must be 1..3");
    RegressionDataset d;
    d.name = "friedman" + std::to_string(which);
    d.n_features = 5;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    // classical generator ranges for Friedman 2/3 inputs
    std::uniform_real_distribution<double> ux0(0.0, 100.0);
    std::uniform_real_distribution<double> ux1(40.0 * M_PI, 560.0 * M_PI);
    std::uniform_real_distribution<double> ux3(1.0, 11.0);
    for (std::size_t i = 0; i < n; ++i) {
        double x[5];
        if (which == 1) {
            for (double& v : x) v = u01(rng);
        } else {
            x[0] = ux0(rng);
            x[1] = ux1(rng);
            x[2] = u01(rng);
            x[3] = ux3(rng);
            x[4] = u01(rng);
        }
        double yv = which == 1   ? regression_formulas::friedman1(x)
                    : which == 2 ? regression_formulas::friedman2(x)
                                 : regression_formulas::friedman3(x);
        if (noise != 0.0) yv += noise * gauss(rng);
        d.X.insert(d.X.end(), x, x + 5);
        d.y.push_back(yv);
    }
    return d;
}

inline RegressionDataset gen_f2(std::size_t n, std::uint64_t seed) {
    if (n == 0) throw std::invalid_argument("gen_f2: n must be positive");
    RegressionDataset d;
    d.name = "f2";
    d.n_features = 2;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-10.0, 10.0);
    for (std::size_t i = 0; i < n; ++i) {
        double x[2] = {u(rng), u(rng)};
        d.X.insert(d.X.end(), x, x + 2);
        d.y.push_back(regression_formulas::f2(x));
    }
    return d;
}

inline RegressionDataset gen_nonanalytic(std::size_t n, std::uint64_t seed) {
    if (n == 0) throw std::invalid_argument("gen_nonanalytic: n must be positive");
    RegressionDataset d;
    d.name = "non_analytic";
    d.n_features = 1;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-10.0, 10.0);
    for (std::size_t i = 0; i < n; ++i) {
        double x = u(rng);
        d.X.push_back(x);
        d.y.push_back(regression_formulas::non_analytic(&x));
    }
    return d;
}

/// Numeric CSV with optional header (auto-detected on an alphabetic first row).
/// target_column indexes the column used as y; -1 means the last column.
inline RegressionDataset load_csv(const std::string& path, int target_column = -1) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("csv: cannot open '" + path + "'");
    RegressionDataset d;
    d.name = path;
    std::string line;
    int lineno = 0;
    std::size_t n_cols = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        std::vector<std::string> cells;
        std::string cell;
        std::istringstream ls(line);
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        if (!cell.empty() && cell.back() == '\r') cells.back().pop_back();
        if (lineno == 1) {
            // header detection: any cell that does not parse as a number
            bool numeric = true;
            for (const auto& c : cells) {
                try {
                    std::size_t used = 0;
                    (void)std::stod(c, &used);
                    if (used != c.size()) numeric = false;
                } catch (const std::exception&) {
                    numeric = false;
                }
            }
            n_cols = cells.size();
            if (!numeric) continue;
        }
        if (n_cols == 0) n_cols = cells.size();
        if (cells.size() != n_cols)
            throw std::invalid_argument("csv: ragged row at line " + std::to_string(lineno) +
                                        " (" + std::to_string(cells.size()) + " vs " +
                                        std::to_string(n_cols) + " columns)");
        std::size_t target = target_column < 0 ? n_cols - 1 : std::size_t(target_column);
        if (target >= n_cols) throw std::invalid_argument("csv: target column out of range");
        for (std::size_t j = 0; j < cells.size(); ++j) {
            double v;
            try {
                std::size_t used = 0;
                v = std::stod(cells[j], &used);
                if (used != cells[j].size()) throw std::invalid_argument("trailing chars");
            } catch (const std::exception&) {
                throw std::invalid_argument("csv: non-numeric cell at line " +
                                            std::to_string(lineno) + ", column " +
                                            std::to_string(j + 1));
            }
            if (j == target) d.y.push_back(v);
            else d.X.push_back(v);
        }
        d.n_features = n_cols - 1;
    }
    if (d.y.empty()) throw std::invalid_argument("csv: no data rows in '" + path + "'");
    return d;
}

struct SplitIndices {
    std::vector<std::size_t> train, test;
};

/// Disjoint, exhaustive random split; deterministic per seed.
inline SplitIndices train_test_split(std::size_t n_rows, double test_fraction, std::uint64_t seed) {
    if (test_fraction < 0.0 || test_fraction > 1.0)
        throw std::invalid_argument("train_test_split: fraction must be in [0,1]");
    std::vector<std::size_t> idx(n_rows);
    std::iota(idx.begin(), idx.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    std::size_t n_test = std::size_t(std::llround(test_fraction * double(n_rows)));
    SplitIndices s;
    s.test.assign(idx.begin(), idx.begin() + long(n_test));
    s.train.assign(idx.begin() + long(n_test), idx.end());
    return s;
}

}  // namespace evo

#endif  // EVO_PROBLEMS_HPP
