#ifndef EVO_GP_HPP
#define EVO_GP_HPP

#include <evo/ga.hpp>  // EvalCounter, better()

#include <charconv>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace evo {

// ---------------------------------------------------------------------------
// Primitive set and trees
// ---------------------------------------------------------------------------

struct Primitive {
    std::string name;
    int arity = 0;
    std::function<double(const double*)> fn;
};

inline double protected_div(double a, double b) {
    return std::abs(b) < 1e-6 ? 1.0 : a / b;
}

struct PrimitiveSet {
    std::vector<Primitive> functions;
    std::vector<std::string> variables;  // x_0 .. x_{k-1} display names
    bool has_constants = true;
    double const_lo = -1.0;
    double const_hi = 1.0;

    /// {+, -, *, protected /, sin, cos} over n_vars variables.
    static PrimitiveSet standard(int n_vars, double clo = -1.0, double chi = 1.0) {
        PrimitiveSet p;
        p.functions = {
            {"+", 2, [](const double* a) { return a[0] + a[1]; }},
            {"-", 2, [](const double* a) { return a[0] - a[1]; }},
            {"*", 2, [](const double* a) { return a[0] * a[1]; }},
            {"/", 2, [](const double* a) { return protected_div(a[0], a[1]); }},
            {"sin", 1, [](const double* a) { return std::sin(a[0]); }},
            {"cos", 1, [](const double* a) { return std::cos(a[0]); }},
        };
        for (int i = 0; i < n_vars; ++i) p.variables.push_back("x" + std::to_string(i));
        p.const_lo = clo;
        p.const_hi = chi;
        return p;
    }

    int function_index(const std::string& name) const {
        for (std::size_t i = 0; i < functions.size(); ++i)
            if (functions[i].name == name) return int(i);
        return -1;
    }

    int variable_index(const std::string& name) const {
        for (std::size_t i = 0; i < variables.size(); ++i)
            if (variables[i] == name) return int(i);
        return -1;
    }
};

struct GpNode {
    enum class Kind { Function, Variable, Constant };
    Kind kind = Kind::Constant;
    int index = 0;       // function or variable index
    double value = 0.0;  // constant value
    std::vector<GpNode> children;

    static GpNode func(int idx, std::vector<GpNode> ch) {
        GpNode n;
        n.kind = Kind::Function;
        n.index = idx;
        n.children = std::move(ch);
        return n;
    }
    static GpNode var(int idx) {
        GpNode n;
        n.kind = Kind::Variable;
        n.index = idx;
        return n;
    }
    static GpNode constant(double v) {
        GpNode n;
        n.kind = Kind::Constant;
        n.value = v;
        return n;
    }
};

struct GpTree {
    GpNode root;
};

inline std::size_t node_count(const GpNode& n) {
    std::size_t c = 1;
    for (const auto& ch : n.children) c += node_count(ch);
    return c;
}

inline std::size_t node_count(const GpTree& t) { return node_count(t.root); }

inline std::size_t depth_of(const GpNode& n) {
    std::size_t d = 0;
    for (const auto& ch : n.children) d = std::max(d, depth_of(ch));
    return d + 1;
}

/// Structural equality; constants compared exactly.
inline bool tree_equal(const GpNode& a, const GpNode& b) {
    if (a.kind != b.kind) return false;
    switch (a.kind) {
        case GpNode::Kind::Constant:
            if (a.value != b.value) return false;
            break;
        default:
            if (a.index != b.index) return false;
    }
    if (a.children.size() != b.children.size()) return false;
    for (std::size_t i = 0; i < a.children.size(); ++i)
        if (!tree_equal(a.children[i], b.children[i])) return false;
    return true;
}

/// Every function node must have exactly arity children; indices in range.
inline bool tree_valid(const GpNode& n, const PrimitiveSet& pset) {
    switch (n.kind) {
        case GpNode::Kind::Function:
            if (n.index < 0 || std::size_t(n.index) >= pset.functions.size()) return false;
            if (n.children.size() != std::size_t(pset.functions[std::size_t(n.index)].arity))
                return false;
            break;
        case GpNode::Kind::Variable:
            if (n.index < 0 || std::size_t(n.index) >= pset.variables.size()) return false;
            if (!n.children.empty()) return false;
            break;
        case GpNode::Kind::Constant:
            if (!n.children.empty()) return false;
            break;
    }
    for (const auto& ch : n.children)
        if (!tree_valid(ch, pset)) return false;
    return true;
}

// ---------------------------------------------------------------------------
// Initialization (full / grow / ramped half-and-half)
// ---------------------------------------------------------------------------

inline GpNode random_terminal(const PrimitiveSet& pset, std::mt19937_64& rng) {
    std::size_t slots = pset.variables.size() + (pset.has_constants ? 1 : 0);
    if (slots == 0) throw std::invalid_argument("PrimitiveSet: no terminals");
    std::uniform_int_distribution<std::size_t> pick(0, slots - 1);
    std::size_t i = pick(rng);
    if (i < pset.variables.size()) return GpNode::var(int(i));
    std::uniform_real_distribution<double> c(pset.const_lo, pset.const_hi);
    return GpNode::constant(c(rng));
}

inline GpNode random_tree_node(const PrimitiveSet& pset, int depth, bool full,
                               std::mt19937_64& rng) {
    bool make_terminal;
    if (depth <= 1) {
        make_terminal = true;
    } else if (full) {
        make_terminal = false;
    } else {
        // grow: weight by primitive-set composition
        std::size_t n_term = pset.variables.size() + 1;
        std::uniform_int_distribution<std::size_t> pick(0, pset.functions.size() + n_term - 1);
        make_terminal = pick(rng) >= pset.functions.size();
    }
    if (make_terminal) return random_terminal(pset, rng);
    std::uniform_int_distribution<std::size_t> pick(0, pset.functions.size() - 1);
    std::size_t fi = pick(rng);
    std::vector<GpNode> children;
    for (int i = 0; i < pset.functions[fi].arity; ++i)
        children.push_back(random_tree_node(pset, depth - 1, full, rng));
    return GpNode::func(int(fi), std::move(children));
}

/// Cycles depth over [lo, hi] and alternates full/grow across calls.
class RampedHalfAndHalf {
public:
    RampedHalfAndHalf(int depth_lo, int depth_hi) : lo_(depth_lo), hi_(depth_hi) {
        if (lo_ < 1 || hi_ < lo_) throw std::invalid_argument("ramped: bad depth range");
    }

    GpTree next(const PrimitiveSet& pset, std::mt19937_64& rng) {
        int depth = lo_ + int(calls_ / 2) % (hi_ - lo_ + 1);
        bool full = calls_ % 2 == 0;
        ++calls_;
        return {random_tree_node(pset, depth, full, rng)};
    }

private:
    int lo_, hi_;
    std::size_t calls_ = 0;
};

// ---------------------------------------------------------------------------
// Evaluation & fitness
// ---------------------------------------------------------------------------

inline double eval_node(const GpNode& n, const PrimitiveSet& pset, const double* row,
                        std::size_t n_features) {
    switch (n.kind) {
        case GpNode::Kind::Constant:
            return n.value;
        case GpNode::Kind::Variable:
            if (n.index < 0 || std::size_t(n.index) >= n_features)
                throw std::out_of_range("eval: variable x" + std::to_string(n.index) +
                                        " out of range for " + std::to_string(n_features) +
                                        " features");
            return row[n.index];
        case GpNode::Kind::Function: {
            double args[4];
            const auto& f = pset.functions[std::size_t(n.index)];
            for (int i = 0; i < f.arity; ++i)
                args[i] = eval_node(n.children[std::size_t(i)], pset, row, n_features);
            return f.fn(args);
        }
    }
    return 0.0;
}

/// Row-wise evaluation over an n x k feature matrix (row-major).
inline std::vector<double> eval_tree(const GpTree& t, const PrimitiveSet& pset,
                                     const std::vector<double>& X, std::size_t n_features) {
    std::size_t n_rows = n_features == 0 ? 0 : X.size() / n_features;
    std::vector<double> out(n_rows);
    for (std::size_t i = 0; i < n_rows; ++i)
        out[i] = eval_node(t.root, pset, &X[i * n_features], n_features);
    return out;
}

/// Non-finite predictions score +inf so they lose every tournament.
inline double rmse(const std::vector<double>& predictions, const std::vector<double>& targets) {
    if (predictions.size() != targets.size())
        throw std::invalid_argument("rmse: size mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        if (!std::isfinite(predictions[i])) return std::numeric_limits<double>::infinity();
        double d = predictions[i] - targets[i];
        s += d * d;
    }
    return std::sqrt(s / double(predictions.size()));
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

inline std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

namespace detail {
inline void serialize_node(const GpNode& n, const PrimitiveSet& pset, bool is_root,
                           std::string& out) {
    switch (n.kind) {
        case GpNode::Kind::Constant:
            out += format_double(n.value);
            return;
        case GpNode::Kind::Variable:
            out += pset.variables[std::size_t(n.index)];
            return;
        case GpNode::Kind::Function: {
            const auto& f = pset.functions[std::size_t(n.index)];
            bool infix = f.arity == 2 && (f.name == "+" || f.name == "-" || f.name == "*" || f.name == "/");
            if (infix) {
                bool spaced = f.name == "+" || f.name == "-";
                if (!is_root) out += "(";
                serialize_node(n.children[0], pset, false, out);
                out += spaced ? " " + f.name + " " : f.name;
                serialize_node(n.children[1], pset, false, out);
                if (!is_root) out += ")";
            } else {
                out += f.name;
                out += "(";
                for (std::size_t i = 0; i < n.children.size(); ++i) {
                    if (i) out += ", ";
                    serialize_node(n.children[i], pset, true, out);
                }
                out += ")";
            }
            return;
        }
    }
}
}  // namespace detail

/// Infix string; binary arithmetic parenthesized except at the root,
/// other functions as name(args).
inline std::string serialize(const GpTree& t, const PrimitiveSet& pset) {
    std::string out;
    detail::serialize_node(t.root, pset, true, out);
    return out;
}

/// Recursive-descent parser for the serialize() format.
class GpParser {
public:
    GpParser(const std::string& text, const PrimitiveSet& pset) : s_(text), pset_(pset) {}

    GpTree parse() {
        GpNode root = parse_expr();
        skip_ws();
        if (pos_ != s_.size()) throw std::invalid_argument("parse: trailing input at " + std::to_string(pos_));
        return {std::move(root)};
    }

private:
    const std::string& s_;
    const PrimitiveSet& pset_;
    std::size_t pos_ = 0;

    void skip_ws() {
        while (pos_ < s_.size() && s_[pos_] == ' ') ++pos_;
    }

    char peek() {
        skip_ws();
        return pos_ < s_.size() ? s_[pos_] : '\0';
    }

    GpNode parse_expr() {  // + and -
        GpNode left = parse_term();
        while (true) {
            char c = peek();
            if (c != '+' && c != '-') break;
            ++pos_;
            GpNode right = parse_term();
            int fi = pset_.function_index(std::string(1, c));
            if (fi < 0) throw std::invalid_argument("parse: unknown operator " + std::string(1, c));
            left = GpNode::func(fi, {std::move(left), std::move(right)});
        }
        return left;
    }

    GpNode parse_term() {  // * and /
        GpNode left = parse_factor();
        while (true) {
            char c = peek();
            if (c != '*' && c != '/') break;
            ++pos_;
            GpNode right = parse_factor();
            int fi = pset_.function_index(std::string(1, c));
            if (fi < 0) throw std::invalid_argument("parse: unknown operator " + std::string(1, c));
            left = GpNode::func(fi, {std::move(left), std::move(right)});
        }
        return left;
    }

    GpNode parse_factor() {
        char c = peek();
        if (c == '(') {
            ++pos_;
            GpNode inner = parse_expr();
            if (peek() != ')') throw std::invalid_argument("parse: expected ')' at " + std::to_string(pos_));
            ++pos_;
            return inner;
        }
        if (c == '-' || (c >= '0' && c <= '9') || c == '.') return parse_number();
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return parse_symbol();
        throw std::invalid_argument("parse: unexpected character '" + std::string(1, c) + "' at " +
                                    std::to_string(pos_));
    }

    GpNode parse_number() {
        skip_ws();
        std::size_t start = pos_;
        if (pos_ < s_.size() && s_[pos_] == '-') ++pos_;
        while (pos_ < s_.size() && (std::isdigit(static_cast<unsigned char>(s_[pos_])) ||
                                    s_[pos_] == '.' || s_[pos_] == 'e' || s_[pos_] == 'E' ||
                                    ((s_[pos_] == '+' || s_[pos_] == '-') &&
                                     (s_[pos_ - 1] == 'e' || s_[pos_ - 1] == 'E'))))
            ++pos_;
        double v = 0.0;
        auto res = std::from_chars(s_.data() + start, s_.data() + pos_, v);
        if (res.ec != std::errc{})
            throw std::invalid_argument("parse: bad number at " + std::to_string(start));
        return GpNode::constant(v);
    }

    GpNode parse_symbol() {
        skip_ws();
        std::size_t start = pos_;
        while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_'))
            ++pos_;
        std::string name = s_.substr(start, pos_ - start);
        if (peek() == '(') {
            ++pos_;
            int fi = pset_.function_index(name);
            if (fi < 0) throw std::invalid_argument("parse: unknown function '" + name + "'");
            std::vector<GpNode> args;
            if (peek() != ')') {
                args.push_back(parse_expr());
                while (peek() == ',') {
                    ++pos_;
                    args.push_back(parse_expr());
                }
            }
            if (peek() != ')') throw std::invalid_argument("parse: expected ')' in call to " + name);
            ++pos_;
            if (args.size() != std::size_t(pset_.functions[std::size_t(fi)].arity))
                throw std::invalid_argument("parse: arity mismatch for " + name);
            return GpNode::func(fi, std::move(args));
        }
        int vi = pset_.variable_index(name);
        if (vi < 0) throw std::invalid_argument("parse: unknown symbol '" + name + "'");
        return GpNode::var(vi);
    }
};

inline GpTree parse_tree(const std::string& text, const PrimitiveSet& pset) {
    return GpParser(text, pset).parse();
}

// ---------------------------------------------------------------------------
// Tokenization
// ---------------------------------------------------------------------------

/// Node role for constrained sampling: terminal, or function of a given arity.
struct TokenKind {
    bool terminal = true;
    int arity = 0;
};

/// Bijection symbol <-> integer token. Token 0 is MASK; constants share one
/// token. Layout: [MASK][functions...][variables...][CONST].
struct TokenTable {
    const PrimitiveSet* pset = nullptr;

    static constexpr int kMask = 0;

    explicit TokenTable(const PrimitiveSet& p) : pset(&p) {}

    int vocab_size() const { return 1 + int(pset->functions.size()) + int(pset->variables.size()) + 1; }
    int function_token(int idx) const { return 1 + idx; }
    int variable_token(int idx) const { return 1 + int(pset->functions.size()) + idx; }
    int const_token() const { return vocab_size() - 1; }

    bool is_function(int token) const {
        return token >= 1 && token < 1 + int(pset->functions.size());
    }
    bool is_terminal(int token) const { return token >= 1 + int(pset->functions.size()) && token < vocab_size(); }

    TokenKind kind_of(int token) const {
        if (is_function(token)) return {false, pset->functions[std::size_t(token - 1)].arity};
        if (is_terminal(token)) return {true, 0};
        throw std::invalid_argument("TokenTable: token " + std::to_string(token) + " has no kind");
    }

    int token_of(const GpNode& n) const {
        switch (n.kind) {
            case GpNode::Kind::Function: return function_token(n.index);
            case GpNode::Kind::Variable: return variable_token(n.index);
            case GpNode::Kind::Constant: return const_token();
        }
        return kMask;
    }
};

struct Tokenized {
    std::vector<int> tokens;             // pre-order
    std::vector<const GpNode*> nodes;    // parallel node-index map
};

namespace detail {
inline void tokenize_node(const GpNode& n, const TokenTable& tt, Tokenized& out) {
    out.tokens.push_back(tt.token_of(n));
    out.nodes.push_back(&n);
    for (const auto& ch : n.children) tokenize_node(ch, tt, out);
}
}  // namespace detail

inline Tokenized tokenize(const GpTree& t, const TokenTable& tt) {
    Tokenized out;
    detail::tokenize_node(t.root, tt, out);
    return out;
}

/// Rebuild a tree from pre-order tokens; constant values come from
/// const_value(position).
inline GpTree detokenize(const std::vector<int>& tokens, const TokenTable& tt,
                         const std::function<double(std::size_t)>& const_value) {
    std::size_t pos = 0;
    std::function<GpNode()> build = [&]() -> GpNode {
        if (pos >= tokens.size()) throw std::invalid_argument("detokenize: truncated token stream");
        int tok = tokens[pos];
        std::size_t here = pos++;
        if (tok == TokenTable::kMask) throw std::invalid_argument("detokenize: MASK token in stream");
        if (tt.is_function(tok)) {
            int fi = tok - 1;
            std::vector<GpNode> children;
            for (int i = 0; i < tt.pset->functions[std::size_t(fi)].arity; ++i) children.push_back(build());
            return GpNode::func(fi, std::move(children));
        }
        if (tok == tt.const_token()) return GpNode::constant(const_value(here));
        return GpNode::var(tok - 1 - int(tt.pset->functions.size()));
    };
    GpNode root = build();
    if (pos != tokens.size()) throw std::invalid_argument("detokenize: extra tokens");
    return {std::move(root)};
}

// ---------------------------------------------------------------------------
// Variation operators
// ---------------------------------------------------------------------------

namespace detail {
inline void collect_nodes(GpNode& n, std::vector<GpNode*>& out) {
    out.push_back(&n);
    for (auto& ch : n.children) collect_nodes(ch, out);
}
inline GpNode* random_node(GpTree& t, std::mt19937_64& rng) {
    std::vector<GpNode*> nodes;
    collect_nodes(t.root, nodes);
    std::uniform_int_distribution<std::size_t> pick(0, nodes.size() - 1);
    return nodes[pick(rng)];
}
}  // namespace detail

/// Random node in a copy of t1 replaced by a random subtree of t2. Retries
/// against the size cap, then falls back to returning t1 unchanged.
inline GpTree subtree_crossover(const GpTree& t1, const GpTree& t2, std::size_t size_cap,
                                std::mt19937_64& rng) {
    for (int attempt = 0; attempt < 8; ++attempt) {
        GpTree child = t1;
        GpNode* target = detail::random_node(child, rng);
        GpTree donor_copy = t2;
        GpNode* donor = detail::random_node(donor_copy, rng);
        *target = std::move(*donor);
        if (node_count(child) <= size_cap) return child;
    }
    return t1;
}

/// Terminals swap with terminals, functions with same-arity functions; shape
/// is preserved exactly.
inline GpTree point_mutation_gp(const GpTree& t, const PrimitiveSet& pset, double per_node_prob,
                                std::mt19937_64& rng) {
    GpTree out = t;
    std::vector<GpNode*> nodes;
    detail::collect_nodes(out.root, nodes);
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    for (GpNode* n : nodes) {
        if (coin(rng) >= per_node_prob) continue;
        if (n->kind == GpNode::Kind::Function) {
            int arity = pset.functions[std::size_t(n->index)].arity;
            std::vector<int> options;
            for (std::size_t i = 0; i < pset.functions.size(); ++i)
                if (pset.functions[i].arity == arity) options.push_back(int(i));
            std::uniform_int_distribution<std::size_t> pick(0, options.size() - 1);
            n->index = options[pick(rng)];
        } else {
            GpNode term = random_terminal(pset, rng);
            term.children = std::move(n->children);  // terminals have none
            *n = std::move(term);
        }
    }
    return out;
}

/// Random subtree replaced with a randomly grown donor subtree.
inline GpTree subtree_mutation(const GpTree& t, const PrimitiveSet& pset, int donor_depth_lo,
                               int donor_depth_hi, std::size_t size_cap, std::mt19937_64& rng) {
    std::uniform_int_distribution<int> depth(donor_depth_lo, donor_depth_hi);
    for (int attempt = 0; attempt < 8; ++attempt) {
        GpTree out = t;
        GpNode* target = detail::random_node(out, rng);
        *target = random_tree_node(pset, depth(rng), false, rng);
        if (node_count(out) <= size_cap) return out;
    }
    return t;
}

/// Random subtree S replaced by a random subtree of S; never grows the tree.
inline GpTree hoist_mutation(const GpTree& t, std::mt19937_64& rng) {
    GpTree out = t;
    GpNode* s = detail::random_node(out, rng);
    std::vector<GpNode*> inner;
    detail::collect_nodes(*s, inner);
    std::uniform_int_distribution<std::size_t> pick(0, inner.size() - 1);
    GpNode lifted = *inner[pick(rng)];
    *s = std::move(lifted);
    return out;
}

/// Dispatches point / subtree / hoist with equal probability.
inline GpTree mixed_mutation(const GpTree& t, const PrimitiveSet& pset, int donor_depth_lo,
                             int donor_depth_hi, std::size_t size_cap, double point_prob,
                             std::mt19937_64& rng, int* chosen_op = nullptr) {
    std::uniform_int_distribution<int> which(0, 2);
    int op = which(rng);
    if (chosen_op) *chosen_op = op;
    switch (op) {
        case 0: return point_mutation_gp(t, pset, point_prob, rng);
        case 1: return subtree_mutation(t, pset, donor_depth_lo, donor_depth_hi, size_cap, rng);
        default: return hoist_mutation(t, rng);
    }
}

// ---------------------------------------------------------------------------
// GP generational loop
// ---------------------------------------------------------------------------

struct GpConfig {
    int pop_size = 128;
    int generations = 200;
    int init_depth_lo = 2;
    int init_depth_hi = 10;
    double crossover_prob = 0.6;
    double mutation_prob = 0.1;
    int tournament_k = 5;
    int elitism = 1;
    std::size_t size_cap = 256;
    double point_mut_node_prob = 0.1;  // per-node rate inside point mutation
    std::uint64_t seed = 0;

    void validate() const {
        if (pop_size <= 0 || generations < 0) throw std::invalid_argument("GpConfig: sizes must be positive");
        if (crossover_prob < 0 || crossover_prob > 1 || mutation_prob < 0 || mutation_prob > 1)
            throw std::invalid_argument("GpConfig: probabilities must be in [0,1]");
        if (elitism < 0 || elitism >= pop_size)
            throw std::invalid_argument("GpConfig: elitism must be < population size");
    }
};

struct GpIndividual {
    GpTree tree;
    std::optional<double> fitness;

    bool evaluated() const { return fitness.has_value(); }
};

struct GpGenerationStats {
    double best_train = 0.0;
    double mean_train = 0.0;
    double best_test = 0.0;  // test RMSE of the train-best individual
    long long evals = 0;
};

struct GpRunHistory {
    std::vector<GpGenerationStats> generations;
    GpTree best_tree;
    double best_train = 0.0;
    double best_test = 0.0;
};

/// Mutation callback: evaluated individual in, mutated tree out.
using MutationFn = std::function<GpTree(const GpIndividual&, std::mt19937_64&)>;

struct GpEvolveHooks {
    std::function<void(const GpIndividual&, bool from_mutation)> offspring_evaluated;
    std::function<void()> generation_end;
};

struct GpDataset {
    std::vector<double> X_train, y_train;  // X row-major
    std::vector<double> X_test, y_test;
    std::size_t n_features = 0;
};

inline GpRunHistory gp_evolve(const GpConfig& cfg, const PrimitiveSet& pset, const GpDataset& data,
                              const MutationFn& mutate, EvalCounter& evals,
                              const GpEvolveHooks& hooks = {}) {
    cfg.validate();
    std::mt19937_64 rng(cfg.seed);
    // the crossover/mutation coins get their own stream so the number of
    // variation events (and hence fitness evaluations) depends only on the
    // seed, not on how many draws each operator consumes
    std::mt19937_64 decision_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);

    auto train_fitness = [&](const GpTree& t) {
        return rmse(eval_tree(t, pset, data.X_train, data.n_features), data.y_train);
    };
    auto test_fitness = [&](const GpTree& t) {
        if (data.y_test.empty()) return 0.0;
        return rmse(eval_tree(t, pset, data.X_test, data.n_features), data.y_test);
    };

    std::vector<GpIndividual> pop(std::size_t(cfg.pop_size));
    RampedHalfAndHalf init(cfg.init_depth_lo, cfg.init_depth_hi);
    for (auto& ind : pop) {
        ind.tree = init.next(pset, rng);
        ind.fitness = train_fitness(ind.tree);
        evals.increment();
    }

    GpRunHistory history;
    bool first = true;
    auto record = [&](const std::vector<GpIndividual>& p) {
        GpGenerationStats s;
        const GpIndividual* best = &p[0];
        double sum = 0.0;
        for (const auto& ind : p) {
            sum += *ind.fitness;
            if (*ind.fitness < *best->fitness) best = &ind;
        }
        s.best_train = *best->fitness;
        s.mean_train = sum / double(p.size());
        s.best_test = test_fitness(best->tree);
        s.evals = evals.count;
        history.generations.push_back(s);
        if (first || s.best_train < history.best_train) {
            first = false;
            history.best_train = s.best_train;
            history.best_test = s.best_test;
            history.best_tree = best->tree;
        }
    };
    record(pop);

    std::uniform_real_distribution<double> coin(0.0, 1.0);
    auto select = [&]() -> const GpIndividual& {
        std::uniform_int_distribution<std::size_t> pick(0, pop.size() - 1);
        const GpIndividual* best = &pop[pick(rng)];
        for (int i = 1; i < cfg.tournament_k; ++i) {
            const GpIndividual* cand = &pop[pick(rng)];
            if (*cand->fitness < *best->fitness) best = cand;
        }
        return *best;
    };

    for (int gen = 0; gen < cfg.generations; ++gen) {
        std::vector<GpIndividual> next;
        next.reserve(pop.size());

        std::vector<std::size_t> order(pop.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return *pop[a].fitness < *pop[b].fitness; });
        for (int e = 0; e < cfg.elitism; ++e) next.push_back(pop[order[std::size_t(e)]]);

        std::vector<bool> from_mutation;
        while (next.size() < pop.size()) {
            GpIndividual child;
            const GpIndividual& p1 = select();
            if (coin(decision_rng) < cfg.crossover_prob) {
                const GpIndividual& p2 = select();
                child.tree = subtree_crossover(p1.tree, p2.tree, cfg.size_cap, rng);
            } else {
                child.tree = p1.tree;
            }
            bool mutated = false;
            if (coin(decision_rng) < cfg.mutation_prob) {
                GpIndividual pre;
                pre.tree = child.tree;
                pre.fitness = train_fitness(pre.tree);
                evals.increment();
                child.tree = mutate(pre, rng);
                mutated = true;
            }
            next.push_back(std::move(child));
            from_mutation.push_back(mutated);
        }

        for (std::size_t i = std::size_t(cfg.elitism); i < next.size(); ++i) {
            next[i].fitness = train_fitness(next[i].tree);
            evals.increment();
            if (hooks.offspring_evaluated)
                hooks.offspring_evaluated(next[i], from_mutation[i - std::size_t(cfg.elitism)]);
        }
        if (hooks.generation_end) hooks.generation_end();

        pop = std::move(next);
        record(pop);
    }
    return history;
}

}  // namespace evo

#endif  // EVO_GP_HPP
