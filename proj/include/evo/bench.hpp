#ifndef EVO_BENCH_HPP
#define EVO_BENCH_HPP

#include <evo/bert.hpp>
#include <evo/dnc.hpp>
#include <evo/ga.hpp>
#include <evo/gp.hpp>
#include <evo/problems.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

namespace evo {

// ---------------------------------------------------------------------------
// Experiment specification and config parsing
// ---------------------------------------------------------------------------

struct ExperimentSpec {
    std::string name = "experiment";
    std::string paradigm = "ga";  // "ga" | "gp"
    std::string problem = "onemax";
    std::string problem_file;
    std::string op = "uniform";
    int repeats = 10;
    std::vector<std::uint64_t> seeds;  // filled from repeats when empty
    std::vector<double> cutoffs;       // seconds, ascending
    std::string out_dir = ".";
    std::string checkpoint;  // load path; training saves to out_dir
    bool frozen = false;

    GaConfig ga;
    int genome_len = 32;
    int colors = 5;   // k for graph coloring
    int parents = 2;  // m for dnc / multiparent

    GpConfig gp;
    double test_fraction = 0.1;
    int dataset_size = 500;
    double noise = 0.0;
    std::uint64_t data_seed = 1;

    DncConfig dnc;
    BertMutConfig bert;

    ExperimentSpec() {
        gp.mutation_prob = 0.1;  // headline mutation rate; hoist/subtree ride along via aux_prob
    }

    std::vector<std::uint64_t> run_seeds(std::uint64_t offset = 0) const {
        std::vector<std::uint64_t> out = seeds;
        if (out.empty())
            for (int i = 0; i < repeats; ++i) out.push_back(std::uint64_t(i));
        for (auto& s : out) s += offset;
        return out;
    }

    void validate() const {
        if (paradigm != "ga" && paradigm != "gp")
            throw std::invalid_argument("spec '" + name + "': paradigm must be ga or gp");
        if (repeats < 1) throw std::invalid_argument("spec '" + name + "': repeats must be >= 1");
        if (!seeds.empty() && int(seeds.size()) != repeats)
            throw std::invalid_argument("spec '" + name + "': seeds count must equal repeats");
        for (std::size_t i = 1; i < cutoffs.size(); ++i)
            if (cutoffs[i] <= cutoffs[i - 1])
                throw std::invalid_argument("spec '" + name + "': cutoffs must be ascending");
    }
};

namespace detail {

inline double parse_number(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        double v = std::stod(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw std::invalid_argument("config: key '" + key + "' needs a number, got '" + value + "'");
    }
}

inline int parse_int(const std::string& key, const std::string& value) {
    double v = parse_number(key, value);
    if (v != std::floor(v))
        throw std::invalid_argument("config: key '" + key + "' needs an integer, got '" + value + "'");
    return int(v);
}

inline bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    throw std::invalid_argument("config: key '" + key + "' needs true/false, got '" + value + "'");
}

inline std::vector<std::string> split_list(const std::string& value) {
    std::vector<std::string> out;
    std::string item;
    std::stringstream ss(value);
    while (std::getline(ss, item, ',')) {
        std::size_t a = item.find_first_not_of(" \t");
        std::size_t b = item.find_last_not_of(" \t");
        if (a != std::string::npos) out.push_back(item.substr(a, b - a + 1));
    }
    return out;
}

inline void apply_key(ExperimentSpec& s, const std::string& key, const std::string& value) {
    if (key == "paradigm") s.paradigm = value;
    else if (key == "problem") s.problem = value;
    else if (key == "problem_file") s.problem_file = value;
    else if (key == "operator") s.op = value;
    else if (key == "repeats") s.repeats = parse_int(key, value);
    else if (key == "seeds") {
        s.seeds.clear();
        for (const auto& item : split_list(value))
            s.seeds.push_back(std::uint64_t(parse_int(key, item)));
    } else if (key == "cutoffs") {
        s.cutoffs.clear();
        for (const auto& item : split_list(value)) s.cutoffs.push_back(parse_number(key, item));
    } else if (key == "out_dir") s.out_dir = value;
    else if (key == "checkpoint") s.checkpoint = value;
    else if (key == "frozen") s.frozen = parse_bool(key, value);
    else if (key == "pop") { s.ga.pop_size = s.gp.pop_size = parse_int(key, value); }
    else if (key == "generations") { s.ga.generations = s.gp.generations = parse_int(key, value); }
    else if (key == "crossover_prob") { s.ga.crossover_prob = s.gp.crossover_prob = parse_number(key, value); }
    else if (key == "mutation_prob") { s.ga.mutation_prob = s.gp.mutation_prob = parse_number(key, value); }
    else if (key == "tournament_k") { s.ga.tournament_k = s.gp.tournament_k = parse_int(key, value); }
    else if (key == "elitism") { s.ga.elitism = s.gp.elitism = parse_int(key, value); }
    else if (key == "genome_len") s.genome_len = parse_int(key, value);
    else if (key == "colors") s.colors = parse_int(key, value);
    else if (key == "parents") s.parents = parse_int(key, value);
    else if (key == "init_depth_lo") s.gp.init_depth_lo = parse_int(key, value);
    else if (key == "init_depth_hi") s.gp.init_depth_hi = parse_int(key, value);
    else if (key == "size_cap") s.gp.size_cap = std::size_t(parse_int(key, value));
    else if (key == "test_fraction") s.test_fraction = parse_number(key, value);
    else if (key == "dataset_size") s.dataset_size = parse_int(key, value);
    else if (key == "noise") s.noise = parse_number(key, value);
    else if (key == "data_seed") s.data_seed = std::uint64_t(parse_int(key, value));
    else if (key == "learning_rate") { s.dnc.learning_rate = s.bert.learning_rate = parse_number(key, value); }
    else if (key == "batch_size") { s.dnc.batch_size = s.bert.batch_size = parse_int(key, value); }
    else if (key == "baseline_decay") { s.dnc.baseline_decay = s.bert.baseline_decay = parse_number(key, value); }
    else if (key == "embed_dim") s.dnc.embed_dim = parse_int(key, value);
    else if (key == "hidden_dim") s.dnc.hidden_dim = parse_int(key, value);
    else if (key == "attn_dim") s.dnc.attn_dim = parse_int(key, value);
    else if (key == "mask_prob") s.bert.mask_prob = parse_number(key, value);
    else if (key == "aux_prob") s.bert.aux_prob = parse_number(key, value);
    else if (key == "dim") s.bert.dim = parse_int(key, value);
    else if (key == "blocks") s.bert.blocks = parse_int(key, value);
    else if (key == "heads") s.bert.heads = parse_int(key, value);
    else if (key == "ffn_dim") s.bert.ffn_dim = parse_int(key, value);
    else if (key == "max_len") s.bert.max_len = parse_int(key, value);
    else throw std::invalid_argument("config: unknown key '" + key + "'");
}

}  // namespace detail

/// Line-oriented key = value format; [section] headers start a new experiment
/// named after the section; '#' starts a comment. Unknown keys are errors.
inline std::vector<ExperimentSpec> parse_config(const std::string& text) {
    std::vector<ExperimentSpec> specs;
    ExperimentSpec current;
    bool have_section = false;
    auto flush = [&] {
        if (have_section) {
            current.validate();
            specs.push_back(current);
        }
    };

    std::stringstream ss(text);
    std::string line;
    int lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        std::size_t a = line.find_first_not_of(" \t\r");
        if (a == std::string::npos) continue;
        std::size_t b = line.find_last_not_of(" \t\r");
        line = line.substr(a, b - a + 1);

        if (line.front() == '[') {
            if (line.back() != ']')
                throw std::invalid_argument("config line " + std::to_string(lineno) +
                                            ": unterminated section header");
            flush();
            current = ExperimentSpec();
            current.name = line.substr(1, line.size() - 2);
            have_section = true;
            continue;
        }
        std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config line " + std::to_string(lineno) +
                                        ": expected key = value");
        auto trim = [](std::string v) {
            std::size_t x = v.find_first_not_of(" \t");
            if (x == std::string::npos) return std::string();
            std::size_t y = v.find_last_not_of(" \t");
            return v.substr(x, y - x + 1);
        };
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (!have_section) {
            have_section = true;  // headerless config defines a single experiment
        }
        try {
            detail::apply_key(current, key, value);
        } catch (const std::invalid_argument& e) {
            throw std::invalid_argument("config line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    flush();
    if (specs.empty()) {
        current.validate();
        specs.push_back(current);  // empty config = one all-defaults experiment
    }
    return specs;
}

/// Inverse of parse_config for one spec; parse(emit(s)) == s field-for-field.
inline std::string emit_config(const ExperimentSpec& s) {
    std::ostringstream out;
    out << "[" << s.name << "]\n";
    out << "paradigm = " << s.paradigm << "\n";
    out << "problem = " << s.problem << "\n";
    if (!s.problem_file.empty()) out << "problem_file = " << s.problem_file << "\n";
    out << "operator = " << s.op << "\n";
    out << "repeats = " << s.repeats << "\n";
    if (!s.seeds.empty()) {
        out << "seeds = ";
        for (std::size_t i = 0; i < s.seeds.size(); ++i)
            out << (i ? "," : "") << s.seeds[i];
        out << "\n";
    }
    if (!s.cutoffs.empty()) {
        out << "cutoffs = ";
        for (std::size_t i = 0; i < s.cutoffs.size(); ++i)
            out << (i ? "," : "") << format_double(s.cutoffs[i]);
        out << "\n";
    }
    out << "out_dir = " << s.out_dir << "\n";
    if (!s.checkpoint.empty()) out << "checkpoint = " << s.checkpoint << "\n";
    if (s.frozen) out << "frozen = true\n";
    out << "pop = " << s.ga.pop_size << "\n";
    out << "generations = " << s.ga.generations << "\n";
    out << "crossover_prob = " << format_double(s.ga.crossover_prob) << "\n";
    out << "mutation_prob = " << format_double(s.ga.mutation_prob) << "\n";
    out << "tournament_k = " << s.ga.tournament_k << "\n";
    out << "elitism = " << s.ga.elitism << "\n";
    out << "genome_len = " << s.genome_len << "\n";
    out << "colors = " << s.colors << "\n";
    out << "parents = " << s.parents << "\n";
    out << "init_depth_lo = " << s.gp.init_depth_lo << "\n";
    out << "init_depth_hi = " << s.gp.init_depth_hi << "\n";
    out << "size_cap = " << s.gp.size_cap << "\n";
    out << "test_fraction = " << format_double(s.test_fraction) << "\n";
    out << "dataset_size = " << s.dataset_size << "\n";
    out << "noise = " << format_double(s.noise) << "\n";
    out << "data_seed = " << s.data_seed << "\n";
    out << "learning_rate = " << format_double(s.dnc.learning_rate) << "\n";
    out << "batch_size = " << s.dnc.batch_size << "\n";
    out << "baseline_decay = " << format_double(s.dnc.baseline_decay) << "\n";
    out << "embed_dim = " << s.dnc.embed_dim << "\n";
    out << "hidden_dim = " << s.dnc.hidden_dim << "\n";
    out << "attn_dim = " << s.dnc.attn_dim << "\n";
    out << "mask_prob = " << format_double(s.bert.mask_prob) << "\n";
    out << "aux_prob = " << format_double(s.bert.aux_prob) << "\n";
    out << "dim = " << s.bert.dim << "\n";
    out << "blocks = " << s.bert.blocks << "\n";
    out << "heads = " << s.bert.heads << "\n";
    out << "ffn_dim = " << s.bert.ffn_dim << "\n";
    out << "max_len = " << s.bert.max_len << "\n";
    return out.str();
}

// ---------------------------------------------------------------------------
// Run records and experiment execution
// ---------------------------------------------------------------------------

struct GenRow {
    int generation = 0;
    double best_train = 0.0;
    double mean_train = 0.0;
    double best_test = 0.0;  // 0 for GA runs
    double cum_seconds = 0.0;
    long long evals = 0;
};

struct RunRecord {
    std::uint64_t seed = 0;
    std::vector<GenRow> rows;
    double final_best = 0.0;       // train-side objective
    double final_best_test = 0.0;  // GP only
    long long evals = 0;
    long optimizer_steps = 0;
    std::vector<double> cutoff_best;  // best fitness at each configured cutoff
};

struct TimingSummary {
    double mean = 0.0, stddev = 0.0, max = 0.0;
};

struct ExperimentResult {
    ExperimentSpec spec;
    std::vector<RunRecord> runs;
    double final_mean = 0.0, final_std = 0.0;
    TimingSummary gen_time;
};

namespace detail {

inline std::pair<double, double> mean_std(const std::vector<double>& xs) {
    if (xs.empty()) return {0.0, 0.0};
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= double(xs.size());
    double var = 0.0;
    for (double x : xs) var += (x - mean) * (x - mean);
    var /= double(xs.size());
    return {mean, std::sqrt(var)};
}

inline TimingSummary timing_summary(const std::vector<RunRecord>& runs) {
    std::vector<double> gen_seconds;
    for (const auto& r : runs) {
        double prev = 0.0;
        for (std::size_t i = 1; i < r.rows.size(); ++i) {  // row 0 is initialization
            gen_seconds.push_back(r.rows[i].cum_seconds - prev);
            prev = r.rows[i].cum_seconds;
        }
    }
    TimingSummary t;
    if (gen_seconds.empty()) return t;
    auto [mean, sd] = mean_std(gen_seconds);
    t.mean = mean;
    t.stddev = sd;
    t.max = *std::max_element(gen_seconds.begin(), gen_seconds.end());
    return t;
}

inline GaProblem make_ga_problem(const ExperimentSpec& s, std::shared_ptr<void>& keepalive) {
    if (s.problem == "onemax") {
        GaProblem p;
        p.name = "onemax";
        p.genome_len = s.genome_len;
        p.alphabet = 2;
        p.maximize = true;
        p.fitness = [](const Genome& g) {
            double sum = 0;
            for (int v : g.genes) sum += v;
            return sum;
        };
        return p;
    }
    if (s.problem == "coloring") {
        if (!std::filesystem::exists(s.problem_file))
            throw std::invalid_argument("spec '" + s.name + "': missing graph file " + s.problem_file);
        auto g = std::make_shared<GraphInstance>(load_dimacs(s.problem_file));
        keepalive = g;
        return coloring_problem(*g, s.colors);
    }
    if (s.problem == "bpp") {
        if (!std::filesystem::exists(s.problem_file))
            throw std::invalid_argument("spec '" + s.name + "': missing bpp file " + s.problem_file);
        auto inst = std::make_shared<BppInstance>(load_bpp(s.problem_file));
        keepalive = inst;
        return bpp_problem(*inst);
    }
    throw std::invalid_argument("spec '" + s.name + "': unknown ga problem '" + s.problem + "'");
}

inline GpDataset make_gp_dataset(const ExperimentSpec& s) {
    RegressionDataset full;
    if (s.problem == "friedman1") full = gen_friedman(1, std::size_t(s.dataset_size), s.noise, s.data_seed);
    else if (s.problem == "friedman2") full = gen_friedman(2, std::size_t(s.dataset_size), s.noise, s.data_seed);
    else if (s.problem == "friedman3") full = gen_friedman(3, std::size_t(s.dataset_size), s.noise, s.data_seed);
    else if (s.problem == "f2") full = gen_f2(std::size_t(s.dataset_size), s.data_seed);
    else if (s.problem == "non_analytic") full = gen_nonanalytic(std::size_t(s.dataset_size), s.data_seed);
    else if (s.problem == "csv") {
        if (!std::filesystem::exists(s.problem_file))
            throw std::invalid_argument("spec '" + s.name + "': missing csv file " + s.problem_file);
        full = load_csv(s.problem_file);
    } else {
        throw std::invalid_argument("spec '" + s.name + "': unknown gp problem '" + s.problem + "'");
    }

    SplitIndices split = train_test_split(full.rows(), s.test_fraction, s.data_seed);
    GpDataset d;
    d.n_features = full.n_features;
    for (std::size_t i : split.train) {
        for (std::size_t j = 0; j < full.n_features; ++j)
            d.X_train.push_back(full.X[i * full.n_features + j]);
        d.y_train.push_back(full.y[i]);
    }
    for (std::size_t i : split.test) {
        for (std::size_t j = 0; j < full.n_features; ++j)
            d.X_test.push_back(full.X[i * full.n_features + j]);
        d.y_test.push_back(full.y[i]);
    }
    return d;
}

template <typename History>
inline void fill_rows(RunRecord& rec, const History& history,
                      const std::vector<double>& gen_stamps, bool maximize,
                      const std::vector<double>& cutoffs) {
    for (std::size_t i = 0; i < history.generations.size(); ++i) {
        GenRow row;
        row.generation = int(i);
        if constexpr (requires { history.generations[i].best_train; }) {
            row.best_train = history.generations[i].best_train;
            row.mean_train = history.generations[i].mean_train;
            row.best_test = history.generations[i].best_test;
        } else {
            row.best_train = history.generations[i].best;
            row.mean_train = history.generations[i].mean;
        }
        row.cum_seconds = gen_stamps[i];
        row.evals = history.generations[i].evals;
        rec.rows.push_back(row);
    }
    for (double cutoff : cutoffs) {
        double best = rec.rows.front().best_train;
        for (const auto& row : rec.rows) {
            if (row.cum_seconds > cutoff) break;
            best = maximize ? std::max(best, row.best_train) : std::min(best, row.best_train);
        }
        rec.cutoff_best.push_back(best);
    }
}

}  // namespace detail

/// Executes all repeat runs of one spec. Deterministic apart from the
/// wall-clock columns.
inline ExperimentResult run_experiment(const ExperimentSpec& spec, std::uint64_t seed_offset = 0) {
    spec.validate();
    ExperimentResult result;
    result.spec = spec;

    // pre-flight: problem files and checkpoint compatibility checked before any run
    std::shared_ptr<void> keepalive;
    GaProblem ga_problem;
    GpDataset gp_data;
    PrimitiveSet pset;
    if (spec.paradigm == "ga") {
        ga_problem = detail::make_ga_problem(spec, keepalive);
    } else {
        gp_data = detail::make_gp_dataset(spec);
        pset = PrimitiveSet::standard(int(gp_data.n_features));
    }
    if (!spec.checkpoint.empty() && !std::filesystem::exists(spec.checkpoint))
        throw std::invalid_argument("spec '" + spec.name + "': missing checkpoint " + spec.checkpoint);

    for (std::uint64_t seed : spec.run_seeds(seed_offset)) {
        RunRecord rec;
        rec.seed = seed;
        std::vector<double> stamps;
        auto t0 = std::chrono::steady_clock::now();
        auto stamp = [&] {
            stamps.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
        };
        stamp();  // initialization row

        EvalCounter evals;
        if (spec.paradigm == "ga") {
            GaConfig cfg = spec.ga;
            cfg.seed = seed;

            std::unique_ptr<DncOperator> dnc;
            CrossoverFn crossover;
            EvolveHooks hooks;
            if (spec.op == "one_point") {
                crossover = [](const std::vector<const Individual*>& ps, std::mt19937_64& rng) {
                    return one_point_crossover(ps[0]->genome, ps[1]->genome, rng);
                };
            } else if (spec.op == "uniform") {
                crossover = [](const std::vector<const Individual*>& ps, std::mt19937_64& rng) {
                    return equiprobable_uniform(ps[0]->genome, ps[1]->genome, rng);
                };
            } else if (spec.op == "adaptive") {
                bool maximize = ga_problem.maximize;
                crossover = [maximize](const std::vector<const Individual*>& ps, std::mt19937_64& rng) {
                    return adaptive_uniform(*ps[0], *ps[1], maximize, rng);
                };
            } else if (spec.op == "multiparent") {
                hooks.parents_needed = spec.parents;
                crossover = [](const std::vector<const Individual*>& ps, std::mt19937_64& rng) {
                    std::vector<const Genome*> gs;
                    for (const Individual* p : ps) gs.push_back(&p->genome);
                    return multiparent_uniform(gs, rng);
                };
            } else if (spec.op == "dnc") {
                DncConfig dc = spec.dnc;
                dc.parent_count = spec.parents;
                dc.alphabet = ga_problem.alphabet;
                dc.genome_len = ga_problem.genome_len;
                dc.maximize = ga_problem.maximize;
                dc.frozen = spec.frozen;
                dc.init_seed = seed + 1000003;
                if (!spec.checkpoint.empty())
                    dnc = std::make_unique<DncOperator>(DncOperator::load_checkpoint(spec.checkpoint, dc));
                else
                    dnc = std::make_unique<DncOperator>(dc);
                hooks = dnc->make_hooks();
                crossover = [&dnc](const std::vector<const Individual*>& ps, std::mt19937_64& rng) {
                    return dnc->crossover(ps, rng);
                };
            } else {
                throw std::invalid_argument("spec '" + spec.name + "': unknown ga operator '" + spec.op + "'");
            }

            auto op_gen_end = hooks.generation_end;
            hooks.generation_end = [&, op_gen_end] {
                if (op_gen_end) op_gen_end();
                stamp();
            };
            RunHistory history = evolve(cfg, ga_problem, crossover, evals, hooks);
            rec.final_best = history.best_fitness;
            if (dnc) rec.optimizer_steps = dnc->optimizer_steps();
            detail::fill_rows(rec, history, stamps, ga_problem.maximize, spec.cutoffs);
        } else {
            GpConfig cfg = spec.gp;
            cfg.seed = seed;

            std::unique_ptr<BertMutationOperator> bert;
            MutationFn mutate;
            GpEvolveHooks hooks;
            if (spec.op == "point") {
                double node_prob = cfg.point_mut_node_prob;
                mutate = [&pset, node_prob](const GpIndividual& ind, std::mt19937_64& rng) {
                    return point_mutation_gp(ind.tree, pset, node_prob, rng);
                };
            } else if (spec.op == "subtree") {
                mutate = [&pset, cfg](const GpIndividual& ind, std::mt19937_64& rng) {
                    return subtree_mutation(ind.tree, pset, 2, 4, cfg.size_cap, rng);
                };
            } else if (spec.op == "hoist") {
                mutate = [](const GpIndividual& ind, std::mt19937_64& rng) {
                    return hoist_mutation(ind.tree, rng);
                };
            } else if (spec.op == "mixed") {
                mutate = [&pset, cfg](const GpIndividual& ind, std::mt19937_64& rng) {
                    return mixed_mutation(ind.tree, pset, 2, 4, cfg.size_cap,
                                          cfg.point_mut_node_prob, rng);
                };
            } else if (spec.op == "bert") {
                BertMutConfig bc = spec.bert;
                bc.frozen = spec.frozen;
                bc.init_seed = seed + 1000003;
                if (!spec.checkpoint.empty())
                    bert = std::make_unique<BertMutationOperator>(
                        BertMutationOperator::load_checkpoint(spec.checkpoint, pset, bc));
                else
                    bert = std::make_unique<BertMutationOperator>(pset, bc);
                hooks = bert->make_hooks();
                mutate = [&bert](const GpIndividual& ind, std::mt19937_64& rng) {
                    return bert->mutate(ind, rng);
                };
            } else {
                throw std::invalid_argument("spec '" + spec.name + "': unknown gp operator '" + spec.op + "'");
            }

            auto op_gen_end = hooks.generation_end;
            hooks.generation_end = [&, op_gen_end] {
                if (op_gen_end) op_gen_end();
                stamp();
            };
            GpRunHistory history = gp_evolve(cfg, pset, gp_data, mutate, evals, hooks);
            rec.final_best = history.best_train;
            rec.final_best_test = history.best_test;
            if (bert) rec.optimizer_steps = bert->optimizer_steps();
            detail::fill_rows(rec, history, stamps, false, spec.cutoffs);
        }
        rec.evals = evals.count;
        result.runs.push_back(std::move(rec));
    }

    std::vector<double> finals;
    for (const auto& r : result.runs)
        finals.push_back(spec.paradigm == "gp" ? r.final_best_test : r.final_best);
    auto [mean, sd] = detail::mean_std(finals);
    result.final_mean = mean;
    result.final_std = sd;
    result.gen_time = detail::timing_summary(result.runs);
    return result;
}

// ---------------------------------------------------------------------------
// Output emission
// ---------------------------------------------------------------------------

inline std::string run_csv_header() {
    return "generation,best_train,mean_train,best_test,cum_seconds,evals";
}

inline void write_run_csv(const RunRecord& rec, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << run_csv_header() << "\n";
    for (const auto& r : rec.rows)
        out << r.generation << ',' << format_double(r.best_train) << ',' << format_double(r.mean_train)
            << ',' << format_double(r.best_test) << ',' << format_double(r.cum_seconds) << ','
            << r.evals << "\n";
}

inline std::vector<GenRow> read_run_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path);
    std::string line;
    std::getline(in, line);  // header
    std::vector<GenRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto cells = detail::split_list(line);
        if (cells.size() != 6) throw std::runtime_error(path + ": malformed row '" + line + "'");
        GenRow r;
        r.generation = std::stoi(cells[0]);
        r.best_train = std::stod(cells[1]);
        r.mean_train = std::stod(cells[2]);
        r.best_test = std::stod(cells[3]);
        r.cum_seconds = std::stod(cells[4]);
        r.evals = std::stoll(cells[5]);
        rows.push_back(r);
    }
    return rows;
}

/// Writes per-run CSVs, a per-generation aggregate CSV, a plot-data series,
/// and a one-line summary CSV for the report stage.
inline void emit_outputs(const ExperimentResult& result, const std::string& dir) {
    std::filesystem::create_directories(dir);
    const ExperimentSpec& s = result.spec;
    std::string base = dir + "/" + s.name + "_" + s.op;

    for (const auto& rec : result.runs)
        write_run_csv(rec, base + "_run" + std::to_string(rec.seed) + ".csv");

    std::size_t n_gens = result.runs.empty() ? 0 : result.runs[0].rows.size();
    {
        std::ofstream out(base + "_aggregate.csv");
        out << "generation,mean_best_train,mean_mean_train,mean_best_test";
        for (double c : s.cutoffs) out << ",cutoff_" << format_double(c);
        out << "\n";
        for (std::size_t g = 0; g < n_gens; ++g) {
            double bt = 0, mt = 0, bte = 0;
            for (const auto& rec : result.runs) {
                bt += rec.rows[g].best_train;
                mt += rec.rows[g].mean_train;
                bte += rec.rows[g].best_test;
            }
            double n = double(result.runs.size());
            out << g << ',' << format_double(bt / n) << ',' << format_double(mt / n) << ','
                << format_double(bte / n);
            // cutoff snapshots are per-run constants; repeat the mean on every row
            for (std::size_t c = 0; c < s.cutoffs.size(); ++c) {
                double sum = 0;
                for (const auto& rec : result.runs) sum += rec.cutoff_best[c];
                out << ',' << format_double(sum / n);
            }
            out << "\n";
        }
    }
    {
        std::ofstream out(base + ".plotdata");
        out << "# series: " << s.op << " (" << s.name << ")\n";
        out << "# generation mean_best\n";
        for (std::size_t g = 0; g < n_gens; ++g) {
            double bt = 0;
            for (const auto& rec : result.runs) bt += rec.rows[g].best_train;
            out << g << ' ' << format_double(bt / double(result.runs.size())) << "\n";
        }
    }
    {
        std::ofstream out(base + "_summary.csv");
        out << "name,operator,paradigm,problem,final_mean,final_std,gen_time_mean,gen_time_std,"
               "gen_time_max,evals\n";
        long long evals = result.runs.empty() ? 0 : result.runs[0].evals;
        out << s.name << ',' << s.op << ',' << s.paradigm << ',' << s.problem << ','
            << format_double(result.final_mean) << ',' << format_double(result.final_std) << ','
            << format_double(result.gen_time.mean) << ',' << format_double(result.gen_time.stddev)
            << ',' << format_double(result.gen_time.max) << ',' << evals << "\n";
    }
}

// ---------------------------------------------------------------------------
// Report table
// ---------------------------------------------------------------------------

struct ReportTable {
    std::vector<std::string> rows;  // experiment/problem names
    std::vector<std::string> cols;  // operators
    std::map<std::pair<std::string, std::string>, std::pair<double, double>> cells;  // mean, std

    void add(const std::string& row, const std::string& col, double mean, double stddev) {
        if (std::find(rows.begin(), rows.end(), row) == rows.end()) rows.push_back(row);
        if (std::find(cols.begin(), cols.end(), col) == cols.end()) cols.push_back(col);
        cells[{row, col}] = {mean, stddev};
    }

    std::string cell_text(const std::string& row, const std::string& col) const {
        auto it = cells.find({row, col});
        if (it == cells.end()) return "-";
        return format_double(it->second.first) + " (" + format_double(it->second.second) + ")";
    }

    std::string to_csv() const {
        std::ostringstream out;
        out << "problem";
        for (const auto& c : cols) out << ',' << c;
        out << "\n";
        for (const auto& r : rows) {
            out << r;
            for (const auto& c : cols) out << ',' << cell_text(r, c);
            out << "\n";
        }
        return out.str();
    }

    std::string to_text() const {
        std::vector<std::size_t> widths;
        std::size_t row_w = std::string("problem").size();
        for (const auto& r : rows) row_w = std::max(row_w, r.size());
        for (const auto& c : cols) {
            std::size_t w = c.size();
            for (const auto& r : rows) w = std::max(w, cell_text(r, c).size());
            widths.push_back(w);
        }
        std::ostringstream out;
        auto pad = [](const std::string& s, std::size_t w) {
            return s + std::string(w - s.size(), ' ');
        };
        out << pad("problem", row_w);
        for (std::size_t i = 0; i < cols.size(); ++i) out << "  " << pad(cols[i], widths[i]);
        out << "\n";
        for (const auto& r : rows) {
            out << pad(r, row_w);
            for (std::size_t i = 0; i < cols.size(); ++i)
                out << "  " << pad(cell_text(r, cols[i]), widths[i]);
            out << "\n";
        }
        return out.str();
    }
};

/// Builds the report from every *_summary.csv under dir.
inline ReportTable build_report(const std::string& dir) {
    ReportTable table;
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        std::string name = entry.path().filename().string();
        if (name.size() > 12 && name.substr(name.size() - 12) == "_summary.csv")
            files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& path : files) {
        std::ifstream in(path);
        std::string line;
        std::getline(in, line);  // header
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            auto cells = detail::split_list(line);
            if (cells.size() < 6) continue;
            table.add(cells[0] + "/" + cells[3], cells[1], std::stod(cells[4]), std::stod(cells[5]));
        }
    }
    return table;
}

/// Writes the report as CSV and aligned text into dir.
inline void emit_report(const ReportTable& table, const std::string& dir) {
    std::ofstream csv(dir + "/report.csv");
    csv << table.to_csv();
    std::ofstream txt(dir + "/report.txt");
    txt << table.to_text();
}

// ---------------------------------------------------------------------------
// Transfer workflow
// ---------------------------------------------------------------------------

struct TransferResult {
    ExperimentResult train;
    std::vector<ExperimentResult> evals;
    std::string checkpoint_path;
};

/// Trains on the first spec, saves a checkpoint, then runs each remaining
/// spec with the checkpoint loaded frozen.
inline TransferResult pretrain_and_transfer(const ExperimentSpec& train_spec,
                                            std::vector<ExperimentSpec> eval_specs,
                                            std::uint64_t seed_offset = 0) {
    if (train_spec.op != "dnc" && train_spec.op != "bert")
        throw std::invalid_argument("transfer: training spec must use a learned operator");

    TransferResult result;
    std::filesystem::create_directories(train_spec.out_dir);
    result.checkpoint_path = train_spec.out_dir + "/" + train_spec.name + ".ckpt";

    // the trained model of the first seed becomes the checkpoint: re-run the
    // first seed with the operator held here so we can save its weights
    ExperimentSpec ts = train_spec;
    ts.frozen = false;
    result.train = run_experiment(ts, seed_offset);

    if (ts.paradigm == "ga") {
        std::shared_ptr<void> keepalive;
        GaProblem problem = detail::make_ga_problem(ts, keepalive);
        DncConfig dc = ts.dnc;
        dc.parent_count = ts.parents;
        dc.alphabet = problem.alphabet;
        dc.genome_len = problem.genome_len;
        dc.maximize = problem.maximize;
        dc.init_seed = ts.run_seeds(seed_offset)[0] + 1000003;
        DncOperator op(dc);
        GaConfig cfg = ts.ga;
        cfg.seed = ts.run_seeds(seed_offset)[0];
        EvalCounter evals;
        evolve(cfg, problem, [&](const std::vector<const Individual*>& ps, std::mt19937_64& rng) {
            return op.crossover(ps, rng);
        }, evals, op.make_hooks());
        op.save_checkpoint(result.checkpoint_path);
    } else {
        GpDataset data = detail::make_gp_dataset(ts);
        PrimitiveSet pset = PrimitiveSet::standard(int(data.n_features));
        BertMutConfig bc = ts.bert;
        bc.init_seed = ts.run_seeds(seed_offset)[0] + 1000003;
        BertMutationOperator op(pset, bc);
        GpConfig cfg = ts.gp;
        cfg.seed = ts.run_seeds(seed_offset)[0];
        EvalCounter evals;
        gp_evolve(cfg, pset, data, [&](const GpIndividual& ind, std::mt19937_64& rng) {
            return op.mutate(ind, rng);
        }, evals, op.make_hooks());
        op.save_checkpoint(result.checkpoint_path);
    }

    for (ExperimentSpec es : eval_specs) {
        es.checkpoint = result.checkpoint_path;
        es.frozen = true;
        es.op = train_spec.op;
        es.paradigm = train_spec.paradigm;
        result.evals.push_back(run_experiment(es, seed_offset));
    }
    return result;
}

}  // namespace evo

#endif  // EVO_BENCH_HPP
