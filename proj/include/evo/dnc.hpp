#ifndef EVO_DNC_HPP
#define EVO_DNC_HPP

#include <evo/checkpoint.hpp>
#include <evo/ga.hpp>
#include <evo/nn.hpp>

#include <deque>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace evo {

struct DncConfig {
    int parent_count = 2;  // m
    int alphabet = 0;      // A, per problem instance
    int genome_len = 0;
    int embed_dim = 64;
    int hidden_dim = 64;
    int attn_dim = 64;
    double learning_rate = 1e-3;
    double baseline_decay = 0.9;  // EMA beta
    int batch_size = 64;
    bool maximize = false;
    bool frozen = false;
    std::uint64_t init_seed = 0;

    void validate() const {
        if (parent_count < 2) throw std::invalid_argument("DncConfig: need m >= 2 parents");
        if (batch_size < 1) throw std::invalid_argument("DncConfig: batch size must be >= 1");
        if (alphabet <= 0 || genome_len <= 0)
            throw std::invalid_argument("DncConfig: alphabet and genome length must be positive");
        if (baseline_decay < 0.0 || baseline_decay >= 1.0)
            throw std::invalid_argument("DncConfig: baseline decay must be in [0,1)");
    }
};

/// Shared-weight encoder, decoder, pointer attention and the learned
/// start-token vector.
struct DncModel {
    EmbeddingTable gene_emb;
    LstmParams encoder;
    LstmParams decoder;
    PointerParams pointer;
    Tensor start;  // 1 x embed_dim

    DncModel() = default;
    DncModel(const DncConfig& cfg, std::mt19937_64& rng)
        : gene_emb(std::size_t(cfg.alphabet), std::size_t(cfg.embed_dim), rng),
          encoder(std::size_t(cfg.embed_dim), std::size_t(cfg.hidden_dim), rng),
          decoder(std::size_t(cfg.embed_dim), std::size_t(cfg.hidden_dim), rng),
          pointer(std::size_t(cfg.hidden_dim), std::size_t(cfg.attn_dim), rng),
          start(Tensor::randn(1, std::size_t(cfg.embed_dim), rng, 0.1)) {
        start.set_requires_grad();
    }

    std::vector<Tensor*> params() {
        std::vector<Tensor*> out = {&gene_emb.weight, &start};
        for (Tensor* p : encoder.params()) out.push_back(p);
        for (Tensor* p : decoder.params()) out.push_back(p);
        for (Tensor* p : pointer.params()) out.push_back(p);
        return out;
    }

    std::vector<std::pair<std::string, Tensor*>> named_params() {
        std::vector<std::pair<std::string, Tensor*>> out = {{"gene_emb", &gene_emb.weight},
                                                            {"start", &start}};
        const char* gates[] = {"wi", "wf", "wg", "wo", "bi", "bf", "bg", "bo"};
        auto add = [&](const std::string& prefix, LstmParams& l) {
            auto ps = l.params();
            for (std::size_t i = 0; i < ps.size(); ++i) out.emplace_back(prefix + "." + gates[i], ps[i]);
        };
        add("encoder", encoder);
        add("decoder", decoder);
        out.emplace_back("pointer.w_ref", &pointer.w_ref);
        out.emplace_back("pointer.w_query", &pointer.w_query);
        out.emplace_back("pointer.v", &pointer.v);
        return out;
    }
};

/// Inputs and choices of one crossover, kept for delayed REINFORCE training.
struct CrossoverRecord {
    std::vector<Genome> parents;
    std::vector<int> choices;  // chosen parent index per locus
    double logprob = 0.0;      // under the sampling-time policy
    Genome child;
    std::optional<double> reward;
};

/// Deep Neural Crossover: encode m parents with a shared LSTM, decode the
/// child gene by gene through pointer attention over the parents' per-locus
/// hidden states, and train with REINFORCE on offspring fitness.
class DncOperator {
public:
    explicit DncOperator(const DncConfig& cfg) : cfg_(cfg) {
        cfg_.validate();
        std::mt19937_64 rng(cfg_.init_seed);
        model_ = DncModel(cfg_, rng);
        baseline_.decay = cfg_.baseline_decay;
        opt_.lr = cfg_.learning_rate;
    }

    const DncConfig& config() const { return cfg_; }
    DncModel& model() { return model_; }
    long optimizer_steps() const { return opt_.step_count; }
    std::size_t cache_size() const { return cache_.size(); }
    std::size_t pending_count() const { return pending_.size(); }
    const std::vector<CrossoverRecord>& cache() const { return cache_; }
    const std::deque<CrossoverRecord>& pending() const { return pending_; }
    double baseline() const { return baseline_.value; }
    void set_frozen(bool frozen) { cfg_.frozen = frozen; }

    /// Produce one child; appends a reward-pending record unless frozen.
    Genome crossover(const std::vector<const Individual*>& parents, std::mt19937_64& rng) {
        std::vector<Genome> genomes;
        for (const Individual* p : parents) genomes.push_back(p->genome);
        return crossover_genomes(genomes, rng);
    }

    Genome crossover_genomes(const std::vector<Genome>& parents, std::mt19937_64& rng) {
        check_parents_compatible(parents);
        Tape tape;
        DecodeResult res = run(tape, parents, &rng, nullptr);
        if (!cfg_.frozen) {
            CrossoverRecord rec;
            rec.parents = parents;
            rec.choices = res.choices;
            rec.logprob = res.logprob_value;
            rec.child = res.child;
            pending_.push_back(std::move(rec));
        }
        return res.child;
    }

    /// FIFO reward delivery for the oldest pending record. Reward is the
    /// offspring fitness, sign-flipped for minimization.
    void deliver_reward(const Individual& child) {
        if (!child.evaluated()) throw std::invalid_argument("deliver_reward: child not evaluated");
        deliver_reward_value(*child.fitness);
    }

    void deliver_reward_value(double fitness) {
        if (cfg_.frozen) return;
        if (pending_.empty())
            throw std::logic_error("deliver_reward: no pending crossover record to match");
        CrossoverRecord rec = std::move(pending_.front());
        pending_.pop_front();
        rec.reward = cfg_.maximize ? fitness : -fitness;
        cache_.push_back(std::move(rec));
    }

    /// One REINFORCE step over the oldest batch_size complete records.
    /// Returns the scalar loss; no-op when frozen or the cache is short.
    double reinforce_update() {
        if (cfg_.frozen) return 0.0;
        if (cache_.size() < std::size_t(cfg_.batch_size)) return 0.0;

        std::size_t B = std::size_t(cfg_.batch_size);
        double mean_reward = 0.0;
        for (std::size_t k = 0; k < B; ++k) {
            if (!cache_[k].reward) throw std::logic_error("reinforce_update: incomplete record");
            mean_reward += *cache_[k].reward;
        }
        mean_reward /= double(B);

        for (Tensor* p : model_.params()) p->zero_grad();
        Tape tape;
        Tape::NodeId loss = -1;
        bool any_term = false;
        for (std::size_t k = 0; k < B; ++k) {
            const CrossoverRecord& rec = cache_[k];
            double advantage = *rec.reward - baseline_.value;
            if (advantage == 0.0) continue;  // zero-coefficient terms add nothing
            DecodeResult res = run(tape, rec.parents, nullptr, &rec.choices);
            Tape::NodeId term = tape.scale(res.logprob, -advantage / double(B));
            loss = any_term ? tape.add(loss, term) : term;
            any_term = true;
        }
        double loss_value = 0.0;
        if (any_term) {
            tape.backward(loss);
            opt_.step(to_span());
            loss_value = tape.value(loss).values[0];
        }
        baseline_.update(mean_reward);
        cache_.erase(cache_.begin(), cache_.begin() + long(B));
        return loss_value;
    }

    /// Drains all complete batches; the between-generations training point.
    void train_pending() {
        while (!cfg_.frozen && cache_.size() >= std::size_t(cfg_.batch_size)) reinforce_update();
    }

    EvolveHooks make_hooks() {
        EvolveHooks hooks;
        hooks.parents_needed = cfg_.parent_count;
        hooks.offspring_evaluated = [this](const Individual& ind, bool from_crossover) {
            if (from_crossover && !cfg_.frozen) deliver_reward(ind);
        };
        hooks.generation_end = [this] { train_pending(); };
        return hooks;
    }

    // ---- transfer workflow ----

    void save_checkpoint(const std::string& path) {
        Checkpoint ck;
        ck.hyper["parent_count"] = double(cfg_.parent_count);
        ck.hyper["alphabet"] = double(cfg_.alphabet);
        ck.hyper["genome_len"] = double(cfg_.genome_len);
        ck.hyper["embed_dim"] = double(cfg_.embed_dim);
        ck.hyper["hidden_dim"] = double(cfg_.hidden_dim);
        ck.hyper["attn_dim"] = double(cfg_.attn_dim);
        for (auto& [name, t] : model_.named_params()) ck.add_tensor(name, *t);
        ck.save(path);
    }

    /// Loads weights into a freshly constructed operator; every stored
    /// hyperparameter must match the requested config.
    static DncOperator load_checkpoint(const std::string& path, DncConfig cfg) {
        Checkpoint ck = Checkpoint::load(path);
        auto require = [&](const char* name, int expected) {
            int stored = int(ck.hyperparam(name));
            if (stored != expected)
                throw std::runtime_error("dnc checkpoint: " + std::string(name) + " is " +
                                         std::to_string(stored) + ", config wants " +
                                         std::to_string(expected));
        };
        require("parent_count", cfg.parent_count);
        require("alphabet", cfg.alphabet);
        require("genome_len", cfg.genome_len);
        require("embed_dim", cfg.embed_dim);
        require("hidden_dim", cfg.hidden_dim);
        require("attn_dim", cfg.attn_dim);
        DncOperator op(cfg);
        for (auto& [name, t] : op.model_.named_params()) ck.restore_into(name, *t);
        return op;
    }

private:
    struct DecodeResult {
        std::vector<int> choices;
        Genome child;
        Tape::NodeId logprob = -1;
        double logprob_value = 0.0;
    };

    DncConfig cfg_;
    DncModel model_;
    AdamState opt_;
    RewardBaseline baseline_;
    std::deque<CrossoverRecord> pending_;
    std::vector<CrossoverRecord> cache_;

    std::span<Tensor* const> to_span() {
        params_scratch_ = model_.params();
        return params_scratch_;
    }
    std::vector<Tensor*> params_scratch_;

    void check_parents_compatible(const std::vector<Genome>& parents) const {
        if (int(parents.size()) != cfg_.parent_count)
            throw std::invalid_argument("dnc: expected " + std::to_string(cfg_.parent_count) +
                                        " parents, got " + std::to_string(parents.size()));
        if (parents[0].genes.empty()) throw std::invalid_argument("dnc: empty parent genome");
        for (const Genome& g : parents) {
            if (g.genes.size() != parents[0].genes.size())
                throw std::invalid_argument("dnc: parent genome lengths differ");
            for (int v : g.genes)
                if (v < 0 || v >= cfg_.alphabet)
                    throw std::invalid_argument("dnc: gene value " + std::to_string(v) +
                                                " outside alphabet " + std::to_string(cfg_.alphabet));
        }
    }

    /// Encode + decode on the given tape. Samples with rng, or replays the
    /// forced parent choices when given (training).
    DecodeResult run(Tape& t, const std::vector<Genome>& parents, std::mt19937_64* rng,
                     const std::vector<int>* forced) {
        std::size_t m = parents.size();
        std::size_t len = parents[0].genes.size();

        NodeId emb = t.leaf(&model_.gene_emb.weight);
        LstmNodes enc = LstmNodes::bind(t, model_.encoder);
        LstmNodes dec = LstmNodes::bind(t, model_.decoder);
        PointerNodes ptr = PointerNodes::bind(t, model_.pointer);
        NodeId start = t.leaf(&model_.start);

        // shared-weight encoder over each parent; keep per-locus hidden states
        std::vector<std::vector<NodeId>> hidden(m);
        std::vector<LstmState> finals;
        for (std::size_t p = 0; p < m; ++p) {
            std::vector<NodeId> inputs;
            for (int gene : parents[p].genes)
                inputs.push_back(t.gather_rows(emb, {std::size_t(gene)}));
            LstmEncoding e = lstm_encode(t, inputs, enc, std::size_t(cfg_.hidden_dim));
            hidden[p] = std::move(e.hidden);
            finals.push_back(e.final_state);
        }

        // joint representation: element-wise mean of the m final (h, c) states
        LstmState state;
        {
            NodeId h = finals[0].h, c = finals[0].c;
            for (std::size_t p = 1; p < m; ++p) {
                h = t.add(h, finals[p].h);
                c = t.add(c, finals[p].c);
            }
            state = {t.scale(h, 1.0 / double(m)), t.scale(c, 1.0 / double(m))};
        }

        DecodeResult res;
        res.child.alphabet = cfg_.alphabet;
        NodeId x = start;
        NodeId logprob = -1;
        for (std::size_t i = 0; i < len; ++i) {
            state = lstm_step(t, x, state, dec);
            std::vector<NodeId> ref_rows;
            for (std::size_t p = 0; p < m; ++p) ref_rows.push_back(hidden[p][i]);
            NodeId refs = t.concat_rows(ref_rows);
            NodeId logits = pointer_scores(t, state.h, refs, ptr);
            NodeId logp = t.log_softmax_rows(logits);

            int choice;
            if (forced) {
                choice = (*forced)[i];
            } else {
                const auto& lp = t.value(logp).values;
                std::vector<double> probs(m);
                for (std::size_t p = 0; p < m; ++p) probs[p] = std::exp(lp[p]);
                std::discrete_distribution<int> dist(probs.begin(), probs.end());
                choice = dist(*rng);
            }
            NodeId term = t.select(logp, 0, std::size_t(choice));
            logprob = i == 0 ? term : t.add(logprob, term);

            res.choices.push_back(choice);
            int gene = parents[std::size_t(choice)].genes[i];
            res.child.genes.push_back(gene);
            x = t.gather_rows(emb, {std::size_t(gene)});
        }
        res.logprob = logprob;
        res.logprob_value = len > 0 ? t.value(logprob).values[0] : 0.0;
        return res;
    }
};

}  // namespace evo

#endif  // EVO_DNC_HPP
