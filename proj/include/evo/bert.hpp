#ifndef EVO_BERT_HPP
#define EVO_BERT_HPP

#include <evo/checkpoint.hpp>
#include <evo/gp.hpp>
#include <evo/nn.hpp>

#include <deque>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace evo {

struct BertMutConfig {
    double mask_prob = 0.2;
    double aux_prob = 0.1;  // hoist/subtree instead of the MLM path
    int batch_size = 64;
    double learning_rate = 1e-3;
    double baseline_decay = 0.9;
    int dim = 64;
    int blocks = 2;
    int heads = 4;
    int ffn_dim = 128;
    int max_len = 256;
    int donor_depth_lo = 2;
    int donor_depth_hi = 4;
    bool frozen = false;
    std::uint64_t init_seed = 0;

    void validate() const {
        if (mask_prob < 0.0 || mask_prob > 1.0 || aux_prob < 0.0 || aux_prob > 1.0)
            throw std::invalid_argument("BertMutConfig: probabilities must be in [0,1]");
        if (batch_size < 1) throw std::invalid_argument("BertMutConfig: batch size must be >= 1");
        if (baseline_decay < 0.0 || baseline_decay >= 1.0)
            throw std::invalid_argument("BertMutConfig: baseline decay must be in [0,1)");
        if (max_len < 1) throw std::invalid_argument("BertMutConfig: max length must be >= 1");
    }
};

/// Positions to replace, in pre-order, with the node kind at each.
struct MaskPlan {
    std::vector<int> original;
    std::vector<int> masked;
    std::vector<std::size_t> positions;
    std::vector<TokenKind> kinds;
};

/// Masks each node independently with probability p_mask, forcing at least
/// one mask. Throws std::length_error when the tree exceeds max_len tokens.
inline MaskPlan mask_tree(const GpTree& tree, const TokenTable& tt, double p_mask,
                          std::size_t max_len, std::mt19937_64& rng) {
    Tokenized tk = tokenize(tree, tt);
    if (tk.tokens.size() > max_len)
        throw std::length_error("mask_tree: tree has " + std::to_string(tk.tokens.size()) +
                                " tokens, limit " + std::to_string(max_len));
    MaskPlan plan;
    plan.original = tk.tokens;
    plan.masked = tk.tokens;
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    for (std::size_t i = 0; i < tk.tokens.size(); ++i)
        if (coin(rng) < p_mask) plan.positions.push_back(i);
    if (plan.positions.empty()) {
        std::uniform_int_distribution<std::size_t> pick(0, tk.tokens.size() - 1);
        plan.positions.push_back(pick(rng));
    }
    for (std::size_t pos : plan.positions) {
        plan.masked[pos] = TokenTable::kMask;
        plan.kinds.push_back(tt.kind_of(plan.original[pos]));
    }
    return plan;
}

/// Tokens a node of the given kind may become: terminals for terminals,
/// same-arity functions for functions. MASK is never valid.
inline std::vector<int> valid_tokens(const TokenTable& tt, const TokenKind& kind) {
    std::vector<int> out;
    if (kind.terminal) {
        for (std::size_t i = 0; i < tt.pset->variables.size(); ++i)
            out.push_back(tt.variable_token(int(i)));
        if (tt.pset->has_constants) out.push_back(tt.const_token());
    } else {
        for (std::size_t i = 0; i < tt.pset->functions.size(); ++i)
            if (tt.pset->functions[i].arity == kind.arity) out.push_back(tt.function_token(int(i)));
    }
    if (out.empty()) throw std::logic_error("valid_tokens: empty candidate set");
    return out;
}

struct SampledToken {
    int token = 0;
    double logprob = 0.0;  // under the constrained, renormalized distribution
};

/// Softmax restricted to the valid tokens for the kind; everything else
/// (including MASK) is excluded before normalization.
inline SampledToken constrained_sample(const std::vector<double>& vocab_logits,
                                       const TokenTable& tt, const TokenKind& kind,
                                       std::mt19937_64& rng) {
    std::vector<int> valid = valid_tokens(tt, kind);
    double mx = -std::numeric_limits<double>::infinity();
    for (int v : valid) mx = std::max(mx, vocab_logits[std::size_t(v)]);
    std::vector<double> probs;
    double z = 0.0;
    for (int v : valid) {
        double e = std::exp(vocab_logits[std::size_t(v)] - mx);
        probs.push_back(e);
        z += e;
    }
    std::discrete_distribution<int> dist(probs.begin(), probs.end());
    int idx = dist(rng);
    return {valid[std::size_t(idx)], std::log(probs[std::size_t(idx)] / z)};
}

/// Uniform draw for a freshly sampled constant token.
inline double instantiate_constant(double c_lo, double c_hi, std::mt19937_64& rng) {
    if (c_lo > c_hi) throw std::invalid_argument("instantiate_constant: c_lo > c_hi");
    return std::uniform_real_distribution<double>(c_lo, c_hi)(rng);
}

struct ReplaceResult {
    std::vector<int> tokens;  // masked sequence with all replacements applied
    std::vector<int> chosen;  // one token per masked position
    double logprob = 0.0;     // summed over steps
    std::vector<std::vector<int>> step_inputs;  // sequence fed at each step
};

/// Replaces masks one at a time in pre-order; each step re-encodes the
/// sequence with the earlier replacements already substituted.
inline ReplaceResult replace_masks(TransformerParams& net, const TokenTable& tt,
                                   const MaskPlan& plan, std::mt19937_64& rng) {
    ReplaceResult res;
    res.tokens = plan.masked;
    for (std::size_t step = 0; step < plan.positions.size(); ++step) {
        res.step_inputs.push_back(res.tokens);
        Tape t;
        NodeId enc = transformer_encode(t, res.tokens, net);
        NodeId logits = mlm_logits(t, t.gather_rows(enc, {plan.positions[step]}), net);
        SampledToken s = constrained_sample(t.value(logits).values, tt, plan.kinds[step], rng);
        res.tokens[plan.positions[step]] = s.token;
        res.chosen.push_back(s.token);
        res.logprob += s.logprob;
    }
    return res;
}

/// One completed mutation awaiting its reward; inputs and choices suffice to
/// replay the forward passes under current parameters.
struct MutationRecord {
    std::vector<int> masked_tokens;
    std::vector<std::size_t> positions;
    std::vector<int> chosen;
    double logprob = 0.0;  // at sampling time
    double pre_fitness = 0.0;
    std::optional<double> reward;  // pre - post: positive means improvement
};

/// MLM-based GP mutation trained with REINFORCE on fitness improvement.
class BertMutationOperator {
public:
    BertMutationOperator(const PrimitiveSet& pset, const BertMutConfig& cfg)
        : pset_(&pset), tt_(pset), cfg_(cfg) {
        cfg_.validate();
        std::mt19937_64 rng(cfg_.init_seed);
        net_ = TransformerParams(std::size_t(tt_.vocab_size()), std::size_t(cfg_.dim),
                                 std::size_t(cfg_.blocks), std::size_t(cfg_.heads),
                                 std::size_t(cfg_.ffn_dim), std::size_t(cfg_.max_len), rng);
        baseline_.decay = cfg_.baseline_decay;
        opt_.lr = cfg_.learning_rate;
    }

    const BertMutConfig& config() const { return cfg_; }
    TransformerParams& net() { return net_; }
    long optimizer_steps() const { return opt_.step_count; }
    long fallback_count() const { return fallback_count_; }
    long aux_count() const { return aux_count_; }
    std::size_t cache_size() const { return cache_.size(); }
    std::size_t pending_count() const { return pending_.size(); }
    const std::vector<MutationRecord>& cache() const { return cache_; }
    const std::deque<MutationRecord>& pending() const { return pending_; }
    double baseline() const { return baseline_.value; }
    void set_frozen(bool frozen) { cfg_.frozen = frozen; }

    /// Mutate an evaluated individual. With probability aux_prob applies
    /// hoist or subtree mutation instead; oversized trees fall back to point
    /// mutation. Only the MLM path appends a training record.
    GpTree mutate(const GpIndividual& ind, std::mt19937_64& rng) {
        if (!ind.evaluated()) throw std::invalid_argument("bert_mutate: individual not evaluated");
        std::uniform_real_distribution<double> coin(0.0, 1.0);
        if (coin(rng) < cfg_.aux_prob) {
            ++aux_count_;
            note_record(false);
            if (coin(rng) < 0.5) return hoist_mutation(ind.tree, rng);
            return subtree_mutation(ind.tree, *pset_, cfg_.donor_depth_lo, cfg_.donor_depth_hi,
                                    std::size_t(cfg_.max_len), rng);
        }

        MaskPlan plan;
        try {
            plan = mask_tree(ind.tree, tt_, cfg_.mask_prob, std::size_t(cfg_.max_len), rng);
        } catch (const std::length_error&) {
            ++fallback_count_;
            note_record(false);
            return point_mutation_gp(ind.tree, *pset_, 0.1, rng);
        }

        ReplaceResult rep = replace_masks(net_, tt_, plan, rng);

        // constants: newly sampled const tokens get fresh values, everything
        // else keeps the original node's value
        Tokenized tk = tokenize(ind.tree, tt_);
        std::vector<double> fresh(rep.tokens.size(), 0.0);
        std::vector<bool> is_fresh(rep.tokens.size(), false);
        for (std::size_t s = 0; s < plan.positions.size(); ++s)
            if (rep.chosen[s] == tt_.const_token()) {
                std::size_t pos = plan.positions[s];
                fresh[pos] = instantiate_constant(pset_->const_lo, pset_->const_hi, rng);
                is_fresh[pos] = true;
            }
        GpTree out = detokenize(rep.tokens, tt_, [&](std::size_t pos) {
            return is_fresh[pos] ? fresh[pos] : tk.nodes[pos]->value;
        });

        if (!cfg_.frozen) {
            MutationRecord rec;
            rec.masked_tokens = plan.masked;
            rec.positions = plan.positions;
            rec.chosen = rep.chosen;
            rec.logprob = rep.logprob;
            rec.pre_fitness = *ind.fitness;
            pending_.push_back(std::move(rec));
            note_record(true);
        } else {
            note_record(false);
        }
        return out;
    }

    void deliver_reward(const GpIndividual& mutated) {
        if (!mutated.evaluated())
            throw std::invalid_argument("deliver_reward: individual not evaluated");
        deliver_reward_value(*mutated.fitness);
    }

    /// FIFO completion; calls without a matching MLM-path record (aux or
    /// fallback mutations) are consumed silently.
    void deliver_reward_value(double post_fitness) {
        if (record_kind_.empty()) {
            if (cfg_.frozen) return;
            throw std::logic_error("deliver_reward: no pending mutation to match");
        }
        bool has_record = record_kind_.front();
        record_kind_.pop_front();
        if (!has_record) return;
        MutationRecord rec = std::move(pending_.front());
        pending_.pop_front();
        rec.reward = rec.pre_fitness - post_fitness;
        cache_.push_back(std::move(rec));
    }

    /// REINFORCE over the oldest batch_size complete records; replays each
    /// mask-replacement sequence under current parameters.
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

        for (Tensor* p : net_.params()) p->zero_grad();
        Tape t;
        Tape::NodeId loss = -1;
        bool any_term = false;
        for (std::size_t k = 0; k < B; ++k) {
            const MutationRecord& rec = cache_[k];
            double advantage = *rec.reward - baseline_.value;
            if (advantage == 0.0) continue;
            NodeId lp = replay_logprob(t, rec);
            NodeId term = t.scale(lp, -advantage / double(B));
            loss = any_term ? t.add(loss, term) : term;
            any_term = true;
        }
        double loss_value = 0.0;
        if (any_term) {
            t.backward(loss);
            params_scratch_ = net_.params();
            opt_.step(params_scratch_);
            loss_value = t.value(loss).values[0];
        }
        baseline_.update(mean_reward);
        cache_.erase(cache_.begin(), cache_.begin() + long(B));
        return loss_value;
    }

    void train_pending() {
        while (!cfg_.frozen && cache_.size() >= std::size_t(cfg_.batch_size)) reinforce_update();
    }

    GpEvolveHooks make_hooks() {
        GpEvolveHooks hooks;
        hooks.offspring_evaluated = [this](const GpIndividual& ind, bool from_mutation) {
            if (from_mutation && !cfg_.frozen) deliver_reward(ind);
        };
        hooks.generation_end = [this] { train_pending(); };
        return hooks;
    }

    // ---- transfer workflow ----

    void save_checkpoint(const std::string& path) {
        Checkpoint ck;
        ck.hyper["vocab"] = double(tt_.vocab_size());
        ck.hyper["dim"] = double(cfg_.dim);
        ck.hyper["blocks"] = double(cfg_.blocks);
        ck.hyper["heads"] = double(cfg_.heads);
        ck.hyper["ffn_dim"] = double(cfg_.ffn_dim);
        ck.hyper["max_len"] = double(cfg_.max_len);
        for (auto& [name, tsr] : named_params()) ck.add_tensor(name, *tsr);
        ck.save(path);
    }

    static BertMutationOperator load_checkpoint(const std::string& path, const PrimitiveSet& pset,
                                                BertMutConfig cfg) {
        Checkpoint ck = Checkpoint::load(path);
        BertMutationOperator op(pset, cfg);
        auto require = [&](const char* name, int expected) {
            int stored = int(ck.hyperparam(name));
            if (stored != expected)
                throw std::runtime_error("bert checkpoint: " + std::string(name) + " is " +
                                         std::to_string(stored) + ", config wants " +
                                         std::to_string(expected));
        };
        require("vocab", op.tt_.vocab_size());
        require("dim", cfg.dim);
        require("blocks", cfg.blocks);
        require("heads", cfg.heads);
        require("ffn_dim", cfg.ffn_dim);
        require("max_len", cfg.max_len);
        for (auto& [name, tsr] : op.named_params()) ck.restore_into(name, *tsr);
        return op;
    }

private:
    const PrimitiveSet* pset_;
    TokenTable tt_;
    BertMutConfig cfg_;
    TransformerParams net_;
    AdamState opt_;
    RewardBaseline baseline_;
    std::deque<MutationRecord> pending_;
    std::vector<MutationRecord> cache_;
    std::deque<bool> record_kind_;  // aligns reward delivery with mutate calls
    std::vector<Tensor*> params_scratch_;
    long fallback_count_ = 0;
    long aux_count_ = 0;

    void note_record(bool has_record) {
        if (!cfg_.frozen) record_kind_.push_back(has_record);
    }

    /// Constrained log-probability of the recorded choices on the tape.
    NodeId replay_logprob(Tape& t, const MutationRecord& rec) {
        std::vector<int> tokens = rec.masked_tokens;
        NodeId total = -1;
        for (std::size_t s = 0; s < rec.positions.size(); ++s) {
            NodeId enc = transformer_encode(t, tokens, net_);
            NodeId logits = mlm_logits(t, t.gather_rows(enc, {rec.positions[s]}), net_);
            std::vector<int> valid = valid_tokens(tt_, tt_.kind_of(rec.chosen[s]));
            std::vector<std::size_t> vidx(valid.begin(), valid.end());
            NodeId vrow = t.transpose(t.gather_rows(t.transpose(logits), vidx));
            NodeId logp = t.log_softmax_rows(vrow);
            std::size_t which = 0;
            while (valid[which] != rec.chosen[s]) ++which;
            NodeId term = t.select(logp, 0, which);
            total = s == 0 ? term : t.add(total, term);
            tokens[rec.positions[s]] = rec.chosen[s];
        }
        if (total == -1) throw std::logic_error("replay_logprob: record with no masked positions");
        return total;
    }

    std::vector<std::pair<std::string, Tensor*>> named_params() {
        std::vector<std::pair<std::string, Tensor*>> out = {{"token_emb", &net_.token_emb},
                                                            {"pos_emb", &net_.pos_emb},
                                                            {"mlm_w", &net_.mlm_w},
                                                            {"mlm_b", &net_.mlm_b}};
        for (std::size_t b = 0; b < net_.blocks.size(); ++b) {
            auto& blk = net_.blocks[b];
            std::string p = "block" + std::to_string(b) + ".";
            for (std::size_t h = 0; h < blk.wq.size(); ++h) {
                std::string hs = std::to_string(h);
                out.emplace_back(p + "wq" + hs, &blk.wq[h]);
                out.emplace_back(p + "wk" + hs, &blk.wk[h]);
                out.emplace_back(p + "wv" + hs, &blk.wv[h]);
            }
            out.emplace_back(p + "wo", &blk.wo);
            out.emplace_back(p + "ln1_gamma", &blk.ln1_gamma);
            out.emplace_back(p + "ln1_beta", &blk.ln1_beta);
            out.emplace_back(p + "ln2_gamma", &blk.ln2_gamma);
            out.emplace_back(p + "ln2_beta", &blk.ln2_beta);
            out.emplace_back(p + "ffn_w1", &blk.ffn_w1);
            out.emplace_back(p + "ffn_b1", &blk.ffn_b1);
            out.emplace_back(p + "ffn_w2", &blk.ffn_w2);
            out.emplace_back(p + "ffn_b2", &blk.ffn_b2);
        }
        return out;
    }
};

}  // namespace evo

#endif  // EVO_BERT_HPP
