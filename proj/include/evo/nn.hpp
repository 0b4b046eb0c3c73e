#ifndef EVO_NN_HPP
#define EVO_NN_HPP

#include <evo/tensor.hpp>

#include <cmath>
#include <cstddef>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace evo {

using NodeId = Tape::NodeId;

// ---------------------------------------------------------------------------
// Embedding
// ---------------------------------------------------------------------------

struct EmbeddingTable {
    std::size_t vocab = 0;
    std::size_t dim = 0;
    Tensor weight;  // vocab x dim

    EmbeddingTable() = default;
    EmbeddingTable(std::size_t v, std::size_t d, std::mt19937_64& rng, double stddev = 0.1)
        : vocab(v), dim(d), weight(Tensor::randn(v, d, rng, stddev)) {
        weight.set_requires_grad();
    }
};

/// Row lookup: token_ids -> (len x dim). Empty id list yields a 0 x dim matrix.
inline NodeId embed(Tape& tape, NodeId table, std::size_t vocab, const std::vector<int>& token_ids) {
    std::vector<std::size_t> idx;
    idx.reserve(token_ids.size());
    for (int id : token_ids) {
        if (id < 0 || std::size_t(id) >= vocab)
            throw std::out_of_range("embed: token id " + std::to_string(id) + " out of vocab " +
                                    std::to_string(vocab));
        idx.push_back(std::size_t(id));
    }
    return tape.gather_rows(table, std::move(idx));
}

// ---------------------------------------------------------------------------
// LSTM
// ---------------------------------------------------------------------------

struct LstmParams {
    std::size_t input_dim = 0;
    std::size_t hidden_dim = 0;
    // gate weights are (input+hidden) x hidden, biases 1 x hidden
    Tensor wi, wf, wg, wo;
    Tensor bi, bf, bg, bo;

    LstmParams() = default;
    LstmParams(std::size_t in, std::size_t h, std::mt19937_64& rng, double stddev = 0.1)
        : input_dim(in), hidden_dim(h) {
        for (Tensor* w : {&wi, &wf, &wg, &wo}) *w = Tensor::randn(in + h, h, rng, stddev);
        for (Tensor* b : {&bi, &bf, &bg, &bo}) *b = Tensor::zeros(1, h);
        for (Tensor* p : params()) p->set_requires_grad();
    }

    std::vector<Tensor*> params() {
        return {&wi, &wf, &wg, &wo, &bi, &bf, &bg, &bo};
    }
};

/// Per-tape bound parameter nodes.
struct LstmNodes {
    NodeId wi, wf, wg, wo, bi, bf, bg, bo;
    static LstmNodes bind(Tape& t, LstmParams& p) {
        return {t.leaf(&p.wi), t.leaf(&p.wf), t.leaf(&p.wg), t.leaf(&p.wo),
                t.leaf(&p.bi), t.leaf(&p.bf), t.leaf(&p.bg), t.leaf(&p.bo)};
    }
};

struct LstmState {
    NodeId h, c;  // 1 x hidden each
};

inline LstmState lstm_zero_state(Tape& tape, std::size_t hidden) {
    NodeId z = tape.input(Tensor::zeros(1, hidden));
    return {z, z};
}

/// Standard gate equations: sigmoid input/forget/output, tanh candidate.
inline LstmState lstm_step(Tape& t, NodeId x, LstmState s, const LstmNodes& w) {
    NodeId parts[] = {x, s.h};
    NodeId xh = t.concat_cols(parts);
    NodeId i = t.sigmoid_(t.add(t.matmul(xh, w.wi), w.bi));
    NodeId f = t.sigmoid_(t.add(t.matmul(xh, w.wf), w.bf));
    NodeId g = t.tanh_(t.add(t.matmul(xh, w.wg), w.bg));
    NodeId o = t.sigmoid_(t.add(t.matmul(xh, w.wo), w.bo));
    NodeId c = t.add(t.mul(f, s.c), t.mul(i, g));
    NodeId h = t.mul(o, t.tanh_(c));
    return {h, c};
}

struct LstmEncoding {
    std::vector<NodeId> hidden;  // one 1 x H node per step
    LstmState final_state;
};

/// Fold of lstm_step from the zero state over a sequence given as row nodes.
inline LstmEncoding lstm_encode(Tape& t, const std::vector<NodeId>& inputs, const LstmNodes& w,
                                std::size_t hidden_dim) {
    LstmEncoding enc;
    enc.final_state = lstm_zero_state(t, hidden_dim);
    for (NodeId x : inputs) {
        enc.final_state = lstm_step(t, x, enc.final_state, w);
        enc.hidden.push_back(enc.final_state.h);
    }
    return enc;
}

// ---------------------------------------------------------------------------
// Pointer attention
// ---------------------------------------------------------------------------

struct PointerParams {
    std::size_t hidden_dim = 0;
    std::size_t attn_dim = 0;
    Tensor w_ref;    // hidden x attn
    Tensor w_query;  // hidden x attn
    Tensor v;        // 1 x attn

    PointerParams() = default;
    PointerParams(std::size_t h, std::size_t a, std::mt19937_64& rng, double stddev = 0.1)
        : hidden_dim(h), attn_dim(a) {
        w_ref = Tensor::randn(h, a, rng, stddev);
        w_query = Tensor::randn(h, a, rng, stddev);
        v = Tensor::randn(1, a, rng, stddev);
        for (Tensor* p : params()) p->set_requires_grad();
    }

    std::vector<Tensor*> params() { return {&w_ref, &w_query, &v}; }
};

struct PointerNodes {
    NodeId w_ref, w_query, v;
    static PointerNodes bind(Tape& t, PointerParams& p) {
        return {t.leaf(&p.w_ref), t.leaf(&p.w_query), t.leaf(&p.v)};
    }
};

/// logit_j = v . tanh(W1 r_j + W2 q), returned as a 1 x m row.
inline NodeId pointer_scores(Tape& t, NodeId query, NodeId references, const PointerNodes& w) {
    if (t.value(references).rows() == 0)
        throw std::invalid_argument("pointer_scores: no reference vectors");
    NodeId proj = t.tanh_(t.add(t.matmul(references, w.w_ref), t.matmul(query, w.w_query)));
    return t.transpose(t.matmul_nt(proj, w.v));  // (m x 1) -> 1 x m
}

// ---------------------------------------------------------------------------
// Transformer encoder + MLM head
// ---------------------------------------------------------------------------

struct TransformerBlockParams {
    // one projection per head, attn output merge, layer norms, FFN
    std::vector<Tensor> wq, wk, wv;  // heads x (d x dh)
    Tensor wo;                       // d x d
    Tensor ln1_gamma, ln1_beta, ln2_gamma, ln2_beta;  // 1 x d
    Tensor ffn_w1, ffn_b1, ffn_w2, ffn_b2;            // d x f, 1 x f, f x d, 1 x d
};

struct TransformerParams {
    std::size_t vocab = 0;
    std::size_t dim = 0;
    std::size_t heads = 0;
    std::size_t ffn_dim = 0;
    std::size_t max_len = 0;
    Tensor token_emb;  // vocab x d
    Tensor pos_emb;    // max_len x d
    std::vector<TransformerBlockParams> blocks;
    Tensor mlm_w;  // d x vocab
    Tensor mlm_b;  // 1 x vocab

    TransformerParams() = default;
    TransformerParams(std::size_t vocab_, std::size_t d, std::size_t n_blocks, std::size_t heads_,
                      std::size_t ffn, std::size_t max_len_, std::mt19937_64& rng,
                      double stddev = 0.1)
        : vocab(vocab_), dim(d), heads(heads_), ffn_dim(ffn), max_len(max_len_) {
        if (d % heads_ != 0)
            throw std::invalid_argument("TransformerParams: head count must divide model dim");
        std::size_t dh = d / heads_;
        token_emb = Tensor::randn(vocab_, d, rng, stddev);
        pos_emb = Tensor::randn(max_len_, d, rng, stddev);
        blocks.resize(n_blocks);
        for (auto& b : blocks) {
            for (std::size_t h = 0; h < heads_; ++h) {
                b.wq.push_back(Tensor::randn(d, dh, rng, stddev));
                b.wk.push_back(Tensor::randn(d, dh, rng, stddev));
                b.wv.push_back(Tensor::randn(d, dh, rng, stddev));
            }
            b.wo = Tensor::randn(d, d, rng, stddev);
            b.ln1_gamma = Tensor({std::size_t(1), d}, std::vector<double>(d, 1.0));
            b.ln1_beta = Tensor::zeros(1, d);
            b.ln2_gamma = Tensor({std::size_t(1), d}, std::vector<double>(d, 1.0));
            b.ln2_beta = Tensor::zeros(1, d);
            b.ffn_w1 = Tensor::randn(d, ffn, rng, stddev);
            b.ffn_b1 = Tensor::zeros(1, ffn);
            b.ffn_w2 = Tensor::randn(ffn, d, rng, stddev);
            b.ffn_b2 = Tensor::zeros(1, d);
        }
        mlm_w = Tensor::randn(d, vocab_, rng, stddev);
        mlm_b = Tensor::zeros(1, vocab_);
        for (Tensor* p : params()) p->set_requires_grad();
    }

    std::vector<Tensor*> params() {
        std::vector<Tensor*> out = {&token_emb, &pos_emb, &mlm_w, &mlm_b};
        for (auto& b : blocks) {
            for (auto& t : b.wq) out.push_back(&t);
            for (auto& t : b.wk) out.push_back(&t);
            for (auto& t : b.wv) out.push_back(&t);
            out.push_back(&b.wo);
            out.push_back(&b.ln1_gamma);
            out.push_back(&b.ln1_beta);
            out.push_back(&b.ln2_gamma);
            out.push_back(&b.ln2_beta);
            out.push_back(&b.ffn_w1);
            out.push_back(&b.ffn_b1);
            out.push_back(&b.ffn_w2);
            out.push_back(&b.ffn_b2);
        }
        return out;
    }
};

/// Bidirectional encoder: N blocks of multi-head self-attention plus
/// position-wise FFN, residual + layer norm after each. Returns len x d.
inline NodeId transformer_encode(Tape& t, const std::vector<int>& token_ids,
                                 TransformerParams& p) {
    if (token_ids.size() > p.max_len)
        throw std::invalid_argument("transformer_encode: sequence length " +
                                    std::to_string(token_ids.size()) + " exceeds max " +
                                    std::to_string(p.max_len));
    NodeId tok = embed(t, t.leaf(&p.token_emb), p.vocab, token_ids);
    std::vector<std::size_t> pos(token_ids.size());
    for (std::size_t i = 0; i < pos.size(); ++i) pos[i] = i;
    NodeId x = t.add(tok, t.gather_rows(t.leaf(&p.pos_emb), pos));

    std::size_t dh = p.dim / p.heads;
    double scale = 1.0 / std::sqrt(double(dh));
    for (auto& b : p.blocks) {
        std::vector<NodeId> head_outs;
        for (std::size_t h = 0; h < p.heads; ++h) {
            NodeId q = t.matmul(x, t.leaf(&b.wq[h]));
            NodeId k = t.matmul(x, t.leaf(&b.wk[h]));
            NodeId v = t.matmul(x, t.leaf(&b.wv[h]));
            NodeId attn = t.softmax_rows(t.scale(t.matmul_nt(q, k), scale));
            head_outs.push_back(t.matmul(attn, v));
        }
        NodeId merged = t.matmul(t.concat_cols(head_outs), t.leaf(&b.wo));
        x = t.layer_norm(t.add(x, merged), t.leaf(&b.ln1_gamma), t.leaf(&b.ln1_beta));
        NodeId f = t.matmul(t.relu_(t.add(t.matmul(x, t.leaf(&b.ffn_w1)), t.leaf(&b.ffn_b1))),
                            t.leaf(&b.ffn_w2));
        f = t.add(f, t.leaf(&b.ffn_b2));
        x = t.layer_norm(t.add(x, f), t.leaf(&b.ln2_gamma), t.leaf(&b.ln2_beta));
    }
    return x;
}

/// Affine vocabulary head over contextual vectors (any subset of rows).
inline NodeId mlm_logits(Tape& t, NodeId contextual, TransformerParams& p) {
    return t.add(t.matmul(contextual, t.leaf(&p.mlm_w)), t.leaf(&p.mlm_b));
}

}  // namespace evo

#endif  // EVO_NN_HPP
