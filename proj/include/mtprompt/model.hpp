#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mtprompt/matrix.hpp"
#include "mtprompt/vocab.hpp"

namespace mtprompt {

// Output of the encoder at the mask position (length d_model).
using HiddenState = std::vector<double>;
// Full-vocabulary logits (length |V|).
using LogitVector = std::vector<double>;

struct ModelConfig {
    int d_model = 32;
    int n_layers = 2;
    int n_heads = 2;
    int max_seq_len = 64;
    uint64_t rng_seed = 0;
};

struct LayerParams {
    Matrix wq, wk, wv, wo;             // d x d
    Matrix bq, bk, bv, bo;             // 1 x d
    Matrix ln1_g, ln1_b, ln2_g, ln2_b; // 1 x d
    Matrix w1, b1;                     // d x 4d, 1 x 4d
    Matrix w2, b2;                     // 4d x d, 1 x d
};

// Every learnable tensor of the model. Gradients reuse this layout
// (zeros_like), so optimizers, serializers and gradient checks can walk
// parameters generically through for_each.
struct Parameters {
    Matrix embedding;  // |V| x d
    Matrix positional; // max_seq_len x d
    std::vector<LayerParams> layers;
    Matrix lnf_g, lnf_b; // 1 x d
    Matrix w_proj;       // d x |V|
    Matrix b_proj;       // 1 x |V|

    Parameters zeros_like() const;

    template <class F>
    void for_each(F &&f) {
        f("embedding", embedding);
        f("positional", positional);
        for (size_t l = 0; l < layers.size(); ++l) {
            std::string p = "layer" + std::to_string(l) + ".";
            LayerParams &lp = layers[l];
            f(p + "wq", lp.wq);
            f(p + "wk", lp.wk);
            f(p + "wv", lp.wv);
            f(p + "wo", lp.wo);
            f(p + "bq", lp.bq);
            f(p + "bk", lp.bk);
            f(p + "bv", lp.bv);
            f(p + "bo", lp.bo);
            f(p + "ln1_g", lp.ln1_g);
            f(p + "ln1_b", lp.ln1_b);
            f(p + "ln2_g", lp.ln2_g);
            f(p + "ln2_b", lp.ln2_b);
            f(p + "w1", lp.w1);
            f(p + "b1", lp.b1);
            f(p + "w2", lp.w2);
            f(p + "b2", lp.b2);
        }
        f("lnf_g", lnf_g);
        f("lnf_b", lnf_b);
        f("w_proj", w_proj);
        f("b_proj", b_proj);
    }

    template <class F>
    void for_each(F &&f) const {
        const_cast<Parameters *>(this)->for_each(
            [&](const std::string &name, Matrix &m) { f(name, static_cast<const Matrix &>(m)); });
    }
};

struct LayerTrace {
    Matrix x_in;               // L x d, block input
    Matrix ln1_out;            // L x d
    std::vector<double> ln1_mean, ln1_rstd;
    Matrix q, k, v;            // L x d
    std::vector<Matrix> attn;  // per head, L x L softmax rows
    Matrix attn_concat;        // L x d (pre-Wo)
    Matrix x_mid;              // L x d, after attention residual
    Matrix ln2_out;            // L x d
    std::vector<double> ln2_mean, ln2_rstd;
    Matrix ffn_pre;            // L x 4d
    Matrix ffn_act;            // L x 4d
};

// Activations recorded by forward(); required by backward(). A trace is
// bound to the exact parameter version that produced it.
class ForwardTrace {
public:
    std::span<const double> hidden(int position) const { return final_out.row(static_cast<size_t>(position)); }
    int length() const { return static_cast<int>(ids.size()); }

    std::vector<int> ids;
    Matrix x0; // L x d, embedding + positional
    std::vector<LayerTrace> layers;
    Matrix pre_lnf;   // L x d
    std::vector<double> lnf_mean, lnf_rstd;
    Matrix final_out; // L x d, encoder output

    const void *model_tag = nullptr;
    uint64_t params_version = 0;
};

struct PretrainConfig {
    int steps = 2000;
    double mask_rate = 0.15;
    int batch_size = 8;
    double learning_rate = 0.5;
    uint64_t seed = 1;
};

struct PretrainStats {
    std::vector<double> step_losses;
};

// Tiny bidirectional transformer encoder (pre-norm, learned positions,
// GELU feed-forward) with a full-vocabulary linear projection head. All
// arithmetic is in doubles and single-threaded, so fixed (seed, config,
// input) is bit-reproducible.
class MlmModel {
public:
    MlmModel(Vocab vocab, ModelConfig config);

    const Vocab &vocab() const { return vocab_; }
    const ModelConfig &config() const { return config_; }
    Parameters &params() { return params_; }
    const Parameters &params() const { return params_; }
    uint64_t params_version() const { return version_; }

    // Call after mutating params() directly; invalidates outstanding traces.
    void bump_version() { ++version_; }

    // Encoder pass over the whole sequence. Rejects over-length input.
    ForwardTrace forward(std::span<const int> ids) const;

    // Encoder output at the mask position. The token at mask_position must
    // be [MASK].
    HiddenState forward_mask_hidden(std::span<const int> ids, int mask_position) const;

    // logits = h * w_proj + b_proj
    LogitVector project_logits(std::span<const double> h) const;

    // Accumulates exact gradients for every parameter into grads, given
    // upstream loss gradients at the logits of one or more positions.
    // The trace must come from this model at the current parameter version.
    void backward(const ForwardTrace &trace,
                  const std::vector<std::pair<int, LogitVector>> &logit_grads,
                  Parameters &grads) const;

    // params -= lr * grads; rejects non-finite results.
    void sgd_step(const Parameters &grads, double learning_rate);

    // Reinitializes the projection head from the model seed (fresh-head
    // fine-tuning mode).
    void reinit_projector();

    void save(const std::string &path) const;
    static MlmModel load(const std::string &path);

private:
    Vocab vocab_;
    ModelConfig config_;
    Parameters params_;
    uint64_t version_ = 0;
};

// Standard masked-token prediction training, in place. Sequences longer
// than max_seq_len are truncated. Returns the per-step mean masked loss.
PretrainStats pretrain_mlm(MlmModel &model, const std::vector<std::vector<int>> &corpus,
                           const PretrainConfig &config);

// Mean masked-token negative log-likelihood over the given sequences with
// deterministic mask choices drawn from eval_seed.
double masked_lm_loss(const MlmModel &model, const std::vector<std::vector<int>> &sequences,
                      double mask_rate, uint64_t eval_seed);

} // namespace mtprompt
