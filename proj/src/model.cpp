#include "mtprompt/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "mtprompt/errors.hpp"
#include "mtprompt/rng.hpp"

namespace mtprompt {

namespace {

constexpr double kLnEps = 1e-5;
constexpr double kInitStd = 0.02;

double gelu(double x) {
    return 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0)));
}

double gelu_grad(double x) {
    double phi = 0.5 * (1.0 + std::erf(x / std::sqrt(2.0)));
    double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
    return phi + x * pdf;
}

void gaussian_fill(Matrix &m, Rng &rng, double std_dev) {
    double *p = m.data();
    for (size_t i = 0; i < m.size(); ++i) {
        p[i] = std_dev * rng.gaussian();
    }
}

// y = ln((x - mean) * rstd) * g + b per row; mean/rstd recorded for backward.
void layer_norm_forward(const Matrix &x, const Matrix &g, const Matrix &b, Matrix &y,
                        std::vector<double> &means, std::vector<double> &rstds) {
    size_t d = x.cols();
    means.resize(x.rows());
    rstds.resize(x.rows());
    for (size_t i = 0; i < x.rows(); ++i) {
        double mean = 0.0;
        for (size_t j = 0; j < d; ++j) mean += x(i, j);
        mean /= static_cast<double>(d);
        double var = 0.0;
        for (size_t j = 0; j < d; ++j) {
            double c = x(i, j) - mean;
            var += c * c;
        }
        var /= static_cast<double>(d);
        double rstd = 1.0 / std::sqrt(var + kLnEps);
        means[i] = mean;
        rstds[i] = rstd;
        for (size_t j = 0; j < d; ++j) {
            y(i, j) = (x(i, j) - mean) * rstd * g(0, j) + b(0, j);
        }
    }
}

// Accumulates dx, dg, db given upstream dy and the recorded statistics.
void layer_norm_backward(const Matrix &x, const Matrix &g, const std::vector<double> &means,
                         const std::vector<double> &rstds, const Matrix &dy, Matrix &dx,
                         Matrix &dg, Matrix &db) {
    size_t d = x.cols();
    for (size_t i = 0; i < x.rows(); ++i) {
        double mean = means[i];
        double rstd = rstds[i];
        double sum_dxhat = 0.0;
        double sum_dxhat_xhat = 0.0;
        for (size_t j = 0; j < d; ++j) {
            double xhat = (x(i, j) - mean) * rstd;
            double dyv = dy(i, j);
            dg(0, j) += dyv * xhat;
            db(0, j) += dyv;
            double dxhat = dyv * g(0, j);
            sum_dxhat += dxhat;
            sum_dxhat_xhat += dxhat * xhat;
        }
        double inv_d = 1.0 / static_cast<double>(d);
        for (size_t j = 0; j < d; ++j) {
            double xhat = (x(i, j) - mean) * rstd;
            double dxhat = dy(i, j) * g(0, j);
            dx(i, j) += rstd * (dxhat - inv_d * sum_dxhat - xhat * inv_d * sum_dxhat_xhat);
        }
    }
}

void add_bias_rows(Matrix &m, const Matrix &bias) {
    for (size_t i = 0; i < m.rows(); ++i) {
        for (size_t j = 0; j < m.cols(); ++j) {
            m(i, j) += bias(0, j);
        }
    }
}

void accumulate_bias_grad(const Matrix &dm, Matrix &dbias) {
    for (size_t i = 0; i < dm.rows(); ++i) {
        for (size_t j = 0; j < dm.cols(); ++j) {
            dbias(0, j) += dm(i, j);
        }
    }
}

} // namespace

Parameters Parameters::zeros_like() const {
    Parameters z;
    z.embedding = embedding.zeros_like();
    z.positional = positional.zeros_like();
    z.layers.resize(layers.size());
    for (size_t l = 0; l < layers.size(); ++l) {
        const LayerParams &s = layers[l];
        LayerParams &d = z.layers[l];
        d.wq = s.wq.zeros_like();
        d.wk = s.wk.zeros_like();
        d.wv = s.wv.zeros_like();
        d.wo = s.wo.zeros_like();
        d.bq = s.bq.zeros_like();
        d.bk = s.bk.zeros_like();
        d.bv = s.bv.zeros_like();
        d.bo = s.bo.zeros_like();
        d.ln1_g = s.ln1_g.zeros_like();
        d.ln1_b = s.ln1_b.zeros_like();
        d.ln2_g = s.ln2_g.zeros_like();
        d.ln2_b = s.ln2_b.zeros_like();
        d.w1 = s.w1.zeros_like();
        d.b1 = s.b1.zeros_like();
        d.w2 = s.w2.zeros_like();
        d.b2 = s.b2.zeros_like();
    }
    z.lnf_g = lnf_g.zeros_like();
    z.lnf_b = lnf_b.zeros_like();
    z.w_proj = w_proj.zeros_like();
    z.b_proj = b_proj.zeros_like();
    return z;
}

MlmModel::MlmModel(Vocab vocab, ModelConfig config) :
    vocab_(std::move(vocab)), config_(config) {
    if (config_.d_model <= 0 || config_.n_layers <= 0 || config_.n_heads <= 0 ||
        config_.max_seq_len <= 0) {
        throw Error(ErrorKind::invalid_argument, "model config fields must be positive");
    }
    if (config_.d_model % config_.n_heads != 0) {
        throw Error(ErrorKind::invalid_argument, "d_model must be divisible by n_heads");
    }
    size_t d = static_cast<size_t>(config_.d_model);
    size_t ff = 4 * d;
    size_t nv = static_cast<size_t>(vocab_.size());

    Rng rng(config_.rng_seed);
    params_.embedding = Matrix(nv, d);
    gaussian_fill(params_.embedding, rng, kInitStd);
    params_.positional = Matrix(static_cast<size_t>(config_.max_seq_len), d);
    gaussian_fill(params_.positional, rng, kInitStd);

    params_.layers.resize(static_cast<size_t>(config_.n_layers));
    for (auto &lp : params_.layers) {
        lp.wq = Matrix(d, d);
        lp.wk = Matrix(d, d);
        lp.wv = Matrix(d, d);
        lp.wo = Matrix(d, d);
        gaussian_fill(lp.wq, rng, kInitStd);
        gaussian_fill(lp.wk, rng, kInitStd);
        gaussian_fill(lp.wv, rng, kInitStd);
        gaussian_fill(lp.wo, rng, kInitStd);
        lp.bq = Matrix(1, d);
        lp.bk = Matrix(1, d);
        lp.bv = Matrix(1, d);
        lp.bo = Matrix(1, d);
        lp.ln1_g = Matrix(1, d, 1.0);
        lp.ln1_b = Matrix(1, d);
        lp.ln2_g = Matrix(1, d, 1.0);
        lp.ln2_b = Matrix(1, d);
        lp.w1 = Matrix(d, ff);
        gaussian_fill(lp.w1, rng, kInitStd);
        lp.b1 = Matrix(1, ff);
        lp.w2 = Matrix(ff, d);
        gaussian_fill(lp.w2, rng, kInitStd);
        lp.b2 = Matrix(1, d);
    }
    params_.lnf_g = Matrix(1, d, 1.0);
    params_.lnf_b = Matrix(1, d);
    params_.w_proj = Matrix(d, nv);
    gaussian_fill(params_.w_proj, rng, kInitStd);
    params_.b_proj = Matrix(1, nv);
}

void MlmModel::reinit_projector() {
    Rng rng(mix_seed(config_.rng_seed, 0x70726f6au)); // decorrelated from init stream
    gaussian_fill(params_.w_proj, rng, kInitStd);
    params_.b_proj.fill(0.0);
    bump_version();
}

ForwardTrace MlmModel::forward(std::span<const int> ids) const {
    size_t len = ids.size();
    if (len == 0) {
        throw Error(ErrorKind::invalid_argument, "forward: empty input");
    }
    if (len > static_cast<size_t>(config_.max_seq_len)) {
        throw Error(ErrorKind::invalid_argument,
                    "forward: sequence length " + std::to_string(len) + " exceeds max_seq_len " +
                        std::to_string(config_.max_seq_len));
    }
    size_t d = static_cast<size_t>(config_.d_model);
    size_t heads = static_cast<size_t>(config_.n_heads);
    size_t dh = d / heads;
    double scale = 1.0 / std::sqrt(static_cast<double>(dh));

    ForwardTrace tr;
    tr.ids.assign(ids.begin(), ids.end());
    tr.model_tag = this;
    tr.params_version = version_;

    tr.x0 = Matrix(len, d);
    for (size_t i = 0; i < len; ++i) {
        int id = ids[i];
        if (id < 0 || id >= vocab_.size()) {
            throw Error(ErrorKind::invalid_argument, "forward: token id out of range");
        }
        for (size_t j = 0; j < d; ++j) {
            tr.x0(i, j) = params_.embedding(static_cast<size_t>(id), j) + params_.positional(i, j);
        }
    }

    Matrix x = tr.x0;
    tr.layers.resize(params_.layers.size());
    for (size_t l = 0; l < params_.layers.size(); ++l) {
        const LayerParams &lp = params_.layers[l];
        LayerTrace &lt = tr.layers[l];
        lt.x_in = x;

        lt.ln1_out = Matrix(len, d);
        layer_norm_forward(x, lp.ln1_g, lp.ln1_b, lt.ln1_out, lt.ln1_mean, lt.ln1_rstd);

        lt.q = matmul(lt.ln1_out, lp.wq);
        add_bias_rows(lt.q, lp.bq);
        lt.k = matmul(lt.ln1_out, lp.wk);
        add_bias_rows(lt.k, lp.bk);
        lt.v = matmul(lt.ln1_out, lp.wv);
        add_bias_rows(lt.v, lp.bv);

        lt.attn.resize(heads);
        lt.attn_concat = Matrix(len, d);
        for (size_t h = 0; h < heads; ++h) {
            size_t off = h * dh;
            Matrix &probs = lt.attn[h];
            probs = Matrix(len, len);
            for (size_t i = 0; i < len; ++i) {
                double mx = -1e300;
                for (size_t j = 0; j < len; ++j) {
                    double s = 0.0;
                    for (size_t c = 0; c < dh; ++c) {
                        s += lt.q(i, off + c) * lt.k(j, off + c);
                    }
                    s *= scale;
                    probs(i, j) = s;
                    mx = std::max(mx, s);
                }
                double sum = 0.0;
                for (size_t j = 0; j < len; ++j) {
                    double e = std::exp(probs(i, j) - mx);
                    probs(i, j) = e;
                    sum += e;
                }
                for (size_t j = 0; j < len; ++j) probs(i, j) /= sum;
                for (size_t c = 0; c < dh; ++c) {
                    double acc = 0.0;
                    for (size_t j = 0; j < len; ++j) {
                        acc += probs(i, j) * lt.v(j, off + c);
                    }
                    lt.attn_concat(i, off + c) = acc;
                }
            }
        }

        Matrix attn_out = matmul(lt.attn_concat, lp.wo);
        add_bias_rows(attn_out, lp.bo);
        lt.x_mid = x;
        add_inplace(lt.x_mid, attn_out);

        lt.ln2_out = Matrix(len, d);
        layer_norm_forward(lt.x_mid, lp.ln2_g, lp.ln2_b, lt.ln2_out, lt.ln2_mean, lt.ln2_rstd);

        lt.ffn_pre = matmul(lt.ln2_out, lp.w1);
        add_bias_rows(lt.ffn_pre, lp.b1);
        lt.ffn_act = lt.ffn_pre;
        for (size_t i = 0; i < lt.ffn_act.rows(); ++i) {
            for (size_t j = 0; j < lt.ffn_act.cols(); ++j) {
                lt.ffn_act(i, j) = gelu(lt.ffn_pre(i, j));
            }
        }
        Matrix ffn_out = matmul(lt.ffn_act, lp.w2);
        add_bias_rows(ffn_out, lp.b2);

        x = lt.x_mid;
        add_inplace(x, ffn_out);
    }

    tr.pre_lnf = x;
    tr.final_out = Matrix(len, d);
    layer_norm_forward(x, params_.lnf_g, params_.lnf_b, tr.final_out, tr.lnf_mean, tr.lnf_rstd);
    return tr;
}

HiddenState MlmModel::forward_mask_hidden(std::span<const int> ids, int mask_position) const {
    if (mask_position < 0 || static_cast<size_t>(mask_position) >= ids.size()) {
        throw Error(ErrorKind::invalid_argument, "forward_mask_hidden: mask position out of range");
    }
    if (ids[static_cast<size_t>(mask_position)] != Vocab::mask_id) {
        throw Error(ErrorKind::invalid_argument,
                    "forward_mask_hidden: token at position " + std::to_string(mask_position) +
                        " is not [MASK]");
    }
    ForwardTrace tr = forward(ids);
    auto row = tr.hidden(mask_position);
    return HiddenState(row.begin(), row.end());
}

LogitVector MlmModel::project_logits(std::span<const double> h) const {
    if (h.size() != static_cast<size_t>(config_.d_model)) {
        throw Error(ErrorKind::invalid_argument,
                    "project_logits: hidden size " + std::to_string(h.size()) +
                        " does not match d_model " + std::to_string(config_.d_model));
    }
    size_t nv = static_cast<size_t>(vocab_.size());
    LogitVector out(nv);
    for (size_t v = 0; v < nv; ++v) {
        double s = params_.b_proj(0, v);
        for (size_t j = 0; j < h.size(); ++j) {
            s += h[j] * params_.w_proj(j, v);
        }
        out[v] = s;
    }
    return out;
}

void MlmModel::backward(const ForwardTrace &trace,
                        const std::vector<std::pair<int, LogitVector>> &logit_grads,
                        Parameters &grads) const {
    if (trace.model_tag != this || trace.params_version != version_) {
        throw Error(ErrorKind::model,
                    "backward: trace does not match the current forward state of this model");
    }
    size_t len = trace.ids.size();
    size_t d = static_cast<size_t>(config_.d_model);
    size_t heads = static_cast<size_t>(config_.n_heads);
    size_t dh = d / heads;
    double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    size_t nv = static_cast<size_t>(vocab_.size());

    // Projection head, then the final layer norm.
    Matrix d_final(len, d);
    for (const auto &[pos, dlogit] : logit_grads) {
        if (pos < 0 || static_cast<size_t>(pos) >= len) {
            throw Error(ErrorKind::invalid_argument, "backward: gradient position out of range");
        }
        if (dlogit.size() != nv) {
            throw Error(ErrorKind::invalid_argument, "backward: logit gradient has wrong length");
        }
        auto h = trace.final_out.row(static_cast<size_t>(pos));
        for (size_t v = 0; v < nv; ++v) {
            double g = dlogit[v];
            if (g == 0.0) continue;
            grads.b_proj(0, v) += g;
            for (size_t j = 0; j < d; ++j) {
                grads.w_proj(j, v) += h[j] * g;
                d_final(static_cast<size_t>(pos), j) += params_.w_proj(j, v) * g;
            }
        }
    }

    Matrix dx(len, d);
    layer_norm_backward(trace.pre_lnf, params_.lnf_g, trace.lnf_mean, trace.lnf_rstd, d_final, dx,
                        grads.lnf_g, grads.lnf_b);

    for (size_t li = params_.layers.size(); li-- > 0;) {
        const LayerParams &lp = params_.layers[li];
        const LayerTrace &lt = trace.layers[li];
        LayerParams &lg = grads.layers[li];

        // FFN block: x_out = x_mid + gelu(ln2(x_mid) W1 + b1) W2 + b2
        Matrix d_act = matmul_nt(dx, lp.w2);
        add_inplace(lg.w2, matmul_tn(lt.ffn_act, dx));
        accumulate_bias_grad(dx, lg.b2);
        for (size_t i = 0; i < len; ++i) {
            for (size_t j = 0; j < d_act.cols(); ++j) {
                d_act(i, j) *= gelu_grad(lt.ffn_pre(i, j));
            }
        }
        Matrix d_ln2 = matmul_nt(d_act, lp.w1);
        add_inplace(lg.w1, matmul_tn(lt.ln2_out, d_act));
        accumulate_bias_grad(d_act, lg.b1);

        Matrix d_mid = dx; // residual path
        layer_norm_backward(lt.x_mid, lp.ln2_g, lt.ln2_mean, lt.ln2_rstd, d_ln2, d_mid, lg.ln2_g,
                            lg.ln2_b);

        // Attention block: x_mid = x_in + (concat heads) Wo + bo
        Matrix d_concat = matmul_nt(d_mid, lp.wo);
        add_inplace(lg.wo, matmul_tn(lt.attn_concat, d_mid));
        accumulate_bias_grad(d_mid, lg.bo);

        Matrix dq(len, d), dk(len, d), dv(len, d);
        for (size_t h = 0; h < heads; ++h) {
            size_t off = h * dh;
            const Matrix &probs = lt.attn[h];
            for (size_t i = 0; i < len; ++i) {
                // dP_ij = sum_c dO_ic V_jc, then softmax row backward
                std::vector<double> dp(len);
                double dot = 0.0;
                for (size_t j = 0; j < len; ++j) {
                    double s = 0.0;
                    for (size_t c = 0; c < dh; ++c) {
                        s += d_concat(i, off + c) * lt.v(j, off + c);
                    }
                    dp[j] = s;
                    dot += s * probs(i, j);
                }
                for (size_t j = 0; j < len; ++j) {
                    double ds = probs(i, j) * (dp[j] - dot) * scale;
                    for (size_t c = 0; c < dh; ++c) {
                        dq(i, off + c) += ds * lt.k(j, off + c);
                        dk(j, off + c) += ds * lt.q(i, off + c);
                    }
                }
                for (size_t j = 0; j < len; ++j) {
                    double p = probs(i, j);
                    for (size_t c = 0; c < dh; ++c) {
                        dv(j, off + c) += p * d_concat(i, off + c);
                    }
                }
            }
        }

        Matrix d_ln1 = matmul_nt(dq, lp.wq);
        add_inplace(d_ln1, matmul_nt(dk, lp.wk));
        add_inplace(d_ln1, matmul_nt(dv, lp.wv));
        add_inplace(lg.wq, matmul_tn(lt.ln1_out, dq));
        add_inplace(lg.wk, matmul_tn(lt.ln1_out, dk));
        add_inplace(lg.wv, matmul_tn(lt.ln1_out, dv));
        accumulate_bias_grad(dq, lg.bq);
        accumulate_bias_grad(dk, lg.bk);
        accumulate_bias_grad(dv, lg.bv);

        Matrix d_in = d_mid; // residual path
        layer_norm_backward(lt.x_in, lp.ln1_g, lt.ln1_mean, lt.ln1_rstd, d_ln1, d_in, lg.ln1_g,
                            lg.ln1_b);
        dx = std::move(d_in);
    }

    for (size_t i = 0; i < len; ++i) {
        size_t id = static_cast<size_t>(trace.ids[i]);
        for (size_t j = 0; j < d; ++j) {
            grads.embedding(id, j) += dx(i, j);
            grads.positional(i, j) += dx(i, j);
        }
    }
}

void MlmModel::sgd_step(const Parameters &grads, double learning_rate) {
    std::vector<std::pair<std::string, Matrix *>> mine;
    std::vector<const Matrix *> theirs;
    params_.for_each([&](const std::string &name, Matrix &m) { mine.emplace_back(name, &m); });
    grads.for_each([&](const std::string &, const Matrix &m) { theirs.push_back(&m); });
    if (mine.size() != theirs.size()) {
        throw Error(ErrorKind::model, "sgd_step: gradient layout does not match parameters");
    }
    // for_each walks both structures in the same declaration order
    for (size_t i = 0; i < mine.size(); ++i) {
        axpy_inplace(*mine[i].second, -learning_rate, *theirs[i]);
        if (!mine[i].second->all_finite()) {
            throw Error(ErrorKind::model, "sgd_step: non-finite values in " + mine[i].first);
        }
    }
    ++version_;
}

void MlmModel::save(const std::string &path) const {
    nlohmann::json j;
    j["schema_version"] = 1;
    j["config"] = {{"d_model", config_.d_model},
                   {"n_layers", config_.n_layers},
                   {"n_heads", config_.n_heads},
                   {"max_seq_len", config_.max_seq_len},
                   {"rng_seed", config_.rng_seed}};
    j["vocab"] = vocab_.tokens;
    nlohmann::json tensors;
    params_.for_each([&](const std::string &name, const Matrix &m) {
        nlohmann::json t;
        t["rows"] = m.rows();
        t["cols"] = m.cols();
        t["data"] = std::vector<double>(m.data(), m.data() + m.size());
        tensors[name] = std::move(t);
    });
    j["params"] = std::move(tensors);

    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error(ErrorKind::io, "cannot open checkpoint for writing: " + path);
    }
    out << j.dump();
    out.put('\n');
    if (!out) {
        throw Error(ErrorKind::io, "failed writing checkpoint: " + path);
    }
}

MlmModel MlmModel::load(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorKind::io, "cannot open checkpoint: " + path);
    }
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception &e) {
        throw Error(ErrorKind::io, "malformed checkpoint " + path + ": " + e.what());
    }
    try {
        ModelConfig cfg;
        cfg.d_model = j.at("config").at("d_model").get<int>();
        cfg.n_layers = j.at("config").at("n_layers").get<int>();
        cfg.n_heads = j.at("config").at("n_heads").get<int>();
        cfg.max_seq_len = j.at("config").at("max_seq_len").get<int>();
        cfg.rng_seed = j.at("config").at("rng_seed").get<uint64_t>();

        std::vector<std::string> tokens = j.at("vocab").get<std::vector<std::string>>();
        Vocab vocab;
        vocab.tokens = tokens;
        for (int i = 0; i < vocab.size(); ++i) {
            vocab.index.emplace(vocab.tokens[static_cast<size_t>(i)], i);
        }

        MlmModel model(std::move(vocab), cfg);
        const nlohmann::json &tensors = j.at("params");
        model.params_.for_each([&](const std::string &name, Matrix &m) {
            const nlohmann::json &t = tensors.at(name);
            size_t rows = t.at("rows").get<size_t>();
            size_t cols = t.at("cols").get<size_t>();
            if (rows != m.rows() || cols != m.cols()) {
                throw Error(ErrorKind::io, "checkpoint tensor " + name + " has wrong shape");
            }
            std::vector<double> data = t.at("data").get<std::vector<double>>();
            if (data.size() != m.size()) {
                throw Error(ErrorKind::io, "checkpoint tensor " + name + " has wrong size");
            }
            std::copy(data.begin(), data.end(), m.data());
        });
        return model;
    } catch (const nlohmann::json::exception &e) {
        throw Error(ErrorKind::io, "malformed checkpoint " + path + ": " + e.what());
    }
}

PretrainStats pretrain_mlm(MlmModel &model, const std::vector<std::vector<int>> &corpus,
                           const PretrainConfig &config) {
    if (corpus.empty()) {
        throw Error(ErrorKind::data, "pretrain_mlm: empty corpus");
    }
    if (!(config.mask_rate > 0.0 && config.mask_rate < 1.0)) {
        throw Error(ErrorKind::invalid_argument, "pretrain_mlm: mask_rate must be in (0, 1)");
    }
    if (config.batch_size <= 0 || config.steps < 0) {
        throw Error(ErrorKind::invalid_argument, "pretrain_mlm: bad steps or batch size");
    }

    size_t max_len = static_cast<size_t>(model.config().max_seq_len);
    Rng rng(config.seed);
    std::vector<size_t> order(corpus.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    size_t cursor = order.size(); // forces a shuffle before the first batch

    PretrainStats stats;
    stats.step_losses.reserve(static_cast<size_t>(config.steps));

    for (int step = 0; step < config.steps; ++step) {
        // Pick the batch and its masked positions first so the gradient
        // scale (1 / total masked tokens) is known up front.
        struct Item {
            std::vector<int> input;
            std::vector<std::pair<int, int>> masked; // position, original id
        };
        std::vector<Item> batch;
        int total_masked = 0;
        for (int b = 0; b < config.batch_size; ++b) {
            if (cursor >= order.size()) {
                rng.shuffle(order);
                cursor = 0;
            }
            const std::vector<int> &seq = corpus[order[cursor++]];
            Item item;
            item.input.assign(seq.begin(),
                              seq.size() > max_len ? seq.begin() + static_cast<long>(max_len)
                                                   : seq.end());
            if (item.input.empty()) continue;
            for (size_t p = 0; p < item.input.size(); ++p) {
                if (rng.uniform() < config.mask_rate) {
                    item.masked.emplace_back(static_cast<int>(p), item.input[p]);
                }
            }
            if (item.masked.empty()) {
                int p = rng.uniform_int(0, static_cast<int>(item.input.size()) - 1);
                item.masked.emplace_back(p, item.input[static_cast<size_t>(p)]);
            }
            for (auto &[p, orig] : item.masked) {
                item.input[static_cast<size_t>(p)] = Vocab::mask_id;
            }
            total_masked += static_cast<int>(item.masked.size());
            batch.push_back(std::move(item));
        }
        if (batch.empty() || total_masked == 0) continue;

        Parameters grads = model.params().zeros_like();
        double loss = 0.0;
        double inv_n = 1.0 / static_cast<double>(total_masked);
        for (const Item &item : batch) {
            ForwardTrace tr = model.forward(item.input);
            std::vector<std::pair<int, LogitVector>> lgrads;
            lgrads.reserve(item.masked.size());
            for (auto &[pos, orig] : item.masked) {
                LogitVector logits = model.project_logits(tr.hidden(pos));
                std::vector<double> probs = softmax(logits);
                loss += -std::log(std::max(probs[static_cast<size_t>(orig)], 1e-300)) * inv_n;
                for (double &p : probs) p *= inv_n;
                probs[static_cast<size_t>(orig)] -= inv_n;
                lgrads.emplace_back(pos, std::move(probs));
            }
            model.backward(tr, lgrads, grads);
        }
        model.sgd_step(grads, config.learning_rate);
        if (!std::isfinite(loss)) {
            throw Error(ErrorKind::model,
                        "pretrain_mlm: non-finite loss at step " + std::to_string(step));
        }
        stats.step_losses.push_back(loss);
    }
    return stats;
}

double masked_lm_loss(const MlmModel &model, const std::vector<std::vector<int>> &sequences,
                      double mask_rate, uint64_t eval_seed) {
    Rng rng(eval_seed);
    size_t max_len = static_cast<size_t>(model.config().max_seq_len);
    double loss = 0.0;
    int count = 0;
    for (const auto &seq : sequences) {
        std::vector<int> input(seq.begin(), seq.size() > max_len
                                                ? seq.begin() + static_cast<long>(max_len)
                                                : seq.end());
        if (input.empty()) continue;
        std::vector<std::pair<int, int>> masked;
        for (size_t p = 0; p < input.size(); ++p) {
            if (rng.uniform() < mask_rate) masked.emplace_back(static_cast<int>(p), input[p]);
        }
        if (masked.empty()) {
            int p = rng.uniform_int(0, static_cast<int>(input.size()) - 1);
            masked.emplace_back(p, input[static_cast<size_t>(p)]);
        }
        for (auto &[p, orig] : masked) input[static_cast<size_t>(p)] = Vocab::mask_id;
        ForwardTrace tr = model.forward(input);
        for (auto &[p, orig] : masked) {
            LogitVector logits = model.project_logits(tr.hidden(p));
            std::vector<double> probs = softmax(logits);
            loss += -std::log(std::max(probs[static_cast<size_t>(orig)], 1e-300));
            ++count;
        }
    }
    return count ? loss / count : 0.0;
}

} // namespace mtprompt
