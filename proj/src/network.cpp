#include "vfm/network.hpp"

#include "vfm/errors.hpp"

#include <charconv>
#include <cmath>

namespace vfm {

std::string_view to_string(Variant v) {
    switch (v) {
    case Variant::no_config: return "no_config";
    case Variant::concat_config: return "concat_config";
    case Variant::film_crossattn: return "film_crossattn";
    }
    return "film_crossattn";
}

Variant parse_variant(std::string_view s) {
    if (s == "no_config") return Variant::no_config;
    if (s == "concat_config") return Variant::concat_config;
    if (s == "film_crossattn") return Variant::film_crossattn;
    throw ConfigError("unknown variant '" + std::string(s) + "' (expected no_config, concat_config, film_crossattn)");
}

namespace {

bool parse_flag(const std::string& key, const std::string& v) {
    if (v == "true" || v == "on" || v == "1") return true;
    if (v == "false" || v == "off" || v == "0") return false;
    throw ConfigError(key + ": expected on/off, got '" + v + "'");
}

int parse_positive_int(const std::string& key, const std::string& v) {
    long long x = 0;
    try {
        x = parse_int(v);
    } catch (const DataError&) {
        throw ConfigError(key + ": not an integer: '" + v + "'");
    }
    return static_cast<int>(x);
}

double parse_real(const std::string& key, const std::string& v) {
    try {
        return parse_double(v);
    } catch (const DataError&) {
        throw ConfigError(key + ": not a number: '" + v + "'");
    }
}

} // namespace

std::uint64_t parse_seed(std::string_view s) {
    const std::string t = trim(s);
    std::uint64_t v = 0;
    auto res = std::from_chars(t.data(), t.data() + t.size(), v);
    if (t.empty() || res.ec != std::errc() || res.ptr != t.data() + t.size()) {
        throw ConfigError("seed must be a non-negative integer, got '" + t + "'");
    }
    return v;
}

void ModelConfig::validate() const {
    if (embed_dim < 1 || n_tcn_blocks < 1 || kernel_size < 1 || n_heads < 1 || head_hidden < 1) {
        throw ConfigError("model sizes must be positive");
    }
    if (embed_dim % n_heads != 0) {
        throw ConfigError("embed_dim " + std::to_string(embed_dim) + " is not divisible by n_heads " +
                          std::to_string(n_heads));
    }
    for (double p : {config_dropout, tcn_dropout, attn_dropout}) {
        if (!(p >= 0.0 && p < 1.0)) throw ConfigError("dropout rates must lie in [0,1)");
    }
}

KeyValueMap ModelConfig::to_key_values() const {
    KeyValueMap kv;
    kv["embed_dim"] = std::to_string(embed_dim);
    kv["n_tcn_blocks"] = std::to_string(n_tcn_blocks);
    kv["kernel_size"] = std::to_string(kernel_size);
    kv["n_heads"] = std::to_string(n_heads);
    kv["config_dropout"] = format_double(config_dropout);
    kv["tcn_dropout"] = format_double(tcn_dropout);
    kv["attn_dropout"] = format_double(attn_dropout);
    kv["head_hidden"] = std::to_string(head_hidden);
    kv["variant"] = std::string(to_string(variant));
    kv["use_physics"] = use_physics ? "on" : "off";
    kv["use_regime"] = use_regime ? "on" : "off";
    kv["model_seed"] = std::to_string(seed);
    return kv;
}

ModelConfig ModelConfig::from_key_values(const KeyValueMap& kv, ModelConfig c) {
    auto get = [&](const char* key) -> const std::string* {
        auto it = kv.find(key);
        return it == kv.end() ? nullptr : &it->second;
    };
    if (auto v = get("embed_dim")) c.embed_dim = parse_positive_int("embed_dim", *v);
    if (auto v = get("n_tcn_blocks")) c.n_tcn_blocks = parse_positive_int("n_tcn_blocks", *v);
    if (auto v = get("kernel_size")) c.kernel_size = parse_positive_int("kernel_size", *v);
    if (auto v = get("n_heads")) c.n_heads = parse_positive_int("n_heads", *v);
    if (auto v = get("config_dropout")) c.config_dropout = parse_real("config_dropout", *v);
    if (auto v = get("tcn_dropout")) c.tcn_dropout = parse_real("tcn_dropout", *v);
    if (auto v = get("attn_dropout")) c.attn_dropout = parse_real("attn_dropout", *v);
    if (auto v = get("head_hidden")) c.head_hidden = parse_positive_int("head_hidden", *v);
    if (auto v = get("variant")) c.variant = parse_variant(*v);
    if (auto v = get("use_physics")) c.use_physics = parse_flag("use_physics", *v);
    if (auto v = get("use_regime")) c.use_regime = parse_flag("use_regime", *v);
    if (auto v = get("model_seed")) c.seed = parse_seed(*v);
    return c;
}

ModelInput make_model_input(const WellDesign& design, const OperationalSequence& ops, const NormStats& stats) {
    stats.require_fitted();
    ModelInput in;
    const auto T = static_cast<Eigen::Index>(ops.size());
    in.ops.resize(T, kNumOps);
    in.w_gl.resize(T);
    for (Eigen::Index t = 0; t < T; ++t) {
        const OperationalRow& row = ops[static_cast<std::size_t>(t)];
        for (std::size_t j = 0; j < kNumOps; ++j) {
            in.ops(t, static_cast<Eigen::Index>(j)) = zscore(row.get(static_cast<OpField>(j)), stats.ops[j]);
        }
        in.w_gl(t) = gas_lift_mass_rate(row.qgl, design.gas_constant);
    }
    const auto dv = to_design_vector(design, stats);
    in.design = Eigen::Map<const RowVec>(dv.data(), static_cast<Eigen::Index>(dv.size()));
    return in;
}

ModelInput make_model_input(const WellRecord& record, const NormStats& stats) {
    return make_model_input(record.design, record.ops, stats);
}

TcnBlock::TcnBlock(const std::string& name, int dim, int kernel, int dilation, double dropout)
    : conv1(name + ".conv1", dim, dim, kernel, dilation),
      conv2(name + ".conv2", dim, dim, kernel, dilation),
      norm1(name + ".norm1", dim),
      norm2(name + ".norm2", dim),
      drop1(dropout),
      drop2(dropout) {}

void TcnBlock::init(Rng& rng) {
    conv1.init(rng);
    conv2.init(rng);
}

Mat TcnBlock::forward(const Mat& x, bool training, Rng* rng) {
    Mat h = drop1.forward(act1.forward(norm1.forward(conv1.forward(x))), training, rng);
    h = drop2.forward(act2.forward(norm2.forward(conv2.forward(h))), training, rng);
    return x + h;
}

Mat TcnBlock::backward(const Mat& dy) {
    Mat dh = conv2.backward(norm2.backward(act2.backward(drop2.backward(dy))));
    dh = conv1.backward(norm1.backward(act1.backward(drop1.backward(dh))));
    return dy + dh;
}

void TcnBlock::collect(ParamList& out) {
    conv1.collect(out);
    norm1.collect(out);
    conv2.collect(out);
    norm2.collect(out);
}

Model::Model(const ModelConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    const int d = cfg_.embed_dim;
    const int hh = cfg_.head_hidden;
    Rng rng(cfg_.seed);
    const bool film_variant = cfg_.variant == Variant::film_crossattn;

    if (film_variant) {
        enc1_ = DenseBlock("encoder.layer1", static_cast<int>(kDesignVectorSize), d);
        enc2_ = DenseBlock("encoder.layer2", d, d);
        enc_drop1_ = Dropout(cfg_.config_dropout);
        enc_drop2_ = Dropout(cfg_.config_dropout);
        enc1_.init(rng);
        enc2_.init(rng);
    }

    in_proj_ = DenseBlock("tcn.input", input_width(), d);
    in_proj_.init(rng);
    int dilation = 1;
    for (int i = 0; i < cfg_.n_tcn_blocks; ++i) {
        blocks_.emplace_back("tcn.block" + std::to_string(i), d, cfg_.kernel_size, dilation, cfg_.tcn_dropout);
        blocks_.back().init(rng);
        dilation *= 2;
    }

    if (film_variant) {
        film_gamma_ = Linear("film.gamma", d, d);
        film_beta_ = Linear("film.beta", d, d);
        film_gamma_.bias.value.setOnes();

        attn_q_ = Linear("attention.query", d, d);
        attn_k_ = Linear("attention.key", d, d);
        attn_v_ = Linear("attention.value", d, d);
        attn_o_ = Linear("attention.out", d, d);
        attn_q_.init(rng);
        attn_k_.init(rng);
        attn_v_.init(rng);
        attn_o_.init(rng);
        attn_drop_ = Dropout(cfg_.attn_dropout);
        attn_norm_ = LayerNorm("attention.norm", d);
    }

    fusion_ = DenseBlock("fusion", d, d);
    fusion_.init(rng);

    vfm_head_ = MlpHead("head.vfm", d, hh, 3);
    pres_head_ = MlpHead("head.bottomhole", d, hh, 2);
    vfm_head_.init(rng);
    pres_head_.init(rng);
    if (cfg_.use_regime) {
        reg_bh_head_ = MlpHead("head.regime_bh", d, hh, static_cast<int>(kNumRegimes));
        reg_wh_head_ = MlpHead("head.regime_wh", d, hh, static_cast<int>(kNumRegimes));
        reg_bh_head_.init(rng);
        reg_wh_head_.init(rng);
    }
}

int Model::input_width() const {
    return static_cast<int>(kNumOps + (cfg_.variant == Variant::concat_config ? kDesignVectorSize : 0));
}

int Model::receptive_field() const {
    int rf = 1;
    for (const auto& b : blocks_) {
        rf += (b.conv1.kernel() - 1) * b.conv1.dilation();
        rf += (b.conv2.kernel() - 1) * b.conv2.dilation();
    }
    return rf;
}

ParamList Model::parameters() {
    ParamList out;
    if (cfg_.variant == Variant::film_crossattn) {
        enc1_.collect(out);
        enc2_.collect(out);
    }
    in_proj_.collect(out);
    for (auto& b : blocks_) b.collect(out);
    if (cfg_.variant == Variant::film_crossattn) {
        film_gamma_.collect(out);
        film_beta_.collect(out);
        attn_q_.collect(out);
        attn_k_.collect(out);
        attn_v_.collect(out);
        attn_o_.collect(out);
        attn_norm_.collect(out);
    }
    fusion_.collect(out);
    vfm_head_.collect(out);
    pres_head_.collect(out);
    if (cfg_.use_regime) {
        reg_bh_head_.collect(out);
        reg_wh_head_.collect(out);
    }
    return out;
}

std::size_t Model::parameter_count() { return count_parameters(parameters()); }

void Model::zero_grad() { vfm::zero_grad(parameters()); }

void Model::force_film(const RowVec& gamma, const RowVec& beta) {
    forced_gamma_ = gamma;
    forced_beta_ = beta;
}

Mat Model::encode_config(const RowVec& c, bool training, Rng* rng) {
    if (cfg_.variant != Variant::film_crossattn) throw ConfigError("variant has no configuration encoder");
    if (c.size() != static_cast<Eigen::Index>(kDesignVectorSize)) {
        throw ShapeError("design vector must have length " + std::to_string(kDesignVectorSize) + ", got " +
                         std::to_string(c.size()));
    }
    Mat h = enc_drop1_.forward(enc1_.forward(c), training, rng);
    return enc_drop2_.forward(enc2_.forward(h), training, rng);
}

Mat Model::tcn_encode(const Mat& x, bool training, Rng* rng) {
    if (x.rows() < 1) throw ShapeError("operational sequence is empty");
    Mat h = in_proj_.forward(x);
    for (auto& b : blocks_) h = b.forward(h, training, rng);
    return h;
}

Mat Model::film(const Mat& h, const Mat& z) {
    film_h_ = h;
    if (film_bypass_) return h;
    if (forced_gamma_.size() > 0) {
        film_gamma_val_ = forced_gamma_;
        Mat out = h.array().rowwise() * forced_gamma_.array();
        out.rowwise() += forced_beta_;
        return out;
    }
    film_gamma_val_ = film_gamma_.forward(z);
    const Mat beta = film_beta_.forward(z);
    Mat out = h.array().rowwise() * film_gamma_val_.row(0).array();
    out.rowwise() += beta.row(0);
    return out;
}

Mat Model::cross_attention(const Mat& h_film, const Mat& z, bool training, Rng* rng) {
    const Eigen::Index T = h_film.rows();
    const int heads = cfg_.n_heads;
    const int dh = cfg_.embed_dim / heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    attn_q_val_ = attn_q_.forward(h_film);
    attn_k_val_ = attn_k_.forward(z); // one key/value token
    attn_v_val_ = attn_v_.forward(z);
    const Eigen::Index n_keys = attn_k_val_.rows();

    attn_weights_.resize(T, heads * n_keys);
    Mat ctx = Mat::Zero(T, cfg_.embed_dim);
    for (int h = 0; h < heads; ++h) {
        const auto cols = Eigen::seqN(h * dh, dh);
        for (Eigen::Index t = 0; t < T; ++t) {
            RowVec s(n_keys);
            for (Eigen::Index k = 0; k < n_keys; ++k) s(k) = attn_q_val_(t, cols).dot(attn_k_val_(k, cols)) * scale;
            const double m = s.maxCoeff();
            RowVec p = (s.array() - m).exp().matrix();
            p /= p.sum();
            for (Eigen::Index k = 0; k < n_keys; ++k) {
                attn_weights_(t, h * n_keys + k) = p(k);
                ctx(t, cols) += p(k) * attn_v_val_(k, cols);
            }
        }
    }
    const Mat a = attn_drop_.forward(attn_o_.forward(ctx), training, rng);
    return attn_norm_.forward(h_film + a);
}

Mat Model::cross_attention_backward(const Mat& dy, Mat& dz) {
    const Eigen::Index T = dy.rows();
    const int heads = cfg_.n_heads;
    const int dh = cfg_.embed_dim / heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    const Eigen::Index n_keys = attn_k_val_.rows();

    const Mat dsum = attn_norm_.backward(dy);
    Mat dh_film = dsum;
    const Mat dctx = attn_o_.backward(attn_drop_.backward(dsum));

    Mat dq = Mat::Zero(T, cfg_.embed_dim);
    Mat dk = Mat::Zero(n_keys, cfg_.embed_dim);
    Mat dv = Mat::Zero(n_keys, cfg_.embed_dim);
    for (int h = 0; h < heads; ++h) {
        const auto cols = Eigen::seqN(h * dh, dh);
        for (Eigen::Index t = 0; t < T; ++t) {
            RowVec dp(n_keys);
            double pdp = 0.0;
            for (Eigen::Index k = 0; k < n_keys; ++k) {
                const double p = attn_weights_(t, h * n_keys + k);
                dv(k, cols) += p * dctx(t, cols);
                dp(k) = dctx(t, cols).dot(attn_v_val_(k, cols));
                pdp += p * dp(k);
            }
            for (Eigen::Index k = 0; k < n_keys; ++k) {
                const double p = attn_weights_(t, h * n_keys + k);
                const double ds = p * (dp(k) - pdp) * scale;
                dq(t, cols) += ds * attn_k_val_(k, cols);
                dk(k, cols) += ds * attn_q_val_(t, cols);
            }
        }
    }
    dh_film += attn_q_.backward(dq);
    dz += attn_k_.backward(dk);
    dz += attn_v_.backward(dv);
    return dh_film;
}

Mat Model::heads_forward(const Mat& fused, const Vec& w_gl, const NormStats& stats, PredictionSequence& out) {
    stats.require_fitted();
    if (w_gl.size() != fused.rows()) throw ShapeError("lift-gas vector length does not match sequence length");
    out.flows_norm = vfm_head_.forward(fused);
    out.bottomhole_norm = pres_head_.forward(fused);
    if (cfg_.use_regime) {
        out.regime_bh = reg_bh_head_.forward(fused);
        out.regime_wh = reg_wh_head_.forward(fused);
    }
    const Eigen::Index T = fused.rows();
    out.flows.resize(T, 3);
    for (Eigen::Index j = 0; j < 3; ++j) {
        const FeatureStats& s = stats.targets[static_cast<std::size_t>(j)];
        for (Eigen::Index t = 0; t < T; ++t) out.flows(t, j) = inverse_zscore(out.flows_norm(t, j), s);
    }
    out.pbh.resize(T);
    out.tbh.resize(T);
    out.w_tot.resize(T);
    const auto& sp = stats.targets[static_cast<std::size_t>(TargetField::pbh)];
    const auto& st = stats.targets[static_cast<std::size_t>(TargetField::tbh)];
    for (Eigen::Index t = 0; t < T; ++t) {
        out.pbh(t) = inverse_zscore(out.bottomhole_norm(t, 0), sp);
        out.tbh(t) = inverse_zscore(out.bottomhole_norm(t, 1), st);
        out.w_tot(t) = ((out.flows(t, 0) + out.flows(t, 1)) + out.flows(t, 2)) + w_gl(t);
    }
    out.w_gl = w_gl;
    return fused;
}

PredictionSequence Model::conditioned_forward(const Mat& h_ops, const RowVec& design, const Vec& w_gl,
                                              const NormStats& stats, bool training, Rng* rng) {
    const Mat z = encode_config(design, training, rng);
    const Mat hf = film(h_ops, z);
    const Mat a = cross_attention(hf, z, training, rng);
    PredictionSequence out;
    heads_forward(fusion_.forward(a), w_gl, stats, out);
    return out;
}

PredictionSequence Model::forward(const ModelInput& in, const NormStats& stats, bool training, Rng* dropout_rng) {
    if (in.ops.cols() != static_cast<Eigen::Index>(kNumOps)) {
        throw ShapeError("operational input must have " + std::to_string(kNumOps) + " columns");
    }
    if (in.design.size() != static_cast<Eigen::Index>(kDesignVectorSize)) {
        throw ShapeError("design vector must have length " + std::to_string(kDesignVectorSize));
    }
    last_used_encoded_ = false;
    switch (cfg_.variant) {
    case Variant::film_crossattn:
        return conditioned_forward(tcn_encode(in.ops, training, dropout_rng), in.design, in.w_gl, stats, training,
                                   dropout_rng);
    case Variant::concat_config: {
        Mat x(in.ops.rows(), input_width());
        x.leftCols(kNumOps) = in.ops;
        x.rightCols(kDesignVectorSize) = in.design.replicate(in.ops.rows(), 1);
        PredictionSequence out;
        heads_forward(fusion_.forward(tcn_encode(x, training, dropout_rng)), in.w_gl, stats, out);
        return out;
    }
    case Variant::no_config: {
        PredictionSequence out;
        heads_forward(fusion_.forward(tcn_encode(in.ops, training, dropout_rng)), in.w_gl, stats, out);
        return out;
    }
    }
    throw ConfigError("unknown variant");
}

Mat Model::encode_ops(const Mat& ops_norm) {
    if (cfg_.variant != Variant::film_crossattn) throw ConfigError("encode_ops is only defined for film_crossattn");
    return tcn_encode(ops_norm, false, nullptr);
}

PredictionSequence Model::forward_encoded(const Mat& h_ops, const RowVec& design, const Vec& w_gl,
                                          const NormStats& stats) {
    if (cfg_.variant != Variant::film_crossattn) {
        throw ConfigError("forward_encoded is only defined for film_crossattn");
    }
    last_used_encoded_ = true;
    return conditioned_forward(h_ops, design, w_gl, stats, false, nullptr);
}

void Model::backward(const OutputGrads& g) {
    if (last_used_encoded_) throw ConfigError("backward is not available after forward_encoded");
    const bool regime_grads = g.regime_bh.size() > 0 || g.regime_wh.size() > 0;
    if (regime_grads && !cfg_.use_regime) {
        throw ConfigError("regime gradients supplied but the model has no regime head (use_regime off)");
    }
    Mat dfused = vfm_head_.backward(g.flows);
    dfused += pres_head_.backward(g.bottomhole);
    if (g.regime_bh.size() > 0) dfused += reg_bh_head_.backward(g.regime_bh);
    if (g.regime_wh.size() > 0) dfused += reg_wh_head_.backward(g.regime_wh);
    Mat dh = fusion_.backward(dfused);

    if (cfg_.variant == Variant::film_crossattn) {
        Mat dz = Mat::Zero(1, cfg_.embed_dim);
        const Mat dhf = cross_attention_backward(dh, dz);
        if (film_bypass_) {
            dh = dhf;
        } else if (forced_gamma_.size() > 0) {
            dh = dhf.array().rowwise() * forced_gamma_.array();
        } else {
            const Mat dgamma = (dhf.array() * film_h_.array()).colwise().sum().matrix();
            const Mat dbeta = dhf.colwise().sum();
            dz += film_gamma_.backward(dgamma);
            dz += film_beta_.backward(dbeta);
            dh = dhf.array().rowwise() * film_gamma_val_.row(0).array();
        }
        for (auto it = blocks_.rbegin(); it != blocks_.rend(); ++it) dh = it->backward(dh);
        in_proj_.backward(dh);
        Mat dc = enc2_.backward(enc_drop2_.backward(dz));
        enc1_.backward(enc_drop1_.backward(dc));
        return;
    }
    for (auto it = blocks_.rbegin(); it != blocks_.rend(); ++it) dh = it->backward(dh);
    in_proj_.backward(dh);
}

} // namespace vfm
