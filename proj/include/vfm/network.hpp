#pragma once

#include "vfm/datamodel.hpp"
#include "vfm/layers.hpp"
#include "vfm/textio.hpp"

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace vfm {

enum class Variant { no_config, concat_config, film_crossattn };

std::string_view to_string(Variant v);
Variant parse_variant(std::string_view s);

/// Parses an unsigned 64-bit seed; throws ConfigError.
std::uint64_t parse_seed(std::string_view s);

struct ModelConfig {
    int embed_dim = 64;
    int n_tcn_blocks = 4;
    int kernel_size = 3;
    int n_heads = 4;
    double config_dropout = 0.1;
    double tcn_dropout = 0.3;
    double attn_dropout = 0.1;
    int head_hidden = 32;
    Variant variant = Variant::film_crossattn;
    bool use_physics = true;
    bool use_regime = true;
    std::uint64_t seed = 42;

    /// Throws ConfigError on non-positive sizes, embed_dim % n_heads != 0 or dropout outside [0,1).
    void validate() const;

    KeyValueMap to_key_values() const;
    /// Starts from `base` and overrides the keys present in `kv`; unknown keys are ignored.
    static ModelConfig from_key_values(const KeyValueMap& kv, ModelConfig base);
    static ModelConfig from_key_values(const KeyValueMap& kv) { return from_key_values(kv, ModelConfig()); }

    bool operator==(const ModelConfig&) const = default;
};

/// One well prepared for the network.
struct ModelInput {
    Mat ops;       // [T, 8] z-scored operational rows
    RowVec design; // [24] design vector
    Vec w_gl;      // [T] lift gas in kg/s, used for the derived total
};

ModelInput make_model_input(const WellDesign& design, const OperationalSequence& ops, const NormStats& stats);
ModelInput make_model_input(const WellRecord& record, const NormStats& stats);

struct PredictionSequence {
    Mat flows_norm;     // [T, 3] oil, water, gas in z-score units
    Mat bottomhole_norm; // [T, 2] PBH, TBH in z-score units
    Mat regime_bh;      // [T, 3] logits; empty without a regime head
    Mat regime_wh;      // [T, 3]

    Mat flows; // [T, 3] kg/s
    Vec pbh;   // bar
    Vec tbh;   // K
    Vec w_gl;  // kg/s
    Vec w_tot; // ((oil + wat) + gas) + w_gl

    Eigen::Index steps() const { return flows.rows(); }
    bool has_regime() const { return regime_bh.size() > 0; }
};

/// Loss gradients with respect to the network outputs (z-score units and raw logits).
struct OutputGrads {
    Mat flows;      // [T, 3]
    Mat bottomhole; // [T, 2]
    Mat regime_bh;  // [T, 3] or empty
    Mat regime_wh;
};

class TcnBlock {
public:
    TcnBlock() = default;
    TcnBlock(const std::string& name, int dim, int kernel, int dilation, double dropout);

    void init(Rng& rng);
    Mat forward(const Mat& x, bool training, Rng* rng);
    Mat backward(const Mat& dy);
    void collect(ParamList& out);

    CausalConv1d conv1, conv2;
    LayerNorm norm1, norm2;
    Gelu act1, act2;
    Dropout drop1, drop2;
};

class Model {
public:
    explicit Model(const ModelConfig& cfg);

    const ModelConfig& config() const { return cfg_; }
    bool has_regime_head() const { return cfg_.use_regime; }

    PredictionSequence forward(const ModelInput& in, const NormStats& stats, bool training = false,
                               Rng* dropout_rng = nullptr);
    /// Backpropagates through the most recent forward call and accumulates parameter gradients.
    void backward(const OutputGrads& g);

    /// Fast path for design search: reuses a precomputed operational encoding (film variant only).
    Mat encode_ops(const Mat& ops_norm);
    PredictionSequence forward_encoded(const Mat& h_ops, const RowVec& design, const Vec& w_gl,
                                       const NormStats& stats);

    // Stages, exposed for testing.
    Mat encode_config(const RowVec& c, bool training = false, Rng* rng = nullptr);
    Mat tcn_encode(const Mat& x, bool training = false, Rng* rng = nullptr);
    Mat film(const Mat& h, const Mat& z);
    Mat cross_attention(const Mat& h_film, const Mat& z, bool training = false, Rng* rng = nullptr);

    /// Attention weights [T, n_heads] of the most recent cross_attention call.
    const Mat& attention_weights() const { return attn_weights_; }

    /// Replaces FiLM by the identity map (for comparisons against an unconditioned path).
    void set_film_bypass(bool bypass) { film_bypass_ = bypass; }
    /// Fixes gamma and beta to constants, ignoring z. Empty matrices restore the learned layer.
    void force_film(const RowVec& gamma, const RowVec& beta);

    ParamList parameters();
    std::size_t parameter_count();
    void zero_grad();

    /// Exact dependency span of the TCN stack: 1 + sum over convolutions of (k - 1) * dilation.
    int receptive_field() const;
    int input_width() const;

private:
    Mat heads_forward(const Mat& fused, const Vec& w_gl, const NormStats& stats, PredictionSequence& out);
    PredictionSequence conditioned_forward(const Mat& h_ops, const RowVec& design, const Vec& w_gl,
                                           const NormStats& stats, bool training, Rng* rng);
    Mat cross_attention_backward(const Mat& dy, Mat& dz);

    ModelConfig cfg_;

    DenseBlock enc1_, enc2_;
    Dropout enc_drop1_, enc_drop2_;
    DenseBlock in_proj_;
    std::vector<TcnBlock> blocks_;
    Linear film_gamma_, film_beta_;
    Linear attn_q_, attn_k_, attn_v_, attn_o_;
    Dropout attn_drop_;
    LayerNorm attn_norm_;
    DenseBlock fusion_;
    MlpHead vfm_head_, pres_head_, reg_bh_head_, reg_wh_head_;

    bool film_bypass_ = false;
    RowVec forced_gamma_, forced_beta_;

    // caches of the last forward
    bool last_used_encoded_ = false;
    Mat film_h_, film_gamma_val_, attn_q_val_, attn_k_val_, attn_v_val_, attn_weights_;
};

} // namespace vfm
