#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ino/numerics/ops.hpp"
#include "ino/numerics/resize.hpp"
#include "ino/numerics/rng.hpp"
#include "ino/numerics/tensor.hpp"

namespace ino {

struct ModelConfig {
    std::size_t patch_size = 8;
    std::size_t in_channels = 3;
    std::size_t embed_dim = 64;
    std::size_t depth = 6;
    std::size_t heads = 4;
    std::size_t mlp_ratio = 4;
    std::size_t proj_layers = 3;
    std::size_t proj_dim = 256;
    std::size_t proj_hidden = 0;  // 0 selects 4 * proj_dim
    std::size_t pe_base_resolution = 8;
    std::size_t inference_layer = 4;
    double init_std = 0.02;

    std::size_t head_hidden() const { return proj_hidden ? proj_hidden : 4 * proj_dim; }

    void validate() const {
        if (patch_size == 0 || embed_dim == 0 || heads == 0 || proj_dim == 0 || in_channels == 0) {
            throw std::invalid_argument("model: extents must be positive");
        }
        if (embed_dim % heads != 0) throw std::invalid_argument("model: heads must divide embed_dim");
        if (proj_layers == 0) throw std::invalid_argument("model: proj_layers must be >= 1");
        if (pe_base_resolution < 2) throw std::invalid_argument("model: pe_base_resolution must be >= 2");
        if (depth > 0 && (inference_layer < 1 || inference_layer > depth)) {
            throw std::invalid_argument("model: inference_layer must lie in [1, depth]");
        }
    }
};

template <class T>
struct BlockParams {
    Tensor<T> ln1_gain, ln1_bias;
    Tensor<T> qkv_weight, qkv_bias;
    Tensor<T> proj_weight, proj_bias;
    Tensor<T> ln2_gain, ln2_bias;
    Tensor<T> fc1_weight, fc1_bias;
    Tensor<T> fc2_weight, fc2_bias;
};

/// All learnable tensors of the backbone and projection head.
///
/// visit() enumerates them in a fixed order under stable dotted names; that
/// order defines checkpoint layout and optimizer state layout.
template <class T>
struct EncoderParams {
    Tensor<T> patch_weight, patch_bias;
    Tensor<T> cls_token, cls_pos;
    Tensor<T> mask_token;
    Tensor<T> pos_grid;  // [base, base, D]
    std::vector<BlockParams<T>> blocks;
    Tensor<T> norm_gain, norm_bias;
    std::vector<Tensor<T>> head_weight, head_bias;  // proj_layers hidden layers + final

    template <class F>
    void visit(F&& f) {
        f("patch_embed.weight", patch_weight);
        f("patch_embed.bias", patch_bias);
        f("cls_token", cls_token);
        f("cls_pos", cls_pos);
        f("mask_token", mask_token);
        f("pos_grid", pos_grid);
        for (std::size_t i = 0; i < blocks.size(); ++i) {
            auto& b = blocks[i];
            const std::string p = "blocks." + std::to_string(i) + ".";
            f(p + "norm1.gain", b.ln1_gain);
            f(p + "norm1.bias", b.ln1_bias);
            f(p + "attn.qkv.weight", b.qkv_weight);
            f(p + "attn.qkv.bias", b.qkv_bias);
            f(p + "attn.proj.weight", b.proj_weight);
            f(p + "attn.proj.bias", b.proj_bias);
            f(p + "norm2.gain", b.ln2_gain);
            f(p + "norm2.bias", b.ln2_bias);
            f(p + "mlp.fc1.weight", b.fc1_weight);
            f(p + "mlp.fc1.bias", b.fc1_bias);
            f(p + "mlp.fc2.weight", b.fc2_weight);
            f(p + "mlp.fc2.bias", b.fc2_bias);
        }
        f("norm.gain", norm_gain);
        f("norm.bias", norm_bias);
        for (std::size_t i = 0; i < head_weight.size(); ++i) {
            f("head." + std::to_string(i) + ".weight", head_weight[i]);
            f("head." + std::to_string(i) + ".bias", head_bias[i]);
        }
    }

    template <class F>
    void visit(F&& f) const {
        const_cast<EncoderParams*>(this)->visit([&](const std::string& n, Tensor<T>& t) { f(n, static_cast<const Tensor<T>&>(t)); });
    }

    std::vector<Tensor<T>> tensors() const {
        std::vector<Tensor<T>> out;
        visit([&](const std::string&, const Tensor<T>& t) { out.push_back(t); });
        return out;
    }

    std::vector<std::string> names() const {
        std::vector<std::string> out;
        visit([&](const std::string& n, const Tensor<T>&) { out.push_back(n); });
        return out;
    }

    /// Deep copy with fresh leaves.
    EncoderParams clone(bool requires_grad) const {
        EncoderParams out = *this;
        out.visit([&](const std::string&, Tensor<T>& t) { t = t.clone(requires_grad); });
        return out;
    }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        visit([&](const std::string&, const Tensor<T>& t) { n += t.numel(); });
        return n;
    }
};

template <class T>
EncoderParams<T> init_params(const ModelConfig& cfg, Rng rng, bool requires_grad = true) {
    cfg.validate();
    const std::size_t d = cfg.embed_dim;
    const std::size_t patch_in = cfg.patch_size * cfg.patch_size * cfg.in_channels;
    auto randn = [&](Shape s) {
        std::vector<T> v(shape_numel(s));
        for (auto& x : v) x = static_cast<T>(rng.truncated_normal(cfg.init_std));
        return Tensor<T>(std::move(s), std::move(v), requires_grad);
    };
    auto zeros = [&](Shape s) { return Tensor<T>::zeros(std::move(s), requires_grad); };
    auto ones = [&](Shape s) { return Tensor<T>::full(std::move(s), T(1), requires_grad); };

    EncoderParams<T> p;
    p.patch_weight = randn({patch_in, d});
    p.patch_bias = zeros({d});
    p.cls_token = randn({1, d});
    p.cls_pos = randn({1, d});
    p.mask_token = randn({1, d});
    p.pos_grid = randn({cfg.pe_base_resolution, cfg.pe_base_resolution, d});
    const std::size_t hidden = cfg.mlp_ratio * d;
    for (std::size_t i = 0; i < cfg.depth; ++i) {
        BlockParams<T> b;
        b.ln1_gain = ones({d});
        b.ln1_bias = zeros({d});
        b.qkv_weight = randn({d, 3 * d});
        b.qkv_bias = zeros({3 * d});
        b.proj_weight = randn({d, d});
        b.proj_bias = zeros({d});
        b.ln2_gain = ones({d});
        b.ln2_bias = zeros({d});
        b.fc1_weight = randn({d, hidden});
        b.fc1_bias = zeros({hidden});
        b.fc2_weight = randn({hidden, d});
        b.fc2_bias = zeros({d});
        p.blocks.push_back(std::move(b));
    }
    p.norm_gain = ones({d});
    p.norm_bias = zeros({d});
    std::size_t in = d;
    for (std::size_t i = 0; i < cfg.proj_layers; ++i) {
        p.head_weight.push_back(randn({in, cfg.head_hidden()}));
        p.head_bias.push_back(zeros({cfg.head_hidden()}));
        in = cfg.head_hidden();
    }
    p.head_weight.push_back(randn({in, cfg.proj_dim}));
    p.head_bias.push_back(zeros({cfg.proj_dim}));
    return p;
}

/// Class token followed by P patch tokens, plus the per-patch position
/// embedding that was added (mask substitution needs it).
template <class T>
struct TokenSequence {
    Tensor<T> tokens;     // [1 + P, D]
    Tensor<T> positions;  // [P, D]
    std::size_t grid_h = 0;
    std::size_t grid_w = 0;

    std::size_t patch_count() const { return grid_h * grid_w; }
};

/// Flattens image[H, W, C] into non-overlapping patches, row-major, each
/// patch flattened as (py, px, c).
template <class T>
Tensor<T> extract_patches(const Tensor<T>& image, std::size_t patch) {
    if (image.rank() != 3) throw ShapeError("patchify: expected [H,W,C], got " + shape_str(image.shape()));
    const std::size_t h = image.dim(0), w = image.dim(1), c = image.dim(2);
    if (h % patch || w % patch) {
        throw ShapeError("patchify: image " + shape_str(image.shape()) + " not divisible by patch size " + std::to_string(patch));
    }
    const std::size_t gh = h / patch, gw = w / patch, len = patch * patch * c;
    std::vector<T> out(gh * gw * len);
    auto src = image.data();
    for (std::size_t ty = 0; ty < gh; ++ty)
        for (std::size_t tx = 0; tx < gw; ++tx) {
            T* dst = out.data() + (ty * gw + tx) * len;
            for (std::size_t py = 0; py < patch; ++py)
                for (std::size_t px = 0; px < patch; ++px)
                    for (std::size_t ch = 0; ch < c; ++ch)
                        *dst++ = src[((ty * patch + py) * w + tx * patch + px) * c + ch];
        }
    return Tensor<T>({gh * gw, len}, std::move(out));
}

template <class T>
TokenSequence<T> patchify(const Tensor<T>& image, const EncoderParams<T>& params, const ModelConfig& cfg) {
    auto patches = extract_patches(image, cfg.patch_size);
    const std::size_t gh = image.dim(0) / cfg.patch_size, gw = image.dim(1) / cfg.patch_size;
    if (patches.dim(1) != params.patch_weight.dim(0)) {
        throw ShapeError("patchify: patch length " + std::to_string(patches.dim(1)) + " vs projection " +
                         shape_str(params.patch_weight.shape()));
    }
    auto embedded = linear(patches, params.patch_weight, params.patch_bias);
    auto pe = reshape(bicubic_resize_2d(params.pos_grid, gh, gw), {gh * gw, cfg.embed_dim});
    auto patch_tokens = add(embedded, pe);
    auto cls = add(params.cls_token, params.cls_pos);
    return {concat_rows<T>({cls, patch_tokens}), pe, gh, gw};
}

/// Replaces masked patch tokens by mask_token + that position's embedding.
template <class T>
TokenSequence<T> apply_mask_tokens(const TokenSequence<T>& seq, std::span<const std::uint8_t> mask, const EncoderParams<T>& params) {
    const std::size_t p = seq.patch_count();
    if (mask.size() != p) {
        throw ShapeError("apply_mask_tokens: mask length " + std::to_string(mask.size()) + " vs " + std::to_string(p) + " tokens");
    }
    auto cls = slice_rows(seq.tokens, 0, 1);
    auto patches = slice_rows(seq.tokens, 1, p);
    auto replaced = add(repeat_rows(params.mask_token, p), seq.positions);
    return {concat_rows<T>({cls, select_rows(mask, replaced, patches)}), seq.positions, seq.grid_h, seq.grid_w};
}

template <class T>
struct EncoderOutput {
    Tensor<T> cls_logits;    // [1, k]
    Tensor<T> patch_logits;  // [P, k]; empty when the patch head was skipped
    std::vector<Tensor<T>> features_by_layer;  // [P, D] after each block
};

struct ForwardOptions {
    bool patch_head = true;
    bool keep_features = false;
    // Run only this many blocks and skip the head (0 = full network).
    std::size_t stop_after_block = 0;
};

namespace detail {

template <class T>
void require_finite_activations(const Tensor<T>& t, std::size_t block) {
    for (T v : t.data()) {
        if (!std::isfinite(v)) throw NumericError("encoder: non-finite activation after block " + std::to_string(block));
    }
}

template <class T>
Tensor<T> attention(const Tensor<T>& x, const BlockParams<T>& b, std::size_t heads) {
    const std::size_t d = x.dim(1);
    const std::size_t dh = d / heads;
    auto qkv = linear(x, b.qkv_weight, b.qkv_bias);
    const T scale_factor = T(1) / std::sqrt(T(dh));
    std::vector<Tensor<T>> outs;
    outs.reserve(heads);
    for (std::size_t h = 0; h < heads; ++h) {
        auto q = slice_cols(qkv, h * dh, dh);
        auto k = slice_cols(qkv, d + h * dh, dh);
        auto v = slice_cols(qkv, 2 * d + h * dh, dh);
        auto att = softmax_t(scale(matmul(q, transpose(k)), scale_factor), 1, T(1));
        outs.push_back(matmul(att, v));
    }
    auto merged = heads == 1 ? outs[0] : concat_cols(outs);
    return linear(merged, b.proj_weight, b.proj_bias);
}

}  // namespace detail

template <class T>
Tensor<T> projection_head(const Tensor<T>& x, const EncoderParams<T>& params) {
    Tensor<T> h = x;
    const std::size_t last = params.head_weight.size() - 1;
    for (std::size_t i = 0; i < last; ++i) h = gelu(linear(h, params.head_weight[i], params.head_bias[i]));
    return linear(h, params.head_weight[last], params.head_bias[last]);
}

/// Pre-norm transformer blocks, final norm, then the shared projection head
/// on the class token and (optionally) on every patch token.
template <class T>
EncoderOutput<T> forward(const TokenSequence<T>& seq, const EncoderParams<T>& params, const ModelConfig& cfg,
                         const ForwardOptions& opt = {}) {
    const std::size_t p = seq.patch_count();
    Tensor<T> x = seq.tokens;
    EncoderOutput<T> out;
    const std::size_t blocks = opt.stop_after_block ? std::min(opt.stop_after_block, params.blocks.size()) : params.blocks.size();
    for (std::size_t i = 0; i < blocks; ++i) {
        const auto& b = params.blocks[i];
        x = add(x, detail::attention(layer_norm(x, b.ln1_gain, b.ln1_bias), b, cfg.heads));
        x = add(x, linear(gelu(linear(layer_norm(x, b.ln2_gain, b.ln2_bias), b.fc1_weight, b.fc1_bias)), b.fc2_weight, b.fc2_bias));
        detail::require_finite_activations(x, i);
        if (opt.keep_features) out.features_by_layer.push_back(slice_rows(x, 1, p));
    }
    if (opt.stop_after_block) return out;
    auto normed = layer_norm(x, params.norm_gain, params.norm_bias);
    out.cls_logits = projection_head(slice_rows(normed, 0, 1), params);
    if (opt.patch_head) out.patch_logits = projection_head(slice_rows(normed, 1, p), params);
    return out;
}

/// Patch-token activations after block `inference_layer`, as an l2-normalized
/// [grid_h, grid_w, D] grid. With depth 0 the embedded tokens are used.
template <class T>
Tensor<T> extract_inference_features(const Tensor<T>& image, const EncoderParams<T>& params, const ModelConfig& cfg) {
    auto seq = patchify(image, params, cfg);
    Tensor<T> feats;
    if (params.blocks.empty()) {
        feats = slice_rows(seq.tokens, 1, seq.patch_count());
    } else {
        if (cfg.inference_layer < 1 || cfg.inference_layer > params.blocks.size()) {
            throw std::invalid_argument("extract_inference_features: inference_layer outside [1, depth]");
        }
        ForwardOptions opt;
        opt.keep_features = true;
        opt.stop_after_block = cfg.inference_layer;
        feats = forward(seq, params, cfg, opt).features_by_layer.back();
    }
    return reshape(l2_normalize_rows(feats), {seq.grid_h, seq.grid_w, cfg.embed_dim});
}

}  // namespace ino
