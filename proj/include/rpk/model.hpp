#ifndef RPK_MODEL_HPP
#define RPK_MODEL_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "rpk/checkpoint.hpp"
#include "rpk/common.hpp"
#include "rpk/tensor.hpp"

namespace rpk {

struct ModelConfig {
    int64_t input_length = 5000;
    int64_t depth = 8;
    int64_t base_channels = 16;
    int64_t max_channels = 1024;
    std::vector<int64_t> inception_kernels = {15, 17, 19, 21};
    double leaky_slope = 0.2;
    int64_t down_kernel = 4;
    int64_t down_stride = 2;
    bool decoder_incres = false;
};

inline int64_t channels_at(const ModelConfig& cfg, int64_t stage) {
    if (stage < 0 || stage >= cfg.depth) throw ConfigError("channels_at: stage " + std::to_string(stage));
    int64_t c = cfg.base_channels;
    for (int64_t s = 0; s < stage && c < cfg.max_channels; ++s) c *= 2;
    return std::min(c, cfg.max_channels);
}

inline void validate_config(const ModelConfig& cfg) {
    if (cfg.depth < 1) throw ConfigError("model: depth must be >= 1");
    int64_t nb = static_cast<int64_t>(cfg.inception_kernels.size());
    if (nb < 1) throw ConfigError("model: need at least one inception kernel");
    for (int64_t k : cfg.inception_kernels)
        if (k < 1 || k % 2 == 0) throw ConfigError("model: inception kernels must be odd");
    if (cfg.base_channels < 4 || cfg.base_channels % nb != 0)
        throw ConfigError("model: base_channels must be >= 4 and divisible by the branch count");
    if (cfg.max_channels < cfg.base_channels || cfg.max_channels % nb != 0)
        throw ConfigError("model: max_channels must be >= base_channels and divisible by the branch count");
    if (cfg.input_length < 2) throw ConfigError("model: input_length must be >= 2");
    if (cfg.down_stride != 2) throw ConfigError("model: the length arithmetic requires down_stride 2");
    if (cfg.down_kernel < 2 || cfg.down_kernel % 2 != 0)
        throw ConfigError("model: down_kernel must be even (exact halving needs padding (k-2)/2)");
    if (!(cfg.leaky_slope > 0.0 && cfg.leaky_slope < 1.0)) throw ConfigError("model: leaky_slope in (0,1)");
}

namespace nn {

struct Conv {
    Tensor w, b;
    int64_t stride = 1, padding = 0;
    Tensor operator()(const Tensor& x) const { return conv1d(x, w, b, stride, padding); }
};

struct TConv {
    Tensor w, b;
    int64_t stride = 1, padding = 0;
    Tensor operator()(const Tensor& x) const { return conv1d_transpose(x, w, b, stride, padding); }
};

inline Tensor init_uniform(Shape s, int64_t fan_in, Rng& rng, bool requires_grad = true) {
    double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::vector<double> v(static_cast<size_t>(s.numel()));
    for (auto& x : v) x = rng.uniform(-bound, bound);
    return Tensor::from_values(s, std::move(v), requires_grad);
}

inline Conv make_conv(int64_t in_ch, int64_t out_ch, int64_t k, int64_t stride, int64_t padding, Rng& rng) {
    Conv c;
    int64_t fan_in = in_ch * k;
    c.w = init_uniform(Shape{out_ch, in_ch, k}, fan_in, rng);
    c.b = init_uniform(Shape{1, out_ch, 1}, fan_in, rng);
    c.stride = stride;
    c.padding = padding;
    return c;
}

inline TConv make_tconv(int64_t in_ch, int64_t out_ch, int64_t k, int64_t stride, int64_t padding, Rng& rng) {
    TConv c;
    int64_t fan_in = in_ch * k;
    c.w = init_uniform(Shape{in_ch, out_ch, k}, fan_in, rng);
    c.b = init_uniform(Shape{1, out_ch, 1}, fan_in, rng);
    c.stride = stride;
    c.padding = padding;
    return c;
}

}  // namespace nn

// Multi-branch residual unit: each branch reduces channels with a 1x1 conv,
// applies one of the configured kernel sizes at same-length padding, then
// BN + leaky ReLU; branch outputs are concatenated back to the input width and
// added to the identity skip.
struct IncResBlock {
    struct Branch {
        nn::Conv reduce;
        nn::Conv conv;
        BatchNormState bn;
    };
    std::vector<Branch> branches;
    int64_t channels = 0;
    double leaky_slope = 0.2;

    static IncResBlock make(int64_t channels, const std::vector<int64_t>& kernels, double slope, Rng& rng) {
        int64_t nb = static_cast<int64_t>(kernels.size());
        if (channels % nb != 0) throw ShapeError("inception-res: channels not divisible by branch count");
        IncResBlock blk;
        blk.channels = channels;
        blk.leaky_slope = slope;
        int64_t cb = channels / nb;
        for (int64_t k : kernels) {
            Branch br;
            br.reduce = nn::make_conv(channels, cb, 1, 1, 0, rng);
            br.conv = nn::make_conv(cb, cb, k, 1, (k - 1) / 2, rng);
            br.bn = BatchNormState::make(cb);
            blk.branches.push_back(std::move(br));
        }
        return blk;
    }
};

inline Tensor inception_res_forward(const Tensor& x, IncResBlock& blk, bool training) {
    if (x.shape().d1 != blk.channels)
        throw ShapeError("inception-res: input channels " + std::to_string(x.shape().d1) + " vs block " +
                         std::to_string(blk.channels));
    Tensor cat;
    for (auto& br : blk.branches) {
        br.bn.training = training;
        Tensor h = br.reduce(x);
        h = br.conv(h);
        h = batch_norm(h, br.bn);
        h = leaky_relu(h, blk.leaky_slope);
        cat = cat.defined() ? concat_channels(cat, h) : h;
    }
    return add(x, cat);
}

class Model {
public:
    struct EncoderStage {
        std::optional<nn::Conv> adjust;  // stride-1 kernel-4 length-1 reducer, odd inputs only
        nn::Conv down;
        BatchNormState bn;
        IncResBlock block;
        int64_t in_len = 0, out_len = 0;
    };
    struct DecoderStage {
        nn::TConv up;
        std::optional<nn::TConv> unadjust;  // mirrors the encoder's odd-length adjuster
        nn::Conv fuse;
        BatchNormState bn;
        std::optional<IncResBlock> block;
        int64_t out_len = 0;
    };

    static Model build(const ModelConfig& cfg, uint64_t seed) {
        validate_config(cfg);
        Model m;
        m.cfg_ = cfg;
        Rng rng(seed);

        // length trace; every stage needs input length >= 2
        std::vector<int64_t> in_lens;
        std::vector<bool> adjusted;
        int64_t L = cfg.input_length;
        for (int64_t s = 0; s < cfg.depth; ++s) {
            if (L < 2)
                throw ConfigError("model: feature length collapses below 1 at stage " + std::to_string(s));
            in_lens.push_back(L);
            bool adj = (L % 2 != 0);
            adjusted.push_back(adj);
            if (adj) L -= 1;
            L /= 2;
        }
        m.bottleneck_len_ = L;

        const int64_t dk = cfg.down_kernel;
        const int64_t dpad = (dk - 2) / 2;
        for (int64_t s = 0; s < cfg.depth; ++s) {
            int64_t cin = s == 0 ? 1 : channels_at(cfg, s - 1);
            int64_t cout = channels_at(cfg, s);
            EncoderStage st;
            st.in_len = in_lens[static_cast<size_t>(s)];
            if (adjusted[static_cast<size_t>(s)]) st.adjust = nn::make_conv(cin, cin, dk, 1, dpad, rng);
            st.down = nn::make_conv(cin, cout, dk, cfg.down_stride, dpad, rng);
            st.bn = BatchNormState::make(cout);
            st.block = IncResBlock::make(cout, cfg.inception_kernels, cfg.leaky_slope, rng);
            st.out_len = (st.in_len - (adjusted[static_cast<size_t>(s)] ? 1 : 0)) / 2;
            m.enc_.push_back(std::move(st));
        }

        for (int64_t e = cfg.depth - 1; e >= 0; --e) {
            int64_t c_cur = e == cfg.depth - 1 ? channels_at(cfg, cfg.depth - 1) : channels_at(cfg, e);
            int64_t skip_c = e == 0 ? 1 : channels_at(cfg, e - 1);
            int64_t up_c = e == 0 ? cfg.base_channels : skip_c;
            int64_t out_c = e == 0 ? cfg.base_channels : skip_c;
            DecoderStage st;
            st.up = nn::make_tconv(c_cur, up_c, dk, 2, dpad, rng);
            if (adjusted[static_cast<size_t>(e)]) st.unadjust = nn::make_tconv(up_c, up_c, dk, 1, dpad, rng);
            st.fuse = nn::make_conv(up_c + skip_c, out_c, 3, 1, 1, rng);
            st.bn = BatchNormState::make(out_c);
            if (cfg.decoder_incres) st.block = IncResBlock::make(out_c, cfg.inception_kernels, cfg.leaky_slope, rng);
            st.out_len = in_lens[static_cast<size_t>(e)];
            m.dec_.push_back(std::move(st));
        }

        m.head_ = nn::make_conv(cfg.base_channels, 1, 1, 1, 0, rng);
        return m;
    }

    // (B, 1, input_length) -> (B, 1, input_length) in (0, 1).
    Tensor forward(const Tensor& x, bool training) {
        if (x.shape().d1 != 1 || x.shape().d2 != cfg_.input_length)
            throw ShapeError("model: expected (B,1," + std::to_string(cfg_.input_length) + "), got " +
                             x.shape().str());
        std::vector<Tensor> skips;
        Tensor cur = x;
        for (auto& st : enc_) {
            skips.push_back(cur);
            if (st.adjust) cur = (*st.adjust)(cur);
            cur = st.down(cur);
            st.bn.training = training;
            cur = batch_norm(cur, st.bn);
            cur = leaky_relu(cur, cfg_.leaky_slope);
            cur = inception_res_forward(cur, st.block, training);
        }
        for (size_t d = 0; d < dec_.size(); ++d) {
            auto& st = dec_[d];
            size_t e = dec_.size() - 1 - d;  // mirrored encoder stage
            cur = st.up(cur);
            if (st.unadjust) cur = (*st.unadjust)(cur);
            cur = concat_channels(cur, skips[e]);
            cur = st.fuse(cur);
            st.bn.training = training;
            cur = batch_norm(cur, st.bn);
            cur = leaky_relu(cur, cfg_.leaky_slope);
            if (st.block) cur = inception_res_forward(cur, *st.block, training);
        }
        cur = head_(cur);
        return sigmoid(cur);
    }

    const ModelConfig& config() const { return cfg_; }
    int64_t bottleneck_length() const { return bottleneck_len_; }
    std::vector<EncoderStage>& encoder() { return enc_; }
    std::vector<DecoderStage>& decoder() { return dec_; }

    std::vector<Tensor> parameters() const {
        std::vector<Tensor> out;
        for (const auto& [name, t] : named_parameters()) out.push_back(t);
        return out;
    }

    std::vector<std::pair<std::string, Tensor>> named_parameters() const {
        std::vector<std::pair<std::string, Tensor>> out;
        auto add_conv = [&out](const std::string& p, const nn::Conv& c) {
            out.emplace_back(p + ".w", c.w);
            out.emplace_back(p + ".b", c.b);
        };
        auto add_tconv = [&out](const std::string& p, const nn::TConv& c) {
            out.emplace_back(p + ".w", c.w);
            out.emplace_back(p + ".b", c.b);
        };
        auto add_bn = [&out](const std::string& p, const BatchNormState& bn) {
            out.emplace_back(p + ".gamma", bn.gamma);
            out.emplace_back(p + ".beta", bn.beta);
        };
        auto add_block = [&](const std::string& p, const IncResBlock& blk) {
            for (size_t i = 0; i < blk.branches.size(); ++i) {
                const auto& br = blk.branches[i];
                add_conv(p + ".br" + std::to_string(i) + ".reduce", br.reduce);
                add_conv(p + ".br" + std::to_string(i) + ".conv", br.conv);
                add_bn(p + ".br" + std::to_string(i) + ".bn", br.bn);
            }
        };
        for (size_t s = 0; s < enc_.size(); ++s) {
            std::string p = "enc" + std::to_string(s);
            if (enc_[s].adjust) add_conv(p + ".adjust", *enc_[s].adjust);
            add_conv(p + ".down", enc_[s].down);
            add_bn(p + ".bn", enc_[s].bn);
            add_block(p + ".incres", enc_[s].block);
        }
        for (size_t d = 0; d < dec_.size(); ++d) {
            std::string p = "dec" + std::to_string(d);
            add_tconv(p + ".up", dec_[d].up);
            if (dec_[d].unadjust) add_tconv(p + ".unadjust", *dec_[d].unadjust);
            add_conv(p + ".fuse", dec_[d].fuse);
            add_bn(p + ".bn", dec_[d].bn);
            if (dec_[d].block) add_block(p + ".incres", *dec_[d].block);
        }
        add_conv("head", head_);
        return out;
    }

    // Parameters plus BN running statistics; the full serialized state.
    std::vector<CkptEntry> state_entries() const {
        std::vector<CkptEntry> out;
        for (const auto& [name, t] : named_parameters()) {
            CkptEntry e;
            e.name = name;
            e.dims = {t.shape().d0, t.shape().d1, t.shape().d2};
            e.data = t.values();
            out.push_back(std::move(e));
        }
        for (const auto& [name, bn] : bn_states()) {
            CkptEntry m;
            m.name = name + ".running_mean";
            m.dims = {1, static_cast<int64_t>(bn->running_mean.size()), 1};
            m.data = bn->running_mean;
            out.push_back(std::move(m));
            CkptEntry v;
            v.name = name + ".running_var";
            v.dims = {1, static_cast<int64_t>(bn->running_var.size()), 1};
            v.data = bn->running_var;
            out.push_back(std::move(v));
        }
        return out;
    }

    void load_state_entries(const std::vector<CkptEntry>& entries) {
        std::unordered_map<std::string, const CkptEntry*> by_name;
        for (const auto& e : entries) by_name[e.name] = &e;
        size_t used = 0;
        for (auto& [name, t] : named_parameters()) {
            auto it = by_name.find(name);
            if (it == by_name.end()) throw ShapeError("checkpoint: missing tensor " + name);
            const CkptEntry& e = *it->second;
            Shape want = t.shape();
            if (e.dims[0] != want.d0 || e.dims[1] != want.d1 || e.dims[2] != want.d2)
                throw ShapeError("checkpoint: shape mismatch for " + name);
            t.values_mut() = e.data;
            ++used;
        }
        for (auto& [name, bn] : bn_states()) {
            for (auto suffix : {".running_mean", ".running_var"}) {
                auto it = by_name.find(name + suffix);
                if (it == by_name.end()) throw ShapeError("checkpoint: missing tensor " + name + suffix);
                auto& dst = std::string(suffix) == ".running_mean" ? bn->running_mean : bn->running_var;
                if (it->second->data.size() != dst.size())
                    throw ShapeError("checkpoint: shape mismatch for " + name + suffix);
                dst = it->second->data;
                ++used;
            }
        }
        if (used != entries.size()) throw ShapeError("checkpoint: unexpected extra tensors");
    }

    std::vector<std::pair<std::string, BatchNormState*>> bn_states() {
        std::vector<std::pair<std::string, BatchNormState*>> out;
        for (size_t s = 0; s < enc_.size(); ++s) {
            std::string p = "enc" + std::to_string(s);
            out.emplace_back(p + ".bn", &enc_[s].bn);
            for (size_t i = 0; i < enc_[s].block.branches.size(); ++i)
                out.emplace_back(p + ".incres.br" + std::to_string(i) + ".bn", &enc_[s].block.branches[i].bn);
        }
        for (size_t d = 0; d < dec_.size(); ++d) {
            std::string p = "dec" + std::to_string(d);
            out.emplace_back(p + ".bn", &dec_[d].bn);
            if (dec_[d].block)
                for (size_t i = 0; i < dec_[d].block->branches.size(); ++i)
                    out.emplace_back(p + ".incres.br" + std::to_string(i) + ".bn", &dec_[d].block->branches[i].bn);
        }
        return out;
    }
    std::vector<std::pair<std::string, const BatchNormState*>> bn_states() const {
        auto v = const_cast<Model*>(this)->bn_states();
        std::vector<std::pair<std::string, const BatchNormState*>> out;
        out.reserve(v.size());
        for (auto& [n, p] : v) out.emplace_back(n, p);
        return out;
    }

private:
    ModelConfig cfg_;
    std::vector<EncoderStage> enc_;
    std::vector<DecoderStage> dec_;
    nn::Conv head_;
    int64_t bottleneck_len_ = 0;
};

// ---------------------------------------------------------------------------
// Self-describing checkpoints: binary tensor manifest + JSON config sidecar.
// ---------------------------------------------------------------------------

inline nlohmann::json model_config_to_json(const ModelConfig& cfg) {
    nlohmann::json j;
    j["input_length"] = cfg.input_length;
    j["depth"] = cfg.depth;
    j["base_channels"] = cfg.base_channels;
    j["max_channels"] = cfg.max_channels;
    j["inception_kernels"] = cfg.inception_kernels;
    j["leaky_slope"] = cfg.leaky_slope;
    j["down_kernel"] = cfg.down_kernel;
    j["down_stride"] = cfg.down_stride;
    j["decoder_incres"] = cfg.decoder_incres;
    return j;
}

inline ModelConfig model_config_from_json(const nlohmann::json& j) {
    ModelConfig cfg;
    cfg.input_length = j.value("input_length", cfg.input_length);
    cfg.depth = j.value("depth", cfg.depth);
    cfg.base_channels = j.value("base_channels", cfg.base_channels);
    cfg.max_channels = j.value("max_channels", cfg.max_channels);
    if (j.contains("inception_kernels")) cfg.inception_kernels = j["inception_kernels"].get<std::vector<int64_t>>();
    cfg.leaky_slope = j.value("leaky_slope", cfg.leaky_slope);
    cfg.down_kernel = j.value("down_kernel", cfg.down_kernel);
    cfg.down_stride = j.value("down_stride", cfg.down_stride);
    cfg.decoder_incres = j.value("decoder_incres", cfg.decoder_incres);
    return cfg;
}

struct CheckpointMeta {
    double fs = 500.0;          // rate the model was trained at
    int64_t cap_samples = 500;  // DT saturation used for its targets
};

inline void save_model(const std::string& path, const Model& model, const CheckpointMeta& meta = {}) {
    write_ckpt(path, model.state_entries());
    nlohmann::json side;
    side["version"] = 1;
    side["model_config"] = model_config_to_json(model.config());
    side["fs"] = meta.fs;
    side["cap_samples"] = meta.cap_samples;
    std::ofstream out(path + ".json");
    if (!out) throw InputError("checkpoint: cannot write sidecar for " + path);
    out << side.dump(2) << "\n";
}

inline std::pair<Model, CheckpointMeta> load_model(const std::string& path) {
    std::ifstream in(path + ".json");
    if (!in) throw InputError("checkpoint: missing sidecar " + path + ".json");
    nlohmann::json side;
    try {
        in >> side;
    } catch (const std::exception& e) {
        throw ParseError(std::string("checkpoint sidecar: ") + e.what());
    }
    ModelConfig cfg = model_config_from_json(side.at("model_config"));
    CheckpointMeta meta;
    meta.fs = side.value("fs", meta.fs);
    meta.cap_samples = side.value("cap_samples", meta.cap_samples);
    Model model = Model::build(cfg, 0);
    model.load_state_entries(read_ckpt(path));
    return {std::move(model), meta};
}

}  // namespace rpk

#endif  // RPK_MODEL_HPP
