#pragma once

#include <cmath>
#include <cstring>
#include <filesystem>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "paraflame/binio.hpp"
#include "paraflame/field.hpp"
#include "paraflame/ops.hpp"
#include "paraflame/rng.hpp"

// The three parametric operator networks, each a differentiable map
// (field, gamma) -> field on the periodic grid:
//
//   pFNO   Fourier layers z' = act(F^-1[(R + R* diag(D*(gamma))) F z] + W z);
//          D* spreads N_D = n_gamma + 1 learned positive ratios over
//          hierarchical wavenumber bands.
//   pFNO*  baseline Fourier layers (R only), gamma entering as an extra
//          constant input channel.
//   pCNN   convolutional encoder/decoder with skip connections; encoder
//          levels form e+ = e + e* . D_l(gamma) with scalar ratios D_l.
//
// All models are resolution-checked at forward time, not construction time.

namespace paraflame::models {

enum class ModelKind : std::uint8_t { Pfno = 0, PfnoStar = 1, Pcnn = 2 };

inline const char* kind_name(ModelKind k) {
    switch (k) {
        case ModelKind::Pfno: return "pfno";
        case ModelKind::PfnoStar: return "pfno_star";
        default: return "pcnn";
    }
}

inline ModelKind kind_from_name(const std::string& name) {
    if (name == "pfno") return ModelKind::Pfno;
    if (name == "pfno_star") return ModelKind::PfnoStar;
    if (name == "pcnn") return ModelKind::Pcnn;
    throw ConfigError("unknown model kind '" + name + "'");
}

// Maps the PDE parameter onto [0, 1] over the training range before it enters
// any network. Both nu and beta span about a decade, hence the log default.
struct ParamEmbedding {
    enum class Mode : std::uint8_t { Log = 0, Linear = 1 };
    Mode mode = Mode::Log;
    double range_min = 1.0;
    double range_max = 1.0;

    void validate() const {
        if (!(range_min <= range_max))
            throw ConfigError("ParamEmbedding: range_min > range_max");
        if (mode == Mode::Log && range_min <= 0.0)
            throw ConfigError("ParamEmbedding: log mode requires a positive range");
    }

    bool in_range(double gamma) const { return gamma >= range_min && gamma <= range_max; }

    double normalize(double gamma) const {
        if (mode == Mode::Log) {
            if (gamma <= 0.0)
                throw ContractError("ParamEmbedding: gamma must be positive in log mode");
            if (range_min == range_max) return 0.5;
            return (std::log(gamma) - std::log(range_min)) /
                   (std::log(range_max) - std::log(range_min));
        }
        if (range_min == range_max) return 0.5;
        return (gamma - range_min) / (range_max - range_min);
    }
};

struct PfnoSpec {
    int levels = 4;   // L
    int width = 30;   // d_z
    std::int64_t kmax = 64;
    int n_gamma = 6;
    bool share_weights = true;
    bool use_skip = false;
    int p_hidden = 0;   // 0 -> width
    int q_hidden = 0;   // 0 -> 2 * width
    int d_hidden = 32;  // hidden width of the D_l MLPs
    ParamEmbedding embedding;

    void validate() const {
        if (levels < 1 || width < 1 || kmax < 1 || n_gamma < 0)
            throw ConfigError("PfnoSpec: levels, width, kmax must be >= 1 and n_gamma >= 0");
        ad::validate_band_partition(kmax, n_gamma);
        embedding.validate();
    }
    int n_d() const { return n_gamma + 1; }  // N_D = 1 + (2^1 - 1) * n_gamma in 1D
};

struct PcnnSpec {
    int levels = 6;
    std::vector<int> channels = {16, 32, 64, 96, 96, 96};  // c_1 .. c_L
    int param_levels = 4;  // D_l active for l < param_levels
    int convs_per_block = 2;
    bool use_inception = false;
    int d_hidden = 32;
    ParamEmbedding embedding;

    void validate() const {
        if (levels < 2) throw ConfigError("PcnnSpec: need at least 2 levels");
        if (static_cast<int>(channels.size()) != levels)
            throw ConfigError("PcnnSpec: channels list must have one entry per level");
        for (int l = 0; l + 1 < std::min(levels, 3); ++l)
            if (channels[l] > channels[l + 1])
                throw ConfigError("PcnnSpec: channels must be non-decreasing at low levels");
        if (param_levels < 0 || convs_per_block < 1)
            throw ConfigError("PcnnSpec: bad param_levels or convs_per_block");
        embedding.validate();
    }
};

class Model {
  public:
    virtual ~Model() = default;
    virtual ModelKind kind() const = 0;
    /// One time-advancement step on a [1 x N] field node.
    virtual ad::NodeRef forward(const ad::NodeRef& field, double gamma) = 0;
    virtual std::vector<ad::Parameter>& parameters() = 0;

    Field step(const Field& f, double gamma) {
        ad::NoGradGuard guard;
        auto in = ad::constant(Tensor::from({1, static_cast<std::int64_t>(f.size())}, f.values));
        auto out = forward(in, gamma);
        return Field(out->value.data);
    }

    std::size_t parameter_count() {
        std::size_t n = 0;
        for (auto& p : parameters()) n += p.tensor().data.size();
        return n;
    }

  protected:
    void warn_if_extrapolating(const ParamEmbedding& emb, double gamma) {
        if (!warned_extrapolation_ && !emb.in_range(gamma)) {
            warned_extrapolation_ = true;
            std::cerr << "warning: gamma = " << gamma
                      << " outside the embedding training range; extrapolating\n";
        }
    }
    bool warned_extrapolation_ = false;
};

namespace detail {

// uniform +-(1/fan_in)^(1/2) for real weights, zero biases
inline Tensor init_affine_weight(std::int64_t c_out, std::int64_t c_in, StreamRng& rng) {
    Tensor t = Tensor::zeros({c_out, c_in});
    const double bound = 1.0 / std::sqrt(static_cast<double>(c_in));
    for (auto& v : t.data) v = rng.uniform(-bound, bound);
    return t;
}

inline Tensor init_conv_kernel(std::int64_t c_out, std::int64_t c_in, StreamRng& rng) {
    Tensor t = Tensor::zeros({c_out, c_in, 3});
    const double bound = 1.0 / std::sqrt(static_cast<double>(3 * c_in));
    for (auto& v : t.data) v = rng.uniform(-bound, bound);
    return t;
}

// complex spectral weights: each real component uniform with scale 1/width
inline Tensor init_spectral(std::int64_t kmax, std::int64_t width, StreamRng& rng) {
    Tensor t = Tensor::zeros({kmax, width, width}, Dtype::Complex);
    const double bound = 1.0 / static_cast<double>(width);
    for (auto& v : t.data) v = rng.uniform(-bound, bound);
    return t;
}

struct Mlp {
    std::vector<ad::MlpLayer> layers;

    ad::NodeRef operator()(const ad::NodeRef& x) const { return ad::mlp(x, layers); }

    void collect(std::vector<ad::Parameter>& out) const {
        for (const auto& l : layers) {
            out.push_back(l.weight);
            out.push_back(l.bias);
        }
    }
};

inline Mlp make_mlp(const std::string& prefix, const std::vector<std::int64_t>& widths,
                    ad::Activation hidden_act, StreamRng& rng,
                    std::vector<ad::Parameter>& registry) {
    Mlp m;
    for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
        const bool last = i + 2 == widths.size();
        ad::MlpLayer layer{
            ad::Parameter(prefix + ".w" + std::to_string(i),
                          init_affine_weight(widths[i + 1], widths[i], rng)),
            ad::Parameter(prefix + ".b" + std::to_string(i), Tensor::zeros({widths[i + 1]})),
            last ? ad::Activation::Identity : hidden_act};
        m.layers.push_back(layer);
    }
    m.collect(registry);
    return m;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// pFNO / pFNO*

/// One (parametric) Fourier layer on z [d_z x N]:
///   z' = act( F^-1[ (R + R* diag(band_scale)) F z ] + W z + Wb ),
/// optionally with the residual form z + act(...). band_scale and r_star are
/// both null for a baseline layer; the DC content of z passes through the
/// spectral branch unmodified.
struct FourierLayerWeights {
    ad::NodeRef r;           // [kmax x d_z x d_z] complex
    ad::NodeRef r_star;      // optional, same shape
    ad::NodeRef band_scale;  // optional [kmax] real, D*(gamma)
    ad::NodeRef w;           // [d_z x d_z]
    ad::NodeRef w_bias;      // [d_z]
};

inline ad::NodeRef pfno_layer(const ad::NodeRef& z, const FourierLayerWeights& wts,
                              std::int64_t kmax, bool use_skip = false,
                              ad::Activation act = ad::Activation::Relu) {
    const std::int64_t n = z->value.shape[1];
    auto spec_in = ad::rfft_truncate(z, kmax);
    auto dc = ad::spatial_mean(z);
    auto mixed = ad::complex_mode_mix(spec_in, wts.r);
    if (wts.r_star) {
        if (!wts.band_scale)
            throw ContractError("pfno_layer: r_star requires band_scale");
        auto par = ad::complex_mode_mix(ad::mode_scale(spec_in, wts.band_scale), wts.r_star);
        mixed = ad::add(mixed, par);
    }
    auto spectral = ad::irfft_pad(mixed, n, dc);
    auto bypass = ad::channel_linear(z, wts.w, wts.w_bias);
    auto out = ad::apply_activation(ad::add(spectral, bypass), act);
    return use_skip ? ad::add(z, out) : out;
}

class PfnoModel : public Model {
  public:
    PfnoModel(PfnoSpec spec, ModelKind kind, std::uint64_t seed)
        : spec_(std::move(spec)), kind_(kind) {
        spec_.validate();
        StreamRng rng(derive_seed(seed, 17));
        const std::int64_t dz = spec_.width;
        const std::int64_t in_ch = kind_ == ModelKind::PfnoStar ? 2 : 1;
        const std::int64_t ph = spec_.p_hidden > 0 ? spec_.p_hidden : dz;
        const std::int64_t qh = spec_.q_hidden > 0 ? spec_.q_hidden : 2 * dz;

        lift_ = detail::make_mlp("p", {in_ch, ph, dz}, ad::Activation::Relu, rng, params_);
        const int blocks = spec_.share_weights ? 1 : spec_.levels;
        for (int b = 0; b < blocks; ++b) {
            const std::string tag = spec_.share_weights ? "shared" : "layer" + std::to_string(b);
            r_.emplace_back(tag + ".R", detail::init_spectral(spec_.kmax, dz, rng));
            params_.push_back(r_.back());
            if (kind_ == ModelKind::Pfno) {
                r_star_.emplace_back(tag + ".Rstar", detail::init_spectral(spec_.kmax, dz, rng));
                params_.push_back(r_star_.back());
            }
            w_.emplace_back(tag + ".W", detail::init_affine_weight(dz, dz, rng));
            w_bias_.emplace_back(tag + ".Wb", Tensor::zeros({dz}));
            params_.push_back(w_.back());
            params_.push_back(w_bias_.back());
        }
        if (kind_ == ModelKind::Pfno) {
            for (int l = 0; l < spec_.levels; ++l)
                d_mlp_.push_back(detail::make_mlp("layer" + std::to_string(l) + ".D",
                                                  {1, spec_.d_hidden, spec_.n_d()},
                                                  ad::Activation::Relu, rng, params_));
        }
        project_ = detail::make_mlp("q", {dz, qh, 1}, ad::Activation::Relu, rng, params_);
    }

    ModelKind kind() const override { return kind_; }
    const PfnoSpec& spec() const { return spec_; }
    std::vector<ad::Parameter>& parameters() override { return params_; }

    ad::NodeRef forward(const ad::NodeRef& field, double gamma) override {
        require_rank(field->value, 2, "pfno_forward", "field");
        const std::int64_t n = field->value.shape[1];
        if (field->value.shape[0] != 1)
            throw ContractError("pfno_forward: expected a single input channel");
        if (spec_.kmax > n / 2)
            throw ContractError("pfno_forward: kmax = " + std::to_string(spec_.kmax) +
                                " exceeds N/2 with N = " + std::to_string(n));
        warn_if_extrapolating(spec_.embedding, gamma);
        const double g_norm = spec_.embedding.normalize(gamma);

        ad::NodeRef z;
        if (kind_ == ModelKind::PfnoStar) {
            Tensor gch = Tensor::zeros({1, n});
            gch.fill(g_norm);
            z = lift_(ad::concat_channels(field, ad::constant(std::move(gch))));
        } else {
            z = lift_(field);
        }

        for (int l = 0; l < spec_.levels; ++l) {
            const int b = spec_.share_weights ? 0 : l;
            FourierLayerWeights wts;
            wts.r = r_[b].node;
            wts.w = w_[b].node;
            wts.w_bias = w_bias_[b].node;
            if (kind_ == ModelKind::Pfno) {
                auto ratios = ad::softplus(d_mlp_[l](ad::constant(Tensor::vector({g_norm}))));
                wts.band_scale = ad::band_map(ratios, spec_.kmax, spec_.n_gamma);
                wts.r_star = r_star_[b].node;
            }
            z = pfno_layer(z, wts, spec_.kmax, spec_.use_skip);
        }
        return project_(z);
    }

  private:
    PfnoSpec spec_;
    ModelKind kind_;
    std::vector<ad::Parameter> params_;
    detail::Mlp lift_, project_;
    std::vector<ad::Parameter> r_, r_star_, w_, w_bias_;
    std::vector<detail::Mlp> d_mlp_;
};

// ---------------------------------------------------------------------------
// pCNN

class PcnnModel : public Model {
  public:
    PcnnModel(PcnnSpec spec, std::uint64_t seed) : spec_(std::move(spec)) {
        spec_.validate();
        StreamRng rng(derive_seed(seed, 23));
        const int L = spec_.levels;
        enc_main_.resize(L);
        enc_param_.resize(L);
        dec_.resize(L);
        for (int l = 0; l < L; ++l) {
            const int c_in = l == 0 ? 1 : spec_.channels[l - 1];
            const int c_out = spec_.channels[l];
            enc_main_[l] = make_block("enc" + std::to_string(l) + ".e", c_in, c_out, rng);
            if (l < spec_.param_levels) {
                enc_param_[l] = make_block("enc" + std::to_string(l) + ".estar", c_in, c_out, rng);
                d_mlp_.push_back(detail::make_mlp("enc" + std::to_string(l) + ".D",
                                                  {1, spec_.d_hidden, 1}, ad::Activation::Relu,
                                                  rng, params_));
            }
        }
        // decoder block l consumes concat(upsample(e'_{l+1}), e+_l); channels[i]
        // holds c_{i+1}, so e+_l carries channels[l-1] and e'_{l+1} carries
        // channels[L-1] at the deepest level, channels[l] below it.
        for (int l = L - 1; l >= 1; --l) {
            const int up_ch = l == L - 1 ? spec_.channels[L - 1] : spec_.channels[l];
            const int cat_in = up_ch + spec_.channels[l - 1];
            const int c_out = l == 1 ? 1 : spec_.channels[l - 1];
            dec_[l] = make_block("dec" + std::to_string(l), cat_in, c_out, rng, /*relu=*/l != 1);
        }
    }

    ModelKind kind() const override { return ModelKind::Pcnn; }
    const PcnnSpec& spec() const { return spec_; }
    std::vector<ad::Parameter>& parameters() override { return params_; }

    ad::NodeRef forward(const ad::NodeRef& field, double gamma) override {
        require_rank(field->value, 2, "pcnn_forward", "field");
        const std::int64_t n = field->value.shape[1];
        const int L = spec_.levels;
        if (n % (std::int64_t(1) << (L - 1)) != 0)
            throw ContractError("pcnn_forward: N = " + std::to_string(n) +
                                " not divisible by 2^" + std::to_string(L - 1));
        warn_if_extrapolating(spec_.embedding, gamma);
        const double g_norm = spec_.embedding.normalize(gamma);

        std::vector<ad::NodeRef> skips(L + 1);
        ad::NodeRef h = field;
        skips[0] = h;
        for (int l = 0; l < L; ++l) {
            ad::NodeRef down = l == 0 ? h : ad::maxpool1d(h);
            ad::NodeRef e = run_block(enc_main_[l], down);
            if (l < spec_.param_levels) {
                ad::NodeRef estar = run_block(enc_param_[l], down);
                auto ratio = ad::softplus(d_mlp_[l](ad::constant(Tensor::vector({g_norm}))));
                h = ad::axpy_scalar(e, estar, ratio);
            } else {
                h = e;
            }
            skips[l + 1] = h;
        }
        for (int l = L - 1; l >= 1; --l)
            h = run_block(dec_[l], ad::concat_channels(ad::upsample1d(h), skips[l]));
        return h;
    }

  private:
    struct ConvLayer {
        ad::Parameter kernel, bias;
        bool relu = true;
    };
    // Three parallel receptive fields concatenated to c_out channels:
    // 1x1 channel mix, one 3-tap conv, and two stacked 3-tap convs.
    struct InceptionUnit {
        ad::Parameter lin_w, lin_b;
        ad::Parameter k3, k3b;
        ad::Parameter k5a, k5ab, k5b, k5bb;
        bool relu = true;
    };
    struct Block {
        std::vector<ConvLayer> convs;
        bool inception = false;
        InceptionUnit inc;
    };

    Block make_block(const std::string& tag, int c_in, int c_out, StreamRng& rng,
                     bool relu = true) {
        Block b;
        int in = c_in;
        int first = 0;
        // narrow blocks (the 1-channel output head) stay plain conv stacks
        if (spec_.use_inception && c_out >= 3) {
            const int c3 = c_out / 3, c5 = c_out / 3, c1 = c_out - c3 - c5;
            b.inception = true;
            b.inc.relu = relu;
            b.inc.lin_w = ad::Parameter(tag + ".inc1_w", detail::init_affine_weight(c1, c_in, rng));
            b.inc.lin_b = ad::Parameter(tag + ".inc1_b", Tensor::zeros({c1}));
            b.inc.k3 = ad::Parameter(tag + ".inc3_k", detail::init_conv_kernel(c3, c_in, rng));
            b.inc.k3b = ad::Parameter(tag + ".inc3_b", Tensor::zeros({c3}));
            b.inc.k5a = ad::Parameter(tag + ".inc5a_k", detail::init_conv_kernel(c5, c_in, rng));
            b.inc.k5ab = ad::Parameter(tag + ".inc5a_b", Tensor::zeros({c5}));
            b.inc.k5b = ad::Parameter(tag + ".inc5b_k", detail::init_conv_kernel(c5, c5, rng));
            b.inc.k5bb = ad::Parameter(tag + ".inc5b_b", Tensor::zeros({c5}));
            for (auto* p : {&b.inc.lin_w, &b.inc.lin_b, &b.inc.k3, &b.inc.k3b, &b.inc.k5a,
                            &b.inc.k5ab, &b.inc.k5b, &b.inc.k5bb})
                params_.push_back(*p);
            in = c_out;
            first = 1;  // the inception unit replaces the block's first conv
        }
        for (int i = first; i < spec_.convs_per_block; ++i) {
            ConvLayer layer{ad::Parameter(tag + ".k" + std::to_string(i),
                                          detail::init_conv_kernel(c_out, in, rng)),
                            ad::Parameter(tag + ".kb" + std::to_string(i), Tensor::zeros({c_out})),
                            relu};
            params_.push_back(layer.kernel);
            params_.push_back(layer.bias);
            b.convs.push_back(layer);
            in = c_out;
        }
        return b;
    }

    ad::NodeRef run_block(const Block& b, const ad::NodeRef& x) const {
        ad::NodeRef h = x;
        if (b.inception) {
            auto p1 = ad::channel_linear(h, b.inc.lin_w.node, b.inc.lin_b.node);
            auto p3 = ad::conv1d_periodic(h, b.inc.k3.node, b.inc.k3b.node);
            auto p5 = ad::conv1d_periodic(ad::relu(ad::conv1d_periodic(h, b.inc.k5a.node,
                                                                       b.inc.k5ab.node)),
                                          b.inc.k5b.node, b.inc.k5bb.node);
            h = ad::concat_channels(ad::concat_channels(p1, p3), p5);
            if (b.inc.relu) h = ad::relu(h);
        }
        for (const auto& conv : b.convs) {
            ad::NodeRef y = ad::conv1d_periodic(h, conv.kernel.node, conv.bias.node);
            h = conv.relu ? ad::relu(y) : y;
        }
        return h;
    }

    PcnnSpec spec_;
    std::vector<ad::Parameter> params_;
    std::vector<Block> enc_main_, enc_param_, dec_;
    std::vector<detail::Mlp> d_mlp_;
};

// ---------------------------------------------------------------------------
// construction and checkpoints

inline std::unique_ptr<Model> make_model(ModelKind kind, const PfnoSpec& fno_spec,
                                         const PcnnSpec& cnn_spec, std::uint64_t seed) {
    if (kind == ModelKind::Pcnn) return std::make_unique<PcnnModel>(cnn_spec, seed);
    return std::make_unique<PfnoModel>(fno_spec, kind, seed);
}

inline constexpr char kCheckpointMagic[4] = {'P', 'F', 'C', 'K'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

inline void put_embedding(std::string& out, const ParamEmbedding& e) {
    io::put_u8(out, static_cast<std::uint8_t>(e.mode));
    io::put_f64(out, e.range_min);
    io::put_f64(out, e.range_max);
}

inline ParamEmbedding get_embedding(io::Reader& r) {
    ParamEmbedding e;
    e.mode = static_cast<ParamEmbedding::Mode>(r.u8());
    e.range_min = r.f64();
    e.range_max = r.f64();
    return e;
}

}  // namespace detail

inline std::string serialize_checkpoint(Model& model) {
    std::string out;
    io::put_bytes(out, kCheckpointMagic, 4);
    io::put_u32(out, kCheckpointVersion);
    io::put_u8(out, static_cast<std::uint8_t>(model.kind()));
    if (model.kind() == ModelKind::Pcnn) {
        const auto& s = static_cast<PcnnModel&>(model).spec();
        io::put_u32(out, static_cast<std::uint32_t>(s.levels));
        io::put_u32(out, static_cast<std::uint32_t>(s.channels.size()));
        for (int c : s.channels) io::put_u32(out, static_cast<std::uint32_t>(c));
        io::put_u32(out, static_cast<std::uint32_t>(s.param_levels));
        io::put_u32(out, static_cast<std::uint32_t>(s.convs_per_block));
        io::put_u8(out, s.use_inception ? 1 : 0);
        io::put_u32(out, static_cast<std::uint32_t>(s.d_hidden));
        detail::put_embedding(out, s.embedding);
    } else {
        const auto& s = static_cast<PfnoModel&>(model).spec();
        io::put_u32(out, static_cast<std::uint32_t>(s.levels));
        io::put_u32(out, static_cast<std::uint32_t>(s.width));
        io::put_u64(out, static_cast<std::uint64_t>(s.kmax));
        io::put_u32(out, static_cast<std::uint32_t>(s.n_gamma));
        io::put_u8(out, s.share_weights ? 1 : 0);
        io::put_u8(out, s.use_skip ? 1 : 0);
        io::put_u32(out, static_cast<std::uint32_t>(s.p_hidden));
        io::put_u32(out, static_cast<std::uint32_t>(s.q_hidden));
        io::put_u32(out, static_cast<std::uint32_t>(s.d_hidden));
        detail::put_embedding(out, s.embedding);
    }
    auto& params = model.parameters();
    io::put_u32(out, static_cast<std::uint32_t>(params.size()));
    for (auto& p : params) {
        io::put_string(out, p.name());
        const Tensor& t = p.tensor();
        io::put_u8(out, t.dtype == Dtype::Complex ? 1 : 0);
        io::put_u32(out, static_cast<std::uint32_t>(t.shape.size()));
        for (auto e : t.shape) io::put_u32(out, static_cast<std::uint32_t>(e));
        for (double v : t.data) io::put_f64(out, v);
    }
    return out;
}

inline std::unique_ptr<Model> deserialize_checkpoint(const std::string& buf,
                                                     const std::string& what) {
    io::Reader r(buf, what);
    if (std::memcmp(r.take(4), kCheckpointMagic, 4) != 0) r.fail("bad magic", 0);
    const std::uint32_t version = r.u32();
    if (version != kCheckpointVersion)
        r.fail("unsupported version " + std::to_string(version), 4);
    const auto kind = static_cast<ModelKind>(r.u8());
    std::unique_ptr<Model> model;
    if (kind == ModelKind::Pcnn) {
        PcnnSpec s;
        s.levels = static_cast<int>(r.u32());
        s.channels.resize(r.u32());
        for (auto& c : s.channels) c = static_cast<int>(r.u32());
        s.param_levels = static_cast<int>(r.u32());
        s.convs_per_block = static_cast<int>(r.u32());
        s.use_inception = r.u8() != 0;
        s.d_hidden = static_cast<int>(r.u32());
        s.embedding = detail::get_embedding(r);
        model = std::make_unique<PcnnModel>(s, 0);
    } else if (kind == ModelKind::Pfno || kind == ModelKind::PfnoStar) {
        PfnoSpec s;
        s.levels = static_cast<int>(r.u32());
        s.width = static_cast<int>(r.u32());
        s.kmax = static_cast<std::int64_t>(r.u64());
        s.n_gamma = static_cast<int>(r.u32());
        s.share_weights = r.u8() != 0;
        s.use_skip = r.u8() != 0;
        s.p_hidden = static_cast<int>(r.u32());
        s.q_hidden = static_cast<int>(r.u32());
        s.d_hidden = static_cast<int>(r.u32());
        s.embedding = detail::get_embedding(r);
        model = std::make_unique<PfnoModel>(s, kind, 0);
    } else {
        r.fail("bad model kind", 8);
    }
    const std::uint32_t n_params = r.u32();
    auto& params = model->parameters();
    if (n_params != params.size())
        r.fail("parameter count " + std::to_string(n_params) + " does not match model (" +
                   std::to_string(params.size()) + ")",
               r.offset() - 4);
    for (std::uint32_t i = 0; i < n_params; ++i) {
        const std::string name = r.str();
        const Dtype dtype = r.u8() == 1 ? Dtype::Complex : Dtype::Real;
        std::vector<std::int64_t> shape(r.u32());
        for (auto& e : shape) e = static_cast<std::int64_t>(r.u32());
        ad::Parameter* target = nullptr;
        for (auto& p : params)
            if (p.name() == name) {
                target = &p;
                break;
            }
        if (!target) r.fail("unknown parameter '" + name + "'", r.offset());
        Tensor& t = target->tensor();
        if (t.shape != shape || t.dtype != dtype)
            r.fail("parameter '" + name + "' has mismatched shape", r.offset());
        for (auto& v : t.data) v = r.f64();
    }
    if (!r.exhausted()) r.fail("trailing bytes", r.offset());
    return model;
}

inline void save_checkpoint(Model& model, const std::filesystem::path& path) {
    io::atomic_write(path, serialize_checkpoint(model));
}

inline std::unique_ptr<Model> load_checkpoint(const std::filesystem::path& path) {
    return deserialize_checkpoint(io::read_all(path), path.string());
}

}  // namespace paraflame::models
