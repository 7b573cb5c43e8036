#include "wavedenoise/wavenet.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "wavedenoise/conv_kernels.hpp"

namespace wdn::model {

namespace {

bool is_power_of_two(std::size_t v) { return v != 0 && (v & (v - 1)) == 0; }

/// Centre (or right-aligned, for the causal ablation) offset when cropping a
/// sequence of length `from` down to `to`.
std::size_t crop_offset(PaddingMode mode, std::size_t from, std::size_t to) {
    return mode == PaddingMode::Symmetric ? (from - to) / 2 : from - to;
}

ad::Padding head_padding(PaddingMode mode) {
    return mode == PaddingMode::Symmetric ? ad::Padding::SameSymmetric : ad::Padding::SameCausal;
}

}  // namespace

// ---- config ------------------------------------------------------------------

void ModelConfig::validate() const {
    auto fail = [](const std::string& m) { throw std::invalid_argument("invalid model config: " + m); };
    if (stacks == 0) fail("stacks must be positive");
    if (dilations_per_stack.empty()) fail("dilations_per_stack is empty");
    for (std::size_t i = 0; i < dilations_per_stack.size(); ++i) {
        if (!is_power_of_two(dilations_per_stack[i])) fail("dilations must be positive powers of two");
        if (i > 0 && dilations_per_stack[i] <= dilations_per_stack[i - 1]) fail("dilations must be ascending");
    }
    if (residual_channels == 0 || skip_channels == 0) fail("channel counts must be positive");
    if (final_channels.first == 0 || final_channels.second == 0) fail("final_channels must be positive");
    if (filter_len == 0 || filter_len % 2 == 0) fail("filter_len must be odd");
    if (final_filter_len == 0 || final_filter_len % 2 == 0) fail("final_filter_len must be odd");
    if (target_field == 0) fail("target_field must be positive");
    if (condition_bits == 0 || condition_bits > 31) fail("condition_bits must be in [1, 31]");
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
    j = nlohmann::json{{"stacks", c.stacks},
                       {"dilations_per_stack", c.dilations_per_stack},
                       {"residual_channels", c.residual_channels},
                       {"skip_channels", c.skip_channels},
                       {"filter_len", c.filter_len},
                       {"final_channels", {c.final_channels.first, c.final_channels.second}},
                       {"final_filter_len", c.final_filter_len},
                       {"target_field", c.target_field},
                       {"condition_bits", c.condition_bits},
                       {"padding", c.padding == PaddingMode::Symmetric ? "symmetric" : "causal"}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
    if (!j.is_object()) throw std::invalid_argument("model config must be a JSON object");
    for (const auto& [key, value] : j.items()) {
        if (key == "stacks") c.stacks = value.get<std::size_t>();
        else if (key == "dilations_per_stack") c.dilations_per_stack = value.get<std::vector<std::size_t>>();
        else if (key == "residual_channels") c.residual_channels = value.get<std::size_t>();
        else if (key == "skip_channels") c.skip_channels = value.get<std::size_t>();
        else if (key == "filter_len") c.filter_len = value.get<std::size_t>();
        else if (key == "final_channels") {
            const auto v = value.get<std::vector<std::size_t>>();
            if (v.size() != 2) throw std::invalid_argument("final_channels needs exactly two entries");
            c.final_channels = {v[0], v[1]};
        } else if (key == "final_filter_len") c.final_filter_len = value.get<std::size_t>();
        else if (key == "target_field") c.target_field = value.get<std::size_t>();
        else if (key == "condition_bits") c.condition_bits = value.get<std::size_t>();
        else if (key == "padding") {
            const auto s = value.get<std::string>();
            if (s == "symmetric") c.padding = PaddingMode::Symmetric;
            else if (s == "causal") c.padding = PaddingMode::Causal;
            else throw std::invalid_argument("padding must be \"symmetric\" or \"causal\"");
        } else {
            throw std::invalid_argument("unknown model config key \"" + key + "\"");
        }
    }
}

std::size_t receptive_field(const ModelConfig& config) {
    std::size_t sum = 0;
    for (auto d : config.dilations_per_stack) sum += d;
    return 1 + (config.filter_len - 1) * sum * config.stacks;
}

std::size_t input_length(const ModelConfig& config, std::size_t target_field) {
    if (target_field == 0) throw std::invalid_argument("target field must be at least 1");
    return receptive_field(config) + target_field - 1;
}

std::size_t target_offset(const ModelConfig& config) {
    const std::size_t rf = receptive_field(config);
    return config.padding == PaddingMode::Symmetric ? (rf - 1) / 2 : rf - 1;
}

ConditionCode ConditionCode::encode(std::uint32_t speaker_id, std::size_t condition_bits) {
    if (condition_bits < 32 && speaker_id >= (1u << condition_bits))
        throw std::invalid_argument("speaker id " + std::to_string(speaker_id) + " does not fit in " +
                                    std::to_string(condition_bits) + " condition bits");
    ConditionCode c;
    c.speaker_id = speaker_id;
    c.bits.resize(condition_bits);
    for (std::size_t b = 0; b < condition_bits; ++b) c.bits[b] = (speaker_id >> b) & 1u ? 1.0 : 0.0;
    return c;
}

// ---- parameters ----------------------------------------------------------------

std::vector<std::pair<std::string, ad::Tensor>> WavenetModel::named_parameters() const {
    std::vector<std::pair<std::string, ad::Tensor>> out;
    auto conv = [&](const std::string& name, const ad::ConvParams& p) {
        out.emplace_back(name + ".weight", p.weight);
        out.emplace_back(name + ".bias", p.bias);
    };
    conv("input", input);
    for (std::size_t n = 0; n < layers.size(); ++n) {
        const std::string prefix = "layers." + std::to_string(n) + ".";
        conv(prefix + "filter", layers[n].filter);
        conv(prefix + "gate", layers[n].gate);
        conv(prefix + "residual", layers[n].residual);
        conv(prefix + "skip", layers[n].skip);
        out.emplace_back(prefix + "cond_filter", layers[n].cond_filter);
        out.emplace_back(prefix + "cond_gate", layers[n].cond_gate);
    }
    conv("final_a", final_a);
    conv("final_b", final_b);
    conv("output", output);
    return out;
}

std::vector<ad::Tensor> WavenetModel::parameters() const {
    std::vector<ad::Tensor> out;
    for (auto& [name, t] : named_parameters()) out.push_back(t);
    return out;
}

WavenetModel WavenetModel::clone() const {
    auto copy = [](const ad::Tensor& t) { return ad::Tensor::from(t.shape(), {t.data().begin(), t.data().end()}, true); };
    auto copy_conv = [&](const ad::ConvParams& p) { return ad::ConvParams{copy(p.weight), copy(p.bias)}; };
    WavenetModel m;
    m.config = config;
    m.input = copy_conv(input);
    for (const auto& l : layers)
        m.layers.push_back({l.dilation, copy_conv(l.filter), copy_conv(l.gate), copy_conv(l.residual),
                            copy_conv(l.skip), copy(l.cond_filter), copy(l.cond_gate)});
    m.final_a = copy_conv(final_a);
    m.final_b = copy_conv(final_b);
    m.output = copy_conv(output);
    return m;
}

void WavenetModel::zero_grad() {
    for (auto& t : parameters()) t.zero_grad();
}

WavenetModel build_model(const ModelConfig& config, std::uint64_t seed) {
    config.validate();
    Rng rng(seed);
    const std::size_t R = config.residual_channels, S = config.skip_channels, B = config.condition_bits;
    auto cond_matrix = [&]() {
        const double bound = std::sqrt(1.0 / static_cast<double>(B));
        std::vector<double> v(R * B);
        for (auto& x : v) x = rng.uniform(-bound, bound);
        return ad::Tensor::from({R, B}, std::move(v), true);
    };

    WavenetModel m;
    m.config = config;
    m.input = ad::make_conv(1, R, config.filter_len, rng);
    for (std::size_t s = 0; s < config.stacks; ++s) {
        for (auto d : config.dilations_per_stack) {
            ResidualLayer layer;
            layer.dilation = d;
            layer.filter = ad::make_conv(R, R, config.filter_len, rng);
            layer.gate = ad::make_conv(R, R, config.filter_len, rng);
            layer.residual = ad::make_conv(R, R, 1, rng);
            layer.skip = ad::make_conv(R, S, 1, rng);
            layer.cond_filter = cond_matrix();
            layer.cond_gate = cond_matrix();
            m.layers.push_back(std::move(layer));
        }
    }
    m.final_a = ad::make_conv(S, config.final_channels.first, config.final_filter_len, rng);
    m.final_b = ad::make_conv(config.final_channels.first, config.final_channels.second, config.final_filter_len, rng);
    m.output = ad::make_conv(config.final_channels.second, 1, 1, rng);
    return m;
}

std::size_t param_count(const WavenetModel& model) {
    std::size_t n = 0;
    for (const auto& [name, t] : model.named_parameters()) n += t.numel();
    return n;
}

std::size_t param_count(const ModelConfig& c) {
    auto conv = [](std::size_t in, std::size_t out, std::size_t k) { return out * in * k + out; };
    const std::size_t R = c.residual_channels, S = c.skip_channels;
    const std::size_t per_layer =
        2 * conv(R, R, c.filter_len) + conv(R, R, 1) + conv(R, S, 1) + 2 * R * c.condition_bits;
    return conv(1, R, c.filter_len) + c.num_layers() * per_layer +
           conv(S, c.final_channels.first, c.final_filter_len) +
           conv(c.final_channels.first, c.final_channels.second, c.final_filter_len) +
           conv(c.final_channels.second, 1, 1);
}

// ---- differentiable forward -------------------------------------------------------

ad::Tensor forward(const WavenetModel& model, const ad::Tensor& fragment, const ConditionCode& condition) {
    const auto& cfg = model.config;
    const std::size_t rf = receptive_field(cfg);
    if (fragment.rank() != 2 || fragment.channels() != 1) throw std::invalid_argument("forward: fragment must be [1 x L]");
    if (fragment.time() < rf)
        throw std::invalid_argument("forward: fragment of length " + std::to_string(fragment.time()) +
                                    " is shorter than the receptive field " + std::to_string(rf));
    if (condition.bits.size() != cfg.condition_bits) throw std::invalid_argument("forward: condition code width mismatch");

    const std::size_t out_len = fragment.time() - rf + 1;
    const auto head = head_padding(cfg.padding);

    ad::Tensor x = ad::conv1d(fragment, model.input, 1, head);
    ad::Tensor skip_sum;
    for (const auto& layer : model.layers) {
        const ad::Tensor cf = ad::matvec(layer.cond_filter, condition.bits);
        const ad::Tensor cg = ad::matvec(layer.cond_gate, condition.bits);
        const ad::Tensor z = ad::gated_unit(x, layer.filter, layer.gate, layer.dilation, ad::Padding::Valid, cf, cg);
        const ad::Tensor r = ad::conv1d(z, layer.residual, 1, ad::Padding::Valid);
        const std::size_t len = r.time();
        const ad::Tensor skip = ad::conv1d(r, layer.skip, 1, ad::Padding::Valid);
        const ad::Tensor skip_cropped = ad::crop_time(skip, crop_offset(cfg.padding, len, out_len), out_len);
        skip_sum = skip_sum.defined() ? ad::add(skip_sum, skip_cropped) : skip_cropped;
        x = ad::add(r, ad::crop_time(x, crop_offset(cfg.padding, x.time(), len), len));
    }
    ad::Tensor y = ad::relu(skip_sum);
    y = ad::relu(ad::conv1d(y, model.final_a, 1, head));
    y = ad::conv1d(y, model.final_b, 1, head);
    return ad::conv1d(y, model.output, 1, ad::Padding::Valid);
}

// ---- inference ----------------------------------------------------------------------

namespace {

/// A [channels x len] buffer holding global positions [begin, begin + len).
template <typename T>
struct Segment {
    std::vector<T> data;
    std::size_t channels = 0;
    std::ptrdiff_t begin = 0;
    std::size_t len = 0;
};

/// Same-padded convolution evaluated only at global positions [ob, oe) of a
/// sequence whose defined extent is [0, extent). Positions outside the extent
/// read as zero, exactly as the padding of a whole-sequence convolution.
template <typename T>
Segment<T> conv_same_range(const Segment<T>& src, std::ptrdiff_t extent, const T* w, const T* b,
                           const kernels::ConvShape& cs, std::size_t pad_left, std::ptrdiff_t ob, std::ptrdiff_t oe) {
    const std::ptrdiff_t lo = ob - static_cast<std::ptrdiff_t>(pad_left);
    const std::size_t ext_len = static_cast<std::size_t>(oe - ob) + cs.span();
    std::vector<T> ext(cs.in_channels * ext_len, T(0));
    for (std::size_t c = 0; c < cs.in_channels; ++c) {
        for (std::size_t i = 0; i < ext_len; ++i) {
            const std::ptrdiff_t p = lo + static_cast<std::ptrdiff_t>(i);
            if (p < 0 || p >= extent) continue;
            const std::ptrdiff_t local = p - src.begin;
            if (local < 0 || local >= static_cast<std::ptrdiff_t>(src.len))
                throw std::logic_error("conv_same_range: source segment does not cover requested context");
            ext[c * ext_len + i] = src.data[c * src.len + static_cast<std::size_t>(local)];
        }
    }
    Segment<T> out;
    out.channels = cs.out_channels;
    out.begin = ob;
    out.len = static_cast<std::size_t>(oe - ob);
    out.data.resize(out.channels * out.len);
    kernels::conv1d_valid(ext.data(), ext_len, w, b, cs, out.data.data());
    return out;
}

template <typename T>
std::vector<T> conv_valid(const std::vector<T>& x, std::size_t in_len, const std::vector<T>& w, const std::vector<T>& b,
                          const kernels::ConvShape& cs) {
    std::vector<T> out(cs.out_channels * (in_len - cs.span()));
    kernels::conv1d_valid(x.data(), in_len, w.data(), b.data(), cs, out.data());
    return out;
}

template <typename T>
std::vector<T> crop(const std::vector<T>& x, std::size_t channels, std::size_t len, std::size_t offset,
                    std::size_t new_len) {
    std::vector<T> out(channels * new_len);
    for (std::size_t c = 0; c < channels; ++c)
        std::copy_n(x.data() + c * len + offset, new_len, out.data() + c * new_len);
    return out;
}

template <typename T>
T sigmoid(T v) {
    return T(1) / (T(1) + std::exp(-v));
}

}  // namespace

template <typename T>
typename InferenceEngine<T>::Conv InferenceEngine<T>::convert(const ad::ConvParams& p) {
    Conv c;
    c.in = p.in_channels();
    c.out = p.out_channels();
    c.k = p.kernel_len();
    c.weight.assign(p.weight.data().begin(), p.weight.data().end());
    c.bias.assign(p.bias.data().begin(), p.bias.data().end());
    return c;
}

template <typename T>
InferenceEngine<T>::InferenceEngine(const WavenetModel& model, const ConditionCode& condition)
    : config_(model.config), rf_(receptive_field(model.config)) {
    if (condition.bits.size() != config_.condition_bits)
        throw std::invalid_argument("condition code width does not match model");
    input_ = convert(model.input);
    for (const auto& l : model.layers) {
        Layer layer;
        layer.dilation = l.dilation;
        layer.filter = convert(l.filter);
        layer.gate = convert(l.gate);
        layer.residual = convert(l.residual);
        layer.skip = convert(l.skip);
        // Same arithmetic as ad::matvec so tape and engine agree exactly.
        const ad::Tensor cf = ad::matvec(l.cond_filter.detach(), condition.bits);
        const ad::Tensor cg = ad::matvec(l.cond_gate.detach(), condition.bits);
        layer.cond_filter.assign(cf.data().begin(), cf.data().end());
        layer.cond_gate.assign(cg.data().begin(), cg.data().end());
        layers_.push_back(std::move(layer));
    }
    final_a_ = convert(model.final_a);
    final_b_ = convert(model.final_b);
    output_ = convert(model.output);
}

template <typename T>
std::vector<T> InferenceEngine<T>::run(const std::vector<T>& signal, std::size_t out_begin, std::size_t out_end) const {
    if (signal.size() < rf_)
        throw std::invalid_argument("signal of length " + std::to_string(signal.size()) +
                                    " is shorter than the receptive field " + std::to_string(rf_));
    const std::size_t n_out = signal.size() - rf_ + 1;
    if (out_begin >= out_end || out_end > n_out) throw std::invalid_argument("output range out of bounds");

    using idx = std::ptrdiff_t;
    const bool sym = config_.padding == PaddingMode::Symmetric;
    auto pads = [&](std::size_t k) -> std::pair<idx, idx> {
        const idx span = static_cast<idx>(k - 1);
        return sym ? std::pair{span / 2, span / 2} : std::pair{span, idx(0)};
    };
    const auto [fl, fr] = pads(config_.final_filter_len);
    const auto [il, ir] = pads(config_.filter_len);
    const idx N = static_cast<idx>(n_out);
    const idx ob = static_cast<idx>(out_begin), oe = static_cast<idx>(out_end);

    // Work backwards to the ranges each stage must produce.
    const idx a0 = std::max<idx>(0, ob - fl), a1 = std::min<idx>(N, oe + fr);
    const idx s0 = std::max<idx>(0, a0 - fl), s1 = std::min<idx>(N, a1 + fr);
    const idx h0 = s0, h1 = s1 + static_cast<idx>(rf_) - 1;
    const idx p0 = std::max<idx>(0, h0 - il), p1 = std::min<idx>(static_cast<idx>(signal.size()), h1 + ir);

    Segment<T> sig;
    sig.channels = 1;
    sig.begin = p0;
    sig.len = static_cast<std::size_t>(p1 - p0);
    sig.data.assign(signal.begin() + p0, signal.begin() + p1);

    const kernels::ConvShape in_cs{1, input_.out, input_.k, 1};
    Segment<T> h = conv_same_range(sig, static_cast<idx>(signal.size()), input_.weight.data(), input_.bias.data(),
                                   in_cs, static_cast<std::size_t>(il), h0, h1);

    const std::size_t R = config_.residual_channels, S = config_.skip_channels;
    const std::size_t final_len = static_cast<std::size_t>(s1 - s0);
    std::vector<T> x = std::move(h.data);
    std::size_t x_len = h.len;
    std::vector<T> skip_sum;
    for (const auto& layer : layers_) {
        const kernels::ConvShape dil{R, R, layer.filter.k, layer.dilation};
        std::vector<T> f = conv_valid(x, x_len, layer.filter.weight, layer.filter.bias, dil);
        std::vector<T> g = conv_valid(x, x_len, layer.gate.weight, layer.gate.bias, dil);
        const std::size_t len = x_len - dil.span();
        for (std::size_t c = 0; c < R; ++c) {
            const T cf = layer.cond_filter[c], cg = layer.cond_gate[c];
            for (std::size_t t = 0; t < len; ++t) {
                const std::size_t i = c * len + t;
                f[i] = std::tanh(f[i] + cf) * sigmoid(g[i] + cg);
            }
        }
        std::vector<T> r = conv_valid(f, len, layer.residual.weight, layer.residual.bias, {R, R, 1, 1});
        const std::vector<T> skip = conv_valid(r, len, layer.skip.weight, layer.skip.bias, {R, S, 1, 1});
        const std::vector<T> skip_c = crop(skip, S, len, crop_offset(config_.padding, len, final_len), final_len);
        if (skip_sum.empty()) {
            skip_sum = skip_c;
        } else {
            for (std::size_t i = 0; i < skip_sum.size(); ++i) skip_sum[i] = skip_sum[i] + skip_c[i];
        }
        const std::size_t off = crop_offset(config_.padding, x_len, len);
        for (std::size_t c = 0; c < R; ++c)
            for (std::size_t t = 0; t < len; ++t) r[c * len + t] = r[c * len + t] + x[c * x_len + off + t];
        x = std::move(r);
        x_len = len;
    }
    for (auto& v : skip_sum) v = v > T(0) ? v : T(0);

    Segment<T> skip_seg{std::move(skip_sum), S, s0, final_len};
    const kernels::ConvShape a_cs{S, final_a_.out, final_a_.k, 1};
    Segment<T> a = conv_same_range(skip_seg, N, final_a_.weight.data(), final_a_.bias.data(), a_cs,
                                   static_cast<std::size_t>(fl), a0, a1);
    for (auto& v : a.data) v = v > T(0) ? v : T(0);
    const kernels::ConvShape b_cs{final_a_.out, final_b_.out, final_b_.k, 1};
    Segment<T> b = conv_same_range(a, N, final_b_.weight.data(), final_b_.bias.data(), b_cs,
                                   static_cast<std::size_t>(fl), ob, oe);
    return conv_valid(b.data, b.len, output_.weight, output_.bias, {final_b_.out, 1, 1, 1});
}

template class InferenceEngine<double>;
template class InferenceEngine<float>;

namespace {

template <typename T>
dsp::AudioBuffer denoise_impl(const WavenetModel& model, const dsp::AudioBuffer& noisy, const ConditionCode& condition,
                              DenoiseMode mode) {
    const auto& cfg = model.config;
    const std::size_t rf = receptive_field(cfg);
    const std::size_t left = target_offset(cfg);
    const std::size_t right = rf - 1 - left;
    const std::size_t n = noisy.size();

    dsp::AudioBuffer out;
    out.sample_rate = noisy.sample_rate;
    if (n == 0) return out;

    std::vector<T> padded(left + n + right, T(0));
    for (std::size_t i = 0; i < n; ++i) padded[left + i] = static_cast<T>(noisy.samples[i]);

    InferenceEngine<T> engine(model, condition);
    out.samples.resize(n);
    const std::size_t window = mode == DenoiseMode::OneShot ? n : cfg.target_field;
    for (std::size_t begin = 0; begin < n; begin += window) {
        const std::size_t end = std::min(n, begin + window);
        const auto y = engine.run(padded, begin, end);
        for (std::size_t i = 0; i < y.size(); ++i) out.samples[begin + i] = static_cast<double>(y[i]);
    }
    return out;
}

}  // namespace

dsp::AudioBuffer denoise(const WavenetModel& model, const dsp::AudioBuffer& noisy, const ConditionCode& condition,
                         DenoiseMode mode, Precision precision) {
    return precision == Precision::Float32 ? denoise_impl<float>(model, noisy, condition, mode)
                                           : denoise_impl<double>(model, noisy, condition, mode);
}

}  // namespace wdn::model
