#include "masgan/layers.hpp"

#include "masgan/errors.hpp"
#include "masgan/io.hpp"

#include <json.hpp>

#include <cmath>
#include <cstring>
#include <fstream>

using nlohmann::json;

namespace masgan::nn {

std::string layer_kind_name(LayerKind kind) {
    switch (kind) {
    case LayerKind::Dense: return "dense";
    case LayerKind::Conv1d: return "conv1d";
    case LayerKind::SelfAttention1d: return "self_attention_1d";
    case LayerKind::Relu: return "relu";
    case LayerKind::LeakyRelu: return "leaky_relu";
    case LayerKind::Tanh: return "tanh";
    case LayerKind::Sigmoid: return "sigmoid";
    case LayerKind::Softmax: return "softmax";
    case LayerKind::Dropout: return "dropout";
    case LayerKind::Reshape: return "reshape";
    }
    throw ConfigError("unknown layer kind");
}

LayerKind layer_kind_from_name(const std::string& name) {
    for (int k = 0; k <= static_cast<int>(LayerKind::Reshape); ++k)
        if (layer_kind_name(static_cast<LayerKind>(k)) == name) return static_cast<LayerKind>(k);
    throw ConfigError("unknown layer kind '" + name + "'");
}

namespace {

Param glorot_param(int fan_in, int fan_out, Shape shape, Rng& rng) {
    Param p;
    p.shape = shape;
    p.value.resize(shape.numel());
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    for (double& v : p.value) v = rng.uniform(-bound, bound);
    p.m.assign(p.value.size(), 0.0);
    p.v.assign(p.value.size(), 0.0);
    return p;
}

Param zero_param(Shape shape) {
    Param p;
    p.shape = shape;
    p.value.assign(shape.numel(), 0.0);
    p.m.assign(p.value.size(), 0.0);
    p.v.assign(p.value.size(), 0.0);
    return p;
}

} // namespace

Net make_net(int input_c, int input_w, const std::vector<LayerSpec>& specs, Rng& rng) {
    Net net;
    net.input_c = input_c;
    net.input_w = input_w;
    int c = input_c, w = input_w;
    for (const LayerSpec& spec : specs) {
        Layer layer;
        layer.spec = spec;
        switch (spec.kind) {
        case LayerKind::Dense: {
            if (spec.units <= 0) throw ConfigError("dense layer needs units > 0");
            const int fan_in = c * w;
            layer.params.push_back(glorot_param(fan_in, spec.units, Shape{fan_in, spec.units, 1}, rng));
            layer.params.push_back(zero_param(Shape{1, spec.units, 1}));
            c = spec.units;
            w = 1;
            break;
        }
        case LayerKind::Conv1d: {
            if (spec.out_channels <= 0 || spec.kernel <= 0 || spec.stride <= 0 || spec.padding < 0)
                throw ConfigError("conv1d layer needs out_channels/kernel/stride > 0 and padding >= 0");
            const int fan_in = c * spec.kernel;
            const int fan_out = spec.out_channels * spec.kernel;
            layer.params.push_back(glorot_param(fan_in, fan_out, Shape{spec.out_channels, c, spec.kernel}, rng));
            layer.params.push_back(zero_param(Shape{1, spec.out_channels, 1}));
            const int wout = (w + 2 * spec.padding - spec.kernel) / spec.stride + 1;
            if (wout < 1) throw ConfigError("conv1d output width < 1");
            c = spec.out_channels;
            w = wout;
            break;
        }
        case LayerKind::SelfAttention1d: {
            if (c % kAttentionReduction != 0)
                throw ConfigError("self-attention needs channels divisible by " + std::to_string(kAttentionReduction) +
                                  ", got " + std::to_string(c));
            const int cr = c / kAttentionReduction;
            layer.params.push_back(glorot_param(c, cr, Shape{cr, c, 1}, rng)); // f (query)
            layer.params.push_back(glorot_param(c, cr, Shape{cr, c, 1}, rng)); // g (key)
            layer.params.push_back(glorot_param(c, cr, Shape{cr, c, 1}, rng)); // h (value)
            layer.params.push_back(glorot_param(cr, c, Shape{c, cr, 1}, rng)); // out projection
            layer.params.push_back(zero_param(Shape{1, 1, 1}));                // gamma, fades in
            break;
        }
        case LayerKind::Dropout:
            if (spec.rate < 0.0 || spec.rate >= 1.0) throw ConfigError("dropout rate must be in [0, 1)");
            break;
        case LayerKind::Reshape:
            if (spec.reshape_c <= 0 || spec.reshape_w <= 0) throw ConfigError("reshape needs positive target dims");
            if (static_cast<size_t>(spec.reshape_c) * spec.reshape_w != static_cast<size_t>(c) * w)
                throw ConfigError("reshape element count mismatch: (" + std::to_string(c) + "," + std::to_string(w) +
                                  ") -> (" + std::to_string(spec.reshape_c) + "," + std::to_string(spec.reshape_w) + ")");
            c = spec.reshape_c;
            w = spec.reshape_w;
            break;
        case LayerKind::Relu:
        case LayerKind::LeakyRelu:
        case LayerKind::Tanh:
        case LayerKind::Sigmoid:
        case LayerKind::Softmax:
            break;
        }
        net.layers.push_back(std::move(layer));
    }
    return net;
}

std::pair<int, int> Net::output_shape() const {
    int c = input_c, w = input_w;
    for (const Layer& layer : layers) {
        switch (layer.spec.kind) {
        case LayerKind::Dense:
            c = layer.spec.units;
            w = 1;
            break;
        case LayerKind::Conv1d:
            c = layer.spec.out_channels;
            w = (w + 2 * layer.spec.padding - layer.spec.kernel) / layer.spec.stride + 1;
            break;
        case LayerKind::Reshape:
            c = layer.spec.reshape_c;
            w = layer.spec.reshape_w;
            break;
        default:
            break;
        }
    }
    return {c, w};
}

std::vector<int> Net::insert_params(Graph& g, bool requires_grad) const {
    std::vector<int> nodes;
    for (const Layer& layer : layers)
        for (const Param& p : layer.params) nodes.push_back(g.leaf(p.shape, p.value, requires_grad));
    return nodes;
}

int Net::forward_with(Graph& g, int x, bool train_mode, Rng* dropout_rng, const std::vector<int>& param_nodes) const {
    int cur = x;
    size_t pi = 0;
    const auto next_param = [&]() { return param_nodes.at(pi++); };
    for (const Layer& layer : layers) {
        const LayerSpec& spec = layer.spec;
        switch (spec.kind) {
        case LayerKind::Dense: {
            const int feat = g.node(cur).shape.c * g.node(cur).shape.w;
            int flat = cur;
            if (g.node(cur).shape.w != 1) flat = g.reshape(cur, feat, 1);
            const int wgt = next_param();
            const int bias = next_param();
            cur = g.bias_add(g.matmul(flat, wgt), bias);
            break;
        }
        case LayerKind::Conv1d: {
            const int wgt = next_param();
            const int bias = next_param();
            cur = g.bias_add(g.conv1d(cur, wgt, spec.stride, spec.padding), bias);
            break;
        }
        case LayerKind::SelfAttention1d: {
            const int fw = next_param();
            const int gw = next_param();
            const int hw = next_param();
            const int ow = next_param();
            const int gamma = next_param();
            const int q = g.conv1d(cur, fw, 1, 0);
            const int k = g.conv1d(cur, gw, 1, 0);
            const int v = g.conv1d(cur, hw, 1, 0);
            // logits[i,j] = q[:,i] . k[:,j]; rows softmax to attention weights
            const int logits = g.bmm(q, k, /*trans_a=*/true, /*trans_b=*/false);
            const int attn = g.softmax_w(logits);
            // o_pre[:,i] = sum_j attn[i,j] v[:,j]
            const int o_pre = g.bmm(v, attn, /*trans_a=*/false, /*trans_b=*/true);
            const int o = g.conv1d(o_pre, ow, 1, 0);
            cur = g.add(g.mul_scalar_node(o, gamma), cur);
            break;
        }
        case LayerKind::Relu:
            cur = g.relu(cur);
            break;
        case LayerKind::LeakyRelu:
            cur = g.leaky_relu(cur, spec.alpha);
            break;
        case LayerKind::Tanh:
            cur = g.tanh_(cur);
            break;
        case LayerKind::Sigmoid:
            cur = g.sigmoid_(cur);
            break;
        case LayerKind::Softmax:
            cur = g.softmax_w(cur);
            break;
        case LayerKind::Dropout: {
            if (!train_mode || spec.rate == 0.0) break;
            if (!dropout_rng) throw ConfigError("dropout in train mode needs an rng");
            const Node& in = g.node(cur);
            std::vector<double> mask(in.shape.numel());
            const double keep = 1.0 - spec.rate;
            const double scale = 1.0 / keep;
            for (double& mv : mask) mv = dropout_rng->uniform() < keep ? scale : 0.0;
            const Shape mshape = in.shape;
            cur = g.mul(cur, g.leaf(mshape, mask));
            break;
        }
        case LayerKind::Reshape:
            cur = g.reshape(cur, spec.reshape_c, spec.reshape_w);
            break;
        }
    }
    return cur;
}

int Net::forward(Graph& g, int x, bool train_mode, Rng* dropout_rng, std::vector<int>* param_nodes,
                 bool params_require_grad) const {
    const std::vector<int> nodes = insert_params(g, params_require_grad);
    if (param_nodes) *param_nodes = nodes;
    return forward_with(g, x, train_mode, dropout_rng, nodes);
}

std::vector<Param*> Net::flat_params() {
    std::vector<Param*> out;
    for (Layer& layer : layers)
        for (Param& p : layer.params) out.push_back(&p);
    return out;
}

std::vector<const Param*> Net::flat_params() const {
    std::vector<const Param*> out;
    for (const Layer& layer : layers)
        for (const Param& p : layer.params) out.push_back(&p);
    return out;
}

size_t Net::param_count() const {
    size_t n = 0;
    for (const Layer& layer : layers)
        for (const Param& p : layer.params) n += p.value.size();
    return n;
}

void Adam::step(std::vector<Param*>& params, const std::vector<const std::vector<double>*>& grads) {
    if (params.size() != grads.size()) throw ConfigError("adam: params/grads size mismatch");
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (size_t i = 0; i < params.size(); ++i) {
        Param& p = *params[i];
        if (!grads[i]) continue; // no gradient path this step
        const std::vector<double>& g = *grads[i];
        if (g.size() != p.value.size()) throw ConfigError("adam: grad size mismatch");
        for (size_t j = 0; j < g.size(); ++j) {
            p.m[j] = cfg_.beta1 * p.m[j] + (1.0 - cfg_.beta1) * g[j];
            p.v[j] = cfg_.beta2 * p.v[j] + (1.0 - cfg_.beta2) * g[j] * g[j];
            const double mhat = p.m[j] / bc1;
            const double vhat = p.v[j] / bc2;
            p.value[j] -= cfg_.learning_rate * mhat / (std::sqrt(vhat) + cfg_.epsilon);
        }
    }
}

namespace {

json spec_to_json(const LayerSpec& s) {
    json j;
    j["kind"] = layer_kind_name(s.kind);
    switch (s.kind) {
    case LayerKind::Dense: j["units"] = s.units; break;
    case LayerKind::Conv1d:
        j["out_channels"] = s.out_channels;
        j["kernel"] = s.kernel;
        j["stride"] = s.stride;
        j["padding"] = s.padding;
        break;
    case LayerKind::LeakyRelu: j["alpha"] = s.alpha; break;
    case LayerKind::Dropout: j["rate"] = s.rate; break;
    case LayerKind::Reshape:
        j["channels"] = s.reshape_c;
        j["width"] = s.reshape_w;
        break;
    default: break;
    }
    return j;
}

LayerSpec spec_from_json(const json& j) {
    LayerSpec s;
    s.kind = layer_kind_from_name(j.at("kind").get<std::string>());
    switch (s.kind) {
    case LayerKind::Dense: s.units = j.at("units").get<int>(); break;
    case LayerKind::Conv1d:
        s.out_channels = j.at("out_channels").get<int>();
        s.kernel = j.at("kernel").get<int>();
        s.stride = j.at("stride").get<int>();
        s.padding = j.at("padding").get<int>();
        break;
    case LayerKind::LeakyRelu: s.alpha = j.at("alpha").get<double>(); break;
    case LayerKind::Dropout: s.rate = j.at("rate").get<double>(); break;
    case LayerKind::Reshape:
        s.reshape_c = j.at("channels").get<int>();
        s.reshape_w = j.at("width").get<int>();
        break;
    default: break;
    }
    return s;
}

void write_le64(std::string& out, double v) {
    uint64_t bits;
    std::memcpy(&bits, &v, sizeof(bits));
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
}

double read_le64(const unsigned char* p) {
    uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<uint64_t>(p[i]) << (8 * i);
    double v;
    std::memcpy(&v, &bits, sizeof(v));
    return v;
}

} // namespace

void save_checkpoint(const Net& net, const std::string& prefix, const std::string& meta_json) {
    json model;
    model["version"] = 1;
    model["input"] = {{"channels", net.input_c}, {"width", net.input_w}};
    model["layers"] = json::array();
    for (const Layer& layer : net.layers) model["layers"].push_back(spec_to_json(layer.spec));
    model["param_count"] = net.param_count();
    if (!meta_json.empty()) model["meta"] = json::parse(meta_json);
    write_file_atomic(prefix + "_model.json", model.dump(2) + "\n");

    std::string blob;
    blob.reserve(net.param_count() * 8);
    for (const Param* p : net.flat_params())
        for (double v : p->value) write_le64(blob, v);
    write_file_atomic(prefix + "_weights.bin", blob);
}

Net load_checkpoint(const std::string& prefix, std::string* meta_json_out) {
    json model;
    try {
        model = json::parse(read_file(prefix + "_model.json"));
    } catch (const json::parse_error& e) {
        throw ParseError(prefix + "_model.json: " + e.what());
    }
    if (model.at("version").get<int>() != 1) throw ConfigError("unsupported checkpoint version");
    std::vector<LayerSpec> specs;
    for (const auto& j : model.at("layers")) specs.push_back(spec_from_json(j));
    Rng scratch(0, 0);
    Net net = make_net(model.at("input").at("channels").get<int>(), model.at("input").at("width").get<int>(), specs,
                       scratch);

    const std::string blob = read_file(prefix + "_weights.bin");
    if (blob.size() != net.param_count() * 8)
        throw ConfigError(prefix + "_weights.bin: expected " + std::to_string(net.param_count() * 8) + " bytes, got " +
                          std::to_string(blob.size()));
    const unsigned char* p = reinterpret_cast<const unsigned char*>(blob.data());
    for (Param* param : net.flat_params())
        for (double& v : param->value) {
            v = read_le64(p);
            p += 8;
        }
    if (meta_json_out) *meta_json_out = model.contains("meta") ? model.at("meta").dump() : std::string("{}");
    return net;
}

} // namespace masgan::nn
