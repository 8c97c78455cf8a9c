#pragma once
#include "masgan/rng.hpp"
#include "masgan/tensor.hpp"

#include <string>
#include <vector>

namespace masgan::nn {

enum class LayerKind : uint8_t {
    Dense,
    Conv1d,
    SelfAttention1d,
    Relu,
    LeakyRelu,
    Tanh,
    Sigmoid,
    Softmax,
    Dropout,
    Reshape,
};

std::string layer_kind_name(LayerKind kind);
LayerKind layer_kind_from_name(const std::string& name);

struct LayerSpec {
    LayerKind kind = LayerKind::Dense;
    int units = 0;        // dense
    int out_channels = 0; // conv1d
    int kernel = 0;       // conv1d
    int stride = 1;       // conv1d
    int padding = 0;      // conv1d
    double alpha = 0.2;   // leaky relu slope
    double rate = 0.0;    // dropout
    int reshape_c = 0;    // reshape target (per sample)
    int reshape_w = 0;
};

struct Param {
    Shape shape;
    std::vector<double> value;
    // Adam state
    std::vector<double> m;
    std::vector<double> v;
};

struct Layer {
    LayerSpec spec;
    std::vector<Param> params;
    // dense: [weight (in,units,1), bias (1,units,1)]
    // conv1d: [kernels (out,in,k), bias (1,out,1)]
    // self-attention: [f, g, h (C/8,C,1) kernels, out (C,C/8,1), gamma (1,1,1)]
};

// attention channel reduction, per the SAGAN-style 1x1 conv design
constexpr int kAttentionReduction = 8;

// Feed-forward stack over (B, c, w) activations. Shapes are resolved against
// `input_shape` (per-sample c, w) when parameters are initialized.
struct Net {
    std::vector<Layer> layers;
    int input_c = 1;
    int input_w = 1;

    // Inserts one leaf per parameter (flat_params() order). Several forward
    // passes may share the same leaves so gradients accumulate across uses.
    std::vector<int> insert_params(Graph& g, bool requires_grad) const;

    int forward_with(Graph& g, int x, bool train_mode, Rng* dropout_rng, const std::vector<int>& param_nodes) const;

    // convenience: insert + forward in one call
    int forward(Graph& g, int x, bool train_mode = false, Rng* dropout_rng = nullptr,
                std::vector<int>* param_nodes = nullptr, bool params_require_grad = false) const;

    std::vector<Param*> flat_params();
    std::vector<const Param*> flat_params() const;
    size_t param_count() const;

    // output (c, w) for a given per-sample input shape
    std::pair<int, int> output_shape() const;
};

// Builds layer parameters (Glorot-uniform weights, zero biases, gamma = 0)
// for the declared specs; validates the shape chain.
Net make_net(int input_c, int input_w, const std::vector<LayerSpec>& specs, Rng& rng);

struct AdamConfig {
    double learning_rate = 1e-4;
    double beta1 = 0.0;
    double beta2 = 0.9;
    double epsilon = 1e-8;
};

class Adam {
public:
    explicit Adam(AdamConfig cfg) : cfg_(cfg) {}
    // grads[i] aligned with params[i]
    void step(std::vector<Param*>& params, const std::vector<const std::vector<double>*>& grads);
    void set_learning_rate(double lr) { cfg_.learning_rate = lr; }

private:
    AdamConfig cfg_;
    int64_t t_ = 0;
};

// Checkpoint: `<prefix>_model.json` (specs, shapes, metadata) plus
// `<prefix>_weights.bin` (little-endian float64 in declared layer order).
void save_checkpoint(const Net& net, const std::string& prefix, const std::string& meta_json);
Net load_checkpoint(const std::string& prefix, std::string* meta_json_out = nullptr);

} // namespace masgan::nn
