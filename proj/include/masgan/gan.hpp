#pragma once
#include "masgan/layers.hpp"
#include "masgan/marketdata.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace masgan::gan {

using GeneratorNet = nn::Net;
using CriticNet = nn::Net;

struct GanConfig {
    int latent_dim = 100;
    int batch_size = 64;
    int n_critic = 5; // critic updates per generator update
    double gp_lambda = 10.0;
    double learning_rate = 1e-4;
    bool lr_decay = false; // linear decay to zero across max_iterations
    int max_iterations = 3000;
    uint64_t seed = 1;
    bool use_attention = true;
    int eval_interval = 500;
    bool stop_on_convergence = true;
    // architecture knobs (ledgered defaults; the figures only sketch shapes)
    int base_channels = 16;  // conv/attention nets; divisible by 8
    int hidden_units = 128;  // ablation dense nets
    double dropout_rate = 0.3;
    // convergence check sample sizes
    int eval_real_cap = 512;
    int eval_gen_count = 512;

    void validate() const;
};

struct TrainRow {
    int iter;
    double critic_loss;
    double gen_loss;
    double gp;
    double interp_grad_norm;
};

struct EvalSnapshot {
    int iter = 0;
    double mean_real_score = 0.0;
    double mean_gen_score = 0.0;
    double std_real_score = 0.0;
    double std_gen_score = 0.0;
    double score_ks_stat = 0.0;
    double score_ks_p = 0.0;
    double ret1_ks = 0.0;       // 1-bar return distribution distance (when denormalizable)
    double ret10_ks = 0.0;      // 10-bar
    double gen_diversity = 0.0; // mean per-dimension std across generated samples
    bool converged = false;
};

struct TrainReport {
    std::vector<TrainRow> rows;
    std::vector<EvalSnapshot> snapshots;
    int iterations_run = 0;
    bool converged = false;
};

// Default architectures. With attention: conv stacks around one
// self-attention block (generator ReLU, critic leaky-ReLU, critic ends in a
// dense scalar head). Without: three dense layers with ReLU and dropout on
// both nets.
std::pair<GeneratorNet, CriticNet> build_default_nets(int window_len, const GanConfig& config);

struct GradientPenalty {
    double value;          // gp_lambda * mean((||grad_xhat critic||_2 - 1)^2)
    double mean_grad_norm; // mean ||grad_xhat critic||_2 over the batch
};

// Standalone evaluation of the penalty term on epsilon-uniform interpolates.
GradientPenalty gradient_penalty(const CriticNet& critic, const std::vector<std::vector<double>>& real_batch,
                                 const std::vector<std::vector<double>>& fake_batch, double gp_lambda,
                                 Rng& rng);

// Optional context for convergence snapshots on market-data features.
struct SnapshotContext {
    const md::NormStats* norm = nullptr;
    int window_len = 0;
};

// WGAN-GP loop over generic fixed-dimension samples; mutates the nets.
TrainReport train_loop(const std::vector<std::vector<double>>& samples, const GanConfig& config, GeneratorNet& generator,
                       CriticNet& critic, const SnapshotContext& snapshot_ctx = {});

struct TrainArtifacts {
    GeneratorNet generator;
    CriticNet critic;
    TrainReport report;
};

TrainArtifacts train(const md::Dataset& dataset, const GanConfig& config);

// sigmoid(critic(x)) in (0,1)
double realism_score(const CriticNet& critic, const std::vector<double>& x);
std::vector<double> realism_scores(const CriticNet& critic, const std::vector<std::vector<double>>& xs);

// z ~ N(0,1) samples pushed through the generator (eval mode)
std::vector<std::vector<double>> generate_samples(const GeneratorNet& generator, int count, Rng& rng);

void save_train_report_csv(const TrainReport& report, const std::string& path);
void save_eval_snapshots_csv(const TrainReport& report, const std::string& path);

} // namespace masgan::gan
