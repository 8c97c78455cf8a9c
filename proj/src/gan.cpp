#include "masgan/gan.hpp"

#include "masgan/errors.hpp"
#include "masgan/evaluation.hpp"
#include "masgan/io.hpp"

#include <algorithm>
#include <cmath>

namespace masgan::gan {

void GanConfig::validate() const {
    std::vector<std::string> bad;
    if (latent_dim < 1) bad.push_back("gan.latent_dim must be >= 1");
    if (batch_size < 1) bad.push_back("gan.batch_size must be >= 1");
    if (n_critic < 1) bad.push_back("gan.n_critic must be >= 1");
    if (gp_lambda < 0.0) bad.push_back("gan.gp_lambda must be >= 0");
    if (!(learning_rate > 0.0)) bad.push_back("gan.learning_rate must be > 0");
    if (max_iterations < 1) bad.push_back("gan.max_iterations must be >= 1");
    if (eval_interval < 1) bad.push_back("gan.eval_interval must be >= 1");
    if (base_channels < nn::kAttentionReduction || base_channels % nn::kAttentionReduction != 0)
        bad.push_back("gan.base_channels must be a positive multiple of " + std::to_string(nn::kAttentionReduction));
    if (hidden_units < 1) bad.push_back("gan.hidden_units must be >= 1");
    if (dropout_rate < 0.0 || dropout_rate >= 1.0) bad.push_back("gan.dropout_rate must be in [0, 1)");
    if (eval_real_cap < 2) bad.push_back("gan.eval_real_cap must be >= 2");
    if (eval_gen_count < 2) bad.push_back("gan.eval_gen_count must be >= 2");
    if (!bad.empty()) {
        std::string msg = "invalid GanConfig:";
        for (const auto& m : bad) msg += "\n  " + m;
        throw ConfigError(msg);
    }
}

std::pair<GeneratorNet, CriticNet> build_default_nets(int window_len, const GanConfig& config) {
    config.validate();
    if (window_len < 1) throw ConfigError("window_len must be >= 1");
    if (config.use_attention && window_len < 8)
        throw ConfigError("window_len must be >= 8 for the attention architecture");
    const int L = window_len;
    Rng init_rng(config.seed, /*stream*/ 0xA11C);

    using K = nn::LayerKind;
    const auto conv = [](int out_ch, int kernel, int stride, int pad) {
        nn::LayerSpec s;
        s.kind = K::Conv1d;
        s.out_channels = out_ch;
        s.kernel = kernel;
        s.stride = stride;
        s.padding = pad;
        return s;
    };
    const auto dense = [](int units) {
        nn::LayerSpec s;
        s.kind = K::Dense;
        s.units = units;
        return s;
    };
    const auto act = [](K kind) {
        nn::LayerSpec s;
        s.kind = kind;
        return s;
    };
    const auto dropout = [](double rate) {
        nn::LayerSpec s;
        s.kind = K::Dropout;
        s.rate = rate;
        return s;
    };
    const auto reshape = [](int c, int w) {
        nn::LayerSpec s;
        s.kind = K::Reshape;
        s.reshape_c = c;
        s.reshape_w = w;
        return s;
    };

    if (config.use_attention) {
        const int C = config.base_channels;
        const std::vector<nn::LayerSpec> gen_specs = {
            dense(C * L), reshape(C, L),
            conv(C, 5, 1, 2), act(K::Relu),
            conv(C, 5, 1, 2), act(K::Relu),
            act(K::SelfAttention1d),
            conv(C, 5, 1, 2), act(K::Relu),
            conv(2, 5, 1, 2), // linear output head
            reshape(2 * L, 1),
        };
        const std::vector<nn::LayerSpec> critic_specs = {
            reshape(2, L),
            conv(C, 5, 1, 2), act(K::LeakyRelu),
            conv(C, 5, 2, 2), act(K::LeakyRelu),
            act(K::SelfAttention1d),
            conv(2 * C, 5, 2, 2), act(K::LeakyRelu),
            dense(1),
        };
        GeneratorNet gen = nn::make_net(config.latent_dim, 1, gen_specs, init_rng);
        CriticNet critic = nn::make_net(2 * L, 1, critic_specs, init_rng);
        return {std::move(gen), std::move(critic)};
    }

    const int h = config.hidden_units;
    const double rate = config.dropout_rate;
    const std::vector<nn::LayerSpec> gen_specs = {
        dense(h), act(K::Relu), dropout(rate),
        dense(h), act(K::Relu), dropout(rate),
        dense(2 * L),
    };
    const std::vector<nn::LayerSpec> critic_specs = {
        dense(h), act(K::Relu), dropout(rate),
        dense(h), act(K::Relu), dropout(rate),
        dense(1),
    };
    GeneratorNet gen = nn::make_net(config.latent_dim, 1, gen_specs, init_rng);
    CriticNet critic = nn::make_net(2 * L, 1, critic_specs, init_rng);
    return {std::move(gen), std::move(critic)};
}

namespace {

std::vector<double> flatten_batch(const std::vector<std::vector<double>>& batch) {
    std::vector<double> flat;
    flat.reserve(batch.size() * batch.front().size());
    for (const auto& row : batch) flat.insert(flat.end(), row.begin(), row.end());
    return flat;
}

struct GpNodes {
    int penalty;      // scalar node
    int norms;        // (B,1,1) per-sample gradient norms
};

// epsilon-uniform interpolates between paired real/fake rows; the input
// gradient is taken through a first backward pass so the returned penalty
// node supports a further backward through it.
GpNodes build_gradient_penalty(nn::Graph& g, const CriticNet& critic, const std::vector<int>& critic_params,
                               const std::vector<double>& real_flat, const std::vector<double>& fake_flat, int batch,
                               int dim, double gp_lambda, Rng& rng, bool train_mode, Rng* dropout_rng) {
    std::vector<double> xhat(real_flat.size());
    for (int b = 0; b < batch; ++b) {
        const double eps = rng.uniform();
        const size_t off = static_cast<size_t>(b) * dim;
        for (int i = 0; i < dim; ++i)
            xhat[off + i] = eps * real_flat[off + i] + (1.0 - eps) * fake_flat[off + i];
    }
    const int xhat_node = g.leaf(nn::Shape{batch, dim, 1}, xhat, /*requires_grad=*/true);
    const int out = critic.forward_with(g, xhat_node, train_mode, dropout_rng, critic_params);
    const int grad_x = g.backward(g.sum_all(out), {xhat_node})[0];
    if (grad_x < 0) throw RuntimeDataError("gradient penalty: critic output does not depend on its input");
    const int norms = g.sqrt_(g.reduce_cw(g.square(grad_x)));
    const int penalty =
        g.scale(g.sum_all(g.square(g.add_const(norms, -1.0))), gp_lambda / static_cast<double>(batch));
    return GpNodes{penalty, norms};
}

double mean_of_node(const nn::Graph& g, int node) {
    const auto& data = g.node(node).data;
    double s = 0.0;
    for (double v : data) s += v;
    return s / static_cast<double>(data.size());
}

} // namespace

GradientPenalty gradient_penalty(const CriticNet& critic, const std::vector<std::vector<double>>& real_batch,
                                 const std::vector<std::vector<double>>& fake_batch, double gp_lambda, Rng& rng) {
    if (real_batch.empty() || real_batch.size() != fake_batch.size() ||
        real_batch.front().size() != fake_batch.front().size())
        throw InvalidInputError("gradient_penalty: real/fake batch shapes must match");
    nn::Graph g;
    const std::vector<int> params = critic.insert_params(g, /*requires_grad=*/false);
    const GpNodes nodes = build_gradient_penalty(g, critic, params, flatten_batch(real_batch),
                                                 flatten_batch(fake_batch), static_cast<int>(real_batch.size()),
                                                 static_cast<int>(real_batch.front().size()), gp_lambda, rng,
                                                 /*train_mode=*/false, nullptr);
    return GradientPenalty{g.scalar(nodes.penalty), mean_of_node(g, nodes.norms)};
}

std::vector<std::vector<double>> generate_samples(const GeneratorNet& generator, int count, Rng& rng) {
    std::vector<std::vector<double>> out;
    out.reserve(static_cast<size_t>(count));
    const int latent = generator.input_c;
    const auto [oc, ow] = generator.output_shape();
    const int dim = oc * ow;
    constexpr int kChunk = 128;
    nn::Graph g;
    for (int done = 0; done < count; done += kChunk) {
        const int b = std::min(kChunk, count - done);
        std::vector<double> z(static_cast<size_t>(b) * latent);
        for (double& v : z) v = rng.normal();
        g.clear();
        const int zn = g.leaf(nn::Shape{b, latent, 1}, z);
        const int yn = generator.forward(g, zn, /*train_mode=*/false);
        const auto& data = g.node(yn).data;
        for (int i = 0; i < b; ++i)
            out.emplace_back(data.begin() + static_cast<size_t>(i) * dim, data.begin() + static_cast<size_t>(i + 1) * dim);
    }
    return out;
}

double realism_score(const CriticNet& critic, const std::vector<double>& x) {
    nn::Graph g;
    const int xn = g.leaf(nn::Shape{1, static_cast<int>(x.size()), 1}, x);
    const int out = critic.forward(g, xn, /*train_mode=*/false);
    if (g.node(out).shape.numel() != 1) throw InvalidInputError("realism_score: critic output is not a scalar");
    return 1.0 / (1.0 + std::exp(-g.scalar(out)));
}

std::vector<double> realism_scores(const CriticNet& critic, const std::vector<std::vector<double>>& xs) {
    std::vector<double> scores;
    scores.reserve(xs.size());
    constexpr int kChunk = 256;
    nn::Graph g;
    for (size_t done = 0; done < xs.size(); done += kChunk) {
        const int b = static_cast<int>(std::min<size_t>(kChunk, xs.size() - done));
        const int dim = static_cast<int>(xs[done].size());
        std::vector<double> flat;
        flat.reserve(static_cast<size_t>(b) * dim);
        for (int i = 0; i < b; ++i) {
            if (static_cast<int>(xs[done + i].size()) != dim)
                throw InvalidInputError("realism_scores: ragged input");
            flat.insert(flat.end(), xs[done + i].begin(), xs[done + i].end());
        }
        g.clear();
        const int xn = g.leaf(nn::Shape{b, dim, 1}, flat);
        const int out = critic.forward(g, xn, /*train_mode=*/false);
        const auto& data = g.node(out).data;
        for (int i = 0; i < b; ++i) scores.push_back(1.0 / (1.0 + std::exp(-data[static_cast<size_t>(i)])));
    }
    return scores;
}

namespace {

struct SnapshotInputs {
    const std::vector<std::vector<double>>& samples;
    const GanConfig& config;
    const SnapshotContext& ctx;
};

EvalSnapshot make_snapshot(int iter, const SnapshotInputs& in, const GeneratorNet& generator, const CriticNet& critic) {
    EvalSnapshot snap;
    snap.iter = iter;

    std::vector<std::vector<double>> real;
    const size_t cap = std::min<size_t>(in.samples.size(), static_cast<size_t>(in.config.eval_real_cap));
    real.assign(in.samples.begin(), in.samples.begin() + static_cast<long>(cap));

    Rng eval_rng(in.config.seed, 0xE7A1000ULL + static_cast<uint64_t>(iter));
    const std::vector<std::vector<double>> generated =
        generate_samples(generator, in.config.eval_gen_count, eval_rng);

    const std::vector<double> real_scores = realism_scores(critic, real);
    const std::vector<double> gen_scores = realism_scores(critic, generated);
    snap.mean_real_score = ev::mean_of(real_scores);
    snap.mean_gen_score = ev::mean_of(gen_scores);
    snap.std_real_score = ev::sample_std_of(real_scores);
    snap.std_gen_score = ev::sample_std_of(gen_scores);
    const ev::KsResult ks = ev::ks_two_sample(real_scores, gen_scores);
    snap.score_ks_stat = ks.statistic;
    snap.score_ks_p = ks.p_value;

    // diversity: average per-dimension std of generated samples
    const size_t dim = generated.front().size();
    double acc = 0.0;
    for (size_t d = 0; d < dim; ++d) {
        std::vector<double> col;
        col.reserve(generated.size());
        for (const auto& s : generated) col.push_back(s[d]);
        acc += ev::sample_std_of(col);
    }
    snap.gen_diversity = acc / static_cast<double>(dim);

    // return-distribution distances on de-normalized returns
    if (in.ctx.norm && in.ctx.window_len > 0 && static_cast<size_t>(2 * in.ctx.window_len) == dim) {
        const int L = in.ctx.window_len;
        const auto denorm_returns = [&](const std::vector<std::vector<double>>& set, int horizon) {
            std::vector<double> rets;
            for (const auto& v : set) {
                for (int i = 0; i + horizon <= L; i += horizon) {
                    double r = 0.0;
                    for (int k = 0; k < horizon; ++k)
                        r += v[static_cast<size_t>(i + k)] * in.ctx.norm->return_std + in.ctx.norm->return_mean;
                    rets.push_back(r);
                }
            }
            return rets;
        };
        snap.ret1_ks = ev::ks_two_sample(denorm_returns(real, 1), denorm_returns(generated, 1)).statistic;
        snap.ret10_ks = ev::ks_two_sample(denorm_returns(real, 10), denorm_returns(generated, 10)).statistic;
    }

    snap.converged = std::fabs(snap.mean_real_score - snap.mean_gen_score) < 0.05 && snap.mean_real_score >= 0.4 &&
                     snap.mean_real_score <= 0.6 && snap.mean_gen_score >= 0.4 && snap.mean_gen_score <= 0.6 &&
                     snap.score_ks_p > 0.05;
    return snap;
}

} // namespace

TrainReport train_loop(const std::vector<std::vector<double>>& samples, const GanConfig& config,
                       GeneratorNet& generator, CriticNet& critic, const SnapshotContext& snapshot_ctx) {
    config.validate();
    if (samples.empty()) throw InvalidInputError("train_loop: empty sample set");
    const int dim = static_cast<int>(samples.front().size());
    for (const auto& s : samples)
        if (static_cast<int>(s.size()) != dim) throw InvalidInputError("train_loop: ragged sample set");
    {
        const auto [gc, gw] = generator.output_shape();
        if (gc * gw != dim)
            throw ConfigError("generator output dim " + std::to_string(gc * gw) + " != sample dim " +
                              std::to_string(dim));
        if (generator.input_c != config.latent_dim)
            throw ConfigError("generator latent dim mismatch");
        const auto [cc, cw] = critic.output_shape();
        if (cc * cw != 1) throw ConfigError("critic must output a scalar");
    }

    const int B = config.batch_size;
    const int latent = config.latent_dim;
    nn::Adam critic_opt(nn::AdamConfig{config.learning_rate, 0.0, 0.9, 1e-8});
    nn::Adam gen_opt(nn::AdamConfig{config.learning_rate, 0.0, 0.9, 1e-8});
    std::vector<nn::Param*> critic_params = critic.flat_params();
    std::vector<nn::Param*> gen_params = generator.flat_params();

    Rng rng(config.seed, 0x7EA1);

    TrainReport report;
    report.rows.reserve(static_cast<size_t>(config.max_iterations));

    nn::Graph g;

    const auto sample_real_flat = [&]() {
        std::vector<double> flat;
        flat.reserve(static_cast<size_t>(B) * dim);
        for (int i = 0; i < B; ++i) {
            const auto& row = samples[static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(samples.size()) - 1))];
            flat.insert(flat.end(), row.begin(), row.end());
        }
        return flat;
    };

    const auto generate_fake_flat = [&]() {
        g.clear();
        std::vector<double> z(static_cast<size_t>(B) * latent);
        for (double& v : z) v = rng.normal();
        const int zn = g.leaf(nn::Shape{B, latent, 1}, z);
        const int yn = generator.forward(g, zn, /*train_mode=*/true, &rng);
        return g.node(yn).data;
    };

    const auto check_finite = [&](double v, const char* what, int iter) {
        if (!std::isfinite(v))
            throw RuntimeDataError(std::string("training aborted: non-finite ") + what + " at iteration " +
                                   std::to_string(iter));
    };

    for (int iter = 1; iter <= config.max_iterations; ++iter) {
        if (config.lr_decay) {
            const double lr = config.learning_rate *
                              (1.0 - static_cast<double>(iter - 1) / static_cast<double>(config.max_iterations));
            critic_opt.set_learning_rate(lr);
            gen_opt.set_learning_rate(lr);
        }
        double critic_loss = 0.0, gp_value = 0.0, grad_norm = 0.0;
        for (int step = 0; step < config.n_critic; ++step) {
            const std::vector<double> real_flat = sample_real_flat();
            const std::vector<double> fake_flat = generate_fake_flat();

            g.clear();
            const std::vector<int> cparams = critic.insert_params(g, /*requires_grad=*/true);
            const int xr = g.leaf(nn::Shape{B, dim, 1}, real_flat);
            const int xf = g.leaf(nn::Shape{B, dim, 1}, fake_flat);
            const int out_r = critic.forward_with(g, xr, /*train_mode=*/true, &rng, cparams);
            const int out_f = critic.forward_with(g, xf, /*train_mode=*/true, &rng, cparams);
            const int wasserstein =
                g.scale(g.sub(g.sum_all(out_f), g.sum_all(out_r)), 1.0 / static_cast<double>(B));
            const GpNodes gp = build_gradient_penalty(g, critic, cparams, real_flat, fake_flat, B, dim,
                                                      config.gp_lambda, rng, /*train_mode=*/true, &rng);
            const int loss = g.add(wasserstein, gp.penalty);

            critic_loss = g.scalar(loss);
            gp_value = g.scalar(gp.penalty);
            grad_norm = mean_of_node(g, gp.norms);
            check_finite(critic_loss, "critic loss", iter);

            const std::vector<int> grads = g.backward(loss, cparams);
            std::vector<const std::vector<double>*> grad_values(grads.size(), nullptr);
            for (size_t i = 0; i < grads.size(); ++i)
                if (grads[i] >= 0) grad_values[i] = &g.node(grads[i]).data;
            critic_opt.step(critic_params, grad_values);
        }

        // generator step
        g.clear();
        const std::vector<int> gparams = generator.insert_params(g, /*requires_grad=*/true);
        const std::vector<int> cparams = critic.insert_params(g, /*requires_grad=*/false);
        std::vector<double> z(static_cast<size_t>(B) * latent);
        for (double& v : z) v = rng.normal();
        const int zn = g.leaf(nn::Shape{B, latent, 1}, z);
        const int fake = generator.forward_with(g, zn, /*train_mode=*/true, &rng, gparams);
        const int out = critic.forward_with(g, fake, /*train_mode=*/true, &rng, cparams);
        const int gen_loss_node = g.scale(g.sum_all(out), -1.0 / static_cast<double>(B));
        const double gen_loss = g.scalar(gen_loss_node);
        check_finite(gen_loss, "generator loss", iter);
        {
            const std::vector<int> grads = g.backward(gen_loss_node, gparams);
            std::vector<const std::vector<double>*> grad_values(grads.size(), nullptr);
            for (size_t i = 0; i < grads.size(); ++i)
                if (grads[i] >= 0) grad_values[i] = &g.node(grads[i]).data;
            gen_opt.step(gen_params, grad_values);
        }

        report.rows.push_back(TrainRow{iter, critic_loss, gen_loss, gp_value, grad_norm});
        report.iterations_run = iter;

        if (iter % config.eval_interval == 0 || iter == config.max_iterations) {
            const SnapshotInputs in{samples, config, snapshot_ctx};
            EvalSnapshot snap = make_snapshot(iter, in, generator, critic);
            report.snapshots.push_back(snap);
            if (snap.converged) {
                report.converged = true;
                if (config.stop_on_convergence) break;
            }
        }
    }
    return report;
}

TrainArtifacts train(const md::Dataset& dataset, const GanConfig& config) {
    if (dataset.vectors.empty()) throw InvalidInputError("train: empty dataset");
    auto [gen, critic] = build_default_nets(dataset.window_len, config);
    std::vector<std::vector<double>> samples;
    samples.reserve(dataset.vectors.size());
    for (const auto& fv : dataset.vectors) samples.push_back(fv.values);
    SnapshotContext ctx{&dataset.norm, dataset.window_len};
    TrainReport report = train_loop(samples, config, gen, critic, ctx);
    return TrainArtifacts{std::move(gen), std::move(critic), std::move(report)};
}

void save_train_report_csv(const TrainReport& report, const std::string& path) {
    std::string out = "iter,critic_loss,gen_loss,gp,interp_grad_norm\n";
    for (const TrainRow& r : report.rows)
        out += std::to_string(r.iter) + "," + fmt_double(r.critic_loss) + "," + fmt_double(r.gen_loss) + "," +
               fmt_double(r.gp) + "," + fmt_double(r.interp_grad_norm) + "\n";
    write_file_atomic(path, out);
}

void save_eval_snapshots_csv(const TrainReport& report, const std::string& path) {
    std::string out =
        "iter,mean_real_score,mean_gen_score,std_real_score,std_gen_score,score_ks_stat,score_ks_p,ret1_ks,ret10_ks,"
        "gen_diversity,converged\n";
    for (const EvalSnapshot& s : report.snapshots)
        out += std::to_string(s.iter) + "," + fmt_double(s.mean_real_score) + "," + fmt_double(s.mean_gen_score) + "," +
               fmt_double(s.std_real_score) + "," + fmt_double(s.std_gen_score) + "," + fmt_double(s.score_ks_stat) +
               "," + fmt_double(s.score_ks_p) + "," + fmt_double(s.ret1_ks) + "," + fmt_double(s.ret10_ks) + "," +
               fmt_double(s.gen_diversity) + "," + (s.converged ? "1" : "0") + "\n";
    write_file_atomic(path, out);
}

} // namespace masgan::gan
