#include "kgfair/fan.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "kgfair/rng.hpp"

namespace kgfair {

FanModel make_fan_model(int dim, double lambda, double dropout, uint64_t seed,
                        double leaky_slope) {
    if (dim <= 0) throw std::invalid_argument("fan: dim must be > 0");
    if (lambda < 0.0) throw std::invalid_argument("fan: lambda must be >= 0");
    FanModel m;
    m.dim = dim;
    m.lambda = lambda;
    m.filter = make_mlp({dim, dim, dim}, Activation::leaky_relu, Head::linear, dropout,
                        derive_seed(seed, 0xf117ull), leaky_slope);
    m.discriminator = make_mlp({dim, dim, dim, 1}, Activation::leaky_relu, Head::sigmoid,
                               dropout, derive_seed(seed, 0xd15cull), leaky_slope);
    return m;
}

void validate(const FanTrainConfig& cfg) {
    if (cfg.pretrain_epochs < 0) throw std::invalid_argument("pretrain_epochs must be >= 0");
    if (cfg.disc_steps_per_filter_step <= 0)
        throw std::invalid_argument("disc_steps_per_filter_step must be > 0");
    if (cfg.epochs < 0) throw std::invalid_argument("epochs must be >= 0");
    if (cfg.batch_size <= 0) throw std::invalid_argument("batch_size must be > 0");
    if (cfg.learning_rate <= 0.0) throw std::invalid_argument("learning_rate must be > 0");
}

FanDataset make_fan_dataset(const EmbeddingTable& all_embeddings,
                            const AttributeLabels& labels) {
    if (labels.class_count() != 2)
        throw std::invalid_argument("fan: sensitive attribute must be binary, got " +
                                    std::to_string(labels.class_count()) + " classes");
    std::vector<int> entities;
    entities.reserve(labels.labels.size());
    for (const auto& [entity, cls] : labels.labels) {
        (void)cls;
        entities.push_back(entity);
    }
    std::sort(entities.begin(), entities.end());

    FanDataset ds;
    ds.embeddings = EmbeddingTable(static_cast<int>(entities.size()), all_embeddings.dim);
    for (size_t i = 0; i < entities.size(); ++i) {
        const int e = entities[i];
        if (e < 0 || e >= all_embeddings.count)
            throw std::out_of_range("fan: labeled entity without embedding");
        std::copy_n(all_embeddings.row(e), all_embeddings.dim,
                    ds.embeddings.row(static_cast<int>(i)));
        ds.labels.push_back(labels.labels.at(e));
    }
    ds.entities = std::move(entities);
    return ds;
}

namespace {

double recon_error(const double* fx, const double* h, int d) {
    double s = 0.0;
    for (int i = 0; i < d; ++i) {
        const double diff = fx[i] - h[i];
        s += diff * diff;
    }
    return s;
}

void check_dims(const FanModel& m, int d) {
    if (m.filter.input_dim() != d || m.filter.output_dim() != d ||
        m.discriminator.input_dim() != d)
        throw std::invalid_argument("fan: dimension mismatch");
}

}  // namespace

FanLoss fan_loss(const FanModel& model, const double* h, int y) {
    check_dims(model, model.dim);
    const Vec fx = forward(model.filter, h, Mode::eval);
    const double p = forward(model.discriminator, fx.data(), Mode::eval)[0];
    FanLoss out;
    out.recon = recon_error(fx.data(), h, model.dim);
    out.ce = -binary_cross_entropy(p, y);  // log-likelihood as written
    out.total = model.lambda * out.recon + out.ce;
    return out;
}

MlpGrads fan_filter_gradients(const FanModel& model, const double* h, int y) {
    check_dims(model, model.dim);
    ForwardCache fcache, dcache;
    const Vec fx = forward(model.filter, h, Mode::eval, nullptr, &fcache);
    const double p = forward(model.discriminator, fx.data(), Mode::eval, nullptr, &dcache)[0];
    // d(ce)/dp for the log-likelihood term; descent on total still applies it
    const Vec dce = {-binary_cross_entropy_grad(p, y)};
    const MlpGrads through_disc = backward(model.discriminator, dcache, dce);
    Vec upstream = through_disc.dx;
    for (int i = 0; i < model.dim; ++i)
        upstream[static_cast<size_t>(i)] +=
            2.0 * model.lambda * (fx[static_cast<size_t>(i)] - h[i]);
    return backward(model.filter, fcache, upstream);
}

void pretrain(FanModel& model, const FanDataset& data, const FanTrainConfig& cfg) {
    validate(cfg);
    if (data.embeddings.count == 0) throw std::invalid_argument("fan pretrain: empty dataset");
    if (static_cast<size_t>(data.embeddings.count) != data.labels.size())
        throw std::invalid_argument("fan pretrain: label count mismatch");
    check_dims(model, data.embeddings.dim);
    const int n = data.embeddings.count;
    const int d = model.dim;

    TrainConfig tc;
    tc.learning_rate = cfg.learning_rate;
    tc.batch_size = cfg.batch_size;
    tc.epochs = std::max(1, cfg.pretrain_epochs);
    tc.seed = cfg.seed;

    std::vector<size_t> order(static_cast<size_t>(n));
    std::iota(order.begin(), order.end(), size_t{0});

    {
        // filter: identity map on the reconstruction loss alone, dropout off
        auto rng = make_rng(derive_seed(cfg.seed, 0x9e7full));
        MlpTrainer trainer(model.filter, tc);
        MlpGrads acc = make_zero_grads(model.filter);
        ForwardCache cache;
        Vec upstream(static_cast<size_t>(d));
        for (int epoch = 0; epoch < cfg.pretrain_epochs; ++epoch) {
            std::shuffle(order.begin(), order.end(), rng);
            size_t pos = 0;
            while (pos < order.size()) {
                const size_t end =
                    std::min(order.size(), pos + static_cast<size_t>(cfg.batch_size));
                for (auto& mgrad : acc.dW)
                    std::fill(mgrad.data.begin(), mgrad.data.end(), 0.0);
                for (auto& b : acc.db) std::fill(b.begin(), b.end(), 0.0);
                for (size_t k = pos; k < end; ++k) {
                    const double* h = data.embeddings.row(static_cast<int>(order[k]));
                    const Vec fx = forward(model.filter, h, Mode::eval, nullptr, &cache);
                    for (int i = 0; i < d; ++i)
                        upstream[static_cast<size_t>(i)] =
                            2.0 * (fx[static_cast<size_t>(i)] - h[i]);
                    backward_accumulate(model.filter, cache, upstream, acc);
                }
                trainer.apply(acc, static_cast<int>(end - pos));
                pos = end;
            }
        }
    }
    {
        // discriminator: cross-entropy on the unfiltered embeddings
        auto rng = make_rng(derive_seed(cfg.seed, 0xd129ull));
        MlpTrainer trainer(model.discriminator, tc);
        MlpGrads acc = make_zero_grads(model.discriminator);
        ForwardCache cache;
        for (int epoch = 0; epoch < cfg.pretrain_epochs; ++epoch) {
            std::shuffle(order.begin(), order.end(), rng);
            size_t pos = 0;
            while (pos < order.size()) {
                const size_t end =
                    std::min(order.size(), pos + static_cast<size_t>(cfg.batch_size));
                for (auto& mgrad : acc.dW)
                    std::fill(mgrad.data.begin(), mgrad.data.end(), 0.0);
                for (auto& b : acc.db) std::fill(b.begin(), b.end(), 0.0);
                for (size_t k = pos; k < end; ++k) {
                    const double* h = data.embeddings.row(static_cast<int>(order[k]));
                    const double p =
                        forward(model.discriminator, h, Mode::train, &rng, &cache)[0];
                    backward_accumulate(
                        model.discriminator, cache,
                        {binary_cross_entropy_grad(p, data.labels[order[k]])}, acc);
                }
                trainer.apply(acc, static_cast<int>(end - pos));
                pos = end;
            }
        }
    }
}

std::vector<FanTraceRow> adversarial_train(FanModel& model, const FanDataset& data,
                                           const FanTrainConfig& cfg) {
    validate(cfg);
    if (data.embeddings.count == 0)
        throw std::invalid_argument("fan adversarial_train: empty dataset");
    if (static_cast<size_t>(data.embeddings.count) != data.labels.size())
        throw std::invalid_argument("fan adversarial_train: label count mismatch");
    check_dims(model, data.embeddings.dim);
    const int n = data.embeddings.count;
    const int d = model.dim;

    double mean_sq_norm = 0.0;
    for (int i = 0; i < n; ++i) mean_sq_norm += squared_norm(data.embeddings.row(i), d);
    mean_sq_norm /= static_cast<double>(n);
    const double divergence_bar = 10.0 * mean_sq_norm;

    TrainConfig tc;
    tc.learning_rate = cfg.learning_rate;
    tc.batch_size = cfg.batch_size;
    tc.epochs = std::max(1, cfg.epochs);
    tc.seed = cfg.seed;
    MlpTrainer filter_trainer(model.filter, tc);
    MlpTrainer disc_trainer(model.discriminator, tc);
    MlpGrads facc = make_zero_grads(model.filter);
    MlpGrads dacc = make_zero_grads(model.discriminator);

    auto rng = make_rng(derive_seed(cfg.seed, 0xadf5ull));
    std::vector<size_t> order(static_cast<size_t>(n));
    std::iota(order.begin(), order.end(), size_t{0});

    std::vector<FanTraceRow> trace;
    ForwardCache fcache, dcache;
    Vec upstream(static_cast<size_t>(d));
    long step = 0;
    long schedule_pos = 0;  // position within the (k disc + 1 filter) cycle
    const long cycle = cfg.disc_steps_per_filter_step + 1;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        size_t pos = 0;
        while (pos < order.size()) {
            const size_t end =
                std::min(order.size(), pos + static_cast<size_t>(cfg.batch_size));
            const int batch = static_cast<int>(end - pos);
            const bool filter_step = schedule_pos % cycle == cycle - 1;
            schedule_pos = (schedule_pos + 1) % cycle;

            FanTraceRow row;
            row.step = ++step;
            row.phase = filter_step ? "filter" : "disc";
            double recon_sum = 0.0, ce_sum = 0.0;
            int correct = 0;

            if (filter_step) {
                for (auto& mg : facc.dW) std::fill(mg.data.begin(), mg.data.end(), 0.0);
                for (auto& b : facc.db) std::fill(b.begin(), b.end(), 0.0);
                for (size_t k = pos; k < end; ++k) {
                    const double* h = data.embeddings.row(static_cast<int>(order[k]));
                    const int y = data.labels[order[k]];
                    const Vec fx = forward(model.filter, h, Mode::train, &rng, &fcache);
                    const double p =
                        forward(model.discriminator, fx.data(), Mode::eval, nullptr,
                                &dcache)[0];
                    recon_sum += recon_error(fx.data(), h, d);
                    ce_sum += binary_cross_entropy(p, y);
                    correct += (p >= 0.5 ? 1 : 0) == y;
                    const Vec dce = {-binary_cross_entropy_grad(p, y)};
                    const MlpGrads through =
                        backward(model.discriminator, dcache, dce);
                    for (int i = 0; i < d; ++i)
                        upstream[static_cast<size_t>(i)] =
                            through.dx[static_cast<size_t>(i)] +
                            2.0 * model.lambda * (fx[static_cast<size_t>(i)] - h[i]);
                    backward_accumulate(model.filter, fcache, upstream, facc);
                }
                filter_trainer.apply(facc, batch);
            } else {
                for (auto& mg : dacc.dW) std::fill(mg.data.begin(), mg.data.end(), 0.0);
                for (auto& b : dacc.db) std::fill(b.begin(), b.end(), 0.0);
                for (size_t k = pos; k < end; ++k) {
                    const double* h = data.embeddings.row(static_cast<int>(order[k]));
                    const int y = data.labels[order[k]];
                    const Vec fx = forward(model.filter, h, Mode::eval);
                    const double p =
                        forward(model.discriminator, fx.data(), Mode::train, &rng,
                                &dcache)[0];
                    recon_sum += recon_error(fx.data(), h, d);
                    ce_sum += binary_cross_entropy(p, y);
                    correct += (p >= 0.5 ? 1 : 0) == y;
                    backward_accumulate(model.discriminator, dcache,
                                        {binary_cross_entropy_grad(p, y)}, dacc);
                }
                disc_trainer.apply(dacc, batch);
            }

            row.recon = recon_sum / batch;
            row.ce = ce_sum / batch;
            row.disc_acc = static_cast<double>(correct) / batch;
            if (!std::isfinite(row.recon) || !std::isfinite(row.ce))
                throw DivergenceError("fan training diverged (non-finite loss)");
            if (row.recon > divergence_bar)
                throw DivergenceError(
                    "fan training diverged (reconstruction error exceeds 10x the mean "
                    "squared embedding norm; lower the learning rate or raise lambda)");
            trace.push_back(std::move(row));
            pos = end;
        }
    }
    return trace;
}

namespace {

EmbeddingTable apply_filter_impl(const FanModel& model, const EmbeddingTable& embeddings,
                                 bool parallel) {
    check_dims(model, embeddings.dim);
    EmbeddingTable out(embeddings.count, embeddings.dim);
#pragma omp parallel for schedule(static) if (parallel)
    for (int i = 0; i < embeddings.count; ++i) {
        const Vec fx = forward(model.filter, embeddings.row(i), Mode::eval);
        std::copy(fx.begin(), fx.end(), out.row(i));
    }
    return out;
}

}  // namespace

EmbeddingTable apply_filter(const FanModel& model, const EmbeddingTable& embeddings) {
    return apply_filter_impl(model, embeddings, true);
}

EmbeddingTable apply_filter_serial(const FanModel& model,
                                   const EmbeddingTable& embeddings) {
    return apply_filter_impl(model, embeddings, false);
}

void save_fan(const FanModel& model, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << "fan 1\n";
    out << "lambda " << format_g17(model.lambda) << "\n";
    out << "dim " << model.dim << "\n";
    write_mlp_block(model.filter, out);
    write_mlp_block(model.discriminator, out);
    if (!out) throw std::runtime_error("write failed: " + path);
}

FanModel load_fan(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open: " + path);
    std::string tag;
    int version = 0;
    if (!(in >> tag >> version) || tag != "fan" || version != 1)
        throw std::runtime_error("bad fan checkpoint header: " + path);
    FanModel m;
    std::string key;
    if (!(in >> key >> m.lambda) || key != "lambda")
        throw std::runtime_error("fan checkpoint: expected lambda");
    if (!(in >> key >> m.dim) || key != "dim")
        throw std::runtime_error("fan checkpoint: expected dim");
    m.filter = read_mlp_block(in);
    m.discriminator = read_mlp_block(in);
    check_dims(m, m.dim);
    return m;
}

void save_fan_trace(const std::vector<FanTraceRow>& trace, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << "step,phase,recon,ce,disc_acc\n";
    for (const FanTraceRow& r : trace)
        out << r.step << "," << r.phase << "," << format_g17(r.recon) << ","
            << format_g17(r.ce) << "," << format_g17(r.disc_acc) << "\n";
    if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace kgfair
