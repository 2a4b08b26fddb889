#include "kgfair/nn.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "kgfair/rng.hpp"

namespace kgfair {

namespace {

constexpr double kProbEps = 1e-7;

double clamp_prob(double p) {
    return std::min(1.0 - kProbEps, std::max(kProbEps, p));
}

double activate(double x, Activation a, double slope) {
    if (a == Activation::relu) return x > 0.0 ? x : 0.0;
    return x > 0.0 ? x : slope * x;
}

double activate_deriv(double x, Activation a, double slope) {
    if (a == Activation::relu) return x > 0.0 ? 1.0 : 0.0;
    return x > 0.0 ? 1.0 : slope;
}

void apply_head(Head head, Vec& v) {
    switch (head) {
        case Head::linear:
            break;
        case Head::sigmoid:
            for (double& x : v) x = 1.0 / (1.0 + std::exp(-x));
            break;
        case Head::softmax: {
            const double mx = *std::max_element(v.begin(), v.end());
            double sum = 0.0;
            for (double& x : v) {
                x = std::exp(x - mx);
                sum += x;
            }
            for (double& x : v) x /= sum;
            break;
        }
    }
}

}  // namespace

Activation activation_from_name(const std::string& name) {
    if (name == "relu") return Activation::relu;
    if (name == "leaky_relu") return Activation::leaky_relu;
    throw std::invalid_argument("unknown activation: " + name);
}

const char* activation_name(Activation a) {
    return a == Activation::relu ? "relu" : "leaky_relu";
}

Head head_from_name(const std::string& name) {
    if (name == "linear") return Head::linear;
    if (name == "sigmoid") return Head::sigmoid;
    if (name == "softmax") return Head::softmax;
    throw std::invalid_argument("unknown output head: " + name);
}

const char* head_name(Head h) {
    switch (h) {
        case Head::linear: return "linear";
        case Head::sigmoid: return "sigmoid";
        case Head::softmax: return "softmax";
    }
    return "linear";
}

Mlp make_mlp(std::vector<int> layer_dims, Activation hidden, Head head,
             double dropout_rate, uint64_t seed, double leaky_slope) {
    if (layer_dims.size() < 2) throw std::invalid_argument("mlp needs >= 2 layer dims");
    for (int d : layer_dims)
        if (d <= 0) throw std::invalid_argument("layer dims must be positive");
    if (dropout_rate < 0.0 || dropout_rate >= 1.0)
        throw std::invalid_argument("dropout_rate must be in [0,1)");

    Mlp net;
    net.layer_dims = std::move(layer_dims);
    net.hidden_activation = hidden;
    net.output_head = head;
    net.dropout_rate = dropout_rate;
    net.leaky_slope = leaky_slope;

    auto rng = make_rng(seed);
    for (size_t l = 0; l + 1 < net.layer_dims.size(); ++l) {
        const int in = net.layer_dims[l];
        const int out = net.layer_dims[l + 1];
        const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
        std::uniform_real_distribution<double> dist(-bound, bound);
        Matrix w(out, in);
        for (double& x : w.data) x = dist(rng);
        net.weights.push_back(std::move(w));
        net.biases.emplace_back(static_cast<size_t>(out), 0.0);
    }
    return net;
}

Vec forward(const Mlp& net, const double* x, Mode mode, std::mt19937_64* rng,
            ForwardCache* cache) {
    const int layers = net.layer_count();
    Vec cur(x, x + net.input_dim());
    if (cache) {
        cache->input = cur;
        cache->pre.assign(static_cast<size_t>(layers), {});
        cache->act.assign(static_cast<size_t>(layers), {});
        cache->dropout_mask.assign(static_cast<size_t>(layers), {});
        cache->mode = mode;
    }
    const bool dropping = mode == Mode::train && net.dropout_rate > 0.0;
    if (dropping && !rng)
        throw std::invalid_argument("train-mode forward with dropout needs an rng");

    for (int l = 0; l < layers; ++l) {
        const Matrix& w = net.weights[static_cast<size_t>(l)];
        const Vec& b = net.biases[static_cast<size_t>(l)];
        if (static_cast<int>(cur.size()) != w.cols)
            throw std::invalid_argument("forward: dimension mismatch");
        Vec next(static_cast<size_t>(w.rows));
        for (int i = 0; i < w.rows; ++i) next[static_cast<size_t>(i)] = dot(w.row(i), cur.data(), w.cols) + b[static_cast<size_t>(i)];
        if (cache) cache->pre[static_cast<size_t>(l)] = next;

        const bool is_output = l == layers - 1;
        if (is_output) {
            apply_head(net.output_head, next);
        } else {
            for (double& v : next) v = activate(v, net.hidden_activation, net.leaky_slope);
            if (dropping) {
                const double keep = 1.0 - net.dropout_rate;
                std::bernoulli_distribution keep_dist(keep);
                Vec mask(next.size());
                for (size_t i = 0; i < next.size(); ++i) {
                    mask[i] = keep_dist(*rng) ? 1.0 / keep : 0.0;
                    next[i] *= mask[i];
                }
                if (cache) cache->dropout_mask[static_cast<size_t>(l)] = std::move(mask);
            }
        }
        if (cache) cache->act[static_cast<size_t>(l)] = next;
        cur = std::move(next);
    }
    return cur;
}

MlpGrads make_zero_grads(const Mlp& net) {
    MlpGrads g;
    for (int l = 0; l < net.layer_count(); ++l) {
        g.dW.emplace_back(net.weights[static_cast<size_t>(l)].rows,
                          net.weights[static_cast<size_t>(l)].cols);
        g.db.emplace_back(net.biases[static_cast<size_t>(l)].size(), 0.0);
    }
    g.dx.assign(static_cast<size_t>(net.input_dim()), 0.0);
    return g;
}

namespace {

// Shared by backward / backward_accumulate. Gradients are summed into acc.
void backprop_into(const Mlp& net, const ForwardCache& cache, const Vec& upstream,
                   MlpGrads& acc, bool want_dx) {
    const int layers = net.layer_count();
    if (cache.pre.size() != static_cast<size_t>(layers))
        throw std::invalid_argument("backward: stale or mismatched cache");
    if (upstream.size() != static_cast<size_t>(net.output_dim()))
        throw std::invalid_argument("backward: upstream dimension mismatch");

    // Map d/d-output to d/d-logit of the output layer.
    Vec delta = upstream;
    const Vec& out_act = cache.act[static_cast<size_t>(layers - 1)];
    switch (net.output_head) {
        case Head::linear:
            break;
        case Head::sigmoid:
            for (size_t i = 0; i < delta.size(); ++i)
                delta[i] *= out_act[i] * (1.0 - out_act[i]);
            break;
        case Head::softmax: {
            const double inner = dot(delta.data(), out_act.data(), static_cast<int>(delta.size()));
            Vec d(delta.size());
            for (size_t i = 0; i < delta.size(); ++i)
                d[i] = out_act[i] * (delta[i] - inner);
            delta = std::move(d);
            break;
        }
    }

    for (int l = layers - 1; l >= 0; --l) {
        const Matrix& w = net.weights[static_cast<size_t>(l)];
        const Vec& below =
            l == 0 ? cache.input : cache.act[static_cast<size_t>(l - 1)];
        Matrix& dw = acc.dW[static_cast<size_t>(l)];
        Vec& db = acc.db[static_cast<size_t>(l)];
        for (int i = 0; i < w.rows; ++i) {
            const double di = delta[static_cast<size_t>(i)];
            if (di != 0.0) axpy(di, below.data(), dw.row(i), w.cols);
            db[static_cast<size_t>(i)] += di;
        }
        if (l == 0) {
            if (want_dx) {
                for (int i = 0; i < w.rows; ++i)
                    axpy(delta[static_cast<size_t>(i)], w.row(i), acc.dx.data(), w.cols);
            }
            break;
        }
        // Propagate through W, then the dropout mask and activation of layer l-1.
        Vec prev(static_cast<size_t>(w.cols), 0.0);
        for (int i = 0; i < w.rows; ++i)
            axpy(delta[static_cast<size_t>(i)], w.row(i), prev.data(), w.cols);
        const Vec& mask = cache.dropout_mask[static_cast<size_t>(l - 1)];
        if (!mask.empty())
            for (size_t i = 0; i < prev.size(); ++i) prev[i] *= mask[i];
        const Vec& pre = cache.pre[static_cast<size_t>(l - 1)];
        for (size_t i = 0; i < prev.size(); ++i)
            prev[i] *= activate_deriv(pre[i], net.hidden_activation, net.leaky_slope);
        delta = std::move(prev);
    }
}

}  // namespace

MlpGrads backward(const Mlp& net, const ForwardCache& cache, const Vec& upstream) {
    MlpGrads g = make_zero_grads(net);
    backprop_into(net, cache, upstream, g, /*want_dx=*/true);
    return g;
}

void backward_accumulate(const Mlp& net, const ForwardCache& cache, const Vec& upstream,
                         MlpGrads& acc) {
    backprop_into(net, cache, upstream, acc, /*want_dx=*/false);
}

double binary_cross_entropy(double p, int y) {
    p = clamp_prob(p);
    return y ? -std::log(p) : -std::log(1.0 - p);
}

double binary_cross_entropy_grad(double p, int y) {
    p = clamp_prob(p);
    return y ? -1.0 / p : 1.0 / (1.0 - p);
}

std::pair<double, Vec> softmax_cross_entropy(const Vec& logits, int y) {
    if (y < 0 || y >= static_cast<int>(logits.size()))
        throw std::out_of_range("softmax_cross_entropy: class out of range");
    const double mx = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    Vec probs(logits.size());
    for (size_t i = 0; i < logits.size(); ++i) {
        probs[i] = std::exp(logits[i] - mx);
        sum += probs[i];
    }
    for (double& p : probs) p /= sum;
    const double loss = -(logits[static_cast<size_t>(y)] - mx - std::log(sum));
    Vec grad = probs;
    grad[static_cast<size_t>(y)] -= 1.0;
    return {loss, std::move(grad)};
}

void validate(const TrainConfig& cfg) {
    if (cfg.learning_rate <= 0.0) throw std::invalid_argument("learning_rate must be > 0");
    if (cfg.batch_size <= 0) throw std::invalid_argument("batch_size must be > 0");
    if (cfg.epochs <= 0) throw std::invalid_argument("epochs must be > 0");
}

void sgd_step(double* p, const double* g, int n, double lr) {
    for (int i = 0; i < n; ++i) p[i] -= lr * g[i];
}

void adam_step(double* p, const double* g, int n, AdamMoments& moments, long t,
               double lr, double beta1, double beta2, double eps) {
    if (moments.m.size() != static_cast<size_t>(n)) {
        moments.m.assign(static_cast<size_t>(n), 0.0);
        moments.v.assign(static_cast<size_t>(n), 0.0);
    }
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    for (int i = 0; i < n; ++i) {
        moments.m[static_cast<size_t>(i)] =
            beta1 * moments.m[static_cast<size_t>(i)] + (1.0 - beta1) * g[i];
        moments.v[static_cast<size_t>(i)] =
            beta2 * moments.v[static_cast<size_t>(i)] + (1.0 - beta2) * g[i] * g[i];
        const double mhat = moments.m[static_cast<size_t>(i)] / bc1;
        const double vhat = moments.v[static_cast<size_t>(i)] / bc2;
        p[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
}

MlpTrainer::MlpTrainer(Mlp& n, const TrainConfig& c) : net(&n), cfg(c) {
    validate(cfg);
    weight_moments.resize(n.weights.size());
    bias_moments.resize(n.biases.size());
}

void MlpTrainer::apply(const MlpGrads& grad_sum, int batch_size) {
    if (batch_size <= 0) return;
    const double inv = 1.0 / static_cast<double>(batch_size);
    ++step_count;
    for (size_t l = 0; l < net->weights.size(); ++l) {
        Matrix& w = net->weights[l];
        Vec& b = net->biases[l];
        Vec gw = grad_sum.dW[l].data;
        Vec gb = grad_sum.db[l];
        for (double& v : gw) v *= inv;
        for (double& v : gb) v *= inv;
        if (cfg.optimizer == OptimizerKind::sgd) {
            sgd_step(w.data.data(), gw.data(), static_cast<int>(gw.size()), cfg.learning_rate);
            sgd_step(b.data(), gb.data(), static_cast<int>(gb.size()), cfg.learning_rate);
        } else {
            adam_step(w.data.data(), gw.data(), static_cast<int>(gw.size()), weight_moments[l],
                      step_count, cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2,
                      cfg.adam_eps);
            adam_step(b.data(), gb.data(), static_cast<int>(gb.size()), bias_moments[l],
                      step_count, cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2,
                      cfg.adam_eps);
        }
    }
}

double grad_check(const Mlp& net, const LossFn& loss, const double* x, double step) {
    if (net.dropout_rate != 0.0)
        throw std::invalid_argument("grad_check requires dropout disabled");
    ForwardCache cache;
    const Vec out = forward(net, x, Mode::eval, nullptr, &cache);
    const auto [base_loss, dout] = loss(out);
    (void)base_loss;
    const MlpGrads analytic = backward(net, cache, dout);

    Mlp probe = net;
    double max_rel = 0.0;
    auto check_param = [&](double& param, double analytic_grad) {
        const double saved = param;
        param = saved + step;
        const double lp = loss(forward(probe, x, Mode::eval)).first;
        param = saved - step;
        const double lm = loss(forward(probe, x, Mode::eval)).first;
        param = saved;
        const double numeric = (lp - lm) / (2.0 * step);
        const double rel = std::fabs(analytic_grad - numeric) /
                           std::max({std::fabs(analytic_grad), std::fabs(numeric), 1e-8});
        max_rel = std::max(max_rel, rel);
    };
    for (size_t l = 0; l < probe.weights.size(); ++l) {
        for (size_t i = 0; i < probe.weights[l].data.size(); ++i)
            check_param(probe.weights[l].data[i], analytic.dW[l].data[i]);
        for (size_t i = 0; i < probe.biases[l].size(); ++i)
            check_param(probe.biases[l][i], analytic.db[l][i]);
    }
    return max_rel;
}

std::vector<double> train_classifier(Mlp& net, const std::vector<Vec>& inputs,
                                     const std::vector<int>& labels, const TrainConfig& cfg) {
    validate(cfg);
    if (inputs.size() != labels.size())
        throw std::invalid_argument("train_classifier: inputs/labels size mismatch");
    if (inputs.empty()) throw std::invalid_argument("train_classifier: empty dataset");
    const bool binary = net.output_head == Head::sigmoid;
    if (binary && net.output_dim() != 1)
        throw std::invalid_argument("binary classifier needs output dim 1");

    auto rng = make_rng(derive_seed(cfg.seed, 0xc1a551f1ull));
    MlpTrainer trainer(net, cfg);
    std::vector<size_t> order(inputs.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;

    std::vector<double> epoch_losses;
    MlpGrads acc = make_zero_grads(net);
    ForwardCache cache;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double total = 0.0;
        size_t pos = 0;
        while (pos < order.size()) {
            const size_t batch_end = std::min(order.size(), pos + static_cast<size_t>(cfg.batch_size));
            for (auto& m : acc.dW) std::fill(m.data.begin(), m.data.end(), 0.0);
            for (auto& b : acc.db) std::fill(b.begin(), b.end(), 0.0);
            for (size_t k = pos; k < batch_end; ++k) {
                const size_t idx = order[k];
                const Vec out = forward(net, inputs[idx].data(), Mode::train, &rng, &cache);
                if (binary) {
                    const double p = out[0];
                    total += binary_cross_entropy(p, labels[idx]);
                    backward_accumulate(net, cache,
                                        {binary_cross_entropy_grad(p, labels[idx])}, acc);
                } else {
                    auto [loss, grad] = softmax_cross_entropy(out, labels[idx]);
                    total += loss;
                    backward_accumulate(net, cache, grad, acc);
                }
            }
            trainer.apply(acc, static_cast<int>(batch_end - pos));
            pos = batch_end;
        }
        const double mean_loss = total / static_cast<double>(inputs.size());
        if (!std::isfinite(mean_loss))
            throw DivergenceError("classifier training diverged (non-finite loss)");
        epoch_losses.push_back(mean_loss);
    }
    return epoch_losses;
}

int predict_class(const Mlp& net, const double* x) {
    const Vec out = forward(net, x, Mode::eval);
    if (net.output_head == Head::sigmoid) return out[0] >= 0.5 ? 1 : 0;
    return static_cast<int>(std::max_element(out.begin(), out.end()) - out.begin());
}

void write_mlp_block(const Mlp& net, std::ostream& out) {
    out << "mlp 1\n";
    out << "dims";
    for (int d : net.layer_dims) out << " " << d;
    out << "\n";
    out << "hidden " << activation_name(net.hidden_activation) << " "
        << format_g17(net.leaky_slope) << "\n";
    out << "head " << head_name(net.output_head) << "\n";
    out << "dropout " << format_g17(net.dropout_rate) << "\n";
    for (int l = 0; l < net.layer_count(); ++l) {
        const Matrix& w = net.weights[static_cast<size_t>(l)];
        out << "layer " << l << " " << w.rows << " " << w.cols << "\n";
        for (int i = 0; i < w.rows; ++i) {
            const double* r = w.row(i);
            for (int j = 0; j < w.cols; ++j) out << (j ? " " : "") << format_g17(r[j]);
            out << "\n";
        }
        const Vec& b = net.biases[static_cast<size_t>(l)];
        for (size_t i = 0; i < b.size(); ++i) out << (i ? " " : "") << format_g17(b[i]);
        out << "\n";
    }
}

Mlp read_mlp_block(std::istream& in) {
    std::string tag;
    int version = 0;
    if (!(in >> tag >> version) || tag != "mlp" || version != 1)
        throw std::runtime_error("bad mlp checkpoint header");
    std::string key;
    if (!(in >> key) || key != "dims") throw std::runtime_error("expected dims");
    Mlp net;
    {
        std::string rest;
        std::getline(in, rest);
        std::istringstream ss(rest);
        int d;
        while (ss >> d) net.layer_dims.push_back(d);
    }
    if (net.layer_dims.size() < 2) throw std::runtime_error("bad dims");
    std::string act;
    double slope = 0.0;
    if (!(in >> key >> act >> slope) || key != "hidden")
        throw std::runtime_error("expected hidden activation");
    net.hidden_activation = activation_from_name(act);
    net.leaky_slope = slope;
    std::string head;
    if (!(in >> key >> head) || key != "head") throw std::runtime_error("expected head");
    net.output_head = head_from_name(head);
    if (!(in >> key >> net.dropout_rate) || key != "dropout")
        throw std::runtime_error("expected dropout");
    for (size_t l = 0; l + 1 < net.layer_dims.size(); ++l) {
        int idx = 0, rows = 0, cols = 0;
        if (!(in >> key >> idx >> rows >> cols) || key != "layer" ||
            rows != net.layer_dims[l + 1] || cols != net.layer_dims[l])
            throw std::runtime_error("bad layer header");
        Matrix w(rows, cols);
        for (double& v : w.data)
            if (!(in >> v)) throw std::runtime_error("truncated weights");
        Vec b(static_cast<size_t>(rows));
        for (double& v : b)
            if (!(in >> v)) throw std::runtime_error("truncated biases");
        net.weights.push_back(std::move(w));
        net.biases.push_back(std::move(b));
    }
    return net;
}

void save_mlp(const Mlp& net, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    write_mlp_block(net, out);
    if (!out) throw std::runtime_error("write failed: " + path);
}

Mlp load_mlp(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open: " + path);
    return read_mlp_block(in);
}

}  // namespace kgfair
