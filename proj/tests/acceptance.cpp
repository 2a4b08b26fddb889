// Acceptance gate. Each numbered criterion prints exactly one PASS/FAIL line;
// the process exits nonzero if any fail. Pass criterion numbers as arguments
// to run a subset, e.g. `acceptance 1 7 9`.
#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <limits>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "kgfair/datagen.hpp"
#include "kgfair/fan.hpp"
#include "kgfair/graph.hpp"
#include "kgfair/kge.hpp"
#include "kgfair/nn.hpp"
#include "kgfair/probe.hpp"
#include "kgfair/rng.hpp"
#include "kgfair/sgns.hpp"
#include "kgfair/walks.hpp"
#include "util.hpp"

using namespace kgfair;
namespace fs = std::filesystem;

namespace {

struct Check {
    bool ok = true;
    std::string note;
    void expect(bool cond, const std::string& what) {
        if (!cond && ok) {
            ok = false;
            note = what;
        }
    }
};

double rel_err(double analytic, double numeric) {
    return std::fabs(analytic - numeric) /
           std::max({std::fabs(analytic), std::fabs(numeric), 1e-8});
}

// ---------------------------------------------------------------- criterion 1

double check_sgns_gradients(Check& c) {
    const int dim = 5, k = 3;
    auto rng = make_rng(0x5615);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    double worst = 0.0;
    for (int inst = 0; inst < 20; ++inst) {
        Vec center(dim), ctx(dim);
        std::vector<Vec> negs(k, Vec(dim));
        for (double& x : center) x = u(rng);
        for (double& x : ctx) x = u(rng);
        for (Vec& n : negs)
            for (double& x : n) x = u(rng);
        std::vector<const double*> neg_ptrs;
        for (const Vec& n : negs) neg_ptrs.push_back(n.data());

        Vec d_center, d_ctx;
        std::vector<Vec> d_negs;
        sgns_pair_grads(center.data(), ctx.data(), neg_ptrs, dim, d_center, d_ctx, d_negs);

        const double step = 1e-5;
        auto fd = [&](double* slot, double analytic) {
            const double keep = *slot;
            *slot = keep + step;
            const double up = sgns_pair_loss(center.data(), ctx.data(), neg_ptrs, dim);
            *slot = keep - step;
            const double down = sgns_pair_loss(center.data(), ctx.data(), neg_ptrs, dim);
            *slot = keep;
            worst = std::max(worst, rel_err(analytic, (up - down) / (2.0 * step)));
        };
        for (int i = 0; i < dim; ++i) {
            fd(&center[static_cast<size_t>(i)], d_center[static_cast<size_t>(i)]);
            fd(&ctx[static_cast<size_t>(i)], d_ctx[static_cast<size_t>(i)]);
            for (int n = 0; n < k; ++n)
                fd(&negs[static_cast<size_t>(n)][static_cast<size_t>(i)],
                   d_negs[static_cast<size_t>(n)][static_cast<size_t>(i)]);
        }
    }
    c.expect(worst < 1e-4, "sgns gradient rel err " + std::to_string(worst));
    return worst;
}

void add_into(EmbeddingTable& table, int row, const Vec& g, double s) {
    if (g.empty()) return;
    double* r = table.row(row);
    for (size_t i = 0; i < g.size(); ++i) r[i] += s * g[i];
}

double margin_loss(const KgeModel& m, const Triple& pos, const Triple& neg, double margin) {
    return std::max(0.0, margin + score(m, pos.head, pos.relation, pos.tail) -
                             score(m, neg.head, neg.relation, neg.tail));
}

double check_kge_gradients(Check& c) {
    const double margin = 1.0, step = 1e-5;
    double worst = 0.0;
    for (KgeKind kind : {KgeKind::transE, KgeKind::transH, KgeKind::transD}) {
        int accepted = 0;
        uint64_t inst_seed = 0x4242;
        while (accepted < 20) {
            KgeModel m = make_kge_model(kind, 8, 3, 6, inst_seed++);
            auto rng = make_rng(inst_seed);
            std::uniform_int_distribution<int> ent(0, 7), rel(0, 2);
            const Triple pos{ent(rng), rel(rng), ent(rng)};
            Triple neg = pos;
            do {
                neg.tail = ent(rng);
            } while (neg.tail == pos.tail);
            // keep the hinge active and clear of its own kink and sqrt kinks
            const double sp = score(m, pos.head, pos.relation, pos.tail);
            const double sn = score(m, neg.head, neg.relation, neg.tail);
            if (margin + sp - sn < 1e-2 || sp < 1e-3 || sn < 1e-3) continue;
            ++accepted;

            KgeModel grads = m;
            for (EmbeddingTable* t : {&grads.entity_vecs, &grads.relation_vecs,
                                      &grads.relation_normals, &grads.entity_proj,
                                      &grads.relation_proj})
                std::fill(t->data.begin(), t->data.end(), 0.0);
            auto accumulate = [&](const Triple& triple, const ScoreGrads& g, double s) {
                add_into(grads.entity_vecs, triple.head, g.d_head, s);
                add_into(grads.entity_vecs, triple.tail, g.d_tail, s);
                add_into(grads.relation_vecs, triple.relation, g.d_rel, s);
                add_into(grads.relation_normals, triple.relation, g.d_normal, s);
                add_into(grads.entity_proj, triple.head, g.d_head_proj, s);
                add_into(grads.entity_proj, triple.tail, g.d_tail_proj, s);
                add_into(grads.relation_proj, triple.relation, g.d_rel_proj, s);
            };
            accumulate(pos, score_gradients(m, pos.head, pos.relation, pos.tail), 1.0);
            accumulate(neg, score_gradients(m, neg.head, neg.relation, neg.tail), -1.0);

            const std::vector<std::pair<EmbeddingTable*, EmbeddingTable*>> pairs = {
                {&m.entity_vecs, &grads.entity_vecs},
                {&m.relation_vecs, &grads.relation_vecs},
                {&m.relation_normals, &grads.relation_normals},
                {&m.entity_proj, &grads.entity_proj},
                {&m.relation_proj, &grads.relation_proj}};
            for (const auto& [params, analytic] : pairs) {
                for (size_t i = 0; i < params->data.size(); ++i) {
                    const double keep = params->data[i];
                    params->data[i] = keep + step;
                    const double up = margin_loss(m, pos, neg, margin);
                    params->data[i] = keep - step;
                    const double down = margin_loss(m, pos, neg, margin);
                    params->data[i] = keep;
                    worst = std::max(
                        worst, rel_err(analytic->data[i], (up - down) / (2.0 * step)));
                }
            }
        }
    }
    c.expect(worst < 1e-4, "kge margin gradient rel err " + std::to_string(worst));
    return worst;
}

double check_probe_gradients(Check& c) {
    auto rng = make_rng(0x9806);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    double worst = 0.0;
    for (int inst = 0; inst < 20; ++inst) {
        const int y = inst % 2;
        const Mlp bin = make_mlp({5, 8, 1}, Activation::relu, Head::sigmoid, 0.0,
                                 2000 + static_cast<uint64_t>(inst));
        Vec x(5);
        for (double& v : x) v = u(rng);
        worst = std::max(worst, grad_check(bin,
                                           [y](const Vec& out) {
                                               return std::pair<double, Vec>{
                                                   binary_cross_entropy(out[0], y),
                                                   {binary_cross_entropy_grad(out[0], y)}};
                                           },
                                           x.data()));

        const int cls = inst % 3;
        const Mlp multi = make_mlp({4, 7, 3}, Activation::leaky_relu, Head::linear, 0.0,
                                   3000 + static_cast<uint64_t>(inst));
        Vec x2(4);
        for (double& v : x2) v = u(rng);
        worst = std::max(
            worst, grad_check(
                       multi,
                       [cls](const Vec& logits) { return softmax_cross_entropy(logits, cls); },
                       x2.data()));
    }
    c.expect(worst < 1e-4, "probe gradient rel err " + std::to_string(worst));
    return worst;
}

double check_fan_gradients(Check& c) {
    const int dim = 5;
    auto rng = make_rng(0xfa6);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const double step = 1e-5;
    double worst = 0.0;
    for (int inst = 0; inst < 20; ++inst) {
        FanModel m = make_fan_model(dim, inst % 2 ? 0.05 : 2.0, 0.0,
                                    4000 + static_cast<uint64_t>(inst));
        Vec h(dim);
        for (double& v : h) v = u(rng);
        const int y = inst % 2;
        const MlpGrads g = fan_filter_gradients(m, h.data(), y);
        for (size_t l = 0; l < m.filter.weights.size(); ++l) {
            auto fd = [&](std::vector<double>& params, size_t i, double analytic) {
                const double keep = params[i];
                params[i] = keep + step;
                const double up = fan_loss(m, h.data(), y).total;
                params[i] = keep - step;
                const double down = fan_loss(m, h.data(), y).total;
                params[i] = keep;
                worst = std::max(worst, rel_err(analytic, (up - down) / (2.0 * step)));
            };
            for (size_t i = 0; i < m.filter.weights[l].data.size(); ++i)
                fd(m.filter.weights[l].data, i, g.dW[l].data[i]);
            for (size_t i = 0; i < m.filter.biases[l].size(); ++i)
                fd(m.filter.biases[l], i, g.db[l][i]);
        }
    }
    c.expect(worst < 1e-4, "fan composed gradient rel err " + std::to_string(worst));
    return worst;
}

Check criterion1() {
    Check c;
    check_sgns_gradients(c);
    check_kge_gradients(c);
    check_probe_gradients(c);
    check_fan_gradients(c);
    return c;
}

// ---------------------------------------------------------------- criterion 2

Check criterion2() {
    Check c;
    auto rng = make_rng(0x2222);
    std::uniform_real_distribution<double> u(-1.0, 1.0);

    // transH: projecting twice is projecting once; adding the normal as the
    // relation shifts the squared score by exactly 1
    for (int inst = 0; inst < 20 && c.ok; ++inst) {
        const int dim = 7;
        KgeModel m = make_kge_model(KgeKind::transH, 3, 1, dim, 500 + inst);
        Vec h(dim);
        for (double& v : h) v = u(rng);
        std::copy(h.begin(), h.end(), m.entity_vecs.row(0));
        std::fill_n(m.entity_vecs.row(1), dim, 0.0);
        std::fill_n(m.relation_vecs.row(0), dim, 0.0);
        const double* w = m.relation_normals.row(0);
        const double wh = dot(w, h.data(), dim);
        for (int i = 0; i < dim; ++i) m.entity_vecs.row(2)[i] = h[i] - wh * w[i];

        const double plain = score(m, 0, 0, 1);
        const double idem = score(m, 2, 0, 1);
        c.expect(std::fabs(idem - plain) <= 1e-12, "transH projection not idempotent");

        std::copy_n(w, dim, m.relation_vecs.row(0));
        const double shifted = score(m, 0, 0, 1);
        c.expect(std::fabs(shifted * shifted - (plain * plain + 1.0)) <= 1e-12,
                 "transH normal not orthogonal to projected vectors");
    }

    // transD with zeroed projection vectors degenerates to transE
    for (int inst = 0; inst < 20 && c.ok; ++inst) {
        KgeModel td = make_kge_model(KgeKind::transD, 8, 3, 6, 900 + inst);
        std::fill(td.entity_proj.data.begin(), td.entity_proj.data.end(), 0.0);
        std::fill(td.relation_proj.data.begin(), td.relation_proj.data.end(), 0.0);
        KgeModel te = make_kge_model(KgeKind::transE, 8, 3, 6, 901);
        te.entity_vecs = td.entity_vecs;
        te.relation_vecs = td.relation_vecs;
        for (int h = 0; h < 8 && c.ok; ++h)
            for (int r = 0; r < 3; ++r)
                for (int t = 0; t < 8; ++t)
                    c.expect(std::fabs(score(td, h, r, t) - score(te, h, r, t)) <= 1e-12,
                             "transD with zero projections differs from transE");
    }

    // norm constraints hold after every optimizer step of a real training run
    SyntheticKgSpec spec;
    spec.n_persons = 150;
    spec.n_occupations = 4;
    spec.seed = 0x51;
    const SyntheticKg data = gen_kg(spec);
    c.expect(data.kg.triples.size() >= 500,
             "constraint run too small: " + std::to_string(data.kg.triples.size()));

    KgeTrainConfig tc;
    tc.dim = 16;
    tc.margin = 1.0;
    tc.learning_rate = 0.1;
    tc.epochs = 25;
    tc.batch_size = 32;
    tc.seed = 0x52;
    long steps = 0;
    bool norms_ok = true;
    train_kge(data.kg, KgeKind::transH, tc,
              [&](const KgeModel& m, int, long) {
                  ++steps;
                  for (int e = 0; e < m.entity_count(); ++e)
                      if (norm(m.entity_vecs.row(e), m.dim) > 1.0 + 1e-9) norms_ok = false;
                  for (int r = 0; r < m.relation_count(); ++r)
                      if (std::fabs(norm(m.relation_normals.row(r), m.dim) - 1.0) > 1e-9)
                          norms_ok = false;
              });
    c.expect(steps > 0, "observer never fired");
    c.expect(norms_ok, "norm constraint violated during training");
    return c;
}

// --------------------------------------------- criteria 3/4/5/8: CLI pipelines
//
// These criteria exercise the shipped binary end to end via KGFAIR_CLI. Every
// stage seed and hyperparameter below is pinned, so the numbers the gate sees
// are the ones frozen at bring-up, reproduced bit for bit.

int run_cli(const std::string& args) {
    const char* cli = std::getenv("KGFAIR_CLI");
    if (!cli) return -1;
    const std::string cmd = std::string(cli) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return (status != -1 && WIFEXITED(status)) ? WEXITSTATUS(status) : -1;
}

// value of `key=` in <dir>/manifest-<stage>.txt, NaN when absent
double manifest_value(const std::string& dir, const std::string& stage,
                      const std::string& key) {
    const std::string text = testutil::slurp(dir + "/manifest-" + stage + ".txt");
    const std::string want = key + "=";
    size_t pos = 0;
    while (pos < text.size()) {
        size_t end = text.find('\n', pos);
        if (end == std::string::npos) end = text.size();
        const std::string line = text.substr(pos, end - pos);
        if (line.rfind(want, 0) == 0) return std::stod(line.substr(want.size()));
        pos = end + 1;
    }
    return std::numeric_limits<double>::quiet_NaN();
}

std::vector<ReportBin> report_bins(const std::string& audit_dir) {
    std::vector<ReportBin> bins;
    std::string report;
    for (const auto& e : fs::directory_iterator(audit_dir)) {
        const std::string name = e.path().filename().string();
        if (name.size() > 11 && name.rfind("-report.csv") == name.size() - 11)
            report = e.path().string();
    }
    if (report.empty()) return bins;
    const std::string text = testutil::slurp(report);
    size_t pos = text.find('\n');  // skip header
    while (pos != std::string::npos && ++pos < text.size()) {
        size_t end = text.find('\n', pos);
        if (end == std::string::npos) end = text.size();
        std::string line = text.substr(pos, end - pos);
        pos = end;
        std::vector<double> fields;
        size_t start = 0;
        while (start <= line.size()) {
            size_t comma = line.find(',', start);
            if (comma == std::string::npos) comma = line.size();
            fields.push_back(std::stod(line.substr(start, comma - start)));
            start = comma + 1;
        }
        if (fields.size() != 6) continue;
        bins.push_back(ReportBin{fields[0], fields[1], static_cast<int>(fields[2]),
                                 fields[3], fields[4], fields[5]});
    }
    return bins;
}

// one attribute audit against the gate's probe instrument; "" when the stage fails
std::string run_audit(const std::string& root, const std::string& name,
                      const std::string& embeddings, const std::string& kg_dir,
                      const std::string& attr, bool binned) {
    const std::string cfg = root + "/" + name + ".cfg";
    std::string text = "[run]\nseed = 3\n[audit]\nkind = attr\nembeddings = " +
                       embeddings + "\ntriples = " + kg_dir + "/triples.tsv\nlabels = " +
                       kg_dir + "/" + attr + ".tsv\nattribute = " + attr +
                       "\nfolds = 5\nprobe_epochs = 25\n";
    if (binned) text += "bins = 5\nmin_occupancy = 150\n";
    testutil::spit(cfg, text);
    const std::string out = root + "/" + name;
    if (run_cli("audit --config " + cfg + " --out " + out + " --quiet") != 0) return "";
    return out;
}

const std::string kLeakyKgConfig =
    "[generate]\nkind = kg\n[kg]\nn_persons = 2000\nn_occupations = 10\n"
    "structural_leak = 0.8\noccupation_gender_correlation = 0.2\n";

// FAN operating point shared by every debias stage in the gate. The filter
// needs a near-optimal discriminator (15 steps per filter step) and a slow
// filter (lr 1e-4) to grind the high-degree residual down without pushing the
// low-degree mass into anti-generalizing territory; 700 epochs is the travel
// that lands both in band.
std::string debias_config(int run_seed, const std::string& embeddings,
                          const std::string& kg_dir, const std::string& lambda) {
    return "[run]\nseed = " + std::to_string(run_seed) + "\n[debias]\nembeddings = " +
           embeddings + "\ntriples = " + kg_dir + "/triples.tsv\nlabels = " + kg_dir +
           "/gender.tsv\nattribute = gender\nlambda = " + lambda +
           "\ndropout = 0\npretrain_epochs = 60\ndisc_steps = 15\nepochs = 700\n"
           "batch_size = 64\nlearning_rate = 0.0001\n";
}

struct KgeRecipe {
    const char* kind;
    const char* learning_rate;
    const char* epochs;
};
// per-kind operating points: strong enough that probes extract the planted
// leak (>= 0.65), weak enough that the adversarial filter can still remove it
constexpr KgeRecipe kPipelineKge[] = {{"transH", "0.27", "315"},
                                      {"transD", "0.14", "220"}};

std::string embed_config(int run_seed, const KgeRecipe& r, const std::string& kg_dir,
                         const std::string& extra = "") {
    return "[run]\nseed = " + std::to_string(run_seed) + "\n[embed]\nkind = " + r.kind +
           "\ntriples = " + kg_dir + "/triples.tsv\n" + extra + "dim = 50\nepochs = " +
           r.epochs + "\nlearning_rate = " + std::string(r.learning_rate) +
           "\nmargin = 1.0\nbatch_size = 128\n";
}

struct PipelineEval {
    std::string kind;
    int seed = 0;
    bool stages_ok = false;
    std::string fail_note;
    double gender_unfilt = 0.0, gender_l50 = 0.0, gender_l05 = 0.0;
    double occ_unfilt = 0.0, occ_l50 = 0.0, occ_l05 = 0.0;
    double unfilt_trend = 0.0;      // spearman over degree bins, unfiltered gender
    bool filtered_bins_ok = false;  // both lambdas: every bin within 0.5 +- 0.07
};

struct PipelineRuns {
    testutil::TempDir dir{"acceptance-pipeline"};
    std::vector<PipelineEval> evals;  // empty when KGFAIR_CLI is unset
};

const PipelineRuns& pipeline_runs() {
    static PipelineRuns runs;
    static const bool built = [&] {
        if (!std::getenv("KGFAIR_CLI")) return false;
        const std::string root = runs.dir.path.string();
        for (int seed : {1, 2, 3}) {
            const std::string tag = std::to_string(seed);
            const std::string kg = root + "/kg" + tag;
            testutil::spit(root + "/gen" + tag + ".cfg",
                           "[run]\nseed = " + tag + "\n" + kLeakyKgConfig);
            const bool kg_ok = run_cli("generate --config " + root + "/gen" + tag +
                                       ".cfg --out " + kg + " --quiet") == 0;
            for (const KgeRecipe& recipe : kPipelineKge) {
                PipelineEval ev;
                ev.kind = recipe.kind;
                ev.seed = seed;
                runs.evals.push_back(ev);
                PipelineEval& e = runs.evals.back();
                if (!kg_ok) {
                    e.fail_note = "generate failed";
                    continue;
                }
                const std::string stem = std::string(recipe.kind) + "-" + tag;
                const std::string emb = root + "/emb-" + stem;
                testutil::spit(root + "/emb-" + stem + ".cfg",
                               embed_config(10 + seed, recipe, kg));
                if (run_cli("embed --config " + root + "/emb-" + stem + ".cfg --out " +
                            emb + " --quiet") != 0) {
                    e.fail_note = "embed failed";
                    continue;
                }
                const std::string gu =
                    run_audit(root, "gunf-" + stem, emb + "/entities.emb", kg, "gender",
                              true);
                const std::string ou = run_audit(root, "ounf-" + stem,
                                                 emb + "/entities.emb", kg, "occupation",
                                                 false);
                if (gu.empty() || ou.empty()) {
                    e.fail_note = "unfiltered audit failed";
                    continue;
                }
                e.gender_unfilt = manifest_value(gu, "audit", "accuracy");
                e.occ_unfilt = manifest_value(ou, "audit", "accuracy");
                AuditReport unfilt;
                unfilt.bins = report_bins(gu);
                e.unfilt_trend = bin_trend_spearman(unfilt);

                e.filtered_bins_ok = true;
                bool fan_ok = true;
                const struct {
                    const char* value;
                    const char* tag;
                    double* gender;
                    double* occ;
                } lambdas[] = {{"0.5", "l50", &e.gender_l50, &e.occ_l50},
                               {"0.05", "l05", &e.gender_l05, &e.occ_l05}};
                for (const auto& lam : lambdas) {
                    const std::string fan = root + "/fan-" + stem + "-" + lam.tag;
                    testutil::spit(fan + ".cfg",
                                   debias_config(40 + seed, emb + "/entities.emb", kg,
                                                 lam.value));
                    if (run_cli("debias --config " + fan + ".cfg --out " + fan +
                                " --quiet") != 0) {
                        e.fail_note = std::string("debias failed at lambda ") + lam.value;
                        fan_ok = false;
                        break;
                    }
                    const std::string gf =
                        run_audit(root, std::string("gfilt-") + lam.tag + "-" + stem,
                                  fan + "/filtered.emb", kg, "gender", true);
                    const std::string of =
                        run_audit(root, std::string("ofilt-") + lam.tag + "-" + stem,
                                  fan + "/filtered.emb", kg, "occupation", false);
                    if (gf.empty() || of.empty()) {
                        e.fail_note = "filtered audit failed";
                        fan_ok = false;
                        break;
                    }
                    *lam.gender = manifest_value(gf, "audit", "accuracy");
                    *lam.occ = manifest_value(of, "audit", "accuracy");
                    const std::vector<ReportBin> bins = report_bins(gf);
                    if (bins.empty()) e.filtered_bins_ok = false;
                    for (const ReportBin& b : bins)
                        if (std::fabs(b.mean_accuracy - 0.5) > 0.07)
                            e.filtered_bins_ok = false;
                }
                e.stages_ok = fan_ok;
            }
        }
        return true;
    }();
    (void)built;
    return runs;
}

Check criterion3() {
    Check c;
    const auto& evals = pipeline_runs().evals;
    if (evals.empty()) {
        c.expect(false, "KGFAIR_CLI not set; cannot drive the pipeline binary");
        return c;
    }
    int passing_seeds = 0;
    std::string detail;
    for (int seed : {1, 2, 3}) {
        bool seed_ok = true;
        for (const PipelineEval& ev : evals) {
            if (ev.seed != seed) continue;
            const bool ok = ev.stages_ok && ev.gender_unfilt >= 0.65 &&
                            std::fabs(ev.gender_l50 - 0.5) <= 0.05 &&
                            std::fabs(ev.gender_l05 - 0.5) <= 0.05 &&
                            ev.occ_unfilt - ev.occ_l50 <= 0.05 &&
                            ev.occ_unfilt - ev.occ_l05 <= 0.05;
            seed_ok = seed_ok && ok;
            char buf[176];
            std::snprintf(buf, sizeof buf,
                          "[%s seed %d: g %.3f -> %.3f/%.3f, occ %.3f -> %.3f/%.3f%s%s]",
                          ev.kind.c_str(), seed, ev.gender_unfilt, ev.gender_l50,
                          ev.gender_l05, ev.occ_unfilt, ev.occ_l50, ev.occ_l05,
                          ev.fail_note.empty() ? "" : " ", ev.fail_note.c_str());
            detail += buf;
        }
        passing_seeds += seed_ok;
    }
    c.expect(passing_seeds >= 2,
             "only " + std::to_string(passing_seeds) + "/3 seeds pass " + detail);
    if (c.ok) c.note = std::to_string(passing_seeds) + "/3 seeds";
    return c;
}

Check criterion5() {
    Check c;
    const auto& evals = pipeline_runs().evals;
    if (evals.empty()) {
        c.expect(false, "KGFAIR_CLI not set; cannot drive the pipeline binary");
        return c;
    }
    int passing_seeds = 0;
    std::string detail;
    for (int seed : {1, 2, 3}) {
        bool seed_ok = true;
        for (const PipelineEval& ev : evals) {
            if (ev.seed != seed) continue;
            seed_ok = seed_ok && ev.stages_ok && ev.unfilt_trend > 0.0 &&
                      ev.filtered_bins_ok;
            char buf[96];
            std::snprintf(buf, sizeof buf, "[%s seed %d: trend %.2f bins %s]",
                          ev.kind.c_str(), seed, ev.unfilt_trend,
                          ev.filtered_bins_ok ? "flat" : "leaky");
            detail += buf;
        }
        passing_seeds += seed_ok;
    }
    c.expect(passing_seeds >= 2, "only " + std::to_string(passing_seeds) +
                                     "/3 seeds show the degree profile " + detail);
    if (c.ok) c.note = std::to_string(passing_seeds) + "/3 seeds";
    return c;
}

// ---------------------------------------------------------------- criterion 4

Check criterion4() {
    Check c;
    if (!std::getenv("KGFAIR_CLI")) {
        c.expect(false, "KGFAIR_CLI not set; cannot drive the pipeline binary");
        return c;
    }
    testutil::TempDir dir("acceptance-c4");
    const std::string root = dir.path.string();
    const std::string kg = root + "/kg";
    testutil::spit(root + "/gen.cfg", "[run]\nseed = 1\n" + kLeakyKgConfig);
    if (run_cli("generate --config " + root + "/gen.cfg --out " + kg + " --quiet") != 0) {
        c.expect(false, "generate failed");
        return c;
    }
    // datagen's own feature-count classifier (no embeddings involved) confirms
    // the signal is planted before we ask whether embeddings pick it up
    const double oracle = manifest_value(kg, "generate", "oracle_gender_accuracy");
    c.expect(oracle >= 0.65, "planted-signal oracle too weak: " + std::to_string(oracle));

    // stronger operating point than criterion 3: with the explicit relation
    // gone the probe reads only pool structure, so give the optimizer more
    // travel to soak it up
    const KgeRecipe recipe{"transH", "0.5", "500"};
    testutil::spit(root + "/emb.cfg",
                   embed_config(14, recipe, kg, "remove_relation = hasGender\n"));
    if (run_cli("embed --config " + root + "/emb.cfg --out " + root + "/emb --quiet") !=
        0) {
        c.expect(false, "embed failed");
        return c;
    }
    const std::string aud =
        run_audit(root, "aud", root + "/emb/entities.emb", kg, "gender", false);
    if (aud.empty()) {
        c.expect(false, "audit failed");
        return c;
    }
    const double acc = manifest_value(aud, "audit", "accuracy");
    c.expect(acc >= 0.60, "gender probe after relation removal: " + std::to_string(acc));
    if (c.ok) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "probe %.3f, oracle %.2f", acc, oracle);
        c.note = buf;
    }
    return c;
}

// ---------------------------------------------------------------- criterion 6

Check criterion6() {
    Check c;
    int passing = 0;
    std::string detail;
    for (uint64_t seed : {1, 2, 3}) {
        SyntheticNetSpec nspec;
        nspec.n_nodes = 3000;
        nspec.attachment_m = 2;
        nspec.seed = derive_seed(seed, 61);
        const Network net = gen_network(nspec);

        WalkConfig wc;
        wc.walks_per_node = 10;
        wc.walk_length = 40;
        wc.p = 1.0;
        wc.q = 1.0;
        wc.seed = derive_seed(seed, 62);
        const Corpus corpus = generate_walks(net, wc);

        SgnsConfig sc;
        sc.dim = 64;
        sc.window = 4;
        sc.negatives_per_positive = 5;
        sc.epochs = 2;
        sc.seed = derive_seed(seed, 63);
        const NodeEmbedding emb = train_sgns(corpus, net.node_count, sc);

        const LinkProbeDataset full =
            build_link_dataset(net, net.edges, derive_seed(seed, 64));
        auto rng = make_rng(derive_seed(seed, 65));
        std::vector<size_t> pos_idx, neg_idx;
        for (size_t i = 0; i < full.examples.size(); ++i)
            (full.examples[i].label ? pos_idx : neg_idx).push_back(i);
        std::shuffle(pos_idx.begin(), pos_idx.end(), rng);
        std::shuffle(neg_idx.begin(), neg_idx.end(), rng);
        std::set<size_t> test_idx;
        for (size_t i = 0; i < pos_idx.size() / 5; ++i) test_idx.insert(pos_idx[i]);
        for (size_t i = 0; i < neg_idx.size() / 5; ++i) test_idx.insert(neg_idx[i]);
        LinkProbeDataset train_ds, test_ds;
        for (size_t i = 0; i < full.examples.size(); ++i)
            (test_idx.count(i) ? test_ds : train_ds).examples.push_back(full.examples[i]);

        ProbeConfig pc;
        pc.hidden_dims = {64};
        pc.train.epochs = 8;
        pc.train.learning_rate = 1e-3;
        pc.train.batch_size = 32;
        pc.train.seed = derive_seed(seed, 66);
        const Mlp probe = train_link_probe(train_ds, emb.vectors, pc);
        const std::vector<int> preds = link_predictions(probe, test_ds, emb.vectors);
        const PerNodeAccuracies per_node = per_node_accuracies(preds, test_ds);

        std::vector<double> degrees;
        degrees.reserve(per_node.nodes.size());
        for (int node : per_node.nodes)
            degrees.push_back(static_cast<double>(degree(net, node)));
        Binning binning;
        binning.bin_count = 8;
        binning.min_occupancy = 20;
        const AuditReport report = degree_binned_report(
            per_node.accuracy, per_node.example_count, degrees, binning);
        const double trend = bin_trend_spearman(report);
        passing += trend < 0.0;
        char buf[48];
        std::snprintf(buf, sizeof buf, "[seed %llu: rho %.3f]",
                      static_cast<unsigned long long>(seed), trend);
        detail += buf;
    }
    c.expect(passing >= 2, "only " + std::to_string(passing) +
                               "/3 seeds trend negative " + detail);
    if (c.ok) c.note = std::to_string(passing) + "/3 seeds " + detail;
    return c;
}

// ---------------------------------------------------------------- criterion 7

Check criterion7() {
    Check c;
    auto rng = make_rng(0x7007);
    std::uniform_real_distribution<double> u(-1.0, 1.0);

    for (int inst = 0; inst < 20 && c.ok; ++inst) {
        const int dim = 6;
        FanModel m = make_fan_model(dim, 0.3 + inst * 0.2, 0.0, 700 + inst);
        Vec h(dim);
        for (double& v : h) v = u(rng);
        for (int y : {0, 1}) {
            const FanLoss loss = fan_loss(m, h.data(), y);
            c.expect(std::fabs(loss.total - (m.lambda * loss.recon + loss.ce)) <= 1e-12,
                     "loss decomposition broken");
        }
    }

    {
        const int dim = 5;
        FanModel m = make_fan_model(dim, 1.0, 0.0, 0x71, 1.0);  // slope 1: exact identity
        for (Matrix& w : m.filter.weights) {
            std::fill(w.data.begin(), w.data.end(), 0.0);
            for (int i = 0; i < w.rows; ++i) w.at(i, i) = 1.0;
        }
        for (Vec& b : m.filter.biases) std::fill(b.begin(), b.end(), 0.0);
        for (Matrix& w : m.discriminator.weights)
            std::fill(w.data.begin(), w.data.end(), 0.0);
        for (Vec& b : m.discriminator.biases) std::fill(b.begin(), b.end(), 0.0);
        auto rng2 = make_rng(0x72);
        std::uniform_real_distribution<double> u2(-2.0, 2.0);
        for (int inst = 0; inst < 20 && c.ok; ++inst) {
            Vec h(dim);
            for (double& v : h) v = u2(rng2);
            const FanLoss loss = fan_loss(m, h.data(), inst % 2);
            c.expect(loss.recon <= 1e-12, "identity filter has nonzero reconstruction");
            c.expect(std::fabs(std::fabs(loss.ce) - std::log(2.0)) <= 1e-12,
                     "uninformative discriminator is not at ln 2");
        }
    }

    // endpoint monotonicity of the reconstruction/removal tradeoff
    {
        const int n = 160, dim = 6;
        FanDataset ds;
        ds.embeddings = EmbeddingTable(n, dim);
        auto rng3 = make_rng(0x73);
        std::normal_distribution<double> g(0.0, 1.0);
        for (int i = 0; i < n; ++i) {
            const int y = i % 2;
            for (int d = 0; d < dim; ++d) ds.embeddings.row(i)[d] = 0.4 * g(rng3);
            ds.embeddings.row(i)[0] += y ? 1.2 : -1.2;
            ds.labels.push_back(y);
            ds.entities.push_back(i);
        }
        auto recon_at = [&](double lambda) {
            FanModel m = make_fan_model(dim, lambda, 0.0, 0x74);
            FanTrainConfig fc;
            fc.pretrain_epochs = 60;
            fc.disc_steps_per_filter_step = 3;
            fc.epochs = 40;
            fc.batch_size = 32;
            fc.learning_rate = 2e-3;
            fc.seed = 0x75;
            pretrain(m, ds, fc);
            adversarial_train(m, ds, fc);
            const EmbeddingTable out = apply_filter(m, ds.embeddings);
            double s = 0.0;
            for (int i = 0; i < n; ++i)
                for (int d = 0; d < dim; ++d) {
                    const double diff = out.row(i)[d] - ds.embeddings.row(i)[d];
                    s += diff * diff;
                }
            return s / n;
        };
        const double heavy = recon_at(50.0), light = recon_at(0.05);
        c.expect(heavy < light, "recon(lambda=50) " + std::to_string(heavy) +
                                    " !< recon(lambda=0.05) " + std::to_string(light));
    }
    return c;
}

// ---------------------------------------------------------------- criterion 8

Check criterion8() {
    Check c;
    if (!std::getenv("KGFAIR_CLI")) {
        c.expect(false, "KGFAIR_CLI not set; cannot drive the pipeline binary");
        return c;
    }
    testutil::TempDir dir("acceptance-c8");
    const std::string root = dir.path.string();
    const std::string kg = root + "/kg";
    testutil::spit(root + "/gen.cfg",
                   "[run]\nseed = 8\n[generate]\nkind = kg\n[kg]\nn_persons = 2000\n"
                   "n_occupations = 10\nstructural_leak = 0.0\n"
                   "occupation_gender_correlation = 0.0\n");
    if (run_cli("generate --config " + root + "/gen.cfg --out " + kg + " --quiet") != 0) {
        c.expect(false, "generate failed");
        return c;
    }
    const double oracle = manifest_value(kg, "generate", "oracle_gender_accuracy");
    c.expect(std::fabs(oracle - 0.5) <= 0.05,
             "null graph still has planted signal: " + std::to_string(oracle));

    // gender triples removed as well, so no honest signal source remains: any
    // probe hit is hallucination. Sweep all three translational kinds.
    std::string detail;
    const KgeRecipe recipes[] = {
        {"transE", "0.27", "315"}, {"transH", "0.27", "315"}, {"transD", "0.14", "220"}};
    for (const KgeRecipe& recipe : recipes) {
        const std::string emb = root + "/emb-" + recipe.kind;
        testutil::spit(emb + ".cfg",
                       embed_config(18, recipe, kg, "remove_relation = hasGender\n"));
        if (run_cli("embed --config " + emb + ".cfg --out " + emb + " --quiet") != 0) {
            c.expect(false, std::string(recipe.kind) + " embed failed");
            return c;
        }
        const std::string gu = run_audit(root, std::string("g-") + recipe.kind,
                                         emb + "/entities.emb", kg, "gender", false);
        const std::string ou = run_audit(root, std::string("o-") + recipe.kind,
                                         emb + "/entities.emb", kg, "occupation", false);
        const std::string fan = root + "/fan-" + recipe.kind;
        testutil::spit(fan + ".cfg", debias_config(48, emb + "/entities.emb", kg, "0.5"));
        if (gu.empty() || ou.empty() ||
            run_cli("debias --config " + fan + ".cfg --out " + fan + " --quiet") != 0) {
            c.expect(false, std::string(recipe.kind) + " stage failed");
            return c;
        }
        const std::string of = run_audit(root, std::string("of-") + recipe.kind,
                                         fan + "/filtered.emb", kg, "occupation", false);
        if (of.empty()) {
            c.expect(false, std::string(recipe.kind) + " filtered audit failed");
            return c;
        }
        const double g_unfilt = manifest_value(gu, "audit", "accuracy");
        const double occ_unfilt = manifest_value(ou, "audit", "accuracy");
        const double occ_filt = manifest_value(of, "audit", "accuracy");
        c.expect(std::fabs(g_unfilt - 0.5) <= 0.05,
                 std::string(recipe.kind) +
                     " gender probe found phantom signal: " + std::to_string(g_unfilt));
        c.expect(occ_unfilt - occ_filt <= 0.05,
                 std::string(recipe.kind) + " filtering degraded occupation " +
                     std::to_string(occ_unfilt) + " -> " + std::to_string(occ_filt));
        char buf[80];
        std::snprintf(buf, sizeof buf, "[%s g %.3f occ %.3f -> %.3f]", recipe.kind,
                      g_unfilt, occ_unfilt, occ_filt);
        detail += buf;
    }
    if (c.ok) c.note = detail;
    return c;
}

// ---------------------------------------------------------------- criterion 9

std::string strip_wall_clock(const std::string& text) {
    std::string out;
    size_t pos = 0;
    while (pos < text.size()) {
        size_t end = text.find('\n', pos);
        if (end == std::string::npos) end = text.size();
        const std::string line = text.substr(pos, end - pos);
        if (line.rfind("wall_clock_s=", 0) != 0) out += line + "\n";
        pos = end + 1;
    }
    return out;
}

bool same_tree(const fs::path& a, const fs::path& b, std::string& why) {
    auto names = [](const fs::path& root) {
        std::vector<std::string> out;
        for (const auto& e : fs::recursive_directory_iterator(root))
            if (e.is_regular_file())
                out.push_back(fs::relative(e.path(), root).string());
        std::sort(out.begin(), out.end());
        return out;
    };
    const auto na = names(a), nb = names(b);
    if (na != nb) {
        why = "file sets differ under " + a.string() + " vs " + b.string();
        return false;
    }
    for (const std::string& rel : na) {
        std::string ca = testutil::slurp((a / rel).string());
        std::string cb = testutil::slurp((b / rel).string());
        if (rel.rfind("manifest-", 0) == 0) {
            ca = strip_wall_clock(ca);
            cb = strip_wall_clock(cb);
        }
        if (ca != cb) {
            why = rel + " differs between runs";
            return false;
        }
    }
    return true;
}

Check criterion9() {
    Check c;
    if (!std::getenv("KGFAIR_CLI")) {
        c.expect(false, "KGFAIR_CLI not set; cannot drive the pipeline binary");
        return c;
    }
    testutil::TempDir dir("acceptance");
    const std::string root = dir.path.string();
    auto sub = [&](const std::string& name) { return root + "/" + name; };

    testutil::spit(sub("gen.cfg"),
                   "[run]\nseed = 5\n[generate]\nkind = kg\n[kg]\nn_persons = 60\n"
                   "n_occupations = 3\nstructural_leak = 0.9\nextra_relations = 2\n");
    testutil::spit(sub("gennet.cfg"),
                   "[run]\nseed = 5\n[generate]\nkind = network\n[network]\n"
                   "n_nodes = 80\nattachment_m = 2\n");
    auto check_stage = [&](const std::string& name, const std::string& sub_cmd,
                           const std::string& cfg) {
        const std::string out_a = sub(name + "-a");
        const std::string out_b = sub(name + "-b");
        const std::string flags =
            cfg.empty() ? "" : (" --config " + cfg);
        if (run_cli(sub_cmd + flags + " --out " + out_a + " --quiet") != 0 ||
            run_cli(sub_cmd + flags + " --out " + out_b + " --quiet") != 0) {
            c.expect(false, name + " stage failed to run");
            return std::string();
        }
        std::string why;
        c.expect(same_tree(out_a, out_b, why), name + ": " + why);
        return out_a;
    };

    const std::string data = check_stage("generate", "generate", sub("gen.cfg"));
    const std::string netd = check_stage("gennet", "generate", sub("gennet.cfg"));
    if (!c.ok) return c;

    testutil::spit(sub("embed.cfg"),
                   "[run]\nseed = 5\n[embed]\nkind = transE\ntriples = " + data +
                       "/triples.tsv\ndim = 8\nepochs = 3\nlearning_rate = 0.05\n");
    const std::string emb = check_stage("embed", "embed", sub("embed.cfg"));
    testutil::spit(sub("walkembed.cfg"),
                   "[run]\nseed = 5\n[embed]\nkind = node2vec\nedges = " + netd +
                       "/edges.tsv\ndim = 8\nwalks_per_node = 2\nwalk_length = 10\n"
                       "epochs = 2\nsave_corpus = true\n");
    const std::string wemb = check_stage("walkembed", "embed", sub("walkembed.cfg"));
    if (!c.ok) return c;

    testutil::spit(sub("audit.cfg"),
                   "[run]\nseed = 5\n[audit]\nkind = attr\nembeddings = " + emb +
                       "/entities.emb\ntriples = " + data + "/triples.tsv\nlabels = " +
                       data + "/gender.tsv\nattribute = gender\nfolds = 3\nbins = 4\n"
                       "min_occupancy = 1\nhidden = 16\nprobe_epochs = 5\n");
    check_stage("audit", "audit", sub("audit.cfg"));
    testutil::spit(sub("auditlink.cfg"),
                   "[run]\nseed = 5\n[audit]\nkind = link\nembeddings = " + wemb +
                       "/nodes.emb\nedges = " + netd + "/edges.tsv\nbins = 4\n"
                       "min_occupancy = 1\nhidden = 16\nprobe_epochs = 5\n");
    check_stage("auditlink", "audit", sub("auditlink.cfg"));

    testutil::spit(sub("debias.cfg"),
                   "[run]\nseed = 5\n[debias]\nembeddings = " + emb +
                       "/entities.emb\ntriples = " + data + "/triples.tsv\nlabels = " +
                       data + "/gender.tsv\nattribute = gender\npretrain_epochs = 2\n"
                       "epochs = 4\nbatch_size = 16\n");
    const std::string fan = check_stage("debias", "debias", sub("debias.cfg"));
    if (!c.ok) return c;

    // report consumes the audit summaries, so stage its inputs into both dirs
    for (const char* side : {"report-a", "report-b"}) {
        fs::create_directories(sub(side));
        fs::copy_file(sub("audit-a") + "/gender-unfiltered-summary.csv",
                      sub(side) + "/gender-unfiltered-summary.csv");
    }
    if (run_cli("report --out " + sub("report-a") + " --quiet") != 0 ||
        run_cli("report --out " + sub("report-b") + " --quiet") != 0) {
        c.expect(false, "report stage failed to run");
        return c;
    }
    std::string why;
    c.expect(same_tree(sub("report-a"), sub("report-b"), why), "report: " + why);
    (void)fan;
    return c;
}

}  // namespace

int main(int argc, char** argv) {
    std::set<int> only;
    for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

    const std::vector<std::pair<const char*, Check (*)()>> criteria = {
        {"gradient correctness", criterion1},
        {"translational-model algebra", criterion2},
        {"leakage and filtering on synthetic kg", criterion3},
        {"signal survives relation removal", criterion4},
        {"degree-binned leakage profile", criterion5},
        {"walk-embedding popularity bias", criterion6},
        {"fan loss identities", criterion7},
        {"null-leakage control", criterion8},
        {"stage determinism", criterion9},
    };

    int failures = 0;
    for (size_t i = 0; i < criteria.size(); ++i) {
        const int id = static_cast<int>(i) + 1;
        if (!only.empty() && !only.count(id)) continue;
        const auto started = std::chrono::steady_clock::now();
        const Check c = criteria[i].second();
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - started)
                .count();
        std::printf("criterion %d (%s): %s%s%s (%.1f s)\n", id, criteria[i].first,
                    c.ok ? "PASS" : "FAIL", c.note.empty() ? "" : " - ",
                    c.note.c_str(), secs);
        std::fflush(stdout);
        failures += !c.ok;
    }
    return failures == 0 ? 0 : 1;
}
