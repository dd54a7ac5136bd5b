#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "hfl/data.hpp"
#include "hfl/federation.hpp"
#include "hfl/metrics.hpp"
#include "hfl/nn.hpp"
#include "hfl/rng.hpp"

namespace hfl {

struct AttackConfig {
    int num_shadow = 16;
    int distill_epochs = 25;
    int shadow_epochs = 20;       // matches a client's cumulative local epochs
    int shadow_train_size = 512;  // per-shadow training subset
    int batch_size = 32;
    double lr = 1e-3;
    int eval_cap = 5000;          // per-class cap of the MIA evaluation set
    bool yeom_min_knowledge = false;  // min(3, 1%) instead of max(3, 1%)
    bool exclude_knowledge_from_eval = true;
    int mlp_hidden = 32;
    int mlp_epochs = 300;
    int tmia_shadow_members = 256;
    int tmia_shadow_nonmembers = 256;
    int tmia_distill_size = 384;
    std::uint64_t seed = 0;
};

// Higher score always means "more member-like".
struct ScoredDecisions {
    std::vector<double> scores;
    std::vector<int> decisions;
    std::vector<int> labels;  // ground truth membership
};

struct AttackMetrics {
    double auc = 0, adv = 0, tpr_fpr01 = 0, tpr_fpr0001 = 0;
};

inline AttackMetrics score_metrics(const ScoredDecisions& sd) {
    AttackMetrics m;
    m.auc = auc(sd.scores, sd.labels);
    m.adv = advantage(sd.decisions, sd.labels);
    m.tpr_fpr01 = tpr_at_fpr(sd.scores, sd.labels, 0.1);
    m.tpr_fpr0001 = tpr_at_fpr(sd.scores, sd.labels, 0.001);
    return m;
}

struct AttackReport {
    int client = 0;
    AttackMetrics yeom, lira, tmia;
    double avg_auc = 0;
    ScoredDecisions yeom_scores, lira_scores, tmia_scores;
};

// ---------------------------------------------------------------------------
// Model query helpers
// ---------------------------------------------------------------------------

inline std::vector<double> per_sample_losses(ModelParams<float>& model, double r_c,
                                             const Dataset& data, int batch_size = 128) {
    std::vector<double> losses;
    losses.reserve(data.count());
    for (int start = 0; start < data.count(); start += batch_size) {
        const int end = std::min(data.count(), start + batch_size);
        std::vector<int> idx(end - start);
        std::iota(idx.begin(), idx.end(), start);
        Dataset batch = data.subset(idx);
        Tensor<float> logits = forward(model, batch.images, r_c, Mode::eval);
        const int C = logits.shape()[1];
        for (int i = 0; i < end - start; ++i) {
            const float* lp = &logits.at2(i, 0);
            float mx = lp[0];
            for (int k = 1; k < C; ++k) mx = std::max(mx, lp[k]);
            double z = 0;
            for (int k = 0; k < C; ++k) z += std::exp(double(lp[k] - mx));
            losses.push_back(std::log(z) - double(lp[batch.labels[i]] - mx));
        }
    }
    return losses;
}

// LiRA confidence: logit-scaled true-class probability.
inline std::vector<double> per_sample_confidences(ModelParams<float>& model, double r_c,
                                                  const Dataset& data, int batch_size = 128) {
    std::vector<double> conf = per_sample_losses(model, r_c, data, batch_size);
    for (double& l : conf) {
        double p = std::exp(-l);
        p = std::clamp(p, 1e-7, 1.0 - 1e-7);
        l = std::log(p / (1.0 - p));
    }
    return conf;
}

inline double train_on_dataset(ModelParams<float>& model, double r_c, const Dataset& data,
                               int epochs, int batch_size, double lr, Rng& rng) {
    std::vector<int> all(data.count());
    std::iota(all.begin(), all.end(), 0);
    AdamState<float> opt = AdamState<float>::init(model);
    return train_local(model, opt, r_c, data, all, epochs, batch_size, lr, false, rng);
}

// ---------------------------------------------------------------------------
// Attack target construction
// ---------------------------------------------------------------------------

struct AttackTarget {
    int client_id = 0;
    ModelParams<float> model;  // theta_c^T
    double r_c = 1.0;
    Dataset knowledge;         // D_A+ (known members, Yeom threshold)
    Dataset eval_members;
    Dataset eval_nonmembers;
    std::vector<int> shard;    // member indices in the training set
};

// Evaluation pools carved out of the test set so the tMIA auxiliary splits
// never overlap the nonmember pool.
struct TestPools {
    std::vector<int> nonmembers;
    std::vector<int> tmia_nonmembers;
    std::vector<int> distill;
};

inline TestPools split_test_pools(int test_count, const AttackConfig& cfg) {
    TestPools p;
    const int aux = std::min(cfg.tmia_shadow_nonmembers + cfg.tmia_distill_size, test_count / 2);
    const int nm = test_count - aux;
    for (int i = 0; i < nm; ++i) p.nonmembers.push_back(i);
    int cursor = nm;
    for (int i = 0; i < cfg.tmia_shadow_nonmembers && cursor < test_count; ++i)
        p.tmia_nonmembers.push_back(cursor++);
    while (cursor < test_count) p.distill.push_back(cursor++);
    return p;
}

inline AttackTarget make_attack_target(int client_id, const ArchivedUpdate& update,
                                       const std::vector<int>& shard, const Dataset& train,
                                       const Dataset& test, const TestPools& pools,
                                       const AttackConfig& cfg) {
    AttackTarget t;
    t.client_id = client_id;
    t.model = update.params;
    t.r_c = update.r_c;
    t.shard = shard;
    const int dc = static_cast<int>(shard.size());
    if (dc == 0) throw std::invalid_argument("attack target: empty member pool");
    int k = cfg.yeom_min_knowledge ? std::min(3, dc / 100) : std::max(3, dc / 100);
    k = std::clamp(k, 1, dc);
    Rng rng = make_rng(cfg.seed, 0x746172676574ULL, client_id);
    std::vector<int> order = shard;
    std::shuffle(order.begin(), order.end(), rng);
    t.knowledge = train.subset({order.begin(), order.begin() + k});
    std::vector<int> member_pool(order.begin() + (cfg.exclude_knowledge_from_eval ? k : 0), order.end());
    if (member_pool.empty()) member_pool.assign(order.begin(), order.end());

    const int n = std::min({static_cast<int>(member_pool.size()),
                            static_cast<int>(pools.nonmembers.size()), cfg.eval_cap});
    if (n < 2) throw std::runtime_error("attack target: evaluation set too small");
    member_pool.resize(n);
    t.eval_members = train.subset(member_pool);
    std::vector<int> nm = pools.nonmembers;
    std::shuffle(nm.begin(), nm.end(), rng);
    nm.resize(n);
    t.eval_nonmembers = test.subset(nm);
    return t;
}

// ---------------------------------------------------------------------------
// Yeom loss-threshold attack
// ---------------------------------------------------------------------------

inline ScoredDecisions yeom_attack(AttackTarget& target) {
    if (target.knowledge.count() == 0) throw std::invalid_argument("yeom: empty knowledge set");
    const std::vector<double> known = per_sample_losses(target.model, target.r_c, target.knowledge);
    const double nu = std::accumulate(known.begin(), known.end(), 0.0) / known.size();
    ScoredDecisions sd;
    for (const Dataset* pool : {&target.eval_members, &target.eval_nonmembers}) {
        const int label = pool == &target.eval_members ? 1 : 0;
        for (double l : per_sample_losses(target.model, target.r_c, *pool)) {
            sd.scores.push_back(-l);
            sd.decisions.push_back(l < nu ? 1 : 0);  // strict: loss == nu is a non-member
            sd.labels.push_back(label);
        }
    }
    return sd;
}

// ---------------------------------------------------------------------------
// Offline LiRA
// ---------------------------------------------------------------------------

struct ShadowModel {
    ModelParams<float> params;
    double r_c = 1.0;
    std::vector<bool> covers_client;  // which clients' shards fed this shadow
};

// Shadow models shared across the targets of one experiment. Each shadow is
// trained on a subset drawn from half of the client shards, chosen by parity
// so every client is excluded from (about) half of the shadows; scoring a
// target only uses shadows that never saw its members (offline LiRA).
inline std::vector<ShadowModel> train_lira_shadows(const ModelSpec& client_spec, double r_c,
                                                   const Dataset& train,
                                                   const std::vector<std::vector<int>>& shards,
                                                   const AttackConfig& cfg) {
    const int num_clients = static_cast<int>(shards.size());
    std::vector<ShadowModel> shadows;
    for (int s = 0; s < cfg.num_shadow; ++s) {
        Rng rng = make_rng(cfg.seed, 0x736861646f77ULL, s, client_spec.conv_widths[0]);
        ShadowModel sm;
        sm.r_c = r_c;
        sm.covers_client.assign(num_clients, false);
        std::vector<int> pool;
        for (int c = 0; c < num_clients; ++c) {
            if (c % 2 != s % 2) continue;
            sm.covers_client[c] = true;
            pool.insert(pool.end(), shards[c].begin(), shards[c].end());
        }
        std::shuffle(pool.begin(), pool.end(), rng);
        if (static_cast<int>(pool.size()) > cfg.shadow_train_size) pool.resize(cfg.shadow_train_size);
        Dataset dsw = train.subset(pool);
        sm.params = build_model<float>(client_spec, stream_seed(cfg.seed, 0x7377696eULL, s));
        train_on_dataset(sm.params, r_c, dsw, cfg.shadow_epochs, cfg.batch_size, cfg.lr, rng);
        shadows.push_back(std::move(sm));
    }
    return shadows;
}

inline double gaussian_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

inline ScoredDecisions lira_offline(AttackTarget& target, std::vector<ShadowModel>& shadows,
                                    bool* sigma_floored = nullptr) {
    std::vector<ModelParams<float>*> usable;
    for (auto& s : shadows)
        if (!s.covers_client[target.client_id]) usable.push_back(&s.params);
    if (usable.size() < 2) throw std::runtime_error("lira: fewer than 2 usable shadow models");

    ScoredDecisions sd;
    for (const Dataset* pool : {&target.eval_members, &target.eval_nonmembers}) {
        const int label = pool == &target.eval_members ? 1 : 0;
        const std::vector<double> phi_target = per_sample_confidences(target.model, target.r_c, *pool);
        std::vector<std::vector<double>> phi_shadow;
        for (auto* m : usable) phi_shadow.push_back(per_sample_confidences(*m, target.r_c, *pool));
        for (std::size_t i = 0; i < phi_target.size(); ++i) {
            double mu = 0;
            for (const auto& ps : phi_shadow) mu += ps[i];
            mu /= phi_shadow.size();
            double var = 0;
            for (const auto& ps : phi_shadow) var += (ps[i] - mu) * (ps[i] - mu);
            var /= phi_shadow.size();
            double sigma = std::sqrt(var);
            if (sigma < 1e-6) {
                sigma = 1e-6;
                if (sigma_floored) *sigma_floored = true;
            }
            // 1 - Pr[N(mu, sigma^2) > phi] = CDF(phi)
            const double score = gaussian_cdf((phi_target[i] - mu) / sigma);
            sd.scores.push_back(score);
            sd.decisions.push_back(score > 0.5 ? 1 : 0);
            sd.labels.push_back(label);
        }
    }
    return sd;
}

// ---------------------------------------------------------------------------
// tMIA: loss-trajectory attack via knowledge distillation
// ---------------------------------------------------------------------------

// Two-layer perceptron on trajectory vectors, trained with Adam on BCE.
class TrajectoryMlp {
public:
    TrajectoryMlp() = default;
    TrajectoryMlp(int in_dim, int hidden, std::uint64_t seed) : in_(in_dim), h_(hidden) {
        Rng rng = make_rng(seed, 0x6d6c70ULL);
        w1_.resize(static_cast<std::size_t>(h_) * in_);
        b1_.assign(h_, 0.0);
        w2_.assign(h_, 0.0);
        b2_ = 0.0;
        const double s1 = std::sqrt(2.0 / in_), s2 = std::sqrt(2.0 / h_);
        for (auto& w : w1_) w = normal(rng) * s1;
        for (auto& w : w2_) w = normal(rng) * s2;
        const std::size_t np = w1_.size() + b1_.size() + w2_.size() + 1;
        m_.assign(np, 0.0);
        v_.assign(np, 0.0);
    }

    double predict(const std::vector<double>& x) const {
        double out = b2_;
        for (int j = 0; j < h_; ++j) {
            double a = b1_[j];
            for (int i = 0; i < in_; ++i) a += w1_[static_cast<std::size_t>(j) * in_ + i] * x[i];
            out += w2_[j] * std::max(0.0, a);
        }
        return 1.0 / (1.0 + std::exp(-out));
    }

    void train(const std::vector<std::vector<double>>& X, const std::vector<int>& y, int epochs,
               double lr) {
        const int n = static_cast<int>(X.size());
        for (int e = 0; e < epochs; ++e) {
            std::vector<double> gw1(w1_.size(), 0.0), gb1(h_, 0.0), gw2(h_, 0.0);
            double gb2 = 0;
            for (int s = 0; s < n; ++s) {
                std::vector<double> act(h_);
                double out = b2_;
                for (int j = 0; j < h_; ++j) {
                    double a = b1_[j];
                    for (int i = 0; i < in_; ++i) a += w1_[static_cast<std::size_t>(j) * in_ + i] * X[s][i];
                    act[j] = std::max(0.0, a);
                    out += w2_[j] * act[j];
                }
                const double p = 1.0 / (1.0 + std::exp(-out));
                const double d = (p - y[s]) / n;  // BCE through sigmoid
                gb2 += d;
                for (int j = 0; j < h_; ++j) {
                    gw2[j] += d * act[j];
                    if (act[j] > 0) {
                        const double dj = d * w2_[j];
                        gb1[j] += dj;
                        for (int i = 0; i < in_; ++i)
                            gw1[static_cast<std::size_t>(j) * in_ + i] += dj * X[s][i];
                    }
                }
            }
            adam_flat(gw1, gb1, gw2, gb2, lr);
        }
    }

private:
    void adam_flat(const std::vector<double>& gw1, const std::vector<double>& gb1,
                   const std::vector<double>& gw2, double gb2, double lr) {
        ++t_;
        const double bc1 = 1.0 - std::pow(0.9, t_), bc2 = 1.0 - std::pow(0.999, t_);
        std::size_t k = 0;
        const auto step = [&](double& p, double g) {
            m_[k] = 0.9 * m_[k] + 0.1 * g;
            v_[k] = 0.999 * v_[k] + 0.001 * g * g;
            p -= lr * (m_[k] / bc1) / (std::sqrt(v_[k] / bc2) + 1e-8);
            ++k;
        };
        for (std::size_t i = 0; i < w1_.size(); ++i) step(w1_[i], gw1[i]);
        for (int i = 0; i < h_; ++i) step(b1_[i], gb1[i]);
        for (int i = 0; i < h_; ++i) step(w2_[i], gw2[i]);
        step(b2_, gb2);
    }

    int in_ = 0, h_ = 0;
    std::vector<double> w1_, b1_, w2_;
    double b2_ = 0;
    std::vector<double> m_, v_;
    int t_ = 0;
};

// Distills `teacher` into a fresh student on `distill` (KL to the teacher's
// soft outputs, temperature 1) and records the tracked samples' loss after
// every epoch. Returns per-sample trajectories of length distill_epochs + 1;
// entry 0 is the loss under the teacher itself.
inline std::vector<std::vector<double>> distill_trajectories(
    ModelParams<float>& teacher, double r_c, const Dataset& distill, const Dataset& tracked,
    int distill_epochs, const AttackConfig& cfg, std::uint64_t seed) {
    std::vector<std::vector<double>> traj(tracked.count());
    {
        const auto l0 = per_sample_losses(teacher, r_c, tracked);
        for (int i = 0; i < tracked.count(); ++i) traj[i].push_back(l0[i]);
    }
    if (distill_epochs == 0) return traj;

    // fixed teacher soft targets
    Tensor<float> tprobs;
    {
        Tensor<float> logits = forward(teacher, distill.images, r_c, Mode::eval);
        cross_entropy(logits, distill.labels, &tprobs);
    }
    ModelSpec spec;
    spec.image_channels = teacher.image_channels;
    spec.classes = teacher.classes;
    spec.conv_widths = teacher.conv_widths();
    ModelParams<float> student = build_model<float>(spec, stream_seed(seed, 0x73747564ULL));
    AdamState<float> opt = AdamState<float>::init(student);
    AdamConfig adam;
    adam.lr = cfg.lr;
    Rng rng = make_rng(seed, 0x646c726eULL);
    const int n = distill.count(), C = teacher.classes;
    for (int e = 0; e < distill_epochs; ++e) {
        std::vector<int> order = shuffled_range(rng, n);
        for (int start = 0; start < n; start += cfg.batch_size) {
            const int end = std::min(n, start + cfg.batch_size);
            std::vector<int> idx(order.begin() + start, order.begin() + end);
            Dataset batch = distill.subset(idx);
            ForwardCache<float> cache;
            forward(student, batch.images, r_c, Mode::train, &cache);
            Tensor<float> sprobs;
            const double ce = cross_entropy(cache.logits, batch.labels, &sprobs);
            if (!std::isfinite(ce)) throw std::runtime_error("tmia: distillation diverged");
            const int B = end - start;
            Tensor<float> dlogits({B, C});
            for (int bi = 0; bi < B; ++bi)
                for (int k = 0; k < C; ++k)
                    dlogits.at2(bi, k) = (sprobs.at2(bi, k) - tprobs.at2(idx[bi], k)) / B;
            ModelParams<float> grads;
            backward_from_dlogits(student, cache, dlogits, grads);
            adam_step(student, grads, opt, adam);
        }
        const auto le = per_sample_losses(student, r_c, tracked);
        for (int i = 0; i < tracked.count(); ++i) {
            if (!std::isfinite(le[i])) throw std::runtime_error("tmia: non-finite trajectory loss");
            traj[i].push_back(le[i]);
        }
    }
    return traj;
}

inline Dataset concat_datasets(const Dataset& a, const Dataset& b) {
    Dataset d;
    d.classes = a.classes;
    d.split = a.split;
    d.images = Tensor<float>({a.count() + b.count(), a.channels(), a.height(), a.width()});
    std::copy(a.images.data(), a.images.data() + a.images.size(), d.images.data());
    std::copy(b.images.data(), b.images.data() + b.images.size(), d.images.data() + a.images.size());
    d.labels = a.labels;
    d.labels.insert(d.labels.end(), b.labels.begin(), b.labels.end());
    return d;
}

// Shared tMIA side: shadow model, its distillation trajectories and the
// trained attack classifier, reused for every target of the same model size.
struct TmiaShared {
    TrajectoryMlp attack_mlp;
    Dataset distill_set;
    int distill_epochs = 0;
};

inline TmiaShared build_tmia_shared(const ModelSpec& client_spec, double r_c, const Dataset& train,
                                    const Dataset& test, const TestPools& pools,
                                    const AttackConfig& cfg) {
    Rng rng = make_rng(cfg.seed, 0x746d6961ULL, client_spec.conv_widths[0]);
    std::vector<int> members = sample_sorted_subset(
        rng, train.count(), std::min(cfg.tmia_shadow_members, train.count()));
    Dataset dsw_plus = train.subset(members);
    Dataset dsw_minus = test.subset(pools.tmia_nonmembers);

    TmiaShared sh;
    sh.distill_set = test.subset(pools.distill);
    sh.distill_epochs = cfg.distill_epochs;

    ModelParams<float> shadow =
        build_model<float>(client_spec, stream_seed(cfg.seed, 0x74737764ULL, client_spec.conv_widths[0]));
    train_on_dataset(shadow, r_c, dsw_plus, cfg.shadow_epochs, cfg.batch_size, cfg.lr, rng);

    Dataset tracked = concat_datasets(dsw_plus, dsw_minus);
    const auto traj = distill_trajectories(shadow, r_c, sh.distill_set, tracked, cfg.distill_epochs,
                                           cfg, stream_seed(cfg.seed, 0x74736470ULL));
    std::vector<int> labels(tracked.count(), 0);
    std::fill(labels.begin(), labels.begin() + dsw_plus.count(), 1);
    sh.attack_mlp = TrajectoryMlp(cfg.distill_epochs + 1, cfg.mlp_hidden,
                                  stream_seed(cfg.seed, 0x6d6c7030ULL));
    sh.attack_mlp.train(traj, labels, cfg.mlp_epochs, 1e-2);
    return sh;
}

inline ScoredDecisions tmia_attack(AttackTarget& target, const TmiaShared& shared,
                                   const AttackConfig& cfg) {
    Dataset tracked = concat_datasets(target.eval_members, target.eval_nonmembers);
    const auto traj =
        distill_trajectories(target.model, target.r_c, shared.distill_set, tracked,
                             shared.distill_epochs, cfg,
                             stream_seed(cfg.seed, 0x74646c74ULL, target.client_id));
    ScoredDecisions sd;
    for (int i = 0; i < tracked.count(); ++i) {
        const double score = shared.attack_mlp.predict(traj[i]);
        sd.scores.push_back(score);
        sd.decisions.push_back(score > 0.5 ? 1 : 0);
        sd.labels.push_back(i < target.eval_members.count() ? 1 : 0);
    }
    return sd;
}

// ---------------------------------------------------------------------------
// Full suite
// ---------------------------------------------------------------------------

inline AttackReport attack_suite(AttackTarget& target, std::vector<ShadowModel>& lira_shadows,
                                 const TmiaShared& tmia_shared, const AttackConfig& cfg,
                                 bool keep_scores = false) {
    AttackReport rep;
    rep.client = target.client_id;
    ScoredDecisions y = yeom_attack(target);
    ScoredDecisions l = lira_offline(target, lira_shadows);
    ScoredDecisions t = tmia_attack(target, tmia_shared, cfg);
    rep.yeom = score_metrics(y);
    rep.lira = score_metrics(l);
    rep.tmia = score_metrics(t);
    rep.avg_auc = (rep.yeom.auc + rep.lira.auc + rep.tmia.auc) / 3.0;
    if (keep_scores) {
        rep.yeom_scores = std::move(y);
        rep.lira_scores = std::move(l);
        rep.tmia_scores = std::move(t);
    }
    return rep;
}

}  // namespace hfl
