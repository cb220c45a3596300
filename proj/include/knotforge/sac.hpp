#pragma once

// Compact soft actor-critic: squashed-Gaussian actor, twin critics with
// Polyak-averaged targets, automatic entropy temperature, replay buffer,
// and flat-binary policy checkpoints.

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"

#include "knotforge/episode.hpp"
#include "knotforge/nn.hpp"

namespace knotforge {

struct SacConfig {
    std::vector<int> hidden{256, 256};
    double lr = 3e-4;
    int batch_size = 256;
    std::size_t replay_capacity = 100000;
    double tau = 0.005;
    double gamma = 0.99;
    double init_alpha = 0.2;
    double target_entropy = -kActionDim;
};

inline void validate(const SacConfig& c) {
    if (c.hidden.empty()) throw InvalidConfig("sac.hidden must list at least one layer");
    for (int h : c.hidden)
        if (h < 1) throw InvalidConfig("sac.hidden sizes must be positive");
    if (!(c.lr > 0)) throw InvalidConfig("sac.lr must be positive");
    if (c.batch_size < 1) throw InvalidConfig("sac.batch_size must be >= 1");
    if (c.replay_capacity < static_cast<std::size_t>(c.batch_size))
        throw InvalidConfig("sac.replay_capacity must be at least the batch size");
    if (!(c.tau > 0 && c.tau <= 1)) throw InvalidConfig("sac.tau must be in (0, 1]");
    if (!(c.gamma > 0 && c.gamma < 1)) throw InvalidConfig("sac.gamma must be in (0, 1)");
    if (!(c.init_alpha > 0)) throw InvalidConfig("sac.init_alpha must be positive");
}

namespace sac {

using nn::Mat;
using nn::Vec;

inline constexpr double kLogStdMin = -20.0;
inline constexpr double kLogStdMax = 2.0;
inline constexpr double kSquashEps = 1e-6;

/// Columns are samples. `s` is the policy input, `a` the squashed action.
template <class S>
struct Batch {
    Mat<S> s, a, s2;
    Vec<S> r, d;
};

template <class S>
class ReplayBuffer {
public:
    ReplayBuffer(std::size_t capacity, int state_dim, int action_dim)
        : cap_(capacity), sd_(state_dim), ad_(action_dim), s_(state_dim, capacity), a_(action_dim, capacity),
          s2_(state_dim, capacity), r_(capacity), d_(capacity) {}

    template <class A, class B, class C>
    void add(const A& s, const B& a, double r, const C& s2, bool done) {
        for (int i = 0; i < sd_; ++i) s_(i, head_) = static_cast<S>(s[i]);
        for (int i = 0; i < ad_; ++i) a_(i, head_) = static_cast<S>(a[i]);
        for (int i = 0; i < sd_; ++i) s2_(i, head_) = static_cast<S>(s2[i]);
        r_(head_) = static_cast<S>(r);
        d_(head_) = done ? S(1) : S(0);
        head_ = (head_ + 1) % cap_;
        size_ = std::min(size_ + 1, cap_);
    }

    std::size_t size() const { return size_; }
    std::size_t capacity() const { return cap_; }

    Batch<S> sample(int n, std::mt19937_64& rng) const {
        if (size_ == 0) throw Error("replay buffer is empty");
        std::uniform_int_distribution<std::size_t> pick(0, size_ - 1);
        Batch<S> b{Mat<S>(sd_, n), Mat<S>(ad_, n), Mat<S>(sd_, n), Vec<S>(n), Vec<S>(n)};
        for (int j = 0; j < n; ++j) {
            const std::size_t k = pick(rng);
            b.s.col(j) = s_.col(k);
            b.a.col(j) = a_.col(k);
            b.s2.col(j) = s2_.col(k);
            b.r(j) = r_(k);
            b.d(j) = d_(k);
        }
        return b;
    }

private:
    std::size_t cap_, head_ = 0, size_ = 0;
    int sd_, ad_;
    Mat<S> s_, a_, s2_;
    Vec<S> r_, d_;
};

/// Reparameterized actor sample for fixed standard-normal noise `eps`.
template <class S>
struct ActorSample {
    typename nn::Mlp<S>::Cache cache;
    Mat<S> mean, log_std, sigma, a;
    Mat<S> clamp_mask;  // 1 where log_std was not clipped
    Vec<S> logp;
};

template <class S>
ActorSample<S> actor_sample(const nn::Mlp<S>& actor, const Mat<S>& s, const Mat<S>& eps) {
    const int A = static_cast<int>(eps.rows());
    ActorSample<S> out;
    Mat<S> raw = actor.forward(s, &out.cache);
    out.mean = raw.topRows(A);
    const Mat<S> ls = raw.bottomRows(A);
    out.log_std = ls.cwiseMax(S(kLogStdMin)).cwiseMin(S(kLogStdMax));
    out.clamp_mask = ((ls.array() >= S(kLogStdMin)) && (ls.array() <= S(kLogStdMax))).template cast<S>().matrix();
    out.sigma = out.log_std.array().exp().matrix();
    const Mat<S> u = out.mean + out.sigma.cwiseProduct(eps);
    out.a = u.array().tanh().matrix();
    const S half_log_2pi = static_cast<S>(0.5 * std::log(2.0 * std::numbers::pi));
    Mat<S> terms = -S(0.5) * eps.array().square() - out.log_std.array() - half_log_2pi -
                   (S(1) - out.a.array().square() + S(kSquashEps)).log();
    out.logp = terms.colwise().sum().transpose();
    return out;
}

template <class S>
Mat<S> stack(const Mat<S>& top, const Mat<S>& bottom) {
    Mat<S> x(top.rows() + bottom.rows(), top.cols());
    x << top, bottom;
    return x;
}

/// 0.5 * mean((Q(s,a) - y)^2); accumulates parameter gradients into `grads`.
template <class S>
S critic_loss_and_grad(const nn::Mlp<S>& critic, const Mat<S>& s, const Mat<S>& a, const Vec<S>& y,
                       std::vector<nn::Layer<S>>& grads) {
    typename nn::Mlp<S>::Cache c;
    const Mat<S> q = critic.forward(stack(s, a), &c);
    const S B = static_cast<S>(s.cols());
    const Mat<S> diff = q - y.transpose();
    critic.zero_grads(grads);
    critic.backward(c, diff / B, grads);
    return S(0.5) * diff.squaredNorm() / B;
}

template <class S>
struct ActorLoss {
    S loss = 0;
    S mean_logp = 0;
};

/// mean(alpha * log pi(a|s) - min(Q1, Q2)(s, a)) with a = tanh(mean + sigma * eps).
template <class S>
ActorLoss<S> actor_loss_and_grad(const nn::Mlp<S>& actor, const nn::Mlp<S>& q1, const nn::Mlp<S>& q2, const Mat<S>& s,
                                 const Mat<S>& eps, S alpha, std::vector<nn::Layer<S>>& grads) {
    const int A = static_cast<int>(eps.rows());
    const S B = static_cast<S>(s.cols());
    ActorSample<S> smp = actor_sample(actor, s, eps);
    const Mat<S> x = stack(s, smp.a);
    typename nn::Mlp<S>::Cache c1, c2;
    const Mat<S> v1 = q1.forward(x, &c1), v2 = q2.forward(x, &c2);
    Mat<S> pick1 = (v1.array() <= v2.array()).template cast<S>().matrix();
    Mat<S> pick2 = Mat<S>::Ones(1, x.cols()) - pick1;
    const Mat<S> qmin = v1.cwiseMin(v2);

    const Mat<S> dx1 = q1.input_gradient(c1, pick1);
    const Mat<S> dx2 = q2.input_gradient(c2, pick2);
    const Mat<S> dq_da = (dx1 + dx2).bottomRows(A);

    const Mat<S> one_m_a2 = (S(1) - smp.a.array().square()).matrix();
    const Mat<S> k = (S(2) * smp.a.array() * one_m_a2.array() / (one_m_a2.array() + S(kSquashEps))).matrix();
    const Mat<S> dq_du = dq_da.cwiseProduct(one_m_a2);
    const Mat<S> sig_eps = smp.sigma.cwiseProduct(eps);

    Mat<S> g(2 * A, x.cols());
    g.topRows(A) = (alpha * k - dq_du) / B;
    g.bottomRows(A) = ((alpha * (k.cwiseProduct(sig_eps).array() - S(1))).matrix() - dq_du.cwiseProduct(sig_eps))
                          .cwiseProduct(smp.clamp_mask) /
                      B;
    actor.zero_grads(grads);
    actor.backward(smp.cache, g, grads);

    ActorLoss<S> out;
    out.loss = (alpha * smp.logp.transpose() - qmin).sum() / B;
    out.mean_logp = smp.logp.mean();
    return out;
}

/// r + gamma * (1 - d) * (min(Q1', Q2')(s', a') - alpha * log pi(a'|s')).
template <class S>
Vec<S> critic_targets(const nn::Mlp<S>& actor, const nn::Mlp<S>& q1t, const nn::Mlp<S>& q2t, const Batch<S>& b,
                      const Mat<S>& eps, S alpha, S gamma) {
    ActorSample<S> smp = actor_sample(actor, b.s2, eps);
    const Mat<S> x = stack(b.s2, smp.a);
    const Mat<S> qmin = q1t.forward(x).cwiseMin(q2t.forward(x));
    const Vec<S> soft = qmin.transpose() - alpha * smp.logp;
    return b.r + gamma * (Vec<S>::Ones(b.r.size()) - b.d).cwiseProduct(soft);
}

template <class S>
Mat<S> standard_normal(int rows, int cols, std::mt19937_64& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    Mat<S> m(rows, cols);
    for (int j = 0; j < cols; ++j)
        for (int i = 0; i < rows; ++i) m(i, j) = static_cast<S>(n(rng));
    return m;
}

}  // namespace sac

struct SacMetrics {
    double critic_loss = 0;
    double actor_loss = 0;
    double alpha_loss = 0;
    double alpha = 0;
    double entropy = 0;  // -mean log pi
};

/// Affine observation normalization: (obs - offset) * scale.
struct ObsNormalizer {
    std::vector<double> offset, scale;

    static ObsNormalizer for_rope(const RopeParams& p) {
        ObsNormalizer n;
        for (int i = 0; i < p.n_joints(); ++i) {
            n.offset.insert(n.offset.end(), {0.0, 0.0, 0.0});
            n.scale.insert(n.scale.end(), {1.0 / p.workspace_half_extent, 1.0 / p.workspace_half_extent,
                                           1.0 / p.z_max_limit});
        }
        return n;
    }
    std::size_t size() const { return offset.size(); }
};

/// Policy input: normalized observation followed by rho(g).
inline std::vector<double> policy_input(const ObsNormalizer& n, const std::vector<double>& obs, const GoalEncoding& g) {
    if (obs.size() != n.size())
        throw InvalidConfig("observation has " + std::to_string(obs.size()) + " values, policy expects " +
                            std::to_string(n.size()));
    std::vector<double> x(obs.size() + g.size());
    for (std::size_t i = 0; i < obs.size(); ++i) x[i] = (obs[i] - n.offset[i]) * n.scale[i];
    std::copy(g.begin(), g.end(), x.begin() + obs.size());
    return x;
}

/// Read-only actor snapshot used for rollouts and inference.
struct SacPolicy {
    std::string key;
    nn::Mlp<float> actor;
    ObsNormalizer norm;
    bool deterministic = false;

    Action act(const std::vector<double>& obs, const GoalEncoding& g, std::mt19937_64& rng, bool det) const {
        const auto x = policy_input(norm, obs, g);
        nn::Mat<float> in(static_cast<int>(x.size()), 1);
        for (std::size_t i = 0; i < x.size(); ++i) in(static_cast<int>(i), 0) = static_cast<float>(x[i]);
        nn::Mat<float> eps = det ? nn::Mat<float>::Zero(kActionDim, 1) : sac::standard_normal<float>(kActionDim, 1, rng);
        auto smp = sac::actor_sample(actor, in, eps);
        Action a;
        for (int i = 0; i < kActionDim; ++i) a[i] = smp.a(i, 0);
        return a;
    }
    Action operator()(const std::vector<double>& obs, const GoalEncoding& g, std::mt19937_64& rng) const {
        return act(obs, g, rng, deterministic);
    }
};

class SacLearner {
public:
    using S = float;

    SacLearner(const SacConfig& cfg, ObsNormalizer norm, std::uint64_t seed)
        : cfg_(cfg), norm_(std::move(norm)), rng_(seed),
          replay_(cfg.replay_capacity, state_dim(), kActionDim) {
        validate(cfg_);
        std::vector<int> a_sizes{state_dim()}, q_sizes{state_dim() + kActionDim};
        for (int h : cfg_.hidden) {
            a_sizes.push_back(h);
            q_sizes.push_back(h);
        }
        a_sizes.push_back(2 * kActionDim);
        q_sizes.push_back(1);
        actor_ = nn::Mlp<S>(a_sizes, rng_);
        q1_ = nn::Mlp<S>(q_sizes, rng_);
        q2_ = nn::Mlp<S>(q_sizes, rng_);
        q1t_ = q1_;
        q2t_ = q2_;
        actor_opt_ = nn::Adam<S>(actor_, cfg_.lr);
        q1_opt_ = nn::Adam<S>(q1_, cfg_.lr);
        q2_opt_ = nn::Adam<S>(q2_, cfg_.lr);
        alpha_opt_.lr = cfg_.lr;
        log_alpha_ = std::log(cfg_.init_alpha);
    }

    int state_dim() const { return static_cast<int>(norm_.size()) + kGoalEncodingSize; }
    const SacConfig& config() const { return cfg_; }
    const ObsNormalizer& normalizer() const { return norm_; }
    double alpha() const { return std::exp(log_alpha_); }
    long updates() const { return updates_; }
    sac::ReplayBuffer<S>& replay() { return replay_; }
    const nn::Mlp<S>& actor() const { return actor_; }
    const nn::Mlp<S>& q1() const { return q1_; }
    const nn::Mlp<S>& q2() const { return q2_; }
    const nn::Mlp<S>& q1_target() const { return q1t_; }
    const nn::Mlp<S>& q2_target() const { return q2t_; }
    std::mt19937_64& rng() { return rng_; }

    /// Adds every step of an episode to the replay buffer.
    template <class Config, class Observe>
    void add_trace(const EpisodeTrace<Config>& trace, Observe&& observe) {
        const GoalEncoding g = encode_goal(trace.goal);
        for (std::size_t k = 0; k < trace.steps.size(); ++k) {
            const auto& st = trace.steps[k];
            replay_.add(policy_input(norm_, observe(st.before), g), st.action, st.reward,
                        policy_input(norm_, observe(st.after), g), trace.done(k));
        }
    }

    SacMetrics update() { return update(replay_.sample(cfg_.batch_size, rng_)); }

    SacMetrics update(const sac::Batch<S>& b) {
        const int B = static_cast<int>(b.s.cols());
        const S alpha = static_cast<S>(this->alpha());
        SacMetrics m;

        const auto y = sac::critic_targets(actor_, q1t_, q2t_, b, sac::standard_normal<S>(kActionDim, B, rng_), alpha,
                                           static_cast<S>(cfg_.gamma));
        m.critic_loss = sac::critic_loss_and_grad(q1_, b.s, b.a, y, grads_q_);
        q1_opt_.step(q1_, grads_q_);
        m.critic_loss += sac::critic_loss_and_grad(q2_, b.s, b.a, y, grads_q_);
        q2_opt_.step(q2_, grads_q_);

        const auto al = sac::actor_loss_and_grad(actor_, q1_, q2_, b.s, sac::standard_normal<S>(kActionDim, B, rng_),
                                                 alpha, grads_a_);
        actor_opt_.step(actor_, grads_a_);
        m.actor_loss = al.loss;
        m.entropy = -al.mean_logp;

        // J(alpha) = -log_alpha * (log pi + target_entropy)
        const double ga = -(al.mean_logp + cfg_.target_entropy);
        m.alpha_loss = -log_alpha_ * (al.mean_logp + cfg_.target_entropy);
        alpha_opt_.step(log_alpha_, ga);
        m.alpha = this->alpha();

        q1t_.soft_update_from(q1_, static_cast<S>(cfg_.tau));
        q2t_.soft_update_from(q2_, static_cast<S>(cfg_.tau));
        ++updates_;

        if (!std::isfinite(m.critic_loss) || !std::isfinite(m.actor_loss) || !std::isfinite(m.alpha) ||
            !actor_.all_finite() || !q1_.all_finite() || !q2_.all_finite())
            throw TrainingDiverged("non-finite value after update " + std::to_string(updates_) +
                                   ": critic_loss=" + std::to_string(m.critic_loss) +
                                   " actor_loss=" + std::to_string(m.actor_loss) + " alpha=" + std::to_string(m.alpha));
        return m;
    }

    SacPolicy snapshot(const std::string& key, bool deterministic = false) const {
        return SacPolicy{key, actor_, norm_, deterministic};
    }

private:
    SacConfig cfg_;
    ObsNormalizer norm_;
    std::mt19937_64 rng_;
    sac::ReplayBuffer<S> replay_;
    nn::Mlp<S> actor_, q1_, q2_, q1t_, q2t_;
    nn::Adam<S> actor_opt_, q1_opt_, q2_opt_;
    nn::ScalarAdam alpha_opt_;
    double log_alpha_ = 0;
    long updates_ = 0;
    std::vector<nn::Layer<S>> grads_q_, grads_a_;
};

// Checkpoints: "KNOTPOL1", uint64 little-endian header length, JSON header,
// then float32 tensors in header order (each W column-major, then b).

inline constexpr char kPolicyMagic[8] = {'K', 'N', 'O', 'T', 'P', 'O', 'L', '1'};

inline void save_policy(const SacPolicy& p, const std::string& path) {
    nlohmann::json h;
    h["format"] = "knotforge-policy";
    h["version"] = 1;
    h["agent_key"] = p.key;
    h["layer_sizes"] = p.actor.sizes();
    h["activation"] = "relu";
    h["action_dim"] = kActionDim;
    h["goal_encoding_dim"] = kGoalEncodingSize;
    h["log_std_bounds"] = {sac::kLogStdMin, sac::kLogStdMax};
    h["obs_offset"] = p.norm.offset;
    h["obs_scale"] = p.norm.scale;
    nlohmann::json tensors = nlohmann::json::array();
    for (std::size_t l = 0; l < p.actor.layers().size(); ++l) {
        const auto& L = p.actor.layers()[l];
        tensors.push_back({{"name", "W" + std::to_string(l)}, {"shape", {L.W.rows(), L.W.cols()}}, {"order", "col"}});
        tensors.push_back({{"name", "b" + std::to_string(l)}, {"shape", {L.b.size()}}});
    }
    h["tensors"] = tensors;
    const std::string header = h.dump();
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("cannot write policy checkpoint " + path);
    f.write(kPolicyMagic, 8);
    std::uint64_t n = header.size();
    unsigned char len[8];
    for (int i = 0; i < 8; ++i) len[i] = static_cast<unsigned char>(n >> (8 * i));
    f.write(reinterpret_cast<const char*>(len), 8);
    f.write(header.data(), static_cast<std::streamsize>(header.size()));
    auto put = [&](const float* d, std::size_t k) {
        for (std::size_t i = 0; i < k; ++i) {
            std::uint32_t bits;
            std::memcpy(&bits, d + i, 4);
            unsigned char b[4] = {static_cast<unsigned char>(bits), static_cast<unsigned char>(bits >> 8),
                                  static_cast<unsigned char>(bits >> 16), static_cast<unsigned char>(bits >> 24)};
            f.write(reinterpret_cast<const char*>(b), 4);
        }
    };
    for (const auto& L : p.actor.layers()) {
        put(L.W.data(), static_cast<std::size_t>(L.W.size()));
        put(L.b.data(), static_cast<std::size_t>(L.b.size()));
    }
    if (!f) throw Error("failed writing policy checkpoint " + path);
}

inline SacPolicy load_policy(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open policy checkpoint " + path);
    char magic[8];
    unsigned char len[8];
    if (!f.read(magic, 8) || std::memcmp(magic, kPolicyMagic, 8) != 0)
        throw SchemaError(path + ": not a policy checkpoint (bad magic)");
    if (!f.read(reinterpret_cast<char*>(len), 8)) throw SchemaError(path + ": truncated header length");
    std::uint64_t n = 0;
    for (int i = 0; i < 8; ++i) n |= std::uint64_t(len[i]) << (8 * i);
    if (n > (1u << 26)) throw SchemaError(path + ": implausible header length");
    std::string header(n, '\0');
    if (!f.read(header.data(), static_cast<std::streamsize>(n))) throw SchemaError(path + ": truncated header");
    nlohmann::json h;
    try {
        h = nlohmann::json::parse(header);
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(path + ": bad JSON header: " + e.what());
    }
    SacPolicy p;
    try {
        p.key = h.at("agent_key").get<std::string>();
        p.norm.offset = h.at("obs_offset").get<std::vector<double>>();
        p.norm.scale = h.at("obs_scale").get<std::vector<double>>();
        auto sizes = h.at("layer_sizes").get<std::vector<int>>();
        if (sizes.size() < 2 || sizes.back() != 2 * kActionDim ||
            sizes.front() != static_cast<int>(p.norm.size()) + kGoalEncodingSize ||
            p.norm.offset.size() != p.norm.scale.size())
            throw SchemaError(path + ": inconsistent layer sizes / normalization");
        std::mt19937_64 dummy(0);
        p.actor = nn::Mlp<float>(sizes, dummy);
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(path + ": bad header field: " + e.what());
    }
    auto get = [&](float* d, std::size_t k) {
        for (std::size_t i = 0; i < k; ++i) {
            unsigned char b[4];
            if (!f.read(reinterpret_cast<char*>(b), 4)) throw SchemaError(path + ": truncated tensor data");
            std::uint32_t bits = b[0] | (std::uint32_t(b[1]) << 8) | (std::uint32_t(b[2]) << 16) | (std::uint32_t(b[3]) << 24);
            std::memcpy(d + i, &bits, 4);
        }
    };
    for (auto& L : p.actor.layers()) {
        get(L.W.data(), static_cast<std::size_t>(L.W.size()));
        get(L.b.data(), static_cast<std::size_t>(L.b.size()));
    }
    return p;
}

}  // namespace knotforge
