#pragma once

// Small dense networks with manual backpropagation, and Adam.
// Batches are column-major: one sample per column.

#include <Eigen/Dense>

#include <cmath>
#include <random>
#include <vector>

#include "knotforge/error.hpp"

namespace knotforge::nn {

template <class S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <class S>
using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;

template <class S>
struct Layer {
    Mat<S> W;
    Vec<S> b;
};

/// ReLU hidden layers, linear output.
template <class S>
class Mlp {
public:
    Mlp() = default;
    Mlp(std::vector<int> sizes, std::mt19937_64& rng) : sizes_(std::move(sizes)) {
        if (sizes_.size() < 2) throw InvalidConfig("network needs at least an input and an output size");
        for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
            const int in = sizes_[l], out = sizes_[l + 1];
            // Uniform(-1/sqrt(in), 1/sqrt(in)), the common default for linear layers.
            std::uniform_real_distribution<double> u(-1.0 / std::sqrt(double(in)), 1.0 / std::sqrt(double(in)));
            Layer<S> L{Mat<S>(out, in), Vec<S>(out)};
            for (int i = 0; i < out; ++i)
                for (int j = 0; j < in; ++j) L.W(i, j) = static_cast<S>(u(rng));
            for (int i = 0; i < out; ++i) L.b(i) = static_cast<S>(u(rng));
            layers_.push_back(std::move(L));
        }
    }

    const std::vector<int>& sizes() const { return sizes_; }
    int input_size() const { return sizes_.front(); }
    int output_size() const { return sizes_.back(); }
    std::vector<Layer<S>>& layers() { return layers_; }
    const std::vector<Layer<S>>& layers() const { return layers_; }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const auto& L : layers_) n += L.W.size() + L.b.size();
        return n;
    }

    /// Flat view helpers (W row-major-agnostic: Eigen storage order, then b).
    void get_flat(std::vector<S>& out) const {
        out.clear();
        for (const auto& L : layers_) {
            out.insert(out.end(), L.W.data(), L.W.data() + L.W.size());
            out.insert(out.end(), L.b.data(), L.b.data() + L.b.size());
        }
    }
    void set_flat(const std::vector<S>& in) {
        std::size_t k = 0;
        for (auto& L : layers_) {
            std::copy(in.begin() + k, in.begin() + k + L.W.size(), L.W.data());
            k += L.W.size();
            std::copy(in.begin() + k, in.begin() + k + L.b.size(), L.b.data());
            k += L.b.size();
        }
    }

    struct Cache {
        std::vector<Mat<S>> inputs;  // input to each layer
        std::vector<Mat<S>> pre;     // pre-activation of each layer
    };

    Mat<S> forward(const Mat<S>& x, Cache* cache = nullptr) const {
        Mat<S> h = x;
        if (cache) {
            cache->inputs.resize(layers_.size());
            cache->pre.resize(layers_.size());
        }
        for (std::size_t l = 0; l < layers_.size(); ++l) {
            Mat<S> z = layers_[l].W * h;
            z.colwise() += layers_[l].b;
            if (cache) {
                cache->inputs[l] = std::move(h);
                cache->pre[l] = z;
            }
            h = l + 1 < layers_.size() ? Mat<S>(z.cwiseMax(S(0))) : std::move(z);
        }
        return h;
    }

    /// Accumulates parameter gradients for dL/d(output) = `g`; returns dL/dx.
    Mat<S> backward(const Cache& cache, Mat<S> g, std::vector<Layer<S>>& grads) const {
        if (grads.size() != layers_.size()) zero_grads(grads);
        return backprop(cache, std::move(g), &grads);
    }

    /// dL/dx only, no parameter gradients.
    Mat<S> input_gradient(const Cache& cache, Mat<S> g) const { return backprop(cache, std::move(g), nullptr); }

private:
    Mat<S> backprop(const Cache& cache, Mat<S> g, std::vector<Layer<S>>* grads) const {
        for (std::size_t l = layers_.size(); l-- > 0;) {
            if (l + 1 < layers_.size()) g = g.cwiseProduct((cache.pre[l].array() > S(0)).template cast<S>().matrix());
            if (grads) {
                (*grads)[l].W.noalias() += g * cache.inputs[l].transpose();
                (*grads)[l].b += g.rowwise().sum();
            }
            Mat<S> next = layers_[l].W.transpose() * g;
            g = std::move(next);
        }
        return g;
    }

public:
    void zero_grads(std::vector<Layer<S>>& grads) const {
        grads.resize(layers_.size());
        for (std::size_t l = 0; l < layers_.size(); ++l) {
            grads[l].W.setZero(layers_[l].W.rows(), layers_[l].W.cols());
            grads[l].b.setZero(layers_[l].b.size());
        }
    }

    /// this = tau * src + (1 - tau) * this, elementwise.
    void soft_update_from(const Mlp& src, S tau) {
        for (std::size_t l = 0; l < layers_.size(); ++l) {
            layers_[l].W = tau * src.layers_[l].W + (S(1) - tau) * layers_[l].W;
            layers_[l].b = tau * src.layers_[l].b + (S(1) - tau) * layers_[l].b;
        }
    }

    bool all_finite() const {
        for (const auto& L : layers_)
            if (!L.W.allFinite() || !L.b.allFinite()) return false;
        return true;
    }

private:
    std::vector<int> sizes_;
    std::vector<Layer<S>> layers_;
};

template <class S>
class Adam {
public:
    Adam() = default;
    Adam(const Mlp<S>& net, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : lr_(lr), b1_(beta1), b2_(beta2), eps_(eps) {
        net.zero_grads(m_);
        net.zero_grads(v_);
    }

    void step(Mlp<S>& net, const std::vector<Layer<S>>& grads) {
        ++t_;
        const S c1 = static_cast<S>(1.0 - std::pow(b1_, t_)), c2 = static_cast<S>(1.0 - std::pow(b2_, t_));
        const S b1 = static_cast<S>(b1_), b2 = static_cast<S>(b2_), lr = static_cast<S>(lr_), eps = static_cast<S>(eps_);
        auto& L = net.layers();
        for (std::size_t l = 0; l < L.size(); ++l) {
            update(L[l].W, m_[l].W, v_[l].W, grads[l].W, b1, b2, c1, c2, lr, eps);
            update(L[l].b, m_[l].b, v_[l].b, grads[l].b, b1, b2, c1, c2, lr, eps);
        }
    }

    long steps() const { return t_; }
    std::vector<Layer<S>>& first_moment() { return m_; }
    std::vector<Layer<S>>& second_moment() { return v_; }
    void set_steps(long t) { t_ = t; }

private:
    template <class P, class G>
    static void update(P& p, P& m, P& v, const G& g, S b1, S b2, S c1, S c2, S lr, S eps) {
        m = b1 * m + (S(1) - b1) * g;
        v = b2 * v + (S(1) - b2) * g.cwiseProduct(g);
        p.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
    }

    double lr_ = 3e-4, b1_ = 0.9, b2_ = 0.999, eps_ = 1e-8;
    long t_ = 0;
    std::vector<Layer<S>> m_, v_;
};

/// Adam for a single scalar parameter (the entropy temperature).
struct ScalarAdam {
    double lr = 3e-4, b1 = 0.9, b2 = 0.999, eps = 1e-8;
    double m = 0, v = 0;
    long t = 0;
    void step(double& p, double g) {
        ++t;
        m = b1 * m + (1 - b1) * g;
        v = b2 * v + (1 - b2) * g * g;
        p -= lr * (m / (1 - std::pow(b1, t))) / (std::sqrt(v / (1 - std::pow(b2, t))) + eps);
    }
};

}  // namespace knotforge::nn
