#include "dmsrd/mlp.hpp"

#include <cmath>

namespace dmsrd {

void MLPSpec::validate() const {
    check(input_dim > 0, "MLPSpec: input_dim must be positive");
    check(output_dim > 0, "MLPSpec: output_dim must be positive");
    check(!hidden.empty(), "MLPSpec: at least one hidden layer required");
    for (std::size_t w : hidden) check(w > 0, "MLPSpec: hidden widths must be positive");
}

MLP::MLP(MLPSpec spec) : spec_(std::move(spec)) {
    spec_.validate();
    widths_.push_back(spec_.input_dim);
    for (std::size_t w : spec_.hidden) widths_.push_back(w);
    widths_.push_back(spec_.output_dim);
}

ParamSet MLP::init_params(RandomStream& rng, double scale) const {
    ParamSet p;
    for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
        std::size_t in = widths_[l], out = widths_[l + 1];
        Tensor w({out, in});
        double bound = scale * std::sqrt(6.0 / double(in + out));
        for (double& x : w.data) x = rng.uniform(-bound, bound);
        p.add("W" + std::to_string(l), std::move(w));
        p.add("b" + std::to_string(l), Tensor({out}));
    }
    return p;
}

ParamSet MLP::zero_params() const {
    ParamSet p;
    for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
        p.add("W" + std::to_string(l), Tensor({widths_[l + 1], widths_[l]}));
        p.add("b" + std::to_string(l), Tensor({widths_[l + 1]}));
    }
    return p;
}

Vec MLP::forward(const ParamSet& params, const Vec& input) const {
    MLPCache cache;
    return forward(params, input, cache);
}

Vec MLP::forward(const ParamSet& params, const Vec& input, MLPCache& cache) const {
    check(input.size() == spec_.input_dim, "MLP: input dimension mismatch");
    cache.activations.clear();
    cache.activations.push_back(input);
    Vec cur = input;
    std::size_t layers = widths_.size() - 1;
    for (std::size_t l = 0; l < layers; ++l) {
        const Tensor& W = params.get("W" + std::to_string(l));
        const Tensor& b = params.get("b" + std::to_string(l));
        std::size_t out = widths_[l + 1], in = widths_[l];
        Vec next(out);
        for (std::size_t r = 0; r < out; ++r) {
            double acc = b.data[r];
            const double* wr = &W.data[r * in];
            for (std::size_t c = 0; c < in; ++c) acc += wr[c] * cur[c];
            next[r] = acc;
        }
        bool last = (l + 1 == layers);
        if (!last || spec_.output_activation == OutputActivation::Tanh)
            for (double& x : next) x = std::tanh(x);
        cache.activations.push_back(next);
        cur = std::move(next);
    }
    return cur;
}

Vec MLP::backward(const ParamSet& params, const MLPCache& cache, const Vec& output_grad,
                  ParamSet& grads) const {
    std::size_t layers = widths_.size() - 1;
    check(cache.activations.size() == layers + 1, "MLP: stale cache");
    check(output_grad.size() == spec_.output_dim, "MLP: output_grad dimension mismatch");

    Vec delta = output_grad;
    for (std::size_t l = layers; l-- > 0;) {
        const Vec& act_out = cache.activations[l + 1];
        const Vec& act_in = cache.activations[l];
        bool last = (l + 1 == layers);
        bool tanh_layer = !last || spec_.output_activation == OutputActivation::Tanh;
        if (tanh_layer)
            for (std::size_t r = 0; r < delta.size(); ++r)
                delta[r] *= 1.0 - act_out[r] * act_out[r];

        const Tensor& W = params.get("W" + std::to_string(l));
        Tensor& gW = grads.get("W" + std::to_string(l));
        Tensor& gb = grads.get("b" + std::to_string(l));
        std::size_t out = widths_[l + 1], in = widths_[l];
        for (std::size_t r = 0; r < out; ++r) {
            gb.data[r] += delta[r];
            double* gwr = &gW.data[r * in];
            for (std::size_t c = 0; c < in; ++c) gwr[c] += delta[r] * act_in[c];
        }
        Vec prev(in, 0.0);
        for (std::size_t r = 0; r < out; ++r) {
            const double* wr = &W.data[r * in];
            for (std::size_t c = 0; c < in; ++c) prev[c] += wr[c] * delta[r];
        }
        delta = std::move(prev);
    }
    return delta;
}

void Adam::step(ParamSet& params, const ParamSet& grads) {
    if (!grads.finite()) throw NumericalError("Adam: non-finite gradient");
    Vec p = params.flatten();
    Vec g = grads.flatten();
    check(p.size() == g.size(), "Adam: gradient layout mismatch");
    if (m_.empty()) {
        m_.assign(p.size(), 0.0);
        v_.assign(p.size(), 0.0);
    }
    check(m_.size() == p.size(), "Adam: state size mismatch");
    ++t_;
    double bc1 = 1.0 - std::pow(beta1_, double(t_));
    double bc2 = 1.0 - std::pow(beta2_, double(t_));
    for (std::size_t i = 0; i < p.size(); ++i) {
        m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * g[i];
        v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * g[i] * g[i];
        double mhat = m_[i] / bc1;
        double vhat = v_[i] / bc2;
        p[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
    }
    params.unflatten(p);
}

ParamSet gradient(const Loss& loss, const ParamSet& params) {
    ParamSet grads = params.zeros_like();
    double v = loss.value_and_grad(params, grads);
    if (!std::isfinite(v)) throw NumericalError("gradient: non-finite loss value");
    return grads;
}

}  // namespace dmsrd
