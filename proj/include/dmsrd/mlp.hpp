#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "dmsrd/common.hpp"
#include "dmsrd/tensor.hpp"

namespace dmsrd {

enum class OutputActivation { Identity, Tanh };

// Fully-connected net with tanh hidden units. Small enough that forward
// and backward are written out directly; every loss in the repo
// backpropagates through these two entry points.
struct MLPSpec {
    std::size_t input_dim = 0;
    std::vector<std::size_t> hidden;  // at least one hidden layer
    std::size_t output_dim = 1;
    OutputActivation output_activation = OutputActivation::Identity;

    std::size_t layer_count() const { return hidden.size() + 1; }
    void validate() const;
};

// Activations cached during a forward pass, consumed by backward().
struct MLPCache {
    std::vector<Vec> activations;  // activations[0] = input, last = output
};

class MLP {
  public:
    explicit MLP(MLPSpec spec);

    const MLPSpec& spec() const { return spec_; }

    // Parameters W0,b0,...,Wk,bk in a fresh ParamSet. Weights are
    // scaled-uniform (Xavier) from the given stream; zero biases.
    ParamSet init_params(RandomStream& rng, double scale = 1.0) const;
    ParamSet zero_params() const;

    Vec forward(const ParamSet& params, const Vec& input) const;
    Vec forward(const ParamSet& params, const Vec& input, MLPCache& cache) const;

    // Accumulates parameter gradients into `grads` (same layout as
    // params); returns the gradient w.r.t. the input.
    Vec backward(const ParamSet& params, const MLPCache& cache, const Vec& output_grad,
                 ParamSet& grads) const;

  private:
    MLPSpec spec_;
    std::vector<std::size_t> widths_;  // input, hidden..., output
};

// First-order adaptive-moment optimizer (decay 0.9/0.999, eps 1e-8).
class Adam {
  public:
    Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

    void step(ParamSet& params, const ParamSet& grads);

    double learning_rate() const { return lr_; }
    void set_learning_rate(double lr) { lr_ = lr; }

  private:
    double lr_, beta1_, beta2_, eps_;
    std::size_t t_ = 0;
    Vec m_, v_;
};

// Generic scalar-loss contract: anything with a value and a
// reverse-mode gradient in parameter space.
struct Loss {
    virtual ~Loss() = default;
    virtual double value(const ParamSet& params) const = 0;
    // Returns the loss; fills `grads` (zeroed by the caller's layout).
    virtual double value_and_grad(const ParamSet& params, ParamSet& grads) const = 0;
};

ParamSet gradient(const Loss& loss, const ParamSet& params);

}  // namespace dmsrd
