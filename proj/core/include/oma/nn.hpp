#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "oma/autodiff.hpp"
#include "oma/rng.hpp"
#include "oma/tensor.hpp"

namespace oma {

enum class Activation { Identity, ReLU, Softplus, Sigmoid };

/// Widths include input and output: {in, 64, 64, out} is a three-weight-layer
/// perceptron with two hidden activations.
struct MlpSpec {
    std::vector<std::size_t> widths;
    Activation hidden = Activation::ReLU;
    Activation output = Activation::Identity;

    std::size_t layer_count() const { return widths.empty() ? 0 : widths.size() - 1; }
    void validate() const;
};

/// Insertion-ordered name -> Tensor map. Iteration order is deterministic,
/// which keeps optimizer updates and checkpoints reproducible.
class ParamStore {
public:
    std::size_t add(const std::string& name, Tensor value);
    bool contains(const std::string& name) const { return index_.count(name) > 0; }
    Tensor& at(const std::string& name);
    const Tensor& at(const std::string& name) const;
    std::size_t index_of(const std::string& name) const;

    std::size_t size() const { return names_.size(); }
    const std::string& name(std::size_t i) const { return names_[i]; }
    Tensor& value(std::size_t i) { return values_[i]; }
    const Tensor& value(std::size_t i) const { return values_[i]; }

    std::size_t scalar_count() const;

private:
    std::vector<std::string> names_;
    std::vector<Tensor> values_;
    std::unordered_map<std::string, std::size_t> index_;
};

/// Kaiming-style uniform fan-in init: W ~ U(-sqrt(6/fan_in), +sqrt(6/fan_in)),
/// biases zero. Parameter names are "<prefix>.W<i>" / "<prefix>.b<i>".
void init_mlp_params(ParamStore& params, const std::string& prefix, const MlpSpec& spec,
                     RandomStream& rng);

/// Every parameter attached to a tape as a leaf, in store order.
struct ParamNodes {
    const ParamStore* store = nullptr;
    std::vector<int> ids;

    int id(const std::string& name) const;
};
ParamNodes attach_params(Tape& tape, const ParamStore& params);

int mlp_forward(Tape& tape, const MlpSpec& spec, const ParamNodes& params,
                const std::string& prefix, int input);

struct AdamConfig {
    double lr = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    std::vector<Tensor> m;  // first moments, one per parameter
    std::vector<Tensor> v;  // second moments
    std::int64_t t = 0;
};

/// Standard bias-corrected Adam update, in parameter-store order.
void adam_step(ParamStore& params, const std::vector<Tensor>& grads, AdamState& state,
               const AdamConfig& cfg = {});

/// Builds the loss for the current parameter values and returns the scalar
/// loss node; called repeatedly by grad_check with perturbed parameters.
using LossBuilder = std::function<int(Tape&, const ParamNodes&)>;

/// Central finite differences on probe_count randomly chosen scalar
/// parameters; returns the max relative error against the tape gradients.
double grad_check(const LossBuilder& build, ParamStore& params, std::size_t probe_count,
                  RandomStream& rng, double eps = 1e-5);

/// Collects d(loss)/d(param) for every parameter after tape.backward().
std::vector<Tensor> collect_grads(const Tape& tape, const ParamNodes& params);

}  // namespace oma
