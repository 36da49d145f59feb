#include "oma/nn.hpp"

#include <cmath>

#include "oma/errors.hpp"

namespace oma {

void MlpSpec::validate() const {
    if (widths.size() < 3) throw ConfigError("MLP needs at least one hidden layer");
    for (std::size_t w : widths) {
        if (w == 0) throw ConfigError("MLP layer width must be positive");
    }
}

std::size_t ParamStore::add(const std::string& name, Tensor value) {
    if (contains(name)) throw ConfigError("duplicate parameter name: " + name);
    names_.push_back(name);
    values_.push_back(std::move(value));
    index_[name] = names_.size() - 1;
    return names_.size() - 1;
}

Tensor& ParamStore::at(const std::string& name) { return values_[index_of(name)]; }

const Tensor& ParamStore::at(const std::string& name) const {
    return values_[index_of(name)];
}

std::size_t ParamStore::index_of(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw ConfigError("unknown parameter: " + name);
    return it->second;
}

std::size_t ParamStore::scalar_count() const {
    std::size_t n = 0;
    for (const auto& v : values_) n += v.size();
    return n;
}

void init_mlp_params(ParamStore& params, const std::string& prefix, const MlpSpec& spec,
                     RandomStream& rng) {
    spec.validate();
    for (std::size_t l = 0; l + 1 < spec.widths.size(); ++l) {
        const std::size_t fan_in = spec.widths[l];
        const std::size_t fan_out = spec.widths[l + 1];
        const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
        Tensor w(fan_in, fan_out);
        for (auto& x : w.buffer()) x = rng.uniform(-bound, bound);
        params.add(prefix + ".W" + std::to_string(l), std::move(w));
        params.add(prefix + ".b" + std::to_string(l), Tensor::zeros(1, fan_out));
    }
}

int ParamNodes::id(const std::string& name) const {
    return ids[store->index_of(name)];
}

ParamNodes attach_params(Tape& tape, const ParamStore& params) {
    ParamNodes nodes;
    nodes.store = &params;
    nodes.ids.reserve(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
        nodes.ids.push_back(tape.leaf(params.value(i)));
    }
    return nodes;
}

namespace {

int apply_activation(Tape& tape, Activation act, int x) {
    switch (act) {
        case Activation::Identity: return x;
        case Activation::ReLU: return tape.relu(x);
        case Activation::Softplus: return tape.softplus(x);
        case Activation::Sigmoid: return tape.sigmoid(x);
    }
    throw ConfigError("unknown activation");
}

}  // namespace

int mlp_forward(Tape& tape, const MlpSpec& spec, const ParamNodes& params,
                const std::string& prefix, int input) {
    spec.validate();
    if (tape.value(input).cols() != spec.widths.front()) {
        throw ShapeMismatch("MLP input width mismatch");
    }
    int x = input;
    const std::size_t layers = spec.layer_count();
    for (std::size_t l = 0; l < layers; ++l) {
        const int w = params.id(prefix + ".W" + std::to_string(l));
        const int b = params.id(prefix + ".b" + std::to_string(l));
        x = tape.add_rowvec(tape.matmul(x, w), b);
        x = apply_activation(tape, l + 1 < layers ? spec.hidden : spec.output, x);
    }
    return x;
}

void adam_step(ParamStore& params, const std::vector<Tensor>& grads, AdamState& state,
               const AdamConfig& cfg) {
    if (grads.size() != params.size()) throw ShapeMismatch("gradient count mismatch");
    if (state.m.empty()) {
        state.m.reserve(params.size());
        state.v.reserve(params.size());
        for (std::size_t i = 0; i < params.size(); ++i) {
            state.m.push_back(Tensor::zeros(params.value(i).rows(), params.value(i).cols()));
            state.v.push_back(Tensor::zeros(params.value(i).rows(), params.value(i).cols()));
        }
    }
    state.t += 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor& p = params.value(i);
        const Tensor& g = grads[i];
        if (!p.same_shape(g)) throw ShapeMismatch("gradient shape mismatch for " + params.name(i));
        Tensor& m = state.m[i];
        Tensor& v = state.v[i];
        for (std::size_t j = 0; j < p.size(); ++j) {
            const double gj = g.buffer()[j];
            m.buffer()[j] = cfg.beta1 * m.buffer()[j] + (1.0 - cfg.beta1) * gj;
            v.buffer()[j] = cfg.beta2 * v.buffer()[j] + (1.0 - cfg.beta2) * gj * gj;
            const double mhat = m.buffer()[j] / bc1;
            const double vhat = v.buffer()[j] / bc2;
            p.buffer()[j] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
        }
    }
}

std::vector<Tensor> collect_grads(const Tape& tape, const ParamNodes& params) {
    std::vector<Tensor> grads;
    grads.reserve(params.ids.size());
    for (std::size_t i = 0; i < params.ids.size(); ++i) {
        const Tensor& g = tape.grad(params.ids[i]);
        if (g.empty()) {
            const Tensor& v = params.store->value(i);
            grads.push_back(Tensor::zeros(v.rows(), v.cols()));
        } else {
            grads.push_back(g);
        }
    }
    return grads;
}

double grad_check(const LossBuilder& build, ParamStore& params, std::size_t probe_count,
                  RandomStream& rng, double eps) {
    Tape tape;
    ParamNodes nodes = attach_params(tape, params);
    const int loss = build(tape, nodes);
    tape.backward(loss);
    const std::vector<Tensor> grads = collect_grads(tape, nodes);

    auto eval_loss = [&]() {
        Tape t;
        ParamNodes n = attach_params(t, params);
        return t.scalar(build(t, n));
    };

    double max_rel = 0.0;
    const std::size_t total = params.scalar_count();
    for (std::size_t probe = 0; probe < probe_count; ++probe) {
        std::size_t flat = rng.index(total);
        std::size_t pi = 0;
        while (flat >= params.value(pi).size()) {
            flat -= params.value(pi).size();
            ++pi;
        }
        double& slot = params.value(pi).buffer()[flat];
        const double original = slot;
        slot = original + eps;
        const double up = eval_loss();
        slot = original - eps;
        const double down = eval_loss();
        slot = original;
        const double fd = (up - down) / (2.0 * eps);
        const double ad = grads[pi].buffer()[flat];
        const double denom = std::max({std::abs(fd), std::abs(ad), 1e-6});
        max_rel = std::max(max_rel, std::abs(fd - ad) / denom);
    }
    return max_rel;
}

}  // namespace oma
