#include "wsmil/optim.hpp"

#include "wsmil/error.hpp"

#include <cmath>
#include <string>

namespace wsmil {

std::string_view to_string(OptimizerKind kind) noexcept { return kind == OptimizerKind::SGD ? "sgd" : "adam"; }

OptimizerKind parse_optimizer(std::string_view text) {
    if (text == "sgd" || text == "SGD") return OptimizerKind::SGD;
    if (text == "adam" || text == "Adam") return OptimizerKind::Adam;
    throw Error("config", "optimizer must be sgd or adam, got '" + std::string(text) + "'");
}

Optimizer::Optimizer(OptimizerConfig config, std::size_t parameter_count)
    : config_(config), first_(parameter_count, 0.0),
      second_(config.kind == OptimizerKind::Adam ? parameter_count : 0, 0.0) {}

void Optimizer::step(std::span<double> params, std::span<const double> grad, double learning_rate) {
    if (params.size() != first_.size() || grad.size() != first_.size())
        throw Error("optim", "optimizer state does not match parameter count");
    ++steps_;
    const std::size_t n = params.size();
    if (config_.kind == OptimizerKind::SGD) {
        const double mu = config_.momentum;
        for (std::size_t i = 0; i < n; ++i) {
            first_[i] = mu * first_[i] + grad[i];
            params[i] -= learning_rate * first_[i];
        }
        return;
    }
    const double b1 = config_.beta1, b2 = config_.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
    for (std::size_t i = 0; i < n; ++i) {
        first_[i] = b1 * first_[i] + (1.0 - b1) * grad[i];
        second_[i] = b2 * second_[i] + (1.0 - b2) * grad[i] * grad[i];
        params[i] -= learning_rate * (first_[i] / c1) / (std::sqrt(second_[i] / c2) + config_.epsilon);
    }
}

} // namespace wsmil
