#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace wsmil {

enum class OptimizerKind { SGD, Adam };

std::string_view to_string(OptimizerKind kind) noexcept;
OptimizerKind parse_optimizer(std::string_view text);

struct OptimizerConfig {
    OptimizerKind kind = OptimizerKind::SGD;
    double momentum = 0.9;  // SGD only
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

class Optimizer {
public:
    Optimizer(OptimizerConfig config, std::size_t parameter_count);

    // params -= update(grad) at the given learning rate.
    void step(std::span<double> params, std::span<const double> grad, double learning_rate);

private:
    OptimizerConfig config_;
    std::vector<double> first_;
    std::vector<double> second_;
    long steps_ = 0;
};

} // namespace wsmil
