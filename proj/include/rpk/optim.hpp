#ifndef RPK_OPTIM_HPP
#define RPK_OPTIM_HPP

#include <cmath>
#include <cstdint>
#include <vector>

#include "rpk/tensor.hpp"

namespace rpk {

// Step schedule: initial_lr * 10^(-floor(epoch / decay_every)).
inline double lr_at(int64_t epoch, double initial_lr = 0.05, int64_t decay_every = 150) {
    if (epoch < 0) throw ConfigError("lr_at: negative epoch");
    if (decay_every < 1) throw ConfigError("lr_at: decay interval must be positive");
    return initial_lr * std::pow(10.0, -static_cast<double>(epoch / decay_every));
}

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Bias-corrected Adam over a fixed parameter list. Parameters with no
// accumulated gradient are treated as having zero gradient.
class Adam {
public:
    explicit Adam(std::vector<Tensor> params, AdamConfig cfg = {}) : params_(std::move(params)), cfg_(cfg) {
        slots_.resize(params_.size());
        for (size_t i = 0; i < params_.size(); ++i) {
            slots_[i].m.assign(params_[i].values().size(), 0.0);
            slots_[i].v.assign(params_[i].values().size(), 0.0);
        }
    }

    void zero_grad() {
        for (auto& p : params_) p.zero_grad();
    }

    void step(double lr) {
        ++t_;
        const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
        for (size_t i = 0; i < params_.size(); ++i) {
            auto& p = params_[i];
            auto& slot = slots_[i];
            auto& val = p.values_mut();
            const bool has_grad = p.has_grad();
            const std::vector<double>* g = has_grad ? &p.grad() : nullptr;
            for (size_t j = 0; j < val.size(); ++j) {
                double gj = has_grad ? (*g)[j] : 0.0;
                if (!std::isfinite(gj)) throw NumericsError("adam: non-finite gradient");
                slot.m[j] = cfg_.beta1 * slot.m[j] + (1.0 - cfg_.beta1) * gj;
                slot.v[j] = cfg_.beta2 * slot.v[j] + (1.0 - cfg_.beta2) * gj * gj;
                double mhat = slot.m[j] / bc1;
                double vhat = slot.v[j] / bc2;
                val[j] -= lr * mhat / (std::sqrt(vhat) + cfg_.eps);
            }
        }
    }

    int64_t step_count() const { return t_; }
    const std::vector<Tensor>& params() const { return params_; }

private:
    struct Slot {
        std::vector<double> m, v;
    };
    std::vector<Tensor> params_;
    std::vector<Slot> slots_;
    AdamConfig cfg_;
    int64_t t_ = 0;
};

}  // namespace rpk

#endif  // RPK_OPTIM_HPP
