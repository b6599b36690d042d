#include "shapeinst/adam.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace shapeinst {

AdamState::AdamState(std::span<const Tensor> params) {
  first_.reserve(params.size());
  second_.reserve(params.size());
  for (const Tensor& p : params) {
    first_.emplace_back(p.size(), 0.0);
    second_.emplace_back(p.size(), 0.0);
  }
}

void adam_step(std::span<Tensor> params, AdamState& state, double lr,
               const AdamOptions& options) {
  if (lr <= 0.0)
    throw std::invalid_argument("adam_step: learning rate must be positive, got " +
                                std::to_string(lr));
  if (params.size() != state.first_.size())
    throw std::invalid_argument("adam_step: state holds " +
                                std::to_string(state.first_.size()) + " buffers but " +
                                std::to_string(params.size()) + " parameters were given");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i].has_grad())
      throw std::invalid_argument("adam_step: parameter " + std::to_string(i) +
                                  " has no gradient");
    if (params[i].size() != state.first_[i].size())
      throw std::invalid_argument("adam_step: parameter " + std::to_string(i) +
                                  " shape does not match the optimizer state");
  }

  state.step_ += 1;
  const double t = static_cast<double>(state.step_);
  const double bc1 = 1.0 - std::pow(options.beta1, t);
  const double bc2 = 1.0 - std::pow(options.beta2, t);

  for (std::size_t i = 0; i < params.size(); ++i) {
    std::span<double> x = params[i].mutable_data();
    std::span<const double> g = params[i].grad();
    std::vector<double>& m = state.first_[i];
    std::vector<double>& v = state.second_[i];
    for (std::size_t j = 0; j < x.size(); ++j) {
      m[j] = options.beta1 * m[j] + (1.0 - options.beta1) * g[j];
      v[j] = options.beta2 * v[j] + (1.0 - options.beta2) * g[j] * g[j];
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      x[j] -= lr * mhat / (std::sqrt(vhat) + options.epsilon);
    }
  }
}

}  // namespace shapeinst
