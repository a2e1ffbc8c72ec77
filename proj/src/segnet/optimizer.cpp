#include <cmath>
#include <stdexcept>

#include "dgseg/training.hpp"

namespace dgseg {

void TrainSchedule::validate() const {
  if (!(l0 > 0.0)) throw std::invalid_argument("schedule: l0 must be positive");
  if (epochs < 1) throw std::invalid_argument("schedule: epochs must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw std::invalid_argument("schedule: momentum must lie in [0, 1)");
  if (batch_size < 1) throw std::invalid_argument("schedule: batch_size must be positive");
}

double poly_lr(const TrainSchedule& schedule, int epoch) {
  if (epoch < 0 || epoch > schedule.epochs) {
    throw std::invalid_argument("poly_lr: epoch " + std::to_string(epoch) + " outside [0, " +
                                std::to_string(schedule.epochs) + "]");
  }
  return schedule.l0 * std::pow(1.0 - static_cast<double>(epoch) / schedule.epochs, 0.9);
}

template <typename T>
void sgd_step(std::span<T> params, std::span<const T> grads, double lr, double momentum, std::span<T> velocity,
              const std::string& what) {
  if (params.size() != grads.size() || params.size() != velocity.size()) {
    throw std::invalid_argument("sgd_step: size mismatch for " + what);
  }
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (!std::isfinite(grads[i])) {
      throw std::runtime_error("sgd_step: non-finite gradient in " + what + " at element " + std::to_string(i));
    }
  }
  const T m = static_cast<T>(momentum);
  const T l = static_cast<T>(lr);
  for (std::size_t i = 0; i < params.size(); ++i) {
    velocity[i] = m * velocity[i] + grads[i];
    params[i] -= l * velocity[i];
  }
}

template <typename T>
void SgdMomentum<T>::step(const std::vector<Param<T>*>& params, double lr) {
  if (velocity_.empty()) {
    for (auto* p : params) velocity_.emplace_back(p->size(), T{0});
  }
  if (velocity_.size() != params.size()) throw std::logic_error("optimizer: parameter list changed");
  for (std::size_t i = 0; i < params.size(); ++i) {
    sgd_step<T>(params[i]->value, params[i]->grad, lr, momentum_, velocity_[i], params[i]->name);
  }
}

template void sgd_step<float>(std::span<float>, std::span<const float>, double, double, std::span<float>,
                              const std::string&);
template void sgd_step<double>(std::span<double>, std::span<const double>, double, double, std::span<double>,
                               const std::string&);
template class SgdMomentum<float>;
template class SgdMomentum<double>;

}  // namespace dgseg
