#include <cmath>
#include <stdexcept>
#include <vector>

#include "dgseg/training.hpp"

namespace dgseg {

template <typename T>
LossResult<T> dice_ce_loss(const Tensor<T>& logits, const LabelBatch& labels, double smooth) {
  const int classes = logits.channels();
  if (classes < 2) throw std::invalid_argument("loss: need at least two classes");
  if (labels.batch() != logits.batch() || labels.channels() != 1 || labels.height() != logits.height() ||
      labels.width() != logits.width()) {
    throw std::invalid_argument("loss: label shape " + to_string(labels.shape()) + " does not match logits " +
                                to_string(logits.shape()));
  }
  for (std::uint8_t l : labels.values()) {
    if (l >= classes) throw std::invalid_argument("loss: label " + std::to_string(l) + " out of range");
  }
  const std::size_t plane = logits.plane();
  const double n = static_cast<double>(logits.batch()) * static_cast<double>(plane);

  // Softmax probabilities, stored in the gradient tensor first.
  LossResult<T> r;
  r.grad = Tensor<T>(logits.shape());
  std::vector<double> prob(static_cast<std::size_t>(classes));
  std::vector<double> inter(static_cast<std::size_t>(classes), 0.0);
  std::vector<double> psum(static_cast<std::size_t>(classes), 0.0);
  std::vector<double> gsum(static_cast<std::size_t>(classes), 0.0);
  double ce = 0.0;
  for (int b = 0; b < logits.batch(); ++b) {
    const auto lab = labels.channel(b, 0);
    for (std::size_t i = 0; i < plane; ++i) {
      double mx = -INFINITY;
      for (int k = 0; k < classes; ++k) mx = std::max(mx, static_cast<double>(logits.channel(b, k)[i]));
      double z = 0.0;
      for (int k = 0; k < classes; ++k) {
        prob[k] = std::exp(static_cast<double>(logits.channel(b, k)[i]) - mx);
        z += prob[k];
      }
      const int y = lab[i];
      ce -= static_cast<double>(logits.channel(b, y)[i]) - mx - std::log(z);
      for (int k = 0; k < classes; ++k) {
        prob[k] /= z;
        r.grad.channel(b, k)[i] = static_cast<T>(prob[k]);
        psum[k] += prob[k];
      }
      inter[y] += prob[y];
      gsum[y] += 1.0;
    }
  }
  r.ce = ce / n;

  const int fg = classes - 1;
  std::vector<double> dice_coef(static_cast<std::size_t>(classes), 0.0);
  double dice_mean = 0.0;
  for (int k = 1; k < classes; ++k) {
    const double den = psum[k] + gsum[k] + smooth;
    dice_mean += (2.0 * inter[k] + smooth) / den;
  }
  dice_mean /= fg;
  r.dice = 1.0 - dice_mean;
  r.total = r.dice + r.ce;

  // dDice/dp_k = -(1/fg) * (2 g_k den_k - (2 I_k + s)) / den_k^2, then chain through softmax.
  std::vector<double> a(static_cast<std::size_t>(classes));
  for (int b = 0; b < logits.batch(); ++b) {
    const auto lab = labels.channel(b, 0);
    for (std::size_t i = 0; i < plane; ++i) {
      const int y = lab[i];
      double dot = 0.0;
      for (int k = 0; k < classes; ++k) {
        prob[k] = r.grad.channel(b, k)[i];
        if (k == 0) {
          a[k] = 0.0;
        } else {
          const double den = psum[k] + gsum[k] + smooth;
          const double g = y == k ? 1.0 : 0.0;
          a[k] = -(2.0 * g * den - (2.0 * inter[k] + smooth)) / (den * den * fg);
        }
        dot += a[k] * prob[k];
      }
      for (int k = 0; k < classes; ++k) {
        const double d_dice = prob[k] * (a[k] - dot);
        const double d_ce = (prob[k] - (y == k ? 1.0 : 0.0)) / n;
        r.grad.channel(b, k)[i] = static_cast<T>(d_dice + d_ce);
      }
    }
  }
  return r;
}

template LossResult<float> dice_ce_loss<float>(const Tensor<float>&, const LabelBatch&, double);
template LossResult<double> dice_ce_loss<double>(const Tensor<double>&, const LabelBatch&, double);

}  // namespace dgseg
