#include "dgseg/layers.hpp"

#include <Eigen/Core>
#include <cmath>
#include <cstring>
#include <numeric>
#include <stdexcept>

namespace dgseg {

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapMat = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMapMat = Eigen::Map<const RowMat<T>>;

std::size_t product(const std::vector<int>& d) {
  return std::accumulate(d.begin(), d.end(), std::size_t{1},
                         [](std::size_t a, int b) { return a * static_cast<std::size_t>(b); });
}

}  // namespace

template <typename T>
Param<T>::Param(std::string n, std::vector<int> d, T fill)
    : name(std::move(n)), dims(std::move(d)), value(product(dims), fill), grad(product(dims), T{0}) {}

// Conv2d -----------------------------------------------------------------------

template <typename T>
Conv2d<T>::Conv2d(const std::string& name, int in_channels, int out_channels, int kernel, int stride, bool bias)
    : in_(in_channels),
      out_(out_channels),
      kernel_(kernel),
      stride_(stride),
      pad_(kernel / 2),
      has_bias_(bias),
      weight_(name + ".weight", {out_channels, in_channels, kernel, kernel}),
      bias_(name + ".bias", {bias ? out_channels : 0}) {
  if (in_channels < 1 || out_channels < 1 || kernel < 1 || kernel % 2 == 0 || stride < 1) {
    throw std::invalid_argument("conv " + name + ": invalid geometry");
  }
}

template <typename T>
void Conv2d<T>::init(RandomSource& rng) {
  const double fan_in = static_cast<double>(in_) * kernel_ * kernel_;
  const double stddev = std::sqrt(2.0 / fan_in);
  for (T& w : weight_.value) w = static_cast<T>(rng.normal(0.0, stddev));
  std::fill(bias_.value.begin(), bias_.value.end(), T{0});
}

template <typename T>
Shape4 Conv2d<T>::output_shape(const Shape4& in) const {
  if (in.channels != in_) {
    throw std::invalid_argument(weight_.name + ": expected " + std::to_string(in_) + " input channels, got " +
                                std::to_string(in.channels));
  }
  const int ho = (in.height + 2 * pad_ - kernel_) / stride_ + 1;
  const int wo = (in.width + 2 * pad_ - kernel_) / stride_ + 1;
  return {in.batch, out_, ho, wo};
}

template <typename T>
void Conv2d<T>::im2col(const Tensor<T>& x, int b, T* col) const {
  const int h = x.height(), w = x.width();
  const int ho = (h + 2 * pad_ - kernel_) / stride_ + 1;
  const int wo = (w + 2 * pad_ - kernel_) / stride_ + 1;
  const std::size_t cols = static_cast<std::size_t>(ho) * wo;
  for (int c = 0; c < in_; ++c) {
    const T* src = x.channel(b, c).data();
    for (int ky = 0; ky < kernel_; ++ky) {
      for (int kx = 0; kx < kernel_; ++kx) {
        T* row = col + (static_cast<std::size_t>((c * kernel_ + ky) * kernel_ + kx)) * cols;
        for (int oy = 0; oy < ho; ++oy) {
          const int iy = oy * stride_ - pad_ + ky;
          T* dst = row + static_cast<std::size_t>(oy) * wo;
          if (iy < 0 || iy >= h) {
            std::fill(dst, dst + wo, T{0});
            continue;
          }
          const T* line = src + static_cast<std::size_t>(iy) * w;
          if (stride_ == 1) {
            // Contiguous interior, zero borders.
            const int lo = std::max(0, pad_ - kx);
            const int hi = std::min(wo, w + pad_ - kx);
            std::fill(dst, dst + lo, T{0});
            if (hi > lo) std::memcpy(dst + lo, line + lo - pad_ + kx, sizeof(T) * (hi - lo));
            std::fill(dst + std::max(hi, lo), dst + wo, T{0});
          } else {
            for (int ox = 0; ox < wo; ++ox) {
              const int ix = ox * stride_ - pad_ + kx;
              dst[ox] = (ix < 0 || ix >= w) ? T{0} : line[ix];
            }
          }
        }
      }
    }
  }
}

template <typename T>
void Conv2d<T>::col2im(const T* col, Tensor<T>& dx, int b) const {
  const int h = dx.height(), w = dx.width();
  const int ho = (h + 2 * pad_ - kernel_) / stride_ + 1;
  const int wo = (w + 2 * pad_ - kernel_) / stride_ + 1;
  const std::size_t cols = static_cast<std::size_t>(ho) * wo;
  for (int c = 0; c < in_; ++c) {
    T* dst = dx.channel(b, c).data();
    for (int ky = 0; ky < kernel_; ++ky) {
      for (int kx = 0; kx < kernel_; ++kx) {
        const T* row = col + (static_cast<std::size_t>((c * kernel_ + ky) * kernel_ + kx)) * cols;
        for (int oy = 0; oy < ho; ++oy) {
          const int iy = oy * stride_ - pad_ + ky;
          if (iy < 0 || iy >= h) continue;
          const T* src = row + static_cast<std::size_t>(oy) * wo;
          T* line = dst + static_cast<std::size_t>(iy) * w;
          for (int ox = 0; ox < wo; ++ox) {
            const int ix = ox * stride_ - pad_ + kx;
            if (ix >= 0 && ix < w) line[ix] += src[ox];
          }
        }
      }
    }
  }
}

template <typename T>
Tensor<T> Conv2d<T>::forward(const Tensor<T>& x) {
  const Shape4 os = output_shape(x.shape());
  input_ = x;
  Tensor<T> y(os);
  const std::size_t cols = os.plane();
  const std::size_t rows = static_cast<std::size_t>(in_) * kernel_ * kernel_;
  const bool direct = kernel_ == 1 && stride_ == 1;
  if (!direct) col_.resize(rows * cols);
  ConstMapMat<T> wmat(weight_.value.data(), out_, static_cast<Eigen::Index>(rows));
  for (int b = 0; b < x.batch(); ++b) {
    const T* colp = direct ? x.sample(b).data() : col_.data();
    if (!direct) im2col(x, b, col_.data());
    ConstMapMat<T> cmat(colp, static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    MapMat<T> ymat(y.sample(b).data(), out_, static_cast<Eigen::Index>(cols));
    ymat.noalias() = wmat * cmat;
    if (has_bias_) {
      for (int o = 0; o < out_; ++o) ymat.row(o).array() += bias_.value[o];
    }
  }
  return y;
}

template <typename T>
Tensor<T> Conv2d<T>::backward(const Tensor<T>& grad_out) {
  const Shape4 os = output_shape(input_.shape());
  if (grad_out.shape() != os) throw std::invalid_argument(weight_.name + ": gradient shape mismatch");
  Tensor<T> dx(input_.shape());
  const std::size_t cols = os.plane();
  const auto rows = static_cast<Eigen::Index>(static_cast<std::size_t>(in_) * kernel_ * kernel_);
  const bool direct = kernel_ == 1 && stride_ == 1;
  if (!direct) col_.resize(static_cast<std::size_t>(rows) * cols);
  std::vector<T> dcol(direct ? 0 : static_cast<std::size_t>(rows) * cols);
  ConstMapMat<T> wmat(weight_.value.data(), out_, rows);
  MapMat<T> dw(weight_.grad.data(), out_, rows);
  for (int b = 0; b < input_.batch(); ++b) {
    ConstMapMat<T> gmat(grad_out.sample(b).data(), out_, static_cast<Eigen::Index>(cols));
    if (direct) {
      ConstMapMat<T> cmat(input_.sample(b).data(), rows, static_cast<Eigen::Index>(cols));
      dw.noalias() += gmat * cmat.transpose();
      MapMat<T> dxmat(dx.sample(b).data(), rows, static_cast<Eigen::Index>(cols));
      dxmat.noalias() = wmat.transpose() * gmat;
    } else {
      im2col(input_, b, col_.data());
      ConstMapMat<T> cmat(col_.data(), rows, static_cast<Eigen::Index>(cols));
      dw.noalias() += gmat * cmat.transpose();
      MapMat<T> dcmat(dcol.data(), rows, static_cast<Eigen::Index>(cols));
      dcmat.noalias() = wmat.transpose() * gmat;
      col2im(dcol.data(), dx, b);
    }
    if (has_bias_) {
      // Plain loop: Eigen's vectorized sum peels by pointer alignment, which
      // makes the result depend on where the allocator put the buffer.
      for (int o = 0; o < out_; ++o) {
        double s = 0.0;
        for (Eigen::Index k = 0; k < gmat.cols(); ++k) s += gmat(o, k);
        bias_.grad[o] += static_cast<T>(s);
      }
    }
  }
  return dx;
}

template <typename T>
void Conv2d<T>::collect(std::vector<Param<T>*>& params) {
  params.push_back(&weight_);
  if (has_bias_) params.push_back(&bias_);
}

// BatchNorm2d ------------------------------------------------------------------

template <typename T>
BatchNorm2d<T>::BatchNorm2d(const std::string& name, int channels)
    : channels_(channels),
      gamma_(name + ".weight", {channels}, T{1}),
      beta_(name + ".bias", {channels}, T{0}),
      running_mean_(name + ".running_mean", {channels}, T{0}),
      running_var_(name + ".running_var", {channels}, T{1}) {}

template <typename T>
Tensor<T> BatchNorm2d<T>::forward(const Tensor<T>& x, NormMode mode) {
  if (x.channels() != channels_) throw std::invalid_argument(gamma_.name + ": channel mismatch");
  last_mode_ = mode;
  const std::size_t n = static_cast<std::size_t>(x.batch()) * x.plane();
  xhat_ = Tensor<T>(x.shape());
  inv_std_.assign(static_cast<std::size_t>(channels_), 0.0);
  Tensor<T> y(x.shape());
  for (int c = 0; c < channels_; ++c) {
    double mean, var;
    if (mode == NormMode::batch) {
      double sum = 0.0;
      for (int b = 0; b < x.batch(); ++b)
        for (T v : x.channel(b, c)) sum += v;
      mean = sum / static_cast<double>(n);
      double ss = 0.0;
      for (int b = 0; b < x.batch(); ++b)
        for (T v : x.channel(b, c)) ss += (v - mean) * (v - mean);
      var = ss / static_cast<double>(n);
      const double unbiased = n > 1 ? ss / static_cast<double>(n - 1) : var;
      running_mean_.value[c] =
          static_cast<T>((1.0 - kMomentum) * running_mean_.value[c] + kMomentum * mean);
      running_var_.value[c] =
          static_cast<T>((1.0 - kMomentum) * running_var_.value[c] + kMomentum * unbiased);
    } else {
      mean = running_mean_.value[c];
      var = running_var_.value[c];
    }
    const double inv = 1.0 / std::sqrt(var + kEps);
    inv_std_[c] = inv;
    const double g = gamma_.value[c], be = beta_.value[c];
    for (int b = 0; b < x.batch(); ++b) {
      const auto src = x.channel(b, c);
      auto xh = xhat_.channel(b, c);
      auto dst = y.channel(b, c);
      for (std::size_t i = 0; i < src.size(); ++i) {
        const double v = (src[i] - mean) * inv;
        xh[i] = static_cast<T>(v);
        dst[i] = static_cast<T>(g * v + be);
      }
    }
  }
  return y;
}

template <typename T>
Tensor<T> BatchNorm2d<T>::backward(const Tensor<T>& grad_out) {
  if (grad_out.shape() != xhat_.shape()) throw std::invalid_argument(gamma_.name + ": gradient shape mismatch");
  Tensor<T> dx(grad_out.shape());
  const double n = static_cast<double>(grad_out.batch()) * static_cast<double>(grad_out.plane());
  for (int c = 0; c < channels_; ++c) {
    double sum_dy = 0.0, sum_dy_xhat = 0.0;
    for (int b = 0; b < grad_out.batch(); ++b) {
      const auto dy = grad_out.channel(b, c);
      const auto xh = xhat_.channel(b, c);
      for (std::size_t i = 0; i < dy.size(); ++i) {
        sum_dy += dy[i];
        sum_dy_xhat += static_cast<double>(dy[i]) * xh[i];
      }
    }
    gamma_.grad[c] += static_cast<T>(sum_dy_xhat);
    beta_.grad[c] += static_cast<T>(sum_dy);
    const double g = gamma_.value[c];
    const double inv = inv_std_[c];
    for (int b = 0; b < grad_out.batch(); ++b) {
      const auto dy = grad_out.channel(b, c);
      const auto xh = xhat_.channel(b, c);
      auto d = dx.channel(b, c);
      if (last_mode_ == NormMode::batch) {
        const double k = g * inv / n;
        for (std::size_t i = 0; i < dy.size(); ++i) {
          d[i] = static_cast<T>(k * (n * dy[i] - sum_dy - xh[i] * sum_dy_xhat));
        }
      } else {
        for (std::size_t i = 0; i < dy.size(); ++i) d[i] = static_cast<T>(g * inv * dy[i]);
      }
    }
  }
  return dx;
}

template <typename T>
void BatchNorm2d<T>::collect(std::vector<Param<T>*>& params) {
  params.push_back(&gamma_);
  params.push_back(&beta_);
}

template <typename T>
void BatchNorm2d<T>::collect_buffers(std::vector<Param<T>*>& buffers) {
  buffers.push_back(&running_mean_);
  buffers.push_back(&running_var_);
}

// Elementwise and shape ops ------------------------------------------------------

template <typename T>
void relu_inplace(Tensor<T>& x) {
  for (T& v : x.values()) v = v > T{0} ? v : T{0};
}

template <typename T>
void relu_backward_inplace(Tensor<T>& grad, const Tensor<T>& activated) {
  auto g = grad.values();
  const auto a = activated.values();
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!(a[i] > T{0})) g[i] = T{0};
  }
}

template <typename T>
Tensor<T> upsample2x(const Tensor<T>& x) {
  Tensor<T> y({x.batch(), x.channels(), x.height() * 2, x.width() * 2});
  for (int b = 0; b < x.batch(); ++b) {
    for (int c = 0; c < x.channels(); ++c) {
      const T* src = x.channel(b, c).data();
      T* dst = y.channel(b, c).data();
      const int w2 = x.width() * 2;
      for (int i = 0; i < x.height(); ++i) {
        T* r0 = dst + static_cast<std::size_t>(2 * i) * w2;
        for (int j = 0; j < x.width(); ++j) {
          const T v = src[static_cast<std::size_t>(i) * x.width() + j];
          r0[2 * j] = v;
          r0[2 * j + 1] = v;
        }
        std::memcpy(r0 + w2, r0, sizeof(T) * w2);
      }
    }
  }
  return y;
}

template <typename T>
Tensor<T> upsample2x_backward(const Tensor<T>& grad) {
  if (grad.height() % 2 || grad.width() % 2) throw std::invalid_argument("upsample backward: odd size");
  Tensor<T> dx({grad.batch(), grad.channels(), grad.height() / 2, grad.width() / 2});
  for (int b = 0; b < grad.batch(); ++b) {
    for (int c = 0; c < grad.channels(); ++c) {
      for (int i = 0; i < dx.height(); ++i) {
        for (int j = 0; j < dx.width(); ++j) {
          dx(b, c, i, j) = grad(b, c, 2 * i, 2 * j) + grad(b, c, 2 * i, 2 * j + 1) + grad(b, c, 2 * i + 1, 2 * j) +
                           grad(b, c, 2 * i + 1, 2 * j + 1);
        }
      }
    }
  }
  return dx;
}

template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.batch() != b.batch() || a.height() != b.height() || a.width() != b.width()) {
    throw std::invalid_argument("concat: spatial/batch mismatch " + to_string(a.shape()) + " vs " +
                                to_string(b.shape()));
  }
  Tensor<T> y({a.batch(), a.channels() + b.channels(), a.height(), a.width()});
  for (int n = 0; n < a.batch(); ++n) {
    auto dst = y.sample(n);
    const auto sa = a.sample(n);
    const auto sb = b.sample(n);
    std::copy(sa.begin(), sa.end(), dst.begin());
    std::copy(sb.begin(), sb.end(), dst.begin() + static_cast<std::ptrdiff_t>(sa.size()));
  }
  return y;
}

template <typename T>
std::pair<Tensor<T>, Tensor<T>> split_channels(const Tensor<T>& g, int split) {
  if (split <= 0 || split >= g.channels()) throw std::invalid_argument("split_channels: bad split");
  Tensor<T> a({g.batch(), split, g.height(), g.width()});
  Tensor<T> b({g.batch(), g.channels() - split, g.height(), g.width()});
  for (int n = 0; n < g.batch(); ++n) {
    const auto src = g.sample(n);
    auto da = a.sample(n);
    auto db = b.sample(n);
    std::copy(src.begin(), src.begin() + static_cast<std::ptrdiff_t>(da.size()), da.begin());
    std::copy(src.begin() + static_cast<std::ptrdiff_t>(da.size()), src.end(), db.begin());
  }
  return {std::move(a), std::move(b)};
}

template <typename T>
void add_inplace(Tensor<T>& dst, const Tensor<T>& src) {
  if (dst.shape() != src.shape()) throw std::invalid_argument("add: shape mismatch");
  auto d = dst.values();
  const auto s = src.values();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
}

#define DGSEG_INSTANTIATE(T)                                                           \
  template struct Param<T>;                                                           \
  template class Conv2d<T>;                                                           \
  template class BatchNorm2d<T>;                                                      \
  template void relu_inplace<T>(Tensor<T>&);                                          \
  template void relu_backward_inplace<T>(Tensor<T>&, const Tensor<T>&);               \
  template Tensor<T> upsample2x<T>(const Tensor<T>&);                                 \
  template Tensor<T> upsample2x_backward<T>(const Tensor<T>&);                        \
  template Tensor<T> concat_channels<T>(const Tensor<T>&, const Tensor<T>&);          \
  template std::pair<Tensor<T>, Tensor<T>> split_channels<T>(const Tensor<T>&, int); \
  template void add_inplace<T>(Tensor<T>&, const Tensor<T>&);

DGSEG_INSTANTIATE(float)
DGSEG_INSTANTIATE(double)
#undef DGSEG_INSTANTIATE

}  // namespace dgseg
