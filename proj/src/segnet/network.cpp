#include "dgseg/network.hpp"

#include <stdexcept>

namespace dgseg {

// InsertionSet -------------------------------------------------------------------

InsertionSet InsertionSet::of(std::initializer_list<int> stages) {
  InsertionSet s;
  for (int st : stages) {
    if (st < 1 || st > kNumStages) throw std::invalid_argument("insertion point res" + std::to_string(st));
    s.bits_ |= static_cast<std::uint8_t>(1U << (st - 1));
  }
  return s;
}

InsertionSet InsertionSet::parse(const std::string& tag) {
  if (tag == "none" || tag.empty()) return {};
  if (tag.rfind("res", 0) != 0 || tag.size() == 3) {
    throw std::invalid_argument("insertion set '" + tag + "' must look like res1, res12, ... or none");
  }
  InsertionSet s;
  for (std::size_t i = 3; i < tag.size(); ++i) {
    const int st = tag[i] - '0';
    if (st < 1 || st > kNumStages || s.contains(st)) {
      throw std::invalid_argument("insertion set '" + tag + "' names an invalid or repeated stage");
    }
    s.bits_ |= static_cast<std::uint8_t>(1U << (st - 1));
  }
  return s;
}

std::string InsertionSet::to_string() const {
  if (empty()) return "none";
  std::string s = "res";
  for (int st = 1; st <= kNumStages; ++st)
    if (contains(st)) s += static_cast<char>('0' + st);
  return s;
}

std::vector<std::string> InsertionSet::names() const {
  std::vector<std::string> v;
  for (int st = 1; st <= kNumStages; ++st)
    if (contains(st)) v.push_back("res" + std::to_string(st));
  return v;
}

void NetworkConfig::validate() const {
  if (in_channels < 1) throw std::invalid_argument("network: in_channels must be positive");
  if (num_classes < 2) throw std::invalid_argument("network: num_classes must be at least 2");
  if (static_cast<int>(stage_widths.size()) != kNumStages) {
    throw std::invalid_argument("network: expected " + std::to_string(kNumStages) + " stage widths, got " +
                                std::to_string(stage_widths.size()));
  }
  for (int w : stage_widths)
    if (w < 1) throw std::invalid_argument("network: stage widths must be positive");
  if (blocks_per_stage < 1) throw std::invalid_argument("network: blocks_per_stage must be positive");
}

// Residual block -------------------------------------------------------------------

template <typename T>
Tensor<T> Network<T>::ResBlock::forward(const Tensor<T>& x, NormMode mode) {
  Tensor<T> h = bn1.forward(conv1.forward(x), mode);
  relu_inplace(h);
  mid = h;
  Tensor<T> y = bn2.forward(conv2.forward(mid), mode);
  if (proj) {
    add_inplace(y, proj_bn->forward(proj->forward(x), mode));
  } else {
    add_inplace(y, x);
  }
  relu_inplace(y);
  out = y;
  return y;
}

template <typename T>
Tensor<T> Network<T>::ResBlock::backward(Tensor<T> grad) {
  relu_backward_inplace(grad, out);
  Tensor<T> g = conv2.backward(bn2.backward(grad));
  relu_backward_inplace(g, mid);
  g = conv1.backward(bn1.backward(g));
  if (proj) {
    add_inplace(g, proj->backward(proj_bn->backward(grad)));
  } else {
    add_inplace(g, grad);
  }
  return g;
}

template <typename T>
void Network<T>::ResBlock::collect(std::vector<Param<T>*>& p) {
  conv1.collect(p);
  bn1.collect(p);
  conv2.collect(p);
  bn2.collect(p);
  if (proj) {
    proj->collect(p);
    proj_bn->collect(p);
  }
}

template <typename T>
void Network<T>::ResBlock::collect_buffers(std::vector<Param<T>*>& p) {
  bn1.collect_buffers(p);
  bn2.collect_buffers(p);
  if (proj_bn) proj_bn->collect_buffers(p);
}

// Network ---------------------------------------------------------------------------

template <typename T>
Network<T>::Network(NetworkConfig cfg, RandomSource init_rng) : cfg_(std::move(cfg)) {
  cfg_.validate();
  const auto& w = cfg_.stage_widths;
  stem_conv_ = Conv2d<T>("stem.conv", cfg_.in_channels, w[0], 3, 1, false);
  stem_bn_ = BatchNorm2d<T>("stem.bn", w[0]);
  for (int s = 0; s < kNumStages; ++s) {
    int in = s == 0 ? w[0] : w[s - 1];
    for (int k = 0; k < cfg_.blocks_per_stage; ++k) {
      const std::string name = "res" + std::to_string(s + 1) + "." + std::to_string(k);
      const int stride = k == 0 ? 2 : 1;
      ResBlock blk{Conv2d<T>(name + ".conv1", in, w[s], 3, stride, false),
                   Conv2d<T>(name + ".conv2", w[s], w[s], 3, 1, false),
                   BatchNorm2d<T>(name + ".bn1", w[s]),
                   BatchNorm2d<T>(name + ".bn2", w[s]),
                   std::nullopt,
                   std::nullopt,
                   {},
                   {}};
      if (stride != 1 || in != w[s]) {
        blk.proj.emplace(name + ".proj", in, w[s], 1, stride, false);
        blk.proj_bn.emplace(name + ".proj_bn", w[s]);
      }
      stages_[s].push_back(std::move(blk));
      in = w[s];
    }
  }
  for (int i = kNumStages - 1; i >= 0; --i) {
    const int up = i == kNumStages - 1 ? w[kNumStages - 1] : w[i];
    const int skip = i == 0 ? w[0] : w[i - 1];
    const std::string name = "dec" + std::to_string(i);
    decoder_[i] = DecoderLevel{Conv2d<T>(name + ".conv", up + skip, skip, 3, 1, false),
                               BatchNorm2d<T>(name + ".bn", skip), up, {}};
  }
  head_ = Conv2d<T>("head", w[0], cfg_.num_classes, 1, 1, true);

  stem_conv_.init(init_rng);
  for (auto& stage : stages_) {
    for (auto& blk : stage) {
      blk.conv1.init(init_rng);
      blk.conv2.init(init_rng);
      if (blk.proj) blk.proj->init(init_rng);
    }
  }
  for (int i = kNumStages - 1; i >= 0; --i) decoder_[i].conv.init(init_rng);
  head_.init(init_rng);
}

template <typename T>
Tensor<T> Network<T>::forward(const Tensor<T>& images, const PerturbConfig& perturb_cfg, Mode mode,
                              RandomSource& rng, const ForwardOptions<T>& opts) {
  if (images.channels() != cfg_.in_channels) {
    throw std::invalid_argument("forward: expected " + std::to_string(cfg_.in_channels) + " input channels");
  }
  const int f = cfg_.downsample_factor();
  if (images.height() % f != 0 || images.width() % f != 0) {
    throw std::invalid_argument("forward: image size " + std::to_string(images.height()) + "x" +
                                std::to_string(images.width()) + " is not divisible by " + std::to_string(f));
  }
  const NormMode norm = opts.norm.value_or(mode == Mode::train ? NormMode::batch : NormMode::running);

  stem_out_ = stem_bn_.forward(stem_conv_.forward(images), norm);
  relu_inplace(stem_out_);

  std::array<Tensor<T>, kNumStages> skips;
  const Tensor<T>* feat = &stem_out_;
  for (int s = 0; s < kNumStages; ++s) {
    Tensor<T> x = *feat;
    for (auto& blk : stages_[s]) x = blk.forward(x, norm);
    if (opts.capture) opts.capture(s + 1, x);
    hooks_[s].reset();
    hook_applied_[s] = false;
    if (mode == Mode::train && cfg_.insertion_points.contains(s + 1)) {
      PerturbResult<T> r = perturb(x, perturb_cfg, mode, rng, opts.controls);
      x = std::move(r.output);
      r.output = Tensor<T>();
      hook_applied_[s] = r.applied;
      hooks_[s] = std::move(r);
    }
    skips[s] = std::move(x);
    feat = &skips[s];
  }

  Tensor<T> d = skips[kNumStages - 1];
  for (int i = kNumStages - 1; i >= 0; --i) {
    DecoderLevel& lvl = decoder_[i];
    const Tensor<T>& skip = i == 0 ? stem_out_ : skips[i - 1];
    Tensor<T> y = lvl.bn.forward(lvl.conv.forward(concat_channels(upsample2x(d), skip)), norm);
    relu_inplace(y);
    lvl.out = y;
    d = std::move(y);
  }
  return head_.forward(d);
}

template <typename T>
void Network<T>::backward(const Tensor<T>& grad_logits) {
  Tensor<T> g = head_.backward(grad_logits);
  std::array<Tensor<T>, kNumStages> g_skip;  // index s-1 for skip from stage s; index 3 unused
  Tensor<T> g_stem;
  for (int i = 0; i < kNumStages; ++i) {
    DecoderLevel& lvl = decoder_[i];
    relu_backward_inplace(g, lvl.out);
    Tensor<T> gc = lvl.conv.backward(lvl.bn.backward(g));
    auto [g_up, g_sk] = split_channels(gc, lvl.up_channels);
    if (i == 0) {
      g_stem = std::move(g_sk);
    } else {
      g_skip[i - 1] = std::move(g_sk);
    }
    g = upsample2x_backward(g_up);
  }
  // g is now the gradient w.r.t. the (perturbed) output of the last stage.
  for (int s = kNumStages - 1; s >= 0; --s) {
    if (hooks_[s]) g = perturb_backward(*hooks_[s], std::move(g));
    for (auto it = stages_[s].rbegin(); it != stages_[s].rend(); ++it) g = it->backward(std::move(g));
    add_inplace(g, s == 0 ? g_stem : g_skip[s - 1]);
  }
  relu_backward_inplace(g, stem_out_);
  stem_conv_.backward(stem_bn_.backward(g));
}

template <typename T>
std::vector<Param<T>*> Network<T>::parameters() {
  std::vector<Param<T>*> p;
  stem_conv_.collect(p);
  stem_bn_.collect(p);
  for (auto& stage : stages_)
    for (auto& blk : stage) blk.collect(p);
  for (int i = kNumStages - 1; i >= 0; --i) {
    decoder_[i].conv.collect(p);
    decoder_[i].bn.collect(p);
  }
  head_.collect(p);
  return p;
}

template <typename T>
std::vector<Param<T>*> Network<T>::buffers() {
  std::vector<Param<T>*> p;
  stem_bn_.collect_buffers(p);
  for (auto& stage : stages_)
    for (auto& blk : stage) blk.collect_buffers(p);
  for (int i = kNumStages - 1; i >= 0; --i) decoder_[i].bn.collect_buffers(p);
  return p;
}

template <typename T>
std::vector<Param<T>*> Network<T>::state() {
  auto p = parameters();
  auto b = buffers();
  p.insert(p.end(), b.begin(), b.end());
  return p;
}

template <typename T>
std::size_t Network<T>::parameter_count() {
  std::size_t n = 0;
  for (auto* p : parameters()) n += p->size();
  return n;
}

template <typename T>
void Network<T>::zero_grad() {
  for (auto* p : parameters()) std::fill(p->grad.begin(), p->grad.end(), T{0});
}

template class Network<float>;
template class Network<double>;

}  // namespace dgseg
