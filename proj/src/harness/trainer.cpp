#include <cmath>
#include <map>
#include <numeric>

#include "dgseg/experiment.hpp"

namespace dgseg {

namespace {

BinaryMask class_mask(const std::vector<std::uint8_t>& labels, int size, const std::vector<std::uint8_t>& members) {
  BinaryMask m(size, size);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    m.on[i] = std::find(members.begin(), members.end(), labels[i]) != members.end() ? 1 : 0;
  }
  return m;
}

}  // namespace

Batch make_batch(const std::vector<const Sample*>& samples, std::size_t begin, std::size_t end) {
  if (begin >= end || end > samples.size()) throw std::invalid_argument("make_batch: empty or out-of-range slice");
  const int size = samples[begin]->size;
  const Shape4 shape{static_cast<int>(end - begin), 1, size, size};
  Batch b{Tensor<float>(shape), LabelBatch(shape)};
  for (std::size_t i = begin; i < end; ++i) {
    const Sample& s = *samples[i];
    if (s.size != size) throw std::invalid_argument("make_batch: mixed image sizes");
    const int bi = static_cast<int>(i - begin);
    std::copy(s.image.begin(), s.image.end(), b.images.channel(bi, 0).begin());
    std::copy(s.mask.begin(), s.mask.end(), b.labels.channel(bi, 0).begin());
  }
  return b;
}

FoldStreams FoldStreams::make(std::uint64_t seed, std::uint64_t fold) {
  const RandomSource root(seed);
  return {root.derive("init", {fold}), root.derive("data", {fold}), root.derive("perturb", {fold})};
}

Network<float> train_model(const std::vector<const Sample*>& train, const ExperimentConfig& cfg, int num_classes,
                           const FoldStreams& streams, TrainLog* log,
                           const std::function<void(int, double)>& on_epoch) {
  if (train.size() < 2) throw std::invalid_argument("train_model: need at least two training samples");
  NetworkConfig ncfg = cfg.network;
  ncfg.num_classes = num_classes;
  Network<float> net(ncfg, streams.init);
  SgdMomentum<float> opt(cfg.schedule.momentum);
  const PerturbConfig perturb = cfg.effective_perturb();
  RandomSource data_rng = streams.data;
  RandomSource perturb_rng = streams.perturb;

  std::vector<const Sample*> order = train;
  const std::size_t bs = static_cast<std::size_t>(cfg.schedule.batch_size);
  for (int epoch = 0; epoch < cfg.schedule.epochs; ++epoch) {
    for (std::size_t i = order.size() - 1; i > 0; --i) {
      std::swap(order[i], order[data_rng.below(i + 1)]);
    }
    const double lr = poly_lr(cfg.schedule, epoch);
    double loss_sum = 0.0;
    int steps = 0;
    for (std::size_t start = 0; start < order.size(); start += bs) {
      const std::size_t stop = std::min(order.size(), start + bs);
      // A single-sample batch has no batch statistics worth normalizing with.
      if (stop - start < 2) continue;
      const Batch batch = make_batch(order, start, stop);
      net.zero_grad();
      const Tensor<float> logits = net.forward(batch.images, perturb, Mode::train, perturb_rng);
      const LossResult<float> loss = dice_ce_loss(logits, batch.labels);
      if (!std::isfinite(loss.total)) {
        throw std::runtime_error("non-finite loss at epoch " + std::to_string(epoch));
      }
      net.backward(loss.grad);
      opt.step(net.parameters(), lr);
      loss_sum += loss.total;
      ++steps;
    }
    const double mean_loss = steps > 0 ? loss_sum / steps : 0.0;
    if (log) log->epoch_loss.push_back(mean_loss);
    if (on_epoch) on_epoch(epoch, mean_loss);
  }
  return net;
}

std::vector<std::vector<std::uint8_t>> predict(Network<float>& net, const std::vector<const Sample*>& samples,
                                               int batch_size) {
  std::vector<std::vector<std::uint8_t>> out;
  out.reserve(samples.size());
  RandomSource unused(0);
  const std::size_t bs = static_cast<std::size_t>(std::max(1, batch_size));
  for (std::size_t start = 0; start < samples.size(); start += bs) {
    const std::size_t stop = std::min(samples.size(), start + bs);
    const Batch batch = make_batch(samples, start, stop);
    const Tensor<float> logits = net.forward(batch.images, PerturbConfig{}, Mode::eval, unused);
    for (int b = 0; b < logits.batch(); ++b) {
      std::vector<std::uint8_t> pred(logits.plane(), 0);
      for (std::size_t px = 0; px < pred.size(); ++px) {
        float best = logits.channel(b, 0)[px];
        for (int c = 1; c < logits.channels(); ++c) {
          const float v = logits.channel(b, c)[px];
          if (v > best) {
            best = v;
            pred[px] = static_cast<std::uint8_t>(c);
          }
        }
      }
      out.push_back(std::move(pred));
    }
  }
  return out;
}

std::vector<MetricEntry> evaluate(Network<float>& net, const std::vector<const Sample*>& samples, LabelMode mode,
                                  const std::string& fold, int batch_size) {
  struct ClassDef {
    std::string name;
    std::vector<std::uint8_t> labels;
  };
  static const std::vector<ClassDef> two_class{{"outer", {1, 2}}, {"inner", {2}}};
  static const std::vector<ClassDef> single_class{{"fg", {1}}};
  const auto& classes = mode == LabelMode::two_class ? two_class : single_class;

  const auto preds = predict(net, samples, batch_size);
  struct Acc {
    double dsc = 0.0, asd = 0.0;
    int images = 0, asd_n = 0, asd_failures = 0;
  };
  std::map<std::pair<int, std::string>, Acc> acc;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const Sample& s = *samples[i];
    for (const auto& cls : classes) {
      const BinaryMask p = class_mask(preds[i], s.size, cls.labels);
      const BinaryMask g = class_mask(s.mask, s.size, cls.labels);
      Acc& a = acc[{s.domain_id, cls.name}];
      a.dsc += dsc(p, g);
      ++a.images;
      if (const auto d = asd(p, g)) {
        a.asd += *d;
        ++a.asd_n;
      } else {
        ++a.asd_failures;
      }
    }
  }
  std::vector<MetricEntry> entries;
  for (const auto& [key, a] : acc) {
    MetricEntry e;
    e.fold = fold;
    e.domain = key.first;
    e.cls = key.second;
    e.dsc = a.dsc / a.images;
    if (a.asd_n > 0) e.asd = a.asd / a.asd_n;
    e.images = a.images;
    e.asd_failures = a.asd_failures;
    entries.push_back(std::move(e));
  }
  return entries;
}

}  // namespace dgseg
