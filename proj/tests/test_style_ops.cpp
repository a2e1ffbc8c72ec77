#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <numeric>
#include <set>

#include "doctest.h"
#include "dgseg/stats_export.hpp"
#include "dgseg/style_ops.hpp"

using namespace dgseg;

namespace {

// Features whose per-channel std is comfortably away from zero.
Tensor<float> features(int b, int c, int hw, std::uint64_t seed) {
  RandomSource rng(seed);
  Tensor<float> f({b, c, hw, hw});
  for (int i = 0; i < b; ++i) {
    for (int k = 0; k < c; ++k) {
      const double m = rng.uniform(-1.0, 2.0), s = rng.uniform(0.5, 2.0);
      for (float& v : f.channel(i, k)) v = static_cast<float>(m + s * rng.normal());
    }
  }
  return f;
}

PerturbConfig cfg_for(Operator op, double p = 1.0) {
  PerturbConfig c;
  c.op = op;
  c.p = p;
  return c;
}

ChannelStats make_stats(std::vector<double> mean, std::vector<double> std, int batch, int channels) {
  ChannelStats s{ChannelGrid(batch, channels), ChannelGrid(batch, channels)};
  std::copy(mean.begin(), mean.end(), s.mean.values().begin());
  std::copy(std.begin(), std.end(), s.std.values().begin());
  return s;
}

double max_abs_diff(const Tensor<float>& a, const Tensor<float>& b) {
  double d = 0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(double(a.values()[i]) - b.values()[i]));
  return d;
}

}  // namespace

// Gating ---------------------------------------------------------------------

TEST_CASE("eval mode returns the input bitwise for every operator") {
  const auto f = features(4, 3, 8, 1);
  for (Operator op : all_operators()) {
    RandomSource rng(5);
    const auto r = perturb(f, cfg_for(op), Mode::eval, rng);
    CHECK(r.output == f);
    CHECK_FALSE(r.applied);
    // No randomness consumed in eval mode.
    RandomSource untouched(5);
    CHECK(rng.next_u64() == untouched.next_u64());
  }
}

TEST_CASE("p = 0 returns the input bitwise for every operator") {
  const auto f = features(4, 3, 8, 2);
  for (Operator op : all_operators()) {
    RandomSource rng(6);
    for (int i = 0; i < 20; ++i) {
      const auto r = perturb(f, cfg_for(op, 0.0), Mode::train, rng);
      CHECK(r.output == f);
      CHECK_FALSE(r.applied);
    }
  }
}

TEST_CASE("forced closed gate returns the input bitwise") {
  const auto f = features(4, 3, 8, 3);
  PerturbControls closed;
  closed.gate_open = false;
  for (Operator op : all_operators()) {
    RandomSource rng(7);
    CHECK(perturb(f, cfg_for(op), Mode::train, rng, closed).output == f);
  }
}

TEST_CASE("p = 1 always applies and p = 0.5 applies about half the time") {
  const auto f = features(2, 2, 4, 4);
  RandomSource rng(8);
  for (int i = 0; i < 50; ++i) CHECK(perturb(f, cfg_for(Operator::trid, 1.0), Mode::train, rng).applied);
  int applied = 0;
  const int n = 4000;
  for (int i = 0; i < n; ++i) applied += perturb(f, cfg_for(Operator::trid, 0.5), Mode::train, rng).applied;
  CHECK(std::abs(applied / double(n) - 0.5) < 0.03);
}

TEST_CASE("gate uses one draw: apply exactly when the draw is below p") {
  const auto f = features(2, 2, 4, 5);
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    RandomSource probe(seed);
    const double u = probe.uniform();
    RandomSource rng(seed);
    CHECK(perturb(f, cfg_for(Operator::trid, 0.4), Mode::train, rng).applied == (u < 0.4));
  }
}

TEST_CASE("operator none is the identity even with the gate forced open") {
  const auto f = features(2, 2, 4, 6);
  PerturbControls open;
  open.gate_open = true;
  RandomSource rng(1);
  CHECK(perturb(f, cfg_for(Operator::none), Mode::train, rng, open).output == f);
}

// Endpoint reductions and stat matching -----------------------------------------

TEST_CASE("trid with all-one mask reproduces the uniform statistics") {
  const auto f = features(4, 6, 16, 9);
  PerturbControls ctl;
  ctl.gate_open = true;
  ctl.lambda = 1.0;
  RandomSource rng(10);
  const auto r = perturb(f, cfg_for(Operator::trid), Mode::train, rng, ctl);
  REQUIRE(r.aug);
  const auto s = channel_mean_std(r.output);
  int checked = 0;
  for (int b = 0; b < 4; ++b) {
    for (int c = 0; c < 6; ++c) {
      if (r.aug->sigma(b, c) < 0.05) continue;
      ++checked;
      CHECK(std::abs(s.mean(b, c) - r.aug->mu(b, c)) < 1e-4);
      CHECK(std::abs(s.std(b, c) - r.aug->sigma(b, c)) < 1e-4);
    }
  }
  CHECK(checked > 10);
}

TEST_CASE("trid with all-zero mask reconstructs the input") {
  const auto f = features(4, 6, 16, 11);
  PerturbControls ctl;
  ctl.gate_open = true;
  ctl.lambda = 0.0;
  RandomSource rng(12);
  CHECK(max_abs_diff(perturb(f, cfg_for(Operator::trid), Mode::train, rng, ctl).output, f) < 1e-3);
}

TEST_CASE("full-replacement operators match the provider statistics") {
  const auto f = features(4, 5, 16, 13);
  for (Operator op : {Operator::sr_only, Operator::dsu}) {
    PerturbControls ctl;
    ctl.gate_open = true;
    RandomSource rng(14);
    const auto r = perturb(f, cfg_for(op), Mode::train, rng, ctl);
    const auto s = channel_mean_std(r.output);
    for (int b = 0; b < 4; ++b) {
      for (int c = 0; c < 5; ++c) {
        if (r.aug->sigma(b, c) < 0.05) continue;
        CHECK(std::abs(s.mean(b, c) - r.aug->mu(b, c)) < 1e-4);
        CHECK(std::abs(s.std(b, c) - r.aug->sigma(b, c)) < 1e-4);
      }
    }
  }
}

TEST_CASE("normal ablation with full mask uses negative sigma as a sign flip") {
  const auto f = features(8, 8, 8, 15);
  PerturbControls ctl;
  ctl.gate_open = true;
  ctl.lambda = 1.0;
  RandomSource rng(16);
  const auto r = perturb(f, cfg_for(Operator::trid_normal), Mode::train, rng, ctl);
  const auto s = channel_mean_std(r.output);
  int negative = 0;
  for (int b = 0; b < 8; ++b) {
    for (int c = 0; c < 8; ++c) {
      const double sr = r.aug->sigma(b, c);
      if (sr < 0) ++negative;
      if (std::abs(sr) < 0.05) continue;
      CHECK(std::abs(s.std(b, c) - std::abs(sr)) < 1e-4);
      CHECK(std::abs(s.mean(b, c) - r.aug->mu(b, c)) < 1e-4);
    }
  }
  CHECK(negative > 0);
}

TEST_CASE("mixstyle endpoints: lambda 1 keeps own stats, lambda 0 takes the partner's") {
  const auto f = features(4, 3, 16, 17);
  const auto orig = channel_mean_std(f);
  const std::vector<int> partners{2, 3, 0, 1};
  for (Operator op : {Operator::mixstyle, Operator::mixstyle_sm}) {
    PerturbControls ctl;
    ctl.gate_open = true;
    ctl.partners = partners;
    ctl.lambda = op == Operator::mixstyle ? 1.0 : 0.0;  // sm mask weights the partner
    RandomSource rng(18);
    CHECK(max_abs_diff(perturb(f, cfg_for(op), Mode::train, rng, ctl).output, f) < 1e-3);

    ctl.lambda = op == Operator::mixstyle ? 0.0 : 1.0;
    const auto s = channel_mean_std(perturb(f, cfg_for(op), Mode::train, rng, ctl).output);
    for (int b = 0; b < 4; ++b) {
      for (int c = 0; c < 3; ++c) {
        CHECK(std::abs(s.mean(b, c) - orig.mean(partners[b], c)) < 1e-4);
        CHECK(std::abs(s.std(b, c) - orig.std(partners[b], c)) < 1e-4);
      }
    }
  }
}

TEST_CASE("sr+mixup with lambda_m = 1 reconstructs the input") {
  const auto f = features(3, 4, 8, 19);
  PerturbControls ctl;
  ctl.gate_open = true;
  ctl.lambda = 1.0;
  RandomSource rng(20);
  CHECK(max_abs_diff(perturb(f, cfg_for(Operator::sr_mixup), Mode::train, rng, ctl).output, f) < 1e-3);
}

TEST_CASE("mixstyle fusion hand example: 0.5 * 0.2 + 0.5 * 0.6 = 0.4") {
  const auto orig = make_stats({0.0, 0.0}, {0.2, 0.6}, 2, 1);
  AugStats partner{ChannelGrid(2, 1), ChannelGrid(2, 1), Provenance::shuffle_mix};
  partner.sigma(0, 0) = 0.6;
  partner.sigma(1, 0) = 0.2;
  const auto m = batch_mixup(orig, partner, {0.5, 0.5});
  CHECK(m.gamma(0, 0) == doctest::Approx(0.4).epsilon(1e-15));
  CHECK(m.gamma(1, 0) == doctest::Approx(0.4).epsilon(1e-15));
}

TEST_CASE("batch_mixup endpoints and the 0.25 example") {
  const auto orig = make_stats({0.3}, {1.0}, 1, 1);
  AugStats aug{ChannelGrid(1, 1, 0.0), ChannelGrid(1, 1, 0.9), Provenance::uniform};
  CHECK(batch_mixup(orig, aug, {0.25}).gamma(0, 0) == doctest::Approx(0.25).epsilon(1e-15));
  const auto one = batch_mixup(orig, aug, {1.0});
  CHECK(one.gamma(0, 0) == 1.0);
  CHECK(one.beta(0, 0) == 0.3);
  const auto zero = batch_mixup(orig, aug, {0.0});
  CHECK(zero.gamma(0, 0) == 0.0);
  CHECK(zero.beta(0, 0) == 0.9);
  CHECK_THROWS_AS(batch_mixup(orig, aug, {1.5}), std::invalid_argument);
  CHECK_THROWS_AS(batch_mixup(orig, aug, {0.5, 0.5}), std::invalid_argument);
}

TEST_CASE("mix_with_mask endpoints and Bernoulli selection") {
  const auto f = features(3, 5, 6, 21);
  const auto orig = channel_mean_std(f);
  RandomSource rng(22);
  const auto aug = provide_uniform(3, 5, rng);
  const auto zero = mix_with_mask(orig, aug, MixMask{ChannelGrid(3, 5), ChannelGrid(3, 5, 0.0), 0.1});
  CHECK(zero.gamma == orig.std);
  CHECK(zero.beta == orig.mean);
  const auto one = mix_with_mask(orig, aug, MixMask{ChannelGrid(3, 5), ChannelGrid(3, 5, 1.0), 0.1});
  CHECK(one.gamma == aug.sigma);
  CHECK(one.beta == aug.mu);

  const auto mixed = sm_mix(orig, aug, 0.1, rng);
  for (int b = 0; b < 3; ++b) {
    for (int c = 0; c < 5; ++c) {
      const double l = mixed.mask.lambda(b, c);
      CHECK((l == 0.0 || l == 1.0));
      CHECK(mixed.gamma(b, c) == (l == 1.0 ? aug.sigma(b, c) : orig.std(b, c)));
      CHECK(mixed.beta(b, c) == (l == 1.0 ? aug.mu(b, c) : orig.mean(b, c)));
      CHECK(mixed.mask.probability(b, c) >= 0.0);
      CHECK(mixed.mask.probability(b, c) <= 1.0);
    }
  }
}

TEST_CASE("channel mask marginal is one half") {
  // Compound Beta(a,a)-Bernoulli: E[lambda] = E[P] = 1/2 by symmetry.
  RandomSource rng(23);
  const auto m = draw_channel_mask(1000, 100, 0.1, rng);
  double ones = 0;
  for (double l : m.lambda.values()) ones += l;
  CHECK(std::abs(ones / 1e5 - 0.5) < 0.01);
}

// Providers ---------------------------------------------------------------------

TEST_CASE("uniform provider: range, determinism, first moment") {
  RandomSource a(24), b(24);
  const auto x = provide_uniform(4, 8, a);
  const auto y = provide_uniform(4, 8, b);
  CHECK(x.sigma == y.sigma);
  CHECK(x.mu == y.mu);
  CHECK(x.provenance == Provenance::uniform);

  RandomSource rng(25);
  const auto big = provide_uniform(1000, 100, rng);
  double m = 0;
  for (double v : big.sigma.values()) {
    REQUIRE(v >= 0.0);
    REQUIRE(v < 1.0);
    m += v;
  }
  for (double v : big.mu.values()) {
    REQUIRE(v >= 0.0);
    REQUIRE(v < 1.0);
  }
  CHECK(std::abs(m / 1e5 - 0.5) < 0.01);
}

TEST_CASE("uniform provider covers every decile") {
  RandomSource rng(26);
  const auto a = provide_uniform(100, 100, rng);
  std::set<int> sd, md;
  for (double v : a.sigma.values()) sd.insert(static_cast<int>(v * 10));
  for (double v : a.mu.values()) md.insert(static_cast<int>(v * 10));
  CHECK(sd.size() == 10);
  CHECK(md.size() == 10);
}

TEST_CASE("shuffle-mix provider: partner statistics, weights, convex hull") {
  const auto f = features(6, 4, 8, 27);
  const auto stats = channel_mean_std(f);
  RandomSource rng(28);
  const auto m = provide_shuffle_mix(stats, 0.1, rng);
  REQUIRE(m.partner.size() == 6);
  auto sorted = m.partner;
  std::sort(sorted.begin(), sorted.end());
  CHECK(sorted == std::vector<int>{0, 1, 2, 3, 4, 5});
  for (int b = 0; b < 6; ++b) {
    CHECK(m.lambda[b] >= 0.0);
    CHECK(m.lambda[b] <= 1.0);
    for (int c = 0; c < 4; ++c) {
      CHECK(m.aug.sigma(b, c) == stats.std(m.partner[b], c));
      CHECK(m.aug.mu(b, c) == stats.mean(m.partner[b], c));
    }
  }
  const auto mixed = batch_mixup(stats, m.aug, m.lambda);
  for (int c = 0; c < 4; ++c) {
    double lo_m = 1e9, hi_m = -1e9, lo_s = 1e9, hi_s = -1e9;
    for (int b = 0; b < 6; ++b) {
      lo_m = std::min(lo_m, stats.mean(b, c));
      hi_m = std::max(hi_m, stats.mean(b, c));
      lo_s = std::min(lo_s, stats.std(b, c));
      hi_s = std::max(hi_s, stats.std(b, c));
    }
    for (int b = 0; b < 6; ++b) {
      CHECK(mixed.beta(b, c) >= lo_m - 1e-12);
      CHECK(mixed.beta(b, c) <= hi_m + 1e-12);
      CHECK(mixed.gamma(b, c) >= lo_s - 1e-12);
      CHECK(mixed.gamma(b, c) <= hi_s + 1e-12);
    }
  }
}

TEST_CASE("shuffle-mix with a single sample degenerates to the identity") {
  const auto f = features(1, 3, 8, 29);
  const auto stats = channel_mean_std(f);
  RandomSource rng(30);
  const auto m = provide_shuffle_mix(stats, 0.1, rng);
  CHECK(m.aug.degenerate);
  CHECK(m.lambda == std::vector<double>{1.0});
  CHECK(m.aug.sigma == stats.std);
  PerturbControls open;
  open.gate_open = true;
  for (Operator op : {Operator::mixstyle, Operator::efdm, Operator::dsu}) {
    CHECK(max_abs_diff(perturb(f, cfg_for(op), Mode::train, rng, open).output, f) < 1e-3);
  }
}

TEST_CASE("random partners is a uniform permutation") {
  RandomSource rng(31);
  std::map<std::vector<int>, int> counts;
  for (int i = 0; i < 6000; ++i) ++counts[random_partners(3, rng)];
  CHECK(counts.size() == 6);
  for (const auto& [perm, n] : counts) CHECK(std::abs(n - 1000) < 150);
}

TEST_CASE("dsu: identical per-sample statistics give zero spread") {
  const auto s = make_stats({0.5, 1.0, 0.5, 1.0}, {2.0, 3.0, 2.0, 3.0}, 2, 2);
  RandomSource rng(32);
  const auto a = provide_dsu(s, rng);
  CHECK(a.mu == s.mean);
  CHECK(a.sigma == s.std);
}

TEST_CASE("dsu: hand formula on a two-sample batch") {
  const auto s = make_stats({0.0, 2.0}, {1.0, 1.5}, 2, 1);
  const double spread_mu = std::sqrt(2.0);  // unbiased std of {0, 2}
  const double spread_sigma = 0.5 / std::sqrt(2.0);
  RandomSource rng(33), mirror(33);
  const auto a = provide_dsu(s, rng);
  for (int b = 0; b < 2; ++b) {
    const double e1 = mirror.normal(), e2 = mirror.normal();
    CHECK(a.mu(b, 0) == doctest::Approx(s.mean(b, 0) + e1 * spread_mu).epsilon(1e-14));
    CHECK(a.sigma(b, 0) == doctest::Approx(s.std(b, 0) + e2 * spread_sigma).epsilon(1e-14));
  }
}

TEST_CASE("dsu: empirical spread of resampled means matches the batch spread") {
  const auto s = make_stats({0.0, 1.0, 3.0, -1.0}, {1.0, 1.0, 2.0, 0.5}, 2, 2);
  RandomSource rng(34);
  std::vector<double> draws;
  for (int i = 0; i < 10000; ++i) draws.push_back(provide_dsu(s, rng).mu(0, 0));
  double m = std::accumulate(draws.begin(), draws.end(), 0.0) / draws.size();
  double ss = 0;
  for (double v : draws) ss += (v - m) * (v - m);
  const double sd = std::sqrt(ss / (draws.size() - 1));
  const double expected = 3.0 / std::sqrt(2.0);  // unbiased std of {0, 3}
  CHECK(std::abs(sd / expected - 1.0) < 0.05);
}

TEST_CASE("normal ablation: moments and negative fraction") {
  RandomSource rng(35);
  const auto a = provide_normal_ablation(1000, 100, 0.5, 1.0, rng);
  double m = 0, m2 = 0, neg = 0;
  for (double v : a.sigma.values()) {
    m += v;
    m2 += v * v;
    neg += v < 0;
  }
  m /= 1e5;
  CHECK(std::abs(m - 0.5) < 0.02);
  CHECK(std::abs(std::sqrt(m2 / 1e5 - m * m) - 1.0) < 0.02);
  const double phi = 0.5 * std::erfc(0.5 / std::sqrt(2.0));  // P(N(0.5,1) < 0)
  CHECK(phi == doctest::Approx(0.3085).epsilon(1e-3));
  CHECK(std::abs(neg / 1e5 - phi) < 0.01);
  RandomSource r1(36), r2(36);
  CHECK(provide_normal_ablation(3, 3, 0.5, 1.0, r1).mu == provide_normal_ablation(3, 3, 0.5, 1.0, r2).mu);
}

// EFDM ----------------------------------------------------------------------------

TEST_CASE("efdm: self partner and zero weight are identities") {
  const auto f = features(3, 4, 6, 37);
  PerturbControls ctl;
  ctl.partners = std::vector<int>{0, 1, 2};
  ctl.lambda = 1.0;
  RandomSource rng(38);
  CHECK(efdm_perturb(f, cfg_for(Operator::efdm), rng, ctl) == f);
  ctl.partners = std::vector<int>{1, 2, 0};
  ctl.lambda = 0.0;
  CHECK(efdm_perturb(f, cfg_for(Operator::efdm), rng, ctl) == f);
  CHECK(efdm_perturb(f, cfg_for(Operator::efdm_sm), rng, ctl) == f);
}

TEST_CASE("efdm: full weight gives the partner's multiset in the source's order") {
  const auto f = features(3, 4, 6, 39);
  const std::vector<int> partners{1, 2, 0};
  for (Operator op : {Operator::efdm, Operator::efdm_sm}) {
    PerturbControls ctl;
    ctl.partners = partners;
    ctl.lambda = 1.0;
    RandomSource rng(40);
    const auto out = efdm_perturb(f, cfg_for(op), rng, ctl);
    for (int b = 0; b < 3; ++b) {
      for (int c = 0; c < 4; ++c) {
        std::vector<float> got(out.channel(b, c).begin(), out.channel(b, c).end());
        std::vector<float> ref(f.channel(partners[b], c).begin(), f.channel(partners[b], c).end());
        const std::vector<float> src(f.channel(b, c).begin(), f.channel(b, c).end());
        std::vector<std::size_t> io(src.size()), is(src.size());
        std::iota(io.begin(), io.end(), 0);
        std::iota(is.begin(), is.end(), 0);
        std::sort(io.begin(), io.end(), [&](auto i, auto j) { return got[i] < got[j]; });
        std::sort(is.begin(), is.end(), [&](auto i, auto j) { return src[i] < src[j]; });
        CHECK(io == is);
        std::sort(got.begin(), got.end());
        std::sort(ref.begin(), ref.end());
        CHECK(got == ref);
      }
    }
  }
}

TEST_CASE("efdm: gradient is the identity") {
  const auto f = features(3, 2, 4, 41);
  PerturbControls ctl;
  ctl.gate_open = true;
  RandomSource rng(42);
  const auto r = perturb(f, cfg_for(Operator::efdm), Mode::train, rng, ctl);
  CHECK(r.applied);
  Tensor<float> g(f.shape());
  for (std::size_t i = 0; i < g.size(); ++i) g.values()[i] = static_cast<float>(i % 7) - 3.0f;
  CHECK(perturb_backward(r, g) == g);
}

// Structural properties ----------------------------------------------------------------

TEST_CASE("trid preserves spatial order within each channel") {
  const auto f = features(4, 4, 8, 43);
  PerturbControls ctl;
  ctl.gate_open = true;
  RandomSource rng(44);
  const auto r = perturb(f, cfg_for(Operator::trid), Mode::train, rng, ctl);
  for (int b = 0; b < 4; ++b) {
    for (int c = 0; c < 4; ++c) {
      if (r.mixed->gamma(b, c) <= 0) continue;
      const auto in = f.channel(b, c);
      const auto out = r.output.channel(b, c);
      for (std::size_t i = 1; i < in.size(); ++i) {
        if (in[i] > in[i - 1] + 1e-4f) CHECK(out[i] >= out[i - 1]);
        if (in[i] < in[i - 1] - 1e-4f) CHECK(out[i] <= out[i - 1]);
      }
    }
  }
}

TEST_CASE("grad_scale is gamma over sigma for every statistics operator") {
  const auto f = features(4, 3, 6, 45);
  for (Operator op : {Operator::trid, Operator::sr_only, Operator::sr_mixup, Operator::trid_normal,
                      Operator::mixstyle, Operator::mixstyle_sm, Operator::dsu}) {
    PerturbControls ctl;
    ctl.gate_open = true;
    RandomSource rng(46);
    const auto r = perturb(f, cfg_for(op), Mode::train, rng, ctl);
    REQUIRE(r.stats);
    for (int b = 0; b < 4; ++b)
      for (int c = 0; c < 3; ++c) CHECK(r.grad_scale(b, c) == r.mixed->gamma(b, c) / r.stats->std(b, c));
  }
}

TEST_CASE("same seed gives bit-identical output for every operator") {
  const auto f = features(4, 3, 8, 47);
  for (Operator op : all_operators()) {
    RandomSource a(48), b(48);
    const auto x = perturb(f, cfg_for(op), Mode::train, a);
    const auto y = perturb(f, cfg_for(op), Mode::train, b);
    CHECK(x.output == y.output);
  }
}

TEST_CASE("open gate rejects non-finite features") {
  auto f = features(2, 2, 4, 49);
  f(1, 1, 2, 2) = std::nanf("");
  PerturbControls ctl;
  ctl.gate_open = true;
  RandomSource rng(50);
  CHECK_THROWS_AS(perturb(f, cfg_for(Operator::trid), Mode::train, rng, ctl), std::invalid_argument);
}

TEST_CASE("operator tags round-trip and configs validate") {
  for (Operator op : all_operators()) CHECK(parse_operator(to_string(op)) == op);
  CHECK(all_operators().size() == 10);
  CHECK_THROWS_AS(parse_operator("trid++"), std::invalid_argument);
  PerturbConfig c;
  CHECK(c.p == 0.5);
  CHECK(c.alpha == 0.1);
  CHECK_NOTHROW(c.validate());
  c.p = 1.5;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c.p = 0.5;
  c.alpha = 0.0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}

// Statistics export ----------------------------------------------------------------------

TEST_CASE("export: B*C records, constant input, CSV round trip") {
  const auto path = std::filesystem::temp_directory_path() / "dgseg_stats_test.csv";
  const auto f = features(2, 3, 4, 51);
  StatsCsvWriter w(path);
  const auto recs = export_stats(f, "siteA", w, 0);
  CHECK(recs.size() == 6);
  const auto flat = export_stats(Tensor<float>({1, 2, 3, 3}, 4.0f), "siteB", w, 2);
  for (const auto& r : flat) CHECK(r.std == doctest::Approx(1e-3).epsilon(1e-9));
  w.close();
  CHECK(w.rows() == 8);

  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  CHECK(header == "domain,sample,channel,mean,std");

  const auto back = read_stats_csv(path);
  REQUIRE(back.size() == 8);
  std::vector<StatRecord> all = recs;
  all.insert(all.end(), flat.begin(), flat.end());
  for (std::size_t i = 0; i < all.size(); ++i) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.9g", all[i].mean);
    CHECK(back[i].mean == std::strtod(buf, nullptr));
    std::snprintf(buf, sizeof buf, "%.9g", all[i].std);
    CHECK(back[i].std == std::strtod(buf, nullptr));
    CHECK(back[i].domain == all[i].domain);
    CHECK(back[i].sample == all[i].sample);
    CHECK(back[i].channel == all[i].channel);
  }
  CHECK(back[6].sample == 2);
  std::filesystem::remove(path);
}

TEST_CASE("export: labels that would need quoting are rejected") {
  const auto f = features(1, 1, 4, 52);
  CHECK_THROWS_AS(collect_stats(f, "a,b"), std::invalid_argument);
  CHECK_THROWS_AS(collect_stats(f, ""), std::invalid_argument);
}
