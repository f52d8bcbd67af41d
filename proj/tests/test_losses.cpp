#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "dasp/losses.hpp"
#include "dasp/rng.hpp"
#include "test_util.hpp"

using namespace dasp;
using namespace dasp::losses;
using testutil::fd_check;

namespace {

// Direct windowed-statistics SSIM + L1 oracle: plain loops, replicate
// padding, 3x3 windows.
real oracle_photometric_pixel(const Tensor& t, const Tensor& w, int pi, int pj, real alpha) {
  const int C = t.dim(0), H = t.dim(1), W = t.dim(2);
  auto at = [&](const Tensor& img, int c, int i, int j) {
    i = std::clamp(i, 0, H - 1);
    j = std::clamp(j, 0, W - 1);
    return img.at({c, i, j});
  };
  real ssim_sum = 0, l1_sum = 0;
  for (int c = 0; c < C; ++c) {
    real ma = 0, mb = 0, maa = 0, mbb = 0, mab = 0;
    for (int di = -1; di <= 1; ++di)
      for (int dj = -1; dj <= 1; ++dj) {
        const real a = at(t, c, pi + di, pj + dj);
        const real b = at(w, c, pi + di, pj + dj);
        ma += a;
        mb += b;
        maa += a * a;
        mbb += b * b;
        mab += a * b;
      }
    ma /= 9;
    mb /= 9;
    const real va = maa / 9 - ma * ma;
    const real vb = mbb / 9 - mb * mb;
    const real cov = mab / 9 - ma * mb;
    const real c1 = 1e-4, c2 = 9e-4;
    ssim_sum += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
    l1_sum += std::abs(t.at({c, pi, pj}) - w.at({c, pi, pj}));
  }
  const real ssim = ssim_sum / C;
  const real l1 = l1_sum / C;
  return alpha * (1 - ssim) / 2 + (1 - alpha) * l1;
}

}  // namespace

TEST_CASE("photometric: identical images give exactly zero") {
  Rng rng(3);
  Tensor img = rng.uniform_tensor({3, 6, 7});
  Graph g;
  Photometric p = photometric_loss(g, g.constant(img), g.constant(img), 0.85);
  CHECK(p.per_pixel.val().abs_max() == 0.0);
  CHECK(p.mean.val().item() == 0.0);
}

TEST_CASE("photometric: alpha=0 on images differing by a constant equals the constant") {
  Rng rng(5);
  Tensor a = rng.uniform_tensor({2, 4, 5}, 0.1, 0.6);
  Tensor b = a;
  const real c = 0.21;
  for (std::int64_t i = 0; i < b.numel(); ++i) b[i] += c;
  Graph g;
  Photometric p = photometric_loss(g, g.constant(a), g.constant(b), 0.0);
  CHECK(p.mean.val().item() == doctest::Approx(c).epsilon(1e-12));
}

TEST_CASE("photometric: windowed-statistics oracle on random 8x8, alpha=0.85") {
  Rng rng(7);
  Tensor t = rng.uniform_tensor({3, 8, 8});
  Tensor w = rng.uniform_tensor({3, 8, 8});
  Graph g;
  Photometric p = photometric_loss(g, g.constant(t), g.constant(w), 0.85);
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 8; ++j)
      CHECK(std::abs(p.per_pixel.val().at({i, j}) - oracle_photometric_pixel(t, w, i, j, 0.85)) <
            1e-6);
}

TEST_CASE("photometric: symmetric in its arguments when alpha=0") {
  Rng rng(9);
  Tensor a = rng.uniform_tensor({2, 5, 5});
  Tensor b = rng.uniform_tensor({2, 5, 5});
  Graph g;
  const real ab = photometric_loss(g, g.constant(a), g.constant(b), 0.0).mean.val().item();
  const real ba = photometric_loss(g, g.constant(b), g.constant(a), 0.0).mean.val().item();
  CHECK(ab == doctest::Approx(ba).epsilon(1e-14));
}

TEST_CASE("photometric: rejects out-of-range values") {
  Graph g;
  Tensor bad = Tensor::full({1, 3, 3}, 1.5);
  Tensor ok = Tensor::full({1, 3, 3}, 0.5);
  CHECK_THROWS(photometric_loss(g, g.constant(bad), g.constant(ok), 0.85));
}

TEST_CASE("smoothness: constant disparity gives exactly zero") {
  Rng rng(11);
  Graph g;
  Var loss = smoothness_loss(g, g.constant(Tensor::full({5, 6}, 2.5)),
                             g.constant(rng.uniform_tensor({3, 5, 6})));
  CHECK(loss.val().item() == 0.0);
}

TEST_CASE("smoothness: linear ramp on a constant image gives the normalized slope") {
  const int H = 4, W = 6;
  const real s = 0.07, base = 0.4;
  Tensor disp(Shape{H, W});
  for (int i = 0; i < H; ++i)
    for (int j = 0; j < W; ++j) disp.at({i, j}) = base + s * j;
  const real mean = base + s * (W - 1) / 2.0;
  Graph g;
  Var loss = smoothness_loss(g, g.constant(disp), g.constant(Tensor::full({1, H, W}, 0.3)));
  CHECK(loss.val().item() == doctest::Approx(s / mean).epsilon(1e-12));
}

TEST_CASE("smoothness: a step across a strong edge costs less than on a flat image") {
  const int H = 4, W = 6;
  Tensor disp(Shape{H, W});
  for (int i = 0; i < H; ++i)
    for (int j = 0; j < W; ++j) disp.at({i, j}) = j < W / 2 ? 0.2 : 0.8;
  Tensor flat = Tensor::full({1, H, W}, 0.5);
  Tensor edged = flat;
  for (int i = 0; i < H; ++i)
    for (int j = W / 2; j < W; ++j) edged.at({0, i, j}) = 1.0;  // edge co-located with the step
  Graph g;
  const real on_flat = smoothness_loss(g, g.constant(disp), g.constant(flat)).val().item();
  const real on_edge = smoothness_loss(g, g.constant(disp), g.constant(edged)).val().item();
  CHECK(on_edge < on_flat);
}

TEST_CASE("geometric consistency: equal depths give zero loss and unit mask") {
  Rng rng(13);
  Tensor d = rng.uniform_tensor({5, 5}, 1.0, 5.0);
  Graph g;
  GeomConsistency gc =
      geometric_consistency(g, g.constant(d), g.constant(d), Tensor::ones(Shape{5, 5}));
  CHECK(gc.loss.val().item() == 0.0);
  CHECK(gc.d_diff.val().abs_max() == 0.0);
  CHECK(gc.mask.val().min() == 1.0);
  CHECK_FALSE(gc.degenerate);
}

TEST_CASE("geometric consistency: proj = 2*sampled gives D_diff = 1/3 everywhere") {
  Graph g;
  GeomConsistency gc = geometric_consistency(g, g.constant(Tensor::full({4, 4}, 6.0)),
                                             g.constant(Tensor::full({4, 4}, 3.0)),
                                             Tensor::ones(Shape{4, 4}));
  CHECK(gc.loss.val().item() == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(gc.mask.val().max() == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("geometric consistency: corruption localizes in the mask") {
  Rng rng(17);
  const int H = 10, W = 10;
  Tensor d = rng.uniform_tensor({H, W}, 2.0, 4.0);
  Tensor proj = d;
  // corrupt a 10% block
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 5; ++j) proj.at({i, j}) *= 4.0;  // d_diff = 3/5 there
  Graph g;
  GeomConsistency gc =
      geometric_consistency(g, g.constant(proj), g.constant(d), Tensor::ones(Shape{H, W}));
  const Tensor& mask = gc.mask.val();
  for (int i = 0; i < H; ++i)
    for (int j = 0; j < W; ++j) {
      const bool corrupted = i < 2 && j < 5;
      if (corrupted) {
        CHECK(mask.at({i, j}) < 0.5);
      } else {
        CHECK(mask.at({i, j}) > 0.99);
      }
    }
}

TEST_CASE("geometric consistency: division guard marks tiny denominators invalid") {
  Tensor proj = Tensor::full({2, 2}, 1e-9);
  Tensor sampled = Tensor::full({2, 2}, 1e-9);
  Graph g;
  GeomConsistency gc =
      geometric_consistency(g, g.constant(proj), g.constant(sampled), Tensor::ones(Shape{2, 2}));
  CHECK(gc.valid.sum() == 0.0);
  CHECK(gc.degenerate);
  CHECK(gc.loss.val().item() == 0.0);
}

TEST_CASE("projection consistency: zero residuals and the 3-4-5 pixel") {
  Graph g;
  MaskedMean zero = projection_consistency_loss(g, g.constant(Tensor::zeros(Shape{3, 4, 4})),
                                                Tensor::ones(Shape{4, 4}));
  CHECK(zero.value.val().item() <= 1e-10);

  Tensor r(Shape{3, 2, 2});
  r.at({0, 0, 0}) = 3.0;
  r.at({1, 0, 0}) = 4.0;
  Tensor mask(Shape{2, 2});
  mask.at({0, 0}) = 1.0;
  MaskedMean five = projection_consistency_loss(g, g.constant(r), mask);
  CHECK(five.value.val().item() == doctest::Approx(5.0).epsilon(1e-10));

  MaskedMean empty = projection_consistency_loss(g, g.constant(r), Tensor::zeros(Shape{2, 2}));
  CHECK(empty.degenerate);
  CHECK(empty.value.val().item() == 0.0);
}

TEST_CASE("self-supervised total: unit components with default weights give 1.8") {
  Graph g;
  LossWeights w;
  Var total = self_supervised_total(g, g.constant(Tensor::ones(Shape{3, 3})),
                                    g.constant(Tensor::ones(Shape{3, 3})), g.scalar(1.0),
                                    g.scalar(1.0), g.scalar(1.0), Tensor::ones(Shape{3, 3}), w);
  CHECK(total.val().item() == doctest::Approx(1.8).epsilon(1e-12));

  Var zero = self_supervised_total(g, g.constant(Tensor::zeros(Shape{3, 3})),
                                   g.constant(Tensor::ones(Shape{3, 3})), g.scalar(0.0),
                                   g.scalar(0.0), g.scalar(0.0), Tensor::ones(Shape{3, 3}), w);
  CHECK(zero.val().item() == 0.0);

  LossWeights bad;
  bad.lambda2 = -0.1;
  CHECK_THROWS(self_supervised_total(g, g.constant(Tensor::ones(Shape{3, 3})),
                                     g.constant(Tensor::ones(Shape{3, 3})), g.scalar(1.0),
                                     g.scalar(1.0), g.scalar(1.0), Tensor::ones(Shape{3, 3}), bad));
}

TEST_CASE("self-supervised total: random components match a direct recomputation") {
  Rng rng(19);
  Graph g;
  LossWeights w;
  Tensor pm = rng.uniform_tensor({4, 4});
  Tensor ms = rng.uniform_tensor({4, 4}, 0.2, 1.0);
  const real ds = rng.uniform(), geo = rng.uniform(), pr = rng.uniform();
  Var total = self_supervised_total(g, g.constant(pm), g.constant(ms), g.scalar(ds),
                                    g.scalar(geo), g.scalar(pr), Tensor::ones(Shape{4, 4}), w);
  real masked = 0;
  for (std::int64_t i = 0; i < 16; ++i) masked += pm[i] * ms[i];
  masked /= 16;
  const real expect = 0.7 * masked + 0.1 * ds + 0.5 * geo + 0.5 * pr;
  CHECK(total.val().item() == doctest::Approx(expect).epsilon(1e-7));
}

TEST_CASE("lsgan losses: closed forms") {
  Graph g;
  // perfect discriminator
  Var d0 = lsgan_discriminator_loss(g.constant(Tensor::ones(Shape{3})),
                                    g.constant(Tensor::zeros(Shape{3})));
  CHECK(d0.val().item() == 0.0);
  // day = night = 0.5, one sample each
  Var dmid = lsgan_discriminator_loss(g.constant(Tensor::full({1}, 0.5)),
                                      g.constant(Tensor::full({1}, 0.5)));
  CHECK(dmid.val().item() == doctest::Approx(0.25).epsilon(1e-12));
  // generator
  CHECK(lsgan_generator_loss(g.constant(Tensor::ones(Shape{4}))).val().item() == 0.0);
  CHECK(lsgan_generator_loss(g.constant(Tensor::zeros(Shape{1}))).val().item() ==
        doctest::Approx(0.5).epsilon(1e-12));
  CHECK_THROWS(lsgan_generator_loss(g.constant(Tensor(Shape{0}))));

  // random scores against the direct formula
  Rng rng(23);
  Tensor day = rng.uniform_tensor({5}, -1, 2);
  Tensor night = rng.uniform_tensor({7}, -1, 2);
  real expect = 0;
  for (int i = 0; i < 5; ++i) expect += (day[i] - 1) * (day[i] - 1) / (2.0 * 5);
  for (int i = 0; i < 7; ++i) expect += night[i] * night[i] / (2.0 * 7);
  Var dl = lsgan_discriminator_loss(g.constant(day), g.constant(night));
  CHECK(dl.val().item() == doctest::Approx(expect).epsilon(1e-7));
}

TEST_CASE("total loss is the plain sum and linear") {
  Graph g;
  CHECK(total_loss(g.scalar(0), g.scalar(0), g.scalar(0)).val().item() == 0.0);
  CHECK(total_loss(g.scalar(1), g.scalar(2), g.scalar(3)).val().item() == 6.0);
  Rng rng(29);
  const real a = rng.uniform(), b = rng.uniform(), c = rng.uniform(), k = 2.7;
  const real t1 = total_loss(g.scalar(a), g.scalar(b), g.scalar(c)).val().item();
  const real t2 = total_loss(g.scalar(k * a), g.scalar(k * b), g.scalar(k * c)).val().item();
  CHECK(std::abs(t1 - (a + b + c)) < 1e-9);
  CHECK(std::abs(t2 - k * t1) < 1e-9);
}

TEST_CASE("gradient suite: every loss vs central differences") {
  Rng rng(31);
  Tensor t = rng.uniform_tensor({2, 6, 6}, 0.05, 0.95);
  Tensor w = rng.uniform_tensor({2, 6, 6}, 0.05, 0.95);
  auto photo = [](Graph& g, const std::vector<Var>& in) {
    return photometric_loss(g, in[0], in[1], 0.85).mean;
  };
  CHECK(fd_check(photo, {t, w}) < 1e-3);

  Tensor disp = rng.uniform_tensor({6, 6}, 0.2, 0.9);
  Tensor img = rng.uniform_tensor({2, 6, 6}, 0.05, 0.95);
  auto smooth = [](Graph& g, const std::vector<Var>& in) {
    return smoothness_loss(g, in[0], in[1]);
  };
  CHECK(fd_check(smooth, {disp, img}) < 1e-3);

  Tensor proj = rng.uniform_tensor({6, 6}, 1.0, 4.0);
  Tensor sampled = rng.uniform_tensor({6, 6}, 1.0, 4.0);
  auto geom = [](Graph& g, const std::vector<Var>& in) {
    return geometric_consistency(g, in[0], in[1], Tensor::ones(Shape{6, 6})).loss;
  };
  CHECK(fd_check(geom, {proj, sampled}) < 1e-3);

  Tensor res = rng.uniform_tensor({3, 6, 6}, -1.0, 1.0);
  auto pc = [](Graph& g, const std::vector<Var>& in) {
    return projection_consistency_loss(g, in[0], Tensor::ones(Shape{6, 6})).value;
  };
  CHECK(fd_check(pc, {res}) < 1e-3);

  Tensor day = rng.uniform_tensor({4}, -0.5, 1.5);
  Tensor night = rng.uniform_tensor({4}, -0.5, 1.5);
  auto gan = [](Graph& g, const std::vector<Var>& in) {
    return add(lsgan_discriminator_loss(in[0], in[1]), lsgan_generator_loss(in[1]));
  };
  CHECK(fd_check(gan, {day, night}) < 1e-3);

  // composite Eq-8 style total through every differentiable path
  auto total = [](Graph& g, const std::vector<Var>& in) {
    Photometric p = photometric_loss(g, in[0], in[1], 0.85);
    Var sm = smoothness_loss(g, in[2], in[0]);
    GeomConsistency gc = geometric_consistency(g, in[3], in[4], Tensor::ones(Shape{6, 6}));
    MaskedMean pr = projection_consistency_loss(g, in[5], Tensor::ones(Shape{6, 6}));
    LossWeights lw;
    return self_supervised_total(g, p.per_pixel, gc.mask, sm, gc.loss, pr.value,
                                 Tensor::ones(Shape{6, 6}), lw);
  };
  CHECK(fd_check(total, {t, w, disp, proj, sampled, res}) < 1e-3);
}

TEST_CASE("every loss is nonnegative on random inputs") {
  Rng rng(37);
  for (int it = 0; it < 10; ++it) {
    Graph g;
    Tensor a = rng.uniform_tensor({2, 5, 5});
    Tensor b = rng.uniform_tensor({2, 5, 5});
    CHECK(photometric_loss(g, g.constant(a), g.constant(b), 0.85).mean.val().item() >= 0.0);
    CHECK(smoothness_loss(g, g.constant(rng.uniform_tensor({5, 5}, 0.1, 1.0)), g.constant(a))
              .val()
              .item() >= 0.0);
    GeomConsistency gc = geometric_consistency(
        g, g.constant(rng.uniform_tensor({5, 5}, 0.5, 3.0)),
        g.constant(rng.uniform_tensor({5, 5}, 0.5, 3.0)), Tensor::ones(Shape{5, 5}));
    CHECK(gc.loss.val().item() >= 0.0);
    // M_s in (0,1] and M_s = 1 iff d_diff = 0
    CHECK(gc.mask.val().min() > 0.0);
    CHECK(gc.mask.val().max() <= 1.0);
  }
}
