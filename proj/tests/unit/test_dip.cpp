#include <doctest.h>

#include <cmath>

#include "../support.hpp"
#include "patk/dip.hpp"
#include "patk/variational.hpp"

using namespace patk;
using patk::test::random_image;

namespace {

ForwardOperator tiny_operator() {
  Grid g;
  g.nx = g.ny = 8;
  const DetectorRing ring = make_ring(2.5 * g.dx, 4, 270.0, 270.0);
  return ForwardOperator(g, ring, default_time_axis(g, ring));
}

UNetConfig tiny_net(HeadKind head) {
  UNetConfig c;
  c.channels = {2, 4};
  c.head = head;
  c.init_seed = 5;
  return c;
}

}  // namespace

TEST_CASE("cosine learning-rate schedule") {
  CHECK(cosine_lr(0, 400, 5e-4) == 5e-4);
  CHECK(cosine_lr(200, 400, 5e-4) == doctest::Approx(2.5e-4).epsilon(1e-15));
  CHECK(cosine_lr(400, 400, 5e-4) == 0.0);
  for (int t = 1; t <= 400; ++t) CHECK(cosine_lr(t, 400, 5e-4) <= cosine_lr(t - 1, 400, 5e-4));
  CHECK_THROWS_AS(cosine_lr(401, 400, 5e-4), ConfigError);
  CHECK_THROWS_AS(cosine_lr(-1, 400, 5e-4), ConfigError);
}

TEST_CASE("Adam steps") {
  SUBCASE("zero gradient leaves parameters and decays moments") {
    std::vector<double> p{1.0, -2.0};
    AdamState s{{0.5, 0.5}, {0.25, 0.25}, 3};
    adam_step(p, std::vector<double>{0.0, 0.0}, s, 1e-3, 0.9, 0.999, 1e-8);
    CHECK(s.m[0] == doctest::Approx(0.45));
    CHECK(s.v[0] == doctest::Approx(0.24975));
    // Non-zero moments still move the parameters; with zero moments they stay.
    std::vector<double> q{1.0, -2.0};
    AdamState fresh;
    adam_step(q, std::vector<double>{0.0, 0.0}, fresh, 1e-3);
    CHECK(q == std::vector<double>{1.0, -2.0});
    CHECK(fresh.m == std::vector<double>{0.0, 0.0});
  }
  SUBCASE("first step with a unit gradient") {
    std::vector<double> p{0.3};
    AdamState s;
    adam_step(p, std::vector<double>{1.0}, s, 5e-4);
    CHECK(p[0] == doctest::Approx(0.3 - 5e-4 / (1.0 + 1e-8)).epsilon(1e-15));
  }
  SUBCASE("two steps match the hand-written recursion") {
    const double b1 = 0.9, b2 = 0.999, eps = 1e-8, lr = 1e-2;
    const double g1 = 0.7, g2 = -1.3;
    double x = 2.0;
    const double m1 = (1 - b1) * g1, v1 = (1 - b2) * g1 * g1;
    x -= lr * (m1 / (1 - b1)) / (std::sqrt(v1 / (1 - b2)) + eps);
    const double m2 = b1 * m1 + (1 - b1) * g2, v2 = b2 * v1 + (1 - b2) * g2 * g2;
    x -= lr * (m2 / (1 - b1 * b1)) / (std::sqrt(v2 / (1 - b2 * b2)) + eps);

    std::vector<double> p{2.0};
    AdamState s;
    adam_step(p, std::vector<double>{g1}, s, lr, b1, b2, eps);
    adam_step(p, std::vector<double>{g2}, s, lr, b1, b2, eps);
    CHECK(std::abs(p[0] - x) <= 1e-15);
    CHECK(s.step == 2);
  }
  std::vector<double> p(2);
  AdamState s;
  CHECK_THROWS_AS(adam_step(p, std::vector<double>(3), s, 1e-3), ConfigError);
}

TEST_CASE("loss terms") {
  const ForwardOperator op = tiny_operator();
  const TimeSeries zero_data(4, static_cast<std::size_t>(op.time_axis().n_t));
  DipLossTerms terms;
  terms.lambda = 0.5;
  terms.tv_eps = 1e-3;
  CHECK(dip_loss_of(Image(8, 8), zero_data, op, terms).total() == 0.0);

  const Image phi = random_image(8, 8, 1, 0.0, 1.0);
  const TimeSeries g = test::random_series(4, static_cast<std::size_t>(op.time_axis().n_t), 2);
  const TimeSeries a = op.forward(phi);
  double data = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) data += (a[k] - g[k]) * (a[k] - g[k]);
  terms.mean_mu = 2.0;
  terms.mean_target = 0.25;
  const DipLossParts parts = dip_loss_of(phi, g, op, terms);
  const double m = mean(phi.values());
  const double expect = data + 0.5 * tv_smoothed(phi, 1e-3) + 2.0 * (m - 0.25) * (m - 0.25);
  CHECK(parts.total() == doctest::Approx(expect).epsilon(1e-12));
  CHECK(parts.data == doctest::Approx(data).epsilon(1e-12));

  DipLossTerms plain;
  CHECK(dip_loss_of(phi, g, op, plain).total() == doctest::Approx(data).epsilon(1e-12));
}

TEST_CASE("resolved defaults for the smoothing and the mean target") {
  Image z = random_image(8, 8, 3, 0.0, 2.0);
  DipConfig c;
  c.mean_penalty = DipMeanPenalty{};
  const DipLossTerms t = resolve_loss_terms(c, z);
  const auto [lo, hi] = std::minmax_element(z.values().begin(), z.values().end());
  CHECK(t.tv_eps == doctest::Approx(1e-6 * (*hi - *lo)));
  CHECK(t.mean_target == doctest::Approx(mean(z.values())));
  CHECK(t.mean_mu == 1.0);
}

TEST_CASE("loss gradient matches central finite differences") {
  const ForwardOperator op = tiny_operator();
  const Image z = random_image(8, 8, 7, 0.0, 1.0);
  const TimeSeries g = op.forward(random_image(8, 8, 8, 0.0, 1.0));
  for (HeadKind head : {HeadKind::conv3x3_relu, HeadKind::conv1x1_nobias_leakyrelu, HeadKind::conv1x1_nobias_linear})
    for (bool penalty : {false, true}) {
      CAPTURE(static_cast<int>(head));
      CAPTURE(penalty);
      const UNetConfig net = tiny_net(head);
      DipConfig cfg;
      cfg.lambda = 0.05;
      cfg.tv_eps = 1e-2;
      if (penalty) cfg.mean_penalty = DipMeanPenalty{0.7, 0.2};
      NetworkParams p = unet_init(net, 8, 8);
      const std::vector<double> grad = dip_loss_grad(p, net, z, g, op, cfg);
      std::vector<double> fd(p.size());
      const double h = 1e-5;
      for (std::size_t k = 0; k < p.size(); ++k) {
        const double keep = p.values[k];
        p.values[k] = keep + h;
        const double up = dip_loss(p, net, z, g, op, cfg);
        p.values[k] = keep - h;
        const double down = dip_loss(p, net, z, g, op, cfg);
        p.values[k] = keep;
        fd[k] = (up - down) / (2 * h);
      }
      CHECK(test::max_rel_err(grad, fd, 1e-4 * norm_inf(grad)) <= 1e-5);
    }
}

TEST_CASE("gradient vanishes when the network reproduces the data") {
  const ForwardOperator op = tiny_operator();
  const UNetConfig net = tiny_net(HeadKind::conv1x1_nobias_linear);
  const NetworkParams p = unet_init(net, 8, 8);
  const Image z = random_image(8, 8, 9);
  const TimeSeries g = op.forward(unet_forward(p, net, z));
  DipConfig cfg;
  cfg.lambda = 0.0;
  const std::vector<double> grad = dip_loss_grad(p, net, z, g, op, cfg);
  CHECK(norm_inf(grad) <= 1e-10 * std::max(1.0, norm_inf(g.values())));
}

TEST_CASE("data upstream is linear in the data at a zero output") {
  const ForwardOperator op = tiny_operator();
  const TimeSeries g = test::random_series(4, static_cast<std::size_t>(op.time_axis().n_t), 4);
  TimeSeries g2 = g;
  for (auto& v : g2.values()) v *= 2.0;
  const DipLossTerms terms;
  const Image u = dip_upstream(Image(8, 8), g, op, terms), u2 = dip_upstream(Image(8, 8), g2, op, terms);
  for (std::size_t k = 0; k < u.size(); ++k) CHECK(u2[k] == doctest::Approx(2.0 * u[k]).epsilon(1e-14));
}

TEST_CASE("iterate selection") {
  RunRecord r;
  r.objective = {3.0, 2.0, 1.0};
  r.psnr = {10.0, 12.0, 11.0};
  CHECK(select_iterate(r, Selection::early_stop_psnr) == 1);
  CHECK(select_iterate(r, Selection::converged_psnr, 1) == 1);
  CHECK(select_iterate(r, Selection::converged_psnr, 2) == 2);
  CHECK(select_iterate(r, Selection::fixed_cutoff) == 2);
  CHECK_THROWS_AS(select_iterate(r, Selection::converged_psnr, 3), ConfigError);
  r.psnr.clear();
  CHECK(select_iterate(r, Selection::fixed_cutoff) == 2);
  CHECK_THROWS_AS(select_iterate(r, Selection::early_stop_psnr), ConfigError);
  CHECK_THROWS_AS(select_iterate(RunRecord{}, Selection::fixed_cutoff), ConfigError);
}

TEST_CASE("dip_reconstruct bookkeeping") {
  Grid grid;
  grid.nx = grid.ny = 32;
  const DetectorRing ring = make_ring(0.45 * 32 * grid.dx, 32, 270.0, 270.0);
  const ForwardOperator op(grid, ring, default_time_axis(grid, ring));
  Image gt(32, 32);
  for (std::size_t i = 10; i < 20; ++i)
    for (std::size_t j = 12; j < 22; ++j) gt(i, j) = 1.0;
  const TimeSeries g = op.forward(gt);
  const Image z = approximate_inverse(g, op);

  UNetConfig net;
  net.channels = {4, 8};
  net.init_seed = 2;
  DipConfig cfg;
  cfg.max_iter = 12;
  cfg.burn_in = 4;
  cfg.lr0 = 1e-2;

  const DipResult a = dip_reconstruct(g, z, op, cfg, net, gt);
  CHECK(a.record.objective.size() == 13);
  CHECK(a.record.psnr.size() == 13);
  CHECK(a.record.objective[0] == doctest::Approx(dip_loss(unet_init(net, 32, 32), net, z, g, op, cfg)).epsilon(1e-13));
  CHECK(a.record.psnr[a.early_index] >= a.record.psnr[a.converged_index]);
  CHECK(a.record.psnr[a.converged_index] >= a.record.psnr.back());
  CHECK(a.converged_index >= 4);
  CHECK(a.image == *a.early_stop);
  CHECK(*std::min_element(a.cutoff.values().begin(), a.cutoff.values().end()) >= 0.0);

  const DipResult b = dip_reconstruct(g, z, op, cfg, net, gt);
  CHECK(b.record.objective == a.record.objective);
  CHECK(b.record.psnr == a.record.psnr);
  CHECK(b.final_params == a.final_params);

  CHECK_THROWS_AS(dip_reconstruct(g, z, op, cfg, net), ConfigError);
  cfg.selection = Selection::fixed_cutoff;
  const DipResult c = dip_reconstruct(g, z, op, cfg, net);
  CHECK(c.image == a.cutoff);
  CHECK(c.record.psnr.empty());
  cfg.burn_in = 12;
  CHECK_THROWS_AS(dip_reconstruct(g, z, op, cfg, net), ConfigError);
}
