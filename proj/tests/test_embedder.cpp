#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "oim/buffers.hpp"
#include "oim/embedder.hpp"
#include "oim/errors.hpp"
#include "oim/loss.hpp"
#include "oim/rng.hpp"
#include "oim/vecmath.hpp"
#include "oracles.hpp"

TEST_CASE("init bounds follow the fan-in/fan-out rule") {
  oim::Rng rng(41);
  oim::EmbedderParams params = oim::EmbedderParams::init(8, 20, rng);
  CHECK(params.out_dim() == 8);
  CHECK(params.in_dim() == 20);
  double bound = std::sqrt(6.0 / (8 + 20));
  for (std::size_t r = 0; r < 8; ++r) {
    for (std::size_t c = 0; c < 20; ++c) {
      CHECK(std::abs(params.weight(r, c)) <= bound);
    }
  }
}

TEST_CASE("forward output is unit norm and matches a naive computation") {
  oim::Rng rng(42);
  for (int rep = 0; rep < 100; ++rep) {
    std::size_t in = 2 + rng.uniform_index(10);
    std::size_t out = 2 + rng.uniform_index(10);
    oim::EmbedderParams params = oim::EmbedderParams::init(out, in, rng);
    oim::Vec raw = rng.unit_vector(in);

    oim::EmbedCache cache;
    oim::Vec z = embed_forward(raw, params, &cache);
    CHECK(std::abs(oim::l2_norm(z) - 1.0) < 1e-12);

    // plain loops, no library matvec
    oracle::Vec y(out, 0.0);
    for (std::size_t r = 0; r < out; ++r) {
      for (std::size_t c = 0; c < in; ++c) y[r] += params.weight(r, c) * raw[c];
    }
    double norm = std::sqrt(oracle::dot_naive(y, y));
    for (std::size_t r = 0; r < out; ++r) {
      CHECK(z[r] == doctest::Approx(y[r] / norm).epsilon(1e-12));
      CHECK(cache.pre_norm[r] == doctest::Approx(y[r]).epsilon(1e-12));
    }
    CHECK(cache.norm == doctest::Approx(norm).epsilon(1e-12));
    CHECK(cache.z == z);
    CHECK(cache.raw == raw);
  }
}

TEST_CASE("zero projection cannot be normalized") {
  oim::EmbedderParams params;
  params.weight = oim::Matrix(2, 3);  // all-zero weights
  oim::Vec raw = {1.0, 2.0, 3.0};
  CHECK_THROWS_AS((void)embed_forward(raw, params), oim::ZeroNormError);
}

TEST_CASE("backward matches finite differences through the normalization") {
  oim::Rng rng(43);
  const double step = 1e-6;
  for (int rep = 0; rep < 50; ++rep) {
    std::size_t in = 2 + rng.uniform_index(6);
    std::size_t out = 2 + rng.uniform_index(6);
    oim::EmbedderParams params = oim::EmbedderParams::init(out, in, rng);
    oim::Vec raw = rng.unit_vector(in);
    oim::Vec dz(out);
    for (double& v : dz) v = rng.normal();

    oim::EmbedCache cache;
    embed_forward(raw, params, &cache);
    oim::EmbedGrads grads = embed_backward(cache, dz, params);
    REQUIRE(grads.dweight.rows() == out);
    REQUIRE(grads.dweight.cols() == in);
    REQUIRE(grads.draw.size() == in);

    // scalar objective sum(dz * z) probes the full Jacobian
    auto objective_w = [&](const oim::Matrix& w) {
      oim::EmbedderParams p;
      p.weight = w;
      oim::Vec z = embed_forward(raw, p);
      double s = 0.0;
      for (std::size_t i = 0; i < z.size(); ++i) s += dz[i] * z[i];
      return s;
    };
    for (std::size_t r = 0; r < out; ++r) {
      for (std::size_t c = 0; c < in; ++c) {
        oim::Matrix w = params.weight;
        w(r, c) += step;
        double hi = objective_w(w);
        w(r, c) -= 2 * step;
        double lo = objective_w(w);
        double fd = (hi - lo) / (2 * step);
        CHECK(grads.dweight(r, c) == doctest::Approx(fd).epsilon(1e-4));
      }
    }
    auto objective_raw = [&](const oracle::Vec& r2) {
      oim::Vec z = embed_forward(r2, params);
      double s = 0.0;
      for (std::size_t i = 0; i < z.size(); ++i) s += dz[i] * z[i];
      return s;
    };
    for (std::size_t c = 0; c < in; ++c) {
      double fd = oracle::central_diff(objective_raw, raw, c, step);
      CHECK(grads.draw[c] == doctest::Approx(fd).epsilon(1e-4));
    }
  }
}

TEST_CASE("classifier loss probabilities and gradients check out") {
  oim::Rng rng(44);
  const double step = 1e-6;
  for (int rep = 0; rep < 30; ++rep) {
    std::size_t dim = 2 + rng.uniform_index(6);
    std::size_t classes = 2 + rng.uniform_index(6);
    oim::SoftmaxClassifierParams params =
        oim::SoftmaxClassifierParams::init(classes, dim, rng);
    oim::Vec z = rng.unit_vector(dim);
    std::size_t target = rng.uniform_index(classes);

    oim::SoftmaxLossResult result = softmax_cls_loss(z, target, params);
    double total = 0.0;
    for (double p : result.probs) total += p;
    CHECK(std::abs(total - 1.0) < 1e-12);
    CHECK(result.loss ==
          doctest::Approx(-std::log(result.probs[target])).epsilon(1e-12));

    auto loss_z = [&](const oracle::Vec& zz) {
      return softmax_cls_loss(zz, target, params).loss;
    };
    for (std::size_t i = 0; i < dim; ++i) {
      double fd = oracle::central_diff(loss_z, z, i, step);
      CHECK(result.dz[i] == doctest::Approx(fd).epsilon(1e-4));
    }
    for (std::size_t r = 0; r < classes; ++r) {
      for (std::size_t c = 0; c < dim; ++c) {
        oim::SoftmaxClassifierParams p2 = params;
        p2.weight(r, c) += step;
        double hi = softmax_cls_loss(z, target, p2).loss;
        p2.weight(r, c) -= 2 * step;
        double lo = softmax_cls_loss(z, target, p2).loss;
        CHECK(result.dweight(r, c) ==
              doctest::Approx((hi - lo) / (2 * step)).epsilon(1e-4));
      }
      oim::SoftmaxClassifierParams p2 = params;
      p2.bias[r] += step;
      double hi = softmax_cls_loss(z, target, p2).loss;
      p2.bias[r] -= 2 * step;
      double lo = softmax_cls_loss(z, target, p2).loss;
      CHECK(result.dbias[r] ==
            doctest::Approx((hi - lo) / (2 * step)).epsilon(1e-4));
    }
  }
}

TEST_CASE("sgd_step reproduces the momentum recurrence") {
  oim::Rng rng(45);
  std::vector<double> params(6), velocity(6, 0.0), grad(6);
  oim::Matrix mp(2, 3), mv(2, 3), mg(2, 3);
  std::vector<double> ref_p(6), ref_v(6, 0.0);
  for (std::size_t i = 0; i < 6; ++i) {
    params[i] = rng.normal();
    ref_p[i] = params[i];
    mp.data()[i] = params[i];
  }
  for (int step = 0; step < 10; ++step) {
    for (std::size_t i = 0; i < 6; ++i) {
      grad[i] = rng.normal();
      mg.data()[i] = grad[i];
    }
    oim::Vec vp(params), vv(velocity), vg(grad);
    oim::sgd_step(vp, vg, vv, 0.05, 0.9);
    oim::sgd_step(mp, mg, mv, 0.05, 0.9);
    oracle::sgd_reference(ref_p, ref_v, grad, 0.05, 0.9);
    for (std::size_t i = 0; i < 6; ++i) {
      CHECK(vp[i] == doctest::Approx(ref_p[i]).epsilon(1e-15));
      CHECK(mp.data()[i] == doctest::Approx(ref_p[i]).epsilon(1e-15));
    }
    params = vp;
    velocity = vv;
  }
}

TEST_CASE("sgd_step rejects non-finite gradients") {
  oim::Vec p = {1.0, 2.0};
  oim::Vec v = {0.0, 0.0};
  oim::Vec g = {0.1, std::numeric_limits<double>::quiet_NaN()};
  CHECK_THROWS(oim::sgd_step(p, g, v, 0.1, 0.9));
}

TEST_CASE("composite gradient through embedder and matching loss") {
  // spot check of the full raw -> embed -> loss chain; the broad sweep
  // lives in the gradient audit
  oim::Rng rng(46);
  const double step = 1e-6;
  for (int rep = 0; rep < 10; ++rep) {
    std::size_t in = 3 + rng.uniform_index(4);
    std::size_t out = 3 + rng.uniform_index(4);
    std::size_t labeled = 2 + rng.uniform_index(4);
    oim::OimConfig cfg;
    cfg.tau = 0.1;
    cfg.feature_dim = out;
    cfg.num_labeled = labeled;
    cfg.queue_capacity = 4;
    oim::LookupTable lut(out, labeled);
    oim::CircularQueue queue(out, 4);
    for (std::size_t t = 0; t < labeled; ++t) {
      lut.update(t, rng.unit_vector(out), 0.0);
    }
    queue.push(rng.unit_vector(out));
    queue.push(rng.unit_vector(out));

    oim::EmbedderParams params = oim::EmbedderParams::init(out, in, rng);
    oim::Vec raw = rng.unit_vector(in);
    std::size_t target = rng.uniform_index(labeled);

    oim::EmbedCache cache;
    oim::Vec z = embed_forward(raw, params, &cache);
    oim::MatchScores scores = oim_forward(z, lut, queue, cfg);
    oim::Vec dz = oim_grad_x(scores, target, lut, queue, cfg);
    oim::EmbedGrads grads = embed_backward(cache, dz, params);

    auto loss_w = [&](const oim::Matrix& w) {
      oim::EmbedderParams p;
      p.weight = w;
      oim::Vec zz = embed_forward(raw, p);
      return oim_loss(oim_forward(zz, lut, queue, cfg), target);
    };
    double max_rel = 0.0;
    for (std::size_t r = 0; r < out; ++r) {
      for (std::size_t c = 0; c < in; ++c) {
        oim::Matrix w = params.weight;
        w(r, c) += step;
        double hi = loss_w(w);
        w(r, c) -= 2 * step;
        double lo = loss_w(w);
        double fd = (hi - lo) / (2 * step);
        double denom = std::max(std::abs(fd), 1e-8);
        max_rel = std::max(max_rel,
                           std::abs(grads.dweight(r, c) - fd) / denom);
      }
    }
    CHECK(max_rel < 1e-4);
  }
}
