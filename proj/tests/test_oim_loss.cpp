#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>
#include <optional>
#include <set>
#include <vector>

#include "oim/buffers.hpp"
#include "oim/errors.hpp"
#include "oim/loss.hpp"
#include "oim/rng.hpp"
#include "oim/vecmath.hpp"
#include "oracles.hpp"

namespace {

struct Setup {
  oim::LookupTable lut;
  oim::CircularQueue queue;
  oim::OimConfig cfg;
  oim::Vec x;
  std::vector<oim::Vec> lut_columns;
  std::vector<oim::Vec> queue_entries;
};

// random problem; a slice of LUT columns may stay uninitialized (all-zero)
Setup random_setup(oim::Rng& rng, bool allow_zero_columns = true) {
  std::size_t dim = 2 + rng.uniform_index(10);
  std::size_t labeled = 1 + rng.uniform_index(8);
  std::size_t queued = rng.uniform_index(9);
  Setup s{oim::LookupTable(dim, labeled),
          oim::CircularQueue(dim, queued == 0 ? 1 : queued),
          {},
          {},
          {},
          {}};
  s.cfg.tau = 0.05 + rng.uniform() * 0.95;
  s.cfg.feature_dim = dim;
  s.cfg.num_labeled = labeled;
  s.cfg.queue_capacity = s.queue.capacity();
  for (std::size_t t = 0; t < labeled; ++t) {
    if (allow_zero_columns && rng.uniform() < 0.2) {
      s.lut_columns.push_back(oim::Vec(dim, 0.0));
      continue;
    }
    oim::Vec v = rng.unit_vector(dim);
    s.lut.update(t, v, 0.0);  // gamma 0 adopts the feature exactly
    s.lut_columns.push_back(v);
  }
  for (std::size_t k = 0; k < queued; ++k) {
    oim::Vec v = rng.unit_vector(dim);
    s.queue.push(v);
    s.queue_entries.push_back(v);
  }
  s.x = rng.unit_vector(dim);
  for (double& v : s.x) v *= rng.uniform(0.5, 2.0);  // x need not be unit
  return s;
}

}  // namespace

TEST_CASE("forward probabilities match a naive exponential-ratio oracle") {
  oim::Rng rng(21);
  for (int rep = 0; rep < 500; ++rep) {
    Setup s = random_setup(rng);
    oim::MatchScores scores = oim_forward(s.x, s.lut, s.queue, s.cfg);
    oracle::JointSoftmax naive = oracle::joint_softmax_naive(
        s.x, s.lut_columns, s.queue_entries, s.cfg.tau);
    for (std::size_t j = 0; j < scores.p.size(); ++j) {
      CHECK(scores.p[j] == doctest::Approx(naive.p[j]).epsilon(1e-12));
    }
    for (std::size_t k = 0; k < scores.q.size(); ++k) {
      CHECK(scores.q[k] == doctest::Approx(naive.q[k]).epsilon(1e-12));
    }
  }
}

TEST_CASE("probabilities sum to one on every forward") {
  oim::Rng rng(22);
  for (int rep = 0; rep < 1000; ++rep) {
    Setup s = random_setup(rng);
    oim::MatchScores scores = oim_forward(s.x, s.lut, s.queue, s.cfg);
    double total = 0.0;
    for (double v : scores.p) total += v;
    for (double v : scores.q) total += v;
    CHECK(std::abs(total - 1.0) < 1e-12);
  }
}

TEST_CASE("excluded entries carry exactly zero probability") {
  oim::Rng rng(23);
  for (int rep = 0; rep < 200; ++rep) {
    Setup s = random_setup(rng, /*allow_zero_columns=*/false);
    std::size_t target = rng.uniform_index(s.cfg.num_labeled);
    oim::SubsetSelection subset;
    subset.labeled = subsample_indices(
        rng, s.cfg.num_labeled, 1 + rng.uniform_index(s.cfg.num_labeled),
        target);
    if (!s.queue_entries.empty()) {
      subset.unlabeled = subsample_indices(
          rng, s.queue_entries.size(),
          rng.uniform_index(s.queue_entries.size() + 1), std::nullopt);
    }
    oim::MatchScores scores = oim_forward(s.x, s.lut, s.queue, s.cfg, &subset);

    std::set<std::size_t> in_l(subset.labeled.begin(), subset.labeled.end());
    std::set<std::size_t> in_q(subset.unlabeled.begin(),
                               subset.unlabeled.end());
    for (std::size_t j = 0; j < scores.p.size(); ++j) {
      if (in_l.count(j)) continue;
      CHECK(scores.p[j] == 0.0);
      CHECK(scores.logits_labeled[j] ==
            -std::numeric_limits<double>::infinity());
    }
    for (std::size_t k = 0; k < scores.q.size(); ++k) {
      if (in_q.count(k)) continue;
      CHECK(scores.q[k] == 0.0);
    }

    // included entries agree with the oracle restricted to the subset
    oracle::JointSoftmax naive = oracle::joint_softmax_naive(
        s.x, s.lut_columns, s.queue_entries, s.cfg.tau, in_l, in_q);
    for (std::size_t j : subset.labeled) {
      CHECK(scores.p[j] == doctest::Approx(naive.p[j]).epsilon(1e-12));
    }
  }
}

TEST_CASE("loss is the negative log of the target probability") {
  oim::Rng rng(24);
  for (int rep = 0; rep < 200; ++rep) {
    Setup s = random_setup(rng, /*allow_zero_columns=*/false);
    std::size_t target = rng.uniform_index(s.cfg.num_labeled);
    oim::MatchScores scores = oim_forward(s.x, s.lut, s.queue, s.cfg);
    oracle::JointSoftmax naive = oracle::joint_softmax_naive(
        s.x, s.lut_columns, s.queue_entries, s.cfg.tau);
    CHECK(oim_loss(scores, target) ==
          doctest::Approx(-std::log(naive.p[target])).epsilon(1e-12));
  }
}

TEST_CASE("loss rejects out-of-range and zero-probability targets") {
  oim::Rng rng(25);
  Setup s = random_setup(rng, /*allow_zero_columns=*/false);
  oim::MatchScores scores = oim_forward(s.x, s.lut, s.queue, s.cfg);
  CHECK_THROWS_AS((void)oim_loss(scores, s.cfg.num_labeled),
                  std::out_of_range);

  // a subset that skips the target forces its probability to exact zero
  if (s.cfg.num_labeled >= 2) {
    std::size_t target = 0;
    oim::SubsetSelection subset;
    subset.labeled = {1};
    oim::MatchScores partial =
        oim_forward(s.x, s.lut, s.queue, s.cfg, &subset);
    CHECK_THROWS_AS((void)oim_loss(partial, target),
                    oim::DegenerateProbabilityError);
  }
}

TEST_CASE("analytic feature gradient matches central finite differences") {
  oim::Rng rng(26);
  const double step = 1e-6;
  for (int rep = 0; rep < 60; ++rep) {
    Setup s = random_setup(rng);
    std::size_t target = rng.uniform_index(s.cfg.num_labeled);
    oim::MatchScores scores = oim_forward(s.x, s.lut, s.queue, s.cfg);
    oim::Vec grad = oim_grad_x(scores, target, s.lut, s.queue, s.cfg);

    auto loss_at = [&](const oracle::Vec& x) {
      return oim_loss(oim_forward(x, s.lut, s.queue, s.cfg), target);
    };
    oracle::Vec fd(s.x.size());
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      fd[i] = oracle::central_diff(loss_at, s.x, i, step);
    }
    CHECK(oracle::rel_error(grad, fd) < 1e-6);
  }
}

TEST_CASE("gradient is exactly zero before any buffer holds a feature") {
  // all-zero LUT and empty queue: every probability is uniform and every
  // direction vector is zero, so the gradient vanishes identically
  oim::OimConfig cfg;
  cfg.feature_dim = 5;
  cfg.num_labeled = 4;
  cfg.queue_capacity = 8;
  oim::LookupTable lut(5, 4);
  oim::CircularQueue queue(5, 8);
  oim::Rng rng(27);
  oim::Vec x = rng.unit_vector(5);
  oim::MatchScores scores = oim_forward(x, lut, queue, cfg);
  for (double v : scores.p) CHECK(v == doctest::Approx(0.25).epsilon(1e-15));
  oim::Vec grad = oim_grad_x(scores, 2, lut, queue, cfg);
  for (double g : grad) CHECK(g == 0.0);
}

TEST_CASE("sub-sampled target log-probability never falls below the full one") {
  oim::Rng rng(28);
  for (int rep = 0; rep < 500; ++rep) {
    Setup s = random_setup(rng, /*allow_zero_columns=*/false);
    std::size_t target = rng.uniform_index(s.cfg.num_labeled);
    oim::MatchScores full = oim_forward(s.x, s.lut, s.queue, s.cfg);

    oim::SubsetSelection subset;
    subset.labeled = subsample_indices(
        rng, s.cfg.num_labeled, 1 + rng.uniform_index(s.cfg.num_labeled),
        target);
    if (!s.queue_entries.empty()) {
      subset.unlabeled = subsample_indices(
          rng, s.queue_entries.size(),
          rng.uniform_index(s.queue_entries.size() + 1), std::nullopt);
    }
    oim::MatchScores sub = oim_forward(s.x, s.lut, s.queue, s.cfg, &subset);

    double log_full = std::log(full.p[target]);
    double log_sub = std::log(sub.p[target]);
    CHECK(log_sub >= log_full - 1e-12);
  }
}

TEST_CASE("subsample_indices returns a sorted sample containing the target") {
  oim::Rng rng(29);
  for (int rep = 0; rep < 500; ++rep) {
    std::size_t total = 1 + rng.uniform_index(30);
    std::size_t keep = 1 + rng.uniform_index(total);
    std::size_t must = rng.uniform_index(total);
    std::vector<std::size_t> idx =
        subsample_indices(rng, total, keep, must);
    REQUIRE(idx.size() == keep);
    bool found = false;
    for (std::size_t i = 0; i < idx.size(); ++i) {
      CHECK(idx[i] < total);
      if (idx[i] == must) found = true;
      if (i > 0) CHECK(idx[i] > idx[i - 1]);
    }
    CHECK(found);
  }
}

TEST_CASE("subsample_indices edge cases") {
  oim::Rng rng(30);
  // keep == total returns everything
  std::vector<std::size_t> all = subsample_indices(rng, 5, 5, 2);
  CHECK(all == std::vector<std::size_t>{0, 1, 2, 3, 4});
  // keep zero without a forced member is an empty sample
  CHECK(subsample_indices(rng, 5, 0, std::nullopt).empty());
  CHECK_THROWS(subsample_indices(rng, 5, 6, std::nullopt));
  CHECK_THROWS(subsample_indices(rng, 5, 0, 2));
  CHECK_THROWS(subsample_indices(rng, 5, 3, 5));
}

TEST_CASE("config validation rejects out-of-range values") {
  oim::OimConfig cfg;
  cfg.feature_dim = 8;
  cfg.num_labeled = 4;
  cfg.queue_capacity = 16;
  CHECK_NOTHROW(cfg.validate());

  oim::OimConfig bad = cfg;
  bad.tau = 0.0;
  CHECK_THROWS(bad.validate());
  bad = cfg;
  bad.gamma = 1.5;
  CHECK_THROWS(bad.validate());
  bad = cfg;
  bad.num_labeled = 0;
  CHECK_THROWS(bad.validate());
  bad = cfg;
  bad.subsample_labeled = 5;  // exceeds num_labeled
  CHECK_THROWS(bad.validate());
  bad = cfg;
  bad.subsample_unlabeled = 17;  // exceeds queue capacity
  CHECK_THROWS(bad.validate());
}

TEST_CASE("forward validates shapes and subset indices") {
  oim::OimConfig cfg;
  cfg.feature_dim = 3;
  cfg.num_labeled = 2;
  cfg.queue_capacity = 4;
  oim::LookupTable lut(3, 2);
  oim::CircularQueue queue(3, 4);
  oim::Rng rng(31);
  oim::Vec x = rng.unit_vector(3);

  oim::Vec short_x = {1.0, 0.0};
  CHECK_THROWS(oim_forward(short_x, lut, queue, cfg));

  oim::SubsetSelection unsorted;
  unsorted.labeled = {1, 0};
  CHECK_THROWS(oim_forward(x, lut, queue, cfg, &unsorted));
  oim::SubsetSelection empty;
  CHECK_THROWS(oim_forward(x, lut, queue, cfg, &empty));
  oim::SubsetSelection out_of_range;
  out_of_range.labeled = {2};
  CHECK_THROWS(oim_forward(x, lut, queue, cfg, &out_of_range));
}
