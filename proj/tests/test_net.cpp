#include <cmath>
#include <vector>

#include "doctest.h"
#include "sblstm/net.hpp"
#include "sblstm/rng.hpp"

using namespace sblstm;

namespace {

NetConfig toy_cfg() {
  NetConfig c;
  c.input_dim = 7;
  c.hidden1 = 12;
  c.hidden2 = 9;
  c.output_dim = 2;
  c.tau = 2;
  return c;
}

Mat<float> random_input(int dim, int steps, std::uint64_t seed) {
  Rng rng(seed);
  Mat<float> x(dim, steps);
  for (Eigen::Index i = 0; i < x.size(); ++i)
    x.data()[i] = static_cast<float>(rng.uniform(-1.0, 1.0));
  return x;
}

}  // namespace

TEST_SUITE_BEGIN("net");

TEST_CASE("parameter count") {
  CHECK(count_parameters(NetConfig{}) == 1295874);  // the full-size network
  NetConfig unit;
  unit.input_dim = 1;
  unit.hidden1 = 1;
  unit.hidden2 = 1;
  unit.output_dim = 1;
  CHECK(count_parameters(unit) == 26);
  NetConfig tiny;
  tiny.input_dim = 5;
  tiny.hidden1 = 4;
  tiny.hidden2 = 3;
  CHECK(count_parameters(tiny) ==
        4 * (5 * 4 + 16 + 4) + 4 * (4 * 3 + 9 + 3) + (3 * 2 + 2));
}

TEST_CASE("zero-weight cell halves its state and gates the output") {
  // all gates sit at sigmoid(0) = 0.5, candidate tanh(0) = 0
  LstmLayerParams<double> l;
  l.w.setZero(4, 1);
  l.u.setZero(4, 1);
  l.b.setZero(4);
  Vec<double> c(1), h(1), x(1);
  c << 1.0;
  h << 0.0;
  x << 3.0;
  lstm_cell_step(l, c, h, x);
  CHECK(c(0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(h(0) == doctest::Approx(0.5 * std::tanh(0.5)).epsilon(1e-12));
  CHECK(h(0) == doctest::Approx(0.23105857863).epsilon(1e-9));
}

TEST_CASE("forget bias keeps memory when inputs vanish") {
  // single unit, inputs and weights zero, forget bias +1:
  // c' = sigmoid(1) * c each step
  LstmLayerParams<double> l;
  l.w.setZero(4, 1);
  l.u.setZero(4, 1);
  l.b.setZero(4);
  l.b(1) = 1.0;
  Vec<double> c(1), h(1), x = Vec<double>::Zero(1);
  c << 1.0;
  h << 0.0;
  lstm_cell_step(l, c, h, x);
  const double sig1 = 1.0 / (1.0 + std::exp(-1.0));
  CHECK(c(0) == doctest::Approx(sig1).epsilon(1e-12));
}

TEST_CASE("initialization is deterministic and respects its bounds") {
  const NetConfig cfg = toy_cfg();
  const auto a = init_net_params<float>(cfg, 42);
  const auto b = init_net_params<float>(cfg, 42);
  const auto c = init_net_params<float>(cfg, 43);

  CHECK(a.l1.w == b.l1.w);
  CHECK(a.l2.u == b.l2.u);
  CHECK(a.dense_w == b.dense_w);
  CHECK((a.l1.w.array() != c.l1.w.array()).any());

  const double bound1 = 1.0 / std::sqrt(static_cast<double>(cfg.hidden1));
  CHECK(a.l1.w.array().abs().maxCoeff() <= bound1);
  CHECK(a.l1.u.array().abs().maxCoeff() <= bound1);
  // biases: zero except the forget block at +1
  for (int i = 0; i < 4 * cfg.hidden1; ++i) {
    const bool forget = i >= cfg.hidden1 && i < 2 * cfg.hidden1;
    CHECK(a.l1.b(i) == (forget ? 1.0f : 0.0f));
  }
}

TEST_CASE("batched stepping equals per-column sequential inference") {
  const NetConfig cfg = toy_cfg();
  const auto p = init_net_params<float>(cfg, 7);
  const int batch = 17, steps = 25;

  std::vector<Mat<float>> inputs(steps);
  for (int t = 0; t < steps; ++t)
    inputs[t] = random_input(cfg.input_dim, batch, 100 + t);

  BatchState<float> bs(cfg, batch);
  StepWorkspace<float> ws;
  Mat<float> out;
  std::vector<Mat<float>> batched(steps);
  for (int t = 0; t < steps; ++t) {
    net_step_batch<float>(p, bs, inputs[t], out, ws);
    batched[t] = out;
  }

  for (int b = 0; b < batch; ++b) {
    Mat<float> seq(cfg.input_dim, steps);
    for (int t = 0; t < steps; ++t) seq.col(t) = inputs[t].col(b);
    const Mat<float> preds = forward_sequence<float>(p, seq);
    for (int t = 0; t < steps; ++t)
      for (int r = 0; r < cfg.output_dim; ++r)
        CHECK(std::abs(preds(r, t) - batched[t](r, b)) < 1e-6);
  }
}

TEST_CASE("column order does not change per-stream results") {
  // permuting the batch permutes the outputs, nothing else
  const NetConfig cfg = toy_cfg();
  const auto p = init_net_params<float>(cfg, 9);
  const int batch = 11;
  Mat<float> x = random_input(cfg.input_dim, batch, 55);
  Mat<float> xp(cfg.input_dim, batch);
  std::vector<int> perm(batch);
  for (int i = 0; i < batch; ++i) perm[i] = (i * 7 + 3) % batch;
  for (int i = 0; i < batch; ++i) xp.col(i) = x.col(perm[i]);

  BatchState<float> s1(cfg, batch), s2(cfg, batch);
  StepWorkspace<float> ws;
  Mat<float> o1, o2;
  for (int rep = 0; rep < 4; ++rep) {
    net_step_batch<float>(p, s1, x, o1, ws);
    net_step_batch<float>(p, s2, xp, o2, ws);
  }
  for (int i = 0; i < batch; ++i)
    for (int r = 0; r < cfg.output_dim; ++r)
      CHECK(std::abs(o2(r, i) - o1(r, perm[i])) < 1e-6);
}

TEST_CASE("state reset restores the initial response") {
  const NetConfig cfg = toy_cfg();
  const auto p = init_net_params<float>(cfg, 3);
  BatchState<float> s(cfg, 1);
  const Vec<float> x = random_input(cfg.input_dim, 1, 77).col(0);
  const Vec<float> first = stateful_step<float>(p, s, x);
  for (int i = 0; i < 5; ++i) stateful_step<float>(p, s, x);
  const Vec<float> drifted = stateful_step<float>(p, s, x);
  CHECK((first - drifted).norm() > 0.0);  // state actually evolves
  s.reset(cfg, 1);
  const Vec<float> again = stateful_step<float>(p, s, x);
  CHECK(first == again);
}

TEST_CASE("input dimension mismatches are rejected") {
  const NetConfig cfg = toy_cfg();
  const auto p = init_net_params<float>(cfg, 1);
  BatchState<float> s(cfg, 2);
  StepWorkspace<float> ws;
  Mat<float> out;
  Mat<float> bad = Mat<float>::Zero(cfg.input_dim + 1, 2);
  CHECK_THROWS_AS(net_step_batch<float>(p, s, bad, out, ws), std::invalid_argument);
  Mat<float> wrong_batch = Mat<float>::Zero(cfg.input_dim, 3);
  CHECK_THROWS_AS(net_step_batch<float>(p, s, wrong_batch, out, ws),
                  std::invalid_argument);
}

TEST_CASE("bidirectional reference with zero backward weights matches forward") {
  const NetConfig cfg = toy_cfg();
  const auto p = init_net_params<float>(cfg, 21);
  const BiNetParams<float> bi = widen_to_bidirectional<float>(p);
  const Mat<float> x = random_input(cfg.input_dim, 30, 500);
  const Mat<float> fwd = forward_sequence<float>(p, x);
  const Mat<float> both = forward_bidirectional<float>(bi, x);
  REQUIRE(both.cols() == fwd.cols());
  for (Eigen::Index t = 0; t < fwd.cols(); ++t)
    for (int r = 0; r < cfg.output_dim; ++r)
      CHECK(std::abs(both(r, t) - fwd(r, t)) < 1e-6);
}

TEST_CASE("bidirectional output reacts to future input") {
  const NetConfig cfg = toy_cfg();
  BiNetParams<float> bi;
  {
    // give the backward direction real weights
    const auto f = init_net_params<float>(cfg, 31);
    const auto g = init_net_params<float>(cfg, 32);
    bi = widen_to_bidirectional<float>(f);
    bi.bwd1 = g.l1;
    Rng rng(33);
    auto fill = [&](auto& m, double s) {
      for (Eigen::Index i = 0; i < m.size(); ++i)
        m.data()[i] = static_cast<float>(rng.uniform(-s, s));
    };
    fill(bi.bwd2.w, 0.2);
    bi.bwd2.u = g.l2.u;
    bi.bwd2.b = g.l2.b;
    Mat<float> right(cfg.output_dim, cfg.hidden2);
    fill(right, 0.3);
    bi.dense_w.rightCols(cfg.hidden2) = right;
  }
  Mat<float> x = random_input(cfg.input_dim, 20, 61);
  const Mat<float> base = forward_bidirectional<float>(bi, x);
  x(0, 19) += 1.0f;  // poke the last frame
  const Mat<float> poked = forward_bidirectional<float>(bi, x);
  // a causal stack could never see this at t = 0
  CHECK(std::abs(poked(0, 0) - base(0, 0)) > 0.0f);
}

TEST_SUITE_END();
