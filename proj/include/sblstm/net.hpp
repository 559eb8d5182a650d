#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "sblstm/rng.hpp"

namespace sblstm {

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template <typename T>
using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;

// Two stacked unidirectional LSTM layers and a linear head. One set of
// weights serves every frequency band; at run time all bands advance in
// lockstep as columns of a batch, which turns the per-frame work into a
// handful of matrix products.

struct NetConfig {
  int input_dim = 31;
  int hidden1 = 384;
  int hidden2 = 256;
  int output_dim = 2;
  int tau = 2;  // output delay in frames the model was trained with

  void validate() const {
    if (input_dim < 1 || hidden1 < 1 || hidden2 < 1 || output_dim < 1)
      throw std::invalid_argument("net dimensions must be positive");
    if (tau < 0) throw std::invalid_argument("tau must be >= 0");
  }
};

std::int64_t count_parameters(const NetConfig& cfg);

// Gate rows are packed (input, forget, cell, output), each block H rows.
template <typename T>
struct LstmLayerParams {
  Mat<T> w;  // 4H x D
  Mat<T> u;  // 4H x H
  Vec<T> b;  // 4H

  int hidden() const { return static_cast<int>(u.cols()); }
};

template <typename T>
struct NetParams {
  NetConfig cfg;
  LstmLayerParams<T> l1, l2;
  Mat<T> dense_w;  // out x H2
  Vec<T> dense_b;  // out

  // Canonical tensor enumeration; the file format, the optimizer state and
  // the initializer all follow this order.
  template <typename Fn>
  void for_each_tensor(Fn&& fn) {
    fn("lstm1.w", l1.w);
    fn("lstm1.u", l1.u);
    fn("lstm1.b", l1.b);
    fn("lstm2.w", l2.w);
    fn("lstm2.u", l2.u);
    fn("lstm2.b", l2.b);
    fn("dense.w", dense_w);
    fn("dense.b", dense_b);
  }
  template <typename Fn>
  void for_each_tensor(Fn&& fn) const {
    fn("lstm1.w", l1.w);
    fn("lstm1.u", l1.u);
    fn("lstm1.b", l1.b);
    fn("lstm2.w", l2.w);
    fn("lstm2.u", l2.u);
    fn("lstm2.b", l2.b);
    fn("dense.w", dense_w);
    fn("dense.b", dense_b);
  }

  std::int64_t parameter_count() const { return count_parameters(cfg); }
};

namespace detail {

template <typename T>
void alloc_layer(LstmLayerParams<T>& l, int in_dim, int hidden) {
  l.w.setZero(4 * hidden, in_dim);
  l.u.setZero(4 * hidden, hidden);
  l.b.setZero(4 * hidden);
}

}  // namespace detail

template <typename T>
NetParams<T> zero_net_params(const NetConfig& cfg) {
  cfg.validate();
  NetParams<T> p;
  p.cfg = cfg;
  detail::alloc_layer(p.l1, cfg.input_dim, cfg.hidden1);
  detail::alloc_layer(p.l2, cfg.hidden1, cfg.hidden2);
  p.dense_w.setZero(cfg.output_dim, cfg.hidden2);
  p.dense_b.setZero(cfg.output_dim);
  return p;
}

// Uniform(-1/sqrt(H), 1/sqrt(H)) per layer, biases zero except the forget
// gate block which starts at +1. Tensors are filled in canonical order,
// each in storage (column-major) order, from a single generator, so a seed
// pins every weight.
template <typename T>
NetParams<T> init_net_params(const NetConfig& cfg, std::uint64_t seed) {
  NetParams<T> p = zero_net_params<T>(cfg);
  Rng rng(seed);
  p.for_each_tensor([&](const char* name, auto& tensor) {
    const std::string n(name);
    if (n == "lstm1.b" || n == "lstm2.b" || n == "dense.b") return;
    double bound;
    if (n.rfind("lstm1", 0) == 0)
      bound = 1.0 / std::sqrt(static_cast<double>(cfg.hidden1));
    else if (n.rfind("lstm2", 0) == 0)
      bound = 1.0 / std::sqrt(static_cast<double>(cfg.hidden2));
    else
      bound = 1.0 / std::sqrt(static_cast<double>(cfg.hidden2));
    T* d = tensor.data();
    for (Eigen::Index i = 0; i < tensor.size(); ++i)
      d[i] = static_cast<T>(rng.uniform(-bound, bound));
  });
  p.l1.b.segment(cfg.hidden1, cfg.hidden1).setConstant(static_cast<T>(1));
  p.l2.b.segment(cfg.hidden2, cfg.hidden2).setConstant(static_cast<T>(1));
  return p;
}

template <typename To, typename From>
NetParams<To> cast_net_params(const NetParams<From>& in) {
  NetParams<To> out = zero_net_params<To>(in.cfg);
  out.l1.w = in.l1.w.template cast<To>();
  out.l1.u = in.l1.u.template cast<To>();
  out.l1.b = in.l1.b.template cast<To>();
  out.l2.w = in.l2.w.template cast<To>();
  out.l2.u = in.l2.u.template cast<To>();
  out.l2.b = in.l2.b.template cast<To>();
  out.dense_w = in.dense_w.template cast<To>();
  out.dense_b = in.dense_b.template cast<To>();
  return out;
}

// Recurrent state for a batch of B independent streams (one per frequency).
template <typename T>
struct BatchState {
  Mat<T> c1, h1, c2, h2;

  BatchState() = default;
  BatchState(const NetConfig& cfg, int batch) { reset(cfg, batch); }

  void reset(const NetConfig& cfg, int batch) {
    c1.setZero(cfg.hidden1, batch);
    h1.setZero(cfg.hidden1, batch);
    c2.setZero(cfg.hidden2, batch);
    h2.setZero(cfg.hidden2, batch);
  }
  int batch() const { return static_cast<int>(c1.cols()); }
};

// Reusable scratch so the streaming path does not allocate per frame.
template <typename T>
struct StepWorkspace {
  Mat<T> z1, z2;
};

namespace detail {

template <typename T>
void lstm_layer_step(const LstmLayerParams<T>& l, const Eigen::Ref<const Mat<T>>& x,
                     Mat<T>& c, Mat<T>& h, Mat<T>& z) {
  const int hdim = l.hidden();
  z.noalias() = l.w * x;
  z.noalias() += l.u * h;
  z.colwise() += l.b;
  auto gi = z.topRows(hdim).array();
  auto gf = z.middleRows(hdim, hdim).array();
  auto gg = z.middleRows(2 * hdim, hdim).array();
  auto go = z.bottomRows(hdim).array();
  gi = ((T(1)) / ((T(1)) + (-gi).exp()));
  gf = ((T(1)) / ((T(1)) + (-gf).exp()));
  gg = gg.tanh();
  go = ((T(1)) / ((T(1)) + (-go).exp()));
  c.array() = gf * c.array() + gi * gg;
  h.array() = go * c.array().tanh();
}

}  // namespace detail

// Advance every column one frame. x is D x B, out is resized to out_dim x B.
template <typename T>
void net_step_batch(const NetParams<T>& p, BatchState<T>& s,
                    const Eigen::Ref<const Mat<T>>& x, Mat<T>& out,
                    StepWorkspace<T>& ws) {
  if (x.rows() != p.cfg.input_dim)
    throw std::invalid_argument("input dim mismatch: expected " +
                                std::to_string(p.cfg.input_dim) + ", got " +
                                std::to_string(x.rows()));
  if (x.cols() != s.batch()) throw std::invalid_argument("batch size mismatch");
  detail::lstm_layer_step<T>(p.l1, x, s.c1, s.h1, ws.z1);
  detail::lstm_layer_step<T>(p.l2, s.h1, s.c2, s.h2, ws.z2);
  out.noalias() = p.dense_w * s.h2;
  out.colwise() += p.dense_b;
}

// Single-vector convenience wrappers (batch of one).

template <typename T>
void lstm_cell_step(const LstmLayerParams<T>& l, Vec<T>& c, Vec<T>& h,
                    const Vec<T>& x) {
  Mat<T> cm = c, hm = h, z;
  detail::lstm_layer_step<T>(l, Mat<T>(x), cm, hm, z);
  c = cm.col(0);
  h = hm.col(0);
}

template <typename T>
Vec<T> stateful_step(const NetParams<T>& p, BatchState<T>& s, const Vec<T>& x) {
  Mat<T> out;
  StepWorkspace<T> ws;
  net_step_batch<T>(p, s, Mat<T>(x), out, ws);
  return out.col(0);
}

// Run one sequence from a fresh state. x is D x T; returns out_dim x T.
template <typename T>
Mat<T> forward_sequence(const NetParams<T>& p, const Mat<T>& x) {
  BatchState<T> s(p.cfg, 1);
  StepWorkspace<T> ws;
  Mat<T> out(p.cfg.output_dim, x.cols());
  Mat<T> step_out;
  for (Eigen::Index t = 0; t < x.cols(); ++t) {
    net_step_batch<T>(p, s, x.col(t), step_out, ws);
    out.col(t) = step_out.col(0);
  }
  return out;
}

// Offline bidirectional variant, used as a no-look-ahead-limit reference.
// Each level runs one pass forward and one over the reversed sequence and
// concatenates the two hidden streams.
template <typename T>
struct BiNetParams {
  NetConfig cfg;  // hidden sizes are per direction
  LstmLayerParams<T> fwd1, bwd1, fwd2, bwd2;
  Mat<T> dense_w;  // out x 2*H2
  Vec<T> dense_b;
};

template <typename T>
BiNetParams<T> zero_bi_net_params(const NetConfig& cfg) {
  cfg.validate();
  BiNetParams<T> p;
  p.cfg = cfg;
  detail::alloc_layer(p.fwd1, cfg.input_dim, cfg.hidden1);
  detail::alloc_layer(p.bwd1, cfg.input_dim, cfg.hidden1);
  detail::alloc_layer(p.fwd2, 2 * cfg.hidden1, cfg.hidden2);
  detail::alloc_layer(p.bwd2, 2 * cfg.hidden1, cfg.hidden2);
  p.dense_w.setZero(cfg.output_dim, 2 * cfg.hidden2);
  p.dense_b.setZero(cfg.output_dim);
  return p;
}

// Embed a forward-only model: backward weights stay zero, so the reference
// must reproduce the forward model exactly (up to rounding).
template <typename T>
BiNetParams<T> widen_to_bidirectional(const NetParams<T>& p) {
  BiNetParams<T> b = zero_bi_net_params<T>(p.cfg);
  b.fwd1 = p.l1;
  b.fwd2.w.leftCols(p.cfg.hidden1) = p.l2.w;
  b.fwd2.u = p.l2.u;
  b.fwd2.b = p.l2.b;
  b.dense_w.leftCols(p.cfg.hidden2) = p.dense_w;
  b.dense_b = p.dense_b;
  return b;
}

namespace detail {

template <typename T>
Mat<T> run_direction(const LstmLayerParams<T>& l, const Mat<T>& x, bool reverse) {
  const int hdim = l.hidden();
  const Eigen::Index steps = x.cols();
  Mat<T> c = Mat<T>::Zero(hdim, 1), h = Mat<T>::Zero(hdim, 1), z;
  Mat<T> out(hdim, steps);
  for (Eigen::Index i = 0; i < steps; ++i) {
    const Eigen::Index t = reverse ? steps - 1 - i : i;
    lstm_layer_step<T>(l, x.col(t), c, h, z);
    out.col(t) = h;
  }
  return out;
}

}  // namespace detail

template <typename T>
Mat<T> forward_bidirectional(const BiNetParams<T>& p, const Mat<T>& x) {
  if (x.rows() != p.cfg.input_dim)
    throw std::invalid_argument("input dim mismatch in bidirectional forward");
  Mat<T> h1(2 * p.cfg.hidden1, x.cols());
  h1.topRows(p.cfg.hidden1) = detail::run_direction(p.fwd1, x, false);
  h1.bottomRows(p.cfg.hidden1) = detail::run_direction(p.bwd1, x, true);
  Mat<T> h2(2 * p.cfg.hidden2, x.cols());
  h2.topRows(p.cfg.hidden2) = detail::run_direction(p.fwd2, h1, false);
  h2.bottomRows(p.cfg.hidden2) = detail::run_direction(p.bwd2, h1, true);
  Mat<T> out = p.dense_w * h2;
  out.colwise() += p.dense_b;
  return out;
}

}  // namespace sblstm
