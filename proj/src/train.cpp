#include "sblstm/train.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>

#include "sblstm/rng.hpp"

namespace sblstm {

namespace {

template <typename T>
void pack_batch(const SampleSet& data, const std::vector<std::size_t>& idx,
                int out_dim, BpttScratch<T>& s) {
  const int T_len = data.seq_len;
  const int dim = data.input_dim();
  const int batch = static_cast<int>(idx.size());

  s.x.resize(T_len);
  s.y.resize(T_len);
  s.mask.resize(T_len);
  for (int t = 0; t < T_len; ++t) {
    s.x[t].resize(dim, batch);
    s.y[t].resize(out_dim, batch);
    s.mask[t].resize(batch);
  }
  s.sample_scale.resize(batch);
  s.n_unmasked.resize(batch);

  for (int b = 0; b < batch; ++b) {
    const std::size_t i = idx[b];
    if (i >= data.size()) throw std::invalid_argument("batch index out of range");
    const float* in = &data.inputs[i * T_len * dim];
    const float* tg = &data.targets[i * T_len * 2];
    const std::uint8_t* mk = &data.loss_masks[i * T_len];
    double n_b = 0.0;
    for (int t = 0; t < T_len; ++t) {
      for (int d = 0; d < dim; ++d)
        s.x[t](d, b) = static_cast<T>(in[t * dim + d]);
      s.y[t](0, b) = static_cast<T>(tg[t * 2]);
      s.y[t](1, b) = static_cast<T>(tg[t * 2 + 1]);
      s.mask[t](b) = static_cast<T>(mk[t] ? 1 : 0);
      n_b += mk[t] ? 1.0 : 0.0;
    }
    s.n_unmasked(b) = n_b;
  }
}

template <typename T>
void forward_store(const NetParams<T>& p, BpttScratch<T>& s, int T_len, int batch) {
  const int h1d = p.cfg.hidden1, h2d = p.cfg.hidden2;
  s.gates1.resize(T_len);
  s.gates2.resize(T_len);
  s.c1.resize(T_len);
  s.tc1.resize(T_len);
  s.h1.resize(T_len);
  s.c2.resize(T_len);
  s.tc2.resize(T_len);
  s.h2.resize(T_len);
  s.yhat.resize(T_len);

  Mat<T> c1 = Mat<T>::Zero(h1d, batch), h1 = Mat<T>::Zero(h1d, batch);
  Mat<T> c2 = Mat<T>::Zero(h2d, batch), h2 = Mat<T>::Zero(h2d, batch);

  auto layer = [batch](const LstmLayerParams<T>& l, const Mat<T>& x, Mat<T>& c,
                       Mat<T>& h, Mat<T>& gates, Mat<T>& c_out, Mat<T>& tc_out,
                       Mat<T>& h_out) {
    const int hd = l.hidden();
    gates.resize(4 * hd, batch);
    gates.noalias() = l.w * x;
    gates.noalias() += l.u * h;
    gates.colwise() += l.b;
    auto gi = gates.topRows(hd).array();
    auto gf = gates.middleRows(hd, hd).array();
    auto gg = gates.middleRows(2 * hd, hd).array();
    auto go = gates.bottomRows(hd).array();
    gi = T(1) / (T(1) + (-gi).exp());
    gf = T(1) / (T(1) + (-gf).exp());
    gg = gg.tanh();
    go = T(1) / (T(1) + (-go).exp());
    c_out.array() = gf * c.array() + gi * gg;
    tc_out = c_out.array().tanh().matrix();
    h_out.array() = go * tc_out.array();
    c = c_out;
    h = h_out;
  };

  for (int t = 0; t < T_len; ++t) {
    s.c1[t].resize(h1d, batch);
    s.tc1[t].resize(h1d, batch);
    s.h1[t].resize(h1d, batch);
    s.c2[t].resize(h2d, batch);
    s.tc2[t].resize(h2d, batch);
    s.h2[t].resize(h2d, batch);
    layer(p.l1, s.x[t], c1, h1, s.gates1[t], s.c1[t], s.tc1[t], s.h1[t]);
    layer(p.l2, s.h1[t], c2, h2, s.gates2[t], s.c2[t], s.tc2[t], s.h2[t]);
    s.yhat[t].noalias() = p.dense_w * s.h2[t];
    s.yhat[t].colwise() += p.dense_b;
  }
}

}  // namespace

template <typename T>
double mse_loss(const Mat<T>& pred, const Mat<T>& target,
                const std::vector<std::uint8_t>& loss_mask) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols())
    throw std::invalid_argument("mse_loss: shape mismatch");
  if (loss_mask.size() != static_cast<std::size_t>(pred.cols()))
    throw std::invalid_argument("mse_loss: mask length mismatch");
  double acc = 0.0;
  std::int64_t n = 0;
  for (Eigen::Index t = 0; t < pred.cols(); ++t) {
    if (!loss_mask[t]) continue;
    for (Eigen::Index r = 0; r < pred.rows(); ++r) {
      const double d = static_cast<double>(pred(r, t)) - static_cast<double>(target(r, t));
      acc += d * d;
    }
    n += pred.rows();
  }
  return n == 0 ? 0.0 : acc / static_cast<double>(n);
}

template <typename T>
double bptt_gradients(const NetParams<T>& params, const SampleSet& data,
                      const std::vector<std::size_t>& batch_idx,
                      Gradients<T>* grads, BpttScratch<T>& s) {
  if (batch_idx.empty()) throw std::invalid_argument("empty batch");
  if (data.input_dim() != params.cfg.input_dim)
    throw std::invalid_argument("sample dim does not match net input dim");
  if (params.cfg.output_dim != 2)
    throw std::invalid_argument("shards carry two target components per step");

  const int T_len = data.seq_len;
  const int batch = static_cast<int>(batch_idx.size());
  const int out_dim = params.cfg.output_dim;
  const int h1d = params.cfg.hidden1, h2d = params.cfg.hidden2;

  pack_batch<T>(data, batch_idx, out_dim, s);

  int b_eff = 0;
  for (int b = 0; b < batch; ++b)
    if (s.n_unmasked(b) > 0) ++b_eff;
  for (int b = 0; b < batch; ++b)
    s.sample_scale(b) =
        s.n_unmasked(b) > 0
            ? static_cast<T>(1.0 / (s.n_unmasked(b) * static_cast<double>(b_eff)))
            : T(0);

  forward_store<T>(params, s, T_len, batch);

  // loss: mean over contributing samples of the per-sample masked MSE
  double loss = 0.0;
  if (b_eff > 0) {
    Vec<double> acc = Vec<double>::Zero(batch);
    for (int t = 0; t < T_len; ++t) {
      for (int b = 0; b < batch; ++b) {
        if (s.mask[t](b) == T(0)) continue;
        for (int r = 0; r < out_dim; ++r) {
          const double d =
              static_cast<double>(s.yhat[t](r, b)) - static_cast<double>(s.y[t](r, b));
          acc(b) += d * d;
        }
      }
    }
    for (int b = 0; b < batch; ++b)
      if (s.n_unmasked(b) > 0) loss += acc(b) / (2.0 * s.n_unmasked(b));
    loss /= b_eff;
  }

  if (!grads) return loss;

  *grads = zero_net_params<T>(params.cfg);

  Mat<T> dh1_acc = Mat<T>::Zero(h1d, batch), dc1_acc = Mat<T>::Zero(h1d, batch);
  Mat<T> dh2_acc = Mat<T>::Zero(h2d, batch), dc2_acc = Mat<T>::Zero(h2d, batch);
  Mat<T> dy(out_dim, batch), dh(h2d, batch), din(h1d, batch);
  Mat<T> dz1(4 * h1d, batch), dz2(4 * h2d, batch);

  auto layer_back = [](const LstmLayerParams<T>& l, LstmLayerParams<T>& g,
                       const Mat<T>& gates, const Mat<T>& tc_out,
                       const Mat<T>* c_prev, const Mat<T>* h_prev,
                       const Mat<T>& input, Mat<T>& dh_in, Mat<T>& dc_acc,
                       Mat<T>& dh_acc, Mat<T>& dz, Mat<T>* dinput) {
    const int hd = l.hidden();
    auto gi = gates.topRows(hd).array();
    auto gf = gates.middleRows(hd, hd).array();
    auto gg = gates.middleRows(2 * hd, hd).array();
    auto go = gates.bottomRows(hd).array();

    // dh_in already includes the recurrent term
    auto dc = (dc_acc.array() + dh_in.array() * go * (T(1) - tc_out.array().square()))
                  .eval();
    dz.bottomRows(hd).array() = dh_in.array() * tc_out.array() * go * (T(1) - go);
    dz.topRows(hd).array() = dc * gg * gi * (T(1) - gi);
    dz.middleRows(2 * hd, hd).array() = dc * gi * (T(1) - gg.square());
    if (c_prev)
      dz.middleRows(hd, hd).array() = dc * c_prev->array() * gf * (T(1) - gf);
    else
      dz.middleRows(hd, hd).setZero();  // c_prev is zero at t = 0
    dc_acc.array() = dc * gf;

    g.w.noalias() += dz * input.transpose();
    if (h_prev) g.u.noalias() += dz * h_prev->transpose();
    g.b.noalias() += dz.rowwise().sum();
    dh_acc.noalias() = l.u.transpose() * dz;
    if (dinput) dinput->noalias() = l.w.transpose() * dz;
  };

  for (int t = T_len - 1; t >= 0; --t) {
    // dense head
    dy = s.yhat[t] - s.y[t];
    for (int b = 0; b < batch; ++b) dy.col(b) *= s.mask[t](b) * s.sample_scale(b);
    grads->dense_w.noalias() += dy * s.h2[t].transpose();
    grads->dense_b.noalias() += dy.rowwise().sum();

    dh.noalias() = params.dense_w.transpose() * dy;
    dh += dh2_acc;
    layer_back(params.l2, grads->l2, s.gates2[t], s.tc2[t],
               t > 0 ? &s.c2[t - 1] : nullptr, t > 0 ? &s.h2[t - 1] : nullptr,
               s.h1[t], dh, dc2_acc, dh2_acc, dz2, &din);

    din += dh1_acc;
    layer_back(params.l1, grads->l1, s.gates1[t], s.tc1[t],
               t > 0 ? &s.c1[t - 1] : nullptr, t > 0 ? &s.h1[t - 1] : nullptr,
               s.x[t], din, dc1_acc, dh1_acc, dz1, nullptr);
  }
  return loss;
}

template <typename T>
void adam_step(NetParams<T>& params, const Gradients<T>& grads,
               AdamState<T>& state, const AdamConfig& cfg) {
  struct Slot {
    T* p;
    const T* g;
    Eigen::Index n;
  };
  std::vector<Slot> slots;
  std::vector<std::pair<const T*, Eigen::Index>> gptrs;
  grads.for_each_tensor(
      [&](const char*, const auto& t) { gptrs.push_back({t.data(), t.size()}); });
  std::size_t i = 0;
  params.for_each_tensor([&](const char*, auto& t) {
    if (gptrs[i].second != t.size())
      throw std::invalid_argument("gradient shape does not match parameters");
    slots.push_back({t.data(), gptrs[i].first, t.size()});
    ++i;
  });

  if (state.m.empty()) {
    state.m.resize(slots.size());
    state.v.resize(slots.size());
    for (std::size_t j = 0; j < slots.size(); ++j) {
      state.m[j] = Vec<T>::Zero(slots[j].n);
      state.v[j] = Vec<T>::Zero(slots[j].n);
    }
  }

  state.step += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  const T b1 = static_cast<T>(cfg.beta1), b2 = static_cast<T>(cfg.beta2);
  const T ib1 = static_cast<T>(1.0 - cfg.beta1), ib2 = static_cast<T>(1.0 - cfg.beta2);
  const T inv_bc1 = static_cast<T>(1.0 / bc1), inv_bc2 = static_cast<T>(1.0 / bc2);
  const T lr = static_cast<T>(cfg.lr), eps = static_cast<T>(cfg.eps);

  for (std::size_t j = 0; j < slots.size(); ++j) {
    Eigen::Map<Vec<T>> p(slots[j].p, slots[j].n);
    Eigen::Map<const Vec<T>> g(slots[j].g, slots[j].n);
    auto& m = state.m[j];
    auto& v = state.v[j];
    m.array() = b1 * m.array() + ib1 * g.array();
    v.array() = b2 * v.array() + ib2 * g.array().square();
    p.array() -=
        lr * (m.array() * inv_bc1) / ((v.array() * inv_bc2).sqrt() + eps);
  }
}

template <typename T>
TrainLog train(NetParams<T>& params, const SampleSet& data, const TrainConfig& tc) {
  if (data.size() == 0) throw std::invalid_argument("cannot train on an empty sample set");
  if (tc.batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (tc.epochs < 0) throw std::invalid_argument("epochs must be >= 0");

  TrainLog log;
  AdamState<T> opt;
  Gradients<T> grads = zero_net_params<T>(params.cfg);
  BpttScratch<T> scratch;

  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (int e = 0; e < tc.epochs; ++e) {
    Rng rng(derive_seed(tc.shuffle_seed, static_cast<std::uint64_t>(e)));
    rng.shuffle(order);
    double loss_sum = 0.0;
    int n_batches = 0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(tc.batch_size)) {
      const std::size_t end =
          std::min(order.size(), start + static_cast<std::size_t>(tc.batch_size));
      std::vector<std::size_t> idx(order.begin() + start, order.begin() + end);
      const double loss = bptt_gradients<T>(params, data, idx, &grads, scratch);
      adam_step<T>(params, grads, opt, tc.adam);
      loss_sum += loss;
      ++n_batches;
      ++log.steps;
    }
    log.epoch_loss.push_back(n_batches > 0 ? loss_sum / n_batches : 0.0);
    if (tc.verbose)
      std::fprintf(stderr, "epoch %d/%d  loss %.6f\n", e + 1, tc.epochs,
                   log.epoch_loss.back());
  }
  return log;
}

double gradient_check(const NetConfig& cfg, int seq_len, int batch,
                      std::uint64_t seed, double fd_eps) {
  cfg.validate();
  NetParams<double> params = init_net_params<double>(cfg, seed);

  // random dataset with the first tau steps masked out
  SampleSet data;
  data.bins = 1;
  data.neighbors = (cfg.input_dim - 1) / 2;
  data.seq_len = seq_len;
  data.tau = cfg.tau;
  Rng rng(derive_seed(seed, 0xda7a));
  const int dim = cfg.input_dim;
  if (data.input_dim() != dim)
    throw std::invalid_argument("gradient_check needs an odd input_dim");
  for (int i = 0; i < batch; ++i) {
    TrainingSample smp;
    smp.freq = 0;
    smp.input.resize(static_cast<std::size_t>(seq_len) * dim);
    smp.target.resize(static_cast<std::size_t>(seq_len) * 2);
    smp.loss_mask.resize(seq_len);
    for (auto& v : smp.input) v = static_cast<float>(rng.uniform(-1.0, 1.0));
    for (auto& v : smp.target) v = static_cast<float>(rng.uniform(-2.0, 2.0));
    for (int t = 0; t < seq_len; ++t) smp.loss_mask[t] = t >= cfg.tau ? 1 : 0;
    data.append(smp);
  }

  std::vector<std::size_t> idx(batch);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  BpttScratch<double> scratch;
  Gradients<double> grads = zero_net_params<double>(cfg);
  bptt_gradients<double>(params, data, idx, &grads, scratch);

  double max_rel = 0.0;
  std::vector<std::pair<const double*, Eigen::Index>> gptrs;
  grads.for_each_tensor(
      [&](const char*, const auto& t) { gptrs.push_back({t.data(), t.size()}); });
  std::size_t ti = 0;
  params.for_each_tensor([&](const char*, auto& tensor) {
    double* d = tensor.data();
    const double* ga = gptrs[ti].first;
    for (Eigen::Index i = 0; i < tensor.size(); ++i) {
      const double keep = d[i];
      d[i] = keep + fd_eps;
      const double lp = bptt_gradients<double>(params, data, idx, nullptr, scratch);
      d[i] = keep - fd_eps;
      const double lm = bptt_gradients<double>(params, data, idx, nullptr, scratch);
      d[i] = keep;
      const double gn = (lp - lm) / (2.0 * fd_eps);
      const double denom = std::max({std::abs(gn), std::abs(ga[i]), 1e-8});
      max_rel = std::max(max_rel, std::abs(gn - ga[i]) / denom);
    }
    ++ti;
  });
  return max_rel;
}

template double mse_loss<float>(const Mat<float>&, const Mat<float>&,
                                const std::vector<std::uint8_t>&);
template double mse_loss<double>(const Mat<double>&, const Mat<double>&,
                                 const std::vector<std::uint8_t>&);
template double bptt_gradients<float>(const NetParams<float>&, const SampleSet&,
                                      const std::vector<std::size_t>&,
                                      Gradients<float>*, BpttScratch<float>&);
template double bptt_gradients<double>(const NetParams<double>&, const SampleSet&,
                                       const std::vector<std::size_t>&,
                                       Gradients<double>*, BpttScratch<double>&);
template void adam_step<float>(NetParams<float>&, const Gradients<float>&,
                               AdamState<float>&, const AdamConfig&);
template void adam_step<double>(NetParams<double>&, const Gradients<double>&,
                                AdamState<double>&, const AdamConfig&);
template TrainLog train<float>(NetParams<float>&, const SampleSet&, const TrainConfig&);
template TrainLog train<double>(NetParams<double>&, const SampleSet&,
                                const TrainConfig&);

}  // namespace sblstm
