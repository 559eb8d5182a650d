#pragma once

#include <cstdint>
#include <vector>

#include "sblstm/features.hpp"
#include "sblstm/net.hpp"

namespace sblstm {

// Full-unroll backpropagation through time over fixed-length windows, with
// Adam updates. Templated so the gradient checker can run in double while
// production training runs in float.

// Gradients mirror the parameter layout exactly.
template <typename T>
using Gradients = NetParams<T>;

// Mean squared error over the unmasked steps of one sequence, both output
// components weighted equally. pred and target are out_dim x T.
template <typename T>
double mse_loss(const Mat<T>& pred, const Mat<T>& target,
                const std::vector<std::uint8_t>& loss_mask);

// Per-step activations recorded by the forward pass, reused across batches.
template <typename T>
struct BpttScratch {
  std::vector<Mat<T>> x;              // D x B per step
  std::vector<Mat<T>> y;              // out x B per step
  std::vector<Vec<T>> mask;           // B per step, 0/1
  std::vector<Mat<T>> gates1, gates2; // 4H x B, post-activation
  std::vector<Mat<T>> c1, tc1, h1;    // H1 x B
  std::vector<Mat<T>> c2, tc2, h2;    // H2 x B
  std::vector<Mat<T>> yhat;           // out x B
  Vec<T> sample_scale;                // 1 / (n_b * b_eff), 0 if fully masked
  Vec<double> n_unmasked;             // n_b
};

// Packs the indexed samples, runs forward and backward, overwrites grads
// (when non-null) and returns the batch loss: the mean over samples with at
// least one unmasked step of the per-sample masked MSE. Fully-masked
// samples carry zero weight.
template <typename T>
double bptt_gradients(const NetParams<T>& params, const SampleSet& data,
                      const std::vector<std::size_t>& batch_idx,
                      Gradients<T>* grads, BpttScratch<T>& scratch);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;  // added outside the square root
};

template <typename T>
struct AdamState {
  std::vector<Vec<T>> m, v;  // one flat moment pair per canonical tensor
  std::int64_t step = 0;
};

template <typename T>
void adam_step(NetParams<T>& params, const Gradients<T>& grads,
               AdamState<T>& state, const AdamConfig& cfg);

struct TrainConfig {
  int epochs = 8;
  int batch_size = 512;
  std::uint64_t shuffle_seed = 1;
  AdamConfig adam;
  bool verbose = false;
};

struct TrainLog {
  std::vector<double> epoch_loss;  // mean batch loss per epoch
  std::int64_t steps = 0;
};

// Adam over shuffled minibatches; a fresh shuffle per epoch is derived from
// shuffle_seed, so a seed pins the whole run. epochs == 0 leaves the
// parameters untouched. Throws on an empty sample set.
template <typename T>
TrainLog train(NetParams<T>& params, const SampleSet& data, const TrainConfig& tc);

// Central-difference check of bptt_gradients on a small random problem.
// Returns the max relative error over all parameters.
double gradient_check(const NetConfig& cfg, int seq_len, int batch,
                      std::uint64_t seed, double fd_eps = 1e-5);

}  // namespace sblstm
