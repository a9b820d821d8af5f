#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <vector>

#include <Eigen/Core>

#include "lfsep/errors.hpp"

namespace lfsep {

/// Layer sizes of the 3-conv + 2-FC classifier.
struct NetArch {
  int in_channels = 0;
  int patch = 10;  // input spatial size in units
  int c1 = 128;
  int c2 = 256;
  int c3 = 384;
  int hidden = 512;  // fc1 width
  int labels = 45;

  void validate() const;
  /// Spatial size after the conv stack: patch - 6.
  [[nodiscard]] int feature_size() const { return patch - 6; }
  [[nodiscard]] int fc1_inputs() const { return feature_size() * feature_size() * c3; }
  [[nodiscard]] std::array<int, 4> conv_channels() const { return {in_channels, c1, c2, c3}; }

  friend bool operator==(const NetArch&, const NetArch&) = default;
};

/// Row-major so that a channel of an activation tensor is one contiguous row.
template <class S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class S>
using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;

/// Activation layout: channels x (sample, row, col), i.e. each row is one channel
/// and each column one spatial position of one sample.
template <class S>
struct Tensor4 {
  int n = 0;
  int height = 0;
  int width = 0;
  Mat<S> data;  // channels x (n * height * width)

  [[nodiscard]] int channels() const { return static_cast<int>(data.rows()); }
};

/// Classifier weights. Conv layers carry no bias (batch norm supplies the shift).
template <class S>
struct NetParams {
  NetArch arch;
  std::array<Mat<S>, 3> conv_w;  // c_out x (c_in * 9), taps ordered (c_in, ky, kx)
  std::array<Vec<S>, 3> bn_gamma;
  std::array<Vec<S>, 3> bn_beta;
  std::array<Vec<S>, 3> bn_mean;  // running statistics used in eval mode
  std::array<Vec<S>, 3> bn_var;
  Mat<S> fc1_w;  // hidden x fc1_inputs, inputs ordered (channel, row, col)
  Vec<S> fc1_b;
  Mat<S> fc2_w;  // labels x hidden
  Vec<S> fc2_b;
  /// Global input normalization x' = (x - input_shift) * input_scale.
  S input_shift = 0;
  S input_scale = 1;
};

/// He-normal weights, unit BN scale, zero shifts. Deterministic in `seed`.
template <class S>
NetParams<S> init_params(const NetArch& arch, std::uint64_t seed);

/// Same shapes as `arch`, all zeros (used for gradient accumulators).
template <class S>
NetParams<S> zero_params(const NetArch& arch);

template <class To, class From>
NetParams<To> cast_params(const NetParams<From>& p);

enum class NetMode { train, eval };

/// Multiply-accumulate counts, split by layer type.
struct MacCounter {
  std::uint64_t conv = 0;
  std::uint64_t fc = 0;
};

/// Activations kept by a training-mode forward pass for backprop.
template <class S>
struct ForwardCache {
  Tensor4<S> input;
  std::array<Mat<S>, 3> cols;     // im2col of each conv input
  std::array<Mat<S>, 3> xhat;     // normalized pre-activations
  std::array<Vec<S>, 3> inv_std;  // per channel
  std::array<Vec<S>, 3> batch_mean;
  std::array<Vec<S>, 3> batch_var;
  std::array<Mat<S>, 3> post;     // post-ReLU conv outputs
  std::array<int, 3> out_size{};  // spatial size after each conv
  Mat<S> features;                // fc1_inputs x n
  Mat<S> hidden;                  // post-ReLU fc1 output
};

inline constexpr double kBatchNormEpsilon = 1e-5;

/// Conv stack: 3 x (valid 3x3 conv, BN, ReLU). Output spatial size is input - 6.
/// Eval mode reads BN running statistics and never modifies `p`.
template <class S>
Tensor4<S> conv_stack(const NetParams<S>& p, const Tensor4<S>& x, NetMode mode, ForwardCache<S>* cache = nullptr,
                      MacCounter* macs = nullptr);

/// fc1 -> ReLU -> fc2 on a fc1_inputs x n feature matrix; returns labels x n logits.
template <class S>
Mat<S> fc_head(const NetParams<S>& p, const Mat<S>& features, ForwardCache<S>* cache = nullptr,
               MacCounter* macs = nullptr);

/// Full forward pass on patch-sized inputs; returns labels x n logits.
template <class S>
Mat<S> net_forward(const NetParams<S>& p, const Tensor4<S>& x, NetMode mode, ForwardCache<S>* cache = nullptr,
                   MacCounter* macs = nullptr);

/// Column-wise softmax.
template <class S>
Mat<S> softmax(const Mat<S>& logits);

/// Mean softmax cross-entropy; `grad` receives d loss / d logits when non-null.
template <class S>
double cross_entropy(const Mat<S>& logits, const std::vector<int>& labels, Mat<S>* grad = nullptr);

/// Gradients of the mean cross-entropy of a training-mode pass. BN running
/// statistics in the result are unused (zero).
template <class S>
NetParams<S> net_backward(const NetParams<S>& p, const ForwardCache<S>& cache, const Mat<S>& dlogits);

struct TrainConfig {
  int batch = 256;
  double base_lr = 0.01;
  int step = 50000;  // lr *= 0.1 every `step` iterations
  int max_iters = 5000;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  double bn_momentum = 0.1;  // weight of the batch statistics in the running average
  std::uint64_t seed = 1;

  void validate() const;
};

struct TrainLogEntry {
  int iteration = 0;
  double loss = 0.0;
  double lr = 0.0;
};

using TrainLog = std::function<void(const TrainLogEntry&)>;

/// Patch samples for training: inputs are stored as float, channel-last per unit.
struct PatchSet {
  int patch = 0;
  int channels = 0;
  std::vector<float> data;  // sample-major, then (row, col, channel)
  std::vector<int> labels;

  [[nodiscard]] int size() const { return static_cast<int>(labels.size()); }
  [[nodiscard]] std::size_t sample_stride() const {
    return static_cast<std::size_t>(patch) * static_cast<std::size_t>(patch) * static_cast<std::size_t>(channels);
  }
};

/// Packs the listed samples into a network input tensor.
template <class S>
Tensor4<S> gather_batch(const PatchSet& set, const std::vector<int>& indices);

struct TrainResult {
  NetParams<float> params;
  std::vector<double> loss_trace;
};

/// SGD with momentum on softmax cross-entropy, step learning-rate policy.
/// `init` seeds the weights (He init from the config seed otherwise).
/// Throws TrainingDiverged on a non-finite loss.
TrainResult net_train(const PatchSet& data, const NetArch& arch, const TrainConfig& cfg, const TrainLog& log = {},
                      const NetParams<float>* init = nullptr);

/// Eval-mode argmax predictions, evaluated in chunks of `chunk` samples.
template <class S>
std::vector<int> predict(const NetParams<S>& p, const PatchSet& set, int chunk = 256);

/// Fraction of samples whose prediction equals the label.
double accuracy(const std::vector<int>& predicted, const std::vector<int>& labels);

}  // namespace lfsep
