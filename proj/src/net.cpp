#include "lfsep/net.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

namespace lfsep {

void NetArch::validate() const {
  if (in_channels < 1 || c1 < 1 || c2 < 1 || c3 < 1 || hidden < 1 || labels < 2) {
    throw InvalidArgument("NetArch: layer sizes must be positive (labels >= 2)");
  }
  if (patch < 7) throw InvalidArgument("NetArch: patch must be at least 7 units");
}

void TrainConfig::validate() const {
  if (batch < 1 || max_iters < 1 || step < 1) throw InvalidArgument("TrainConfig: batch, step, max_iters must be >= 1");
  if (!(base_lr > 0.0) || momentum < 0.0 || momentum >= 1.0 || weight_decay < 0.0) {
    throw InvalidArgument("TrainConfig: bad learning-rate settings");
  }
  if (!(bn_momentum > 0.0) || bn_momentum > 1.0) throw InvalidArgument("TrainConfig: bn_momentum must be in (0, 1]");
}

namespace {

template <class S>
Mat<S> im2col(const Mat<S>& x, int n, int h, int w) {
  const int ho = h - 2;
  const int wo = w - 2;
  const Eigen::Index cin = x.rows();
  Mat<S> cols(cin * 9, static_cast<Eigen::Index>(n) * ho * wo);
  for (Eigen::Index c = 0; c < cin; ++c) {
    const S* src = x.row(c).data();
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        S* dst = cols.row(c * 9 + ky * 3 + kx).data();
        for (int s = 0; s < n; ++s) {
          for (int y = 0; y < ho; ++y) {
            const S* in = src + (static_cast<std::ptrdiff_t>(s) * h + y + ky) * w + kx;
            S* out = dst + (static_cast<std::ptrdiff_t>(s) * ho + y) * wo;
            std::copy(in, in + wo, out);
          }
        }
      }
    }
  }
  return cols;
}

template <class S>
Mat<S> col2im(const Mat<S>& cols, Eigen::Index cin, int n, int h, int w) {
  const int ho = h - 2;
  const int wo = w - 2;
  Mat<S> x = Mat<S>::Zero(cin, static_cast<Eigen::Index>(n) * h * w);
  for (Eigen::Index c = 0; c < cin; ++c) {
    S* dst = x.row(c).data();
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        const S* src = cols.row(c * 9 + ky * 3 + kx).data();
        for (int s = 0; s < n; ++s) {
          for (int y = 0; y < ho; ++y) {
            S* out = dst + (static_cast<std::ptrdiff_t>(s) * h + y + ky) * w + kx;
            const S* in = src + (static_cast<std::ptrdiff_t>(s) * ho + y) * wo;
            for (int i = 0; i < wo; ++i) out[i] += in[i];
          }
        }
      }
    }
  }
  return x;
}

template <class S>
void relu_inplace(Mat<S>& m) {
  m = m.cwiseMax(S(0));
}

template <class S>
Mat<S> flatten_features(const Mat<S>& fmap, int n, int f) {
  const int area = f * f;
  Mat<S> out(fmap.rows() * area, n);
  for (Eigen::Index c = 0; c < fmap.rows(); ++c) {
    for (int s = 0; s < n; ++s) {
      for (int k = 0; k < area; ++k) out(c * area + k, s) = fmap(c, static_cast<Eigen::Index>(s) * area + k);
    }
  }
  return out;
}

template <class S>
Mat<S> unflatten_features(const Mat<S>& feat, Eigen::Index channels, int n, int f) {
  const int area = f * f;
  Mat<S> out(channels, static_cast<Eigen::Index>(n) * area);
  for (Eigen::Index c = 0; c < channels; ++c) {
    for (int s = 0; s < n; ++s) {
      for (int k = 0; k < area; ++k) out(c, static_cast<Eigen::Index>(s) * area + k) = feat(c * area + k, s);
    }
  }
  return out;
}

}  // namespace

template <class S>
NetParams<S> zero_params(const NetArch& arch) {
  arch.validate();
  NetParams<S> p;
  p.arch = arch;
  const auto ch = arch.conv_channels();
  for (int l = 0; l < 3; ++l) {
    p.conv_w[l] = Mat<S>::Zero(ch[l + 1], ch[l] * 9);
    p.bn_gamma[l] = Vec<S>::Zero(ch[l + 1]);
    p.bn_beta[l] = Vec<S>::Zero(ch[l + 1]);
    p.bn_mean[l] = Vec<S>::Zero(ch[l + 1]);
    p.bn_var[l] = Vec<S>::Zero(ch[l + 1]);
  }
  p.fc1_w = Mat<S>::Zero(arch.hidden, arch.fc1_inputs());
  p.fc1_b = Vec<S>::Zero(arch.hidden);
  p.fc2_w = Mat<S>::Zero(arch.labels, arch.hidden);
  p.fc2_b = Vec<S>::Zero(arch.labels);
  return p;
}

template <class S>
NetParams<S> init_params(const NetArch& arch, std::uint64_t seed) {
  NetParams<S> p = zero_params<S>(arch);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto fill = [&](Mat<S>& m) {
    const double stddev = std::sqrt(2.0 / static_cast<double>(m.cols()));
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<S>(stddev * normal(rng));
  };
  for (int l = 0; l < 3; ++l) {
    fill(p.conv_w[l]);
    p.bn_gamma[l].setOnes();
    p.bn_var[l].setOnes();
  }
  fill(p.fc1_w);
  fill(p.fc2_w);
  return p;
}

template <class To, class From>
NetParams<To> cast_params(const NetParams<From>& p) {
  NetParams<To> out;
  out.arch = p.arch;
  for (int l = 0; l < 3; ++l) {
    out.conv_w[l] = p.conv_w[l].template cast<To>();
    out.bn_gamma[l] = p.bn_gamma[l].template cast<To>();
    out.bn_beta[l] = p.bn_beta[l].template cast<To>();
    out.bn_mean[l] = p.bn_mean[l].template cast<To>();
    out.bn_var[l] = p.bn_var[l].template cast<To>();
  }
  out.fc1_w = p.fc1_w.template cast<To>();
  out.fc1_b = p.fc1_b.template cast<To>();
  out.fc2_w = p.fc2_w.template cast<To>();
  out.fc2_b = p.fc2_b.template cast<To>();
  out.input_shift = static_cast<To>(p.input_shift);
  out.input_scale = static_cast<To>(p.input_scale);
  return out;
}

template <class S>
Tensor4<S> conv_stack(const NetParams<S>& p, const Tensor4<S>& x, NetMode mode, ForwardCache<S>* cache,
                      MacCounter* macs) {
  if (x.channels() != p.arch.in_channels) throw InvalidArgument("conv_stack: input channel count mismatch");
  if (x.height < 7 || x.width < 7 || x.n < 1) throw InvalidArgument("conv_stack: input smaller than the receptive field");
  if (x.data.cols() != static_cast<Eigen::Index>(x.n) * x.height * x.width) {
    throw InvalidArgument("conv_stack: tensor shape mismatch");
  }
  Tensor4<S> act{x.n, x.height, x.width, (x.data.array() - p.input_shift) * p.input_scale};
  if (cache) cache->input = act;
  for (int l = 0; l < 3; ++l) {
    Mat<S> cols = im2col(act.data, act.n, act.height, act.width);
    Mat<S> z = p.conv_w[l] * cols;
    if (macs) macs->conv += static_cast<std::uint64_t>(z.rows()) * cols.rows() * cols.cols();
    const auto m = static_cast<double>(z.cols());
    if (mode == NetMode::train) {
      Vec<S> mean = z.rowwise().mean();
      z.colwise() -= mean;
      Vec<S> var = (z.array().square().rowwise().sum() / static_cast<S>(m)).matrix();
      Vec<S> inv_std = (var.array() + static_cast<S>(kBatchNormEpsilon)).rsqrt().matrix();
      z = inv_std.asDiagonal() * z;
      if (cache) {
        cache->xhat[l] = z;
        cache->inv_std[l] = inv_std;
        cache->batch_mean[l] = mean;
        cache->batch_var[l] = var;
      }
      z = p.bn_gamma[l].asDiagonal() * z;
      z.colwise() += p.bn_beta[l];
    } else {
      const Vec<S> scale =
          (p.bn_gamma[l].array() * (p.bn_var[l].array() + static_cast<S>(kBatchNormEpsilon)).rsqrt()).matrix();
      z.colwise() -= p.bn_mean[l];
      z = scale.asDiagonal() * z;
      z.colwise() += p.bn_beta[l];
    }
    relu_inplace(z);
    if (cache) {
      cache->cols[l] = std::move(cols);
      cache->post[l] = z;
      cache->out_size[l] = act.height - 2;
    }
    act = Tensor4<S>{act.n, act.height - 2, act.width - 2, std::move(z)};
  }
  return act;
}

template <class S>
Mat<S> fc_head(const NetParams<S>& p, const Mat<S>& features, ForwardCache<S>* cache, MacCounter* macs) {
  if (features.rows() != p.arch.fc1_inputs()) throw InvalidArgument("fc_head: feature size mismatch");
  Mat<S> h = p.fc1_w * features;
  h.colwise() += p.fc1_b;
  relu_inplace(h);
  Mat<S> logits = p.fc2_w * h;
  logits.colwise() += p.fc2_b;
  if (macs) {
    macs->fc += static_cast<std::uint64_t>(features.cols()) *
                (static_cast<std::uint64_t>(p.fc1_w.size()) + static_cast<std::uint64_t>(p.fc2_w.size()));
  }
  if (cache) {
    cache->features = features;
    cache->hidden = std::move(h);
  }
  return logits;
}

template <class S>
Mat<S> net_forward(const NetParams<S>& p, const Tensor4<S>& x, NetMode mode, ForwardCache<S>* cache,
                   MacCounter* macs) {
  if (x.height != p.arch.patch || x.width != p.arch.patch) throw InvalidArgument("net_forward: input is not patch-sized");
  const Tensor4<S> fmap = conv_stack(p, x, mode, cache, macs);
  return fc_head(p, flatten_features(fmap.data, fmap.n, fmap.height), cache, macs);
}

template <class S>
Mat<S> softmax(const Mat<S>& logits) {
  Mat<S> out = logits;
  for (Eigen::Index j = 0; j < out.cols(); ++j) {
    const S mx = out.col(j).maxCoeff();
    out.col(j) = (out.col(j).array() - mx).exp().matrix();
    out.col(j) /= out.col(j).sum();
  }
  return out;
}

template <class S>
double cross_entropy(const Mat<S>& logits, const std::vector<int>& labels, Mat<S>* grad) {
  if (static_cast<Eigen::Index>(labels.size()) != logits.cols()) throw InvalidArgument("cross_entropy: label count");
  const auto n = static_cast<double>(labels.size());
  double loss = 0.0;
  Mat<S> prob = softmax(logits);
  for (Eigen::Index j = 0; j < logits.cols(); ++j) {
    const int y = labels[static_cast<std::size_t>(j)];
    if (y < 0 || y >= logits.rows()) throw InvalidArgument("cross_entropy: label out of range");
    const double mx = static_cast<double>(logits.col(j).maxCoeff());
    double lse = 0.0;
    for (Eigen::Index i = 0; i < logits.rows(); ++i) lse += std::exp(static_cast<double>(logits(i, j)) - mx);
    loss += mx + std::log(lse) - static_cast<double>(logits(y, j));
    if (grad) prob(y, j) -= S(1);
  }
  if (grad) *grad = prob / static_cast<S>(n);
  return loss / n;
}

template <class S>
NetParams<S> net_backward(const NetParams<S>& p, const ForwardCache<S>& cache, const Mat<S>& dlogits) {
  NetParams<S> g = zero_params<S>(p.arch);
  const int n = static_cast<int>(dlogits.cols());
  g.fc2_w = dlogits * cache.hidden.transpose();
  g.fc2_b = dlogits.rowwise().sum();
  Mat<S> dh = p.fc2_w.transpose() * dlogits;
  dh = dh.cwiseProduct((cache.hidden.array() > S(0)).template cast<S>().matrix());
  g.fc1_w = dh * cache.features.transpose();
  g.fc1_b = dh.rowwise().sum();
  const Mat<S> dfeat = p.fc1_w.transpose() * dh;
  Mat<S> dy = unflatten_features(dfeat, p.arch.c3, n, p.arch.feature_size());

  for (int l = 2; l >= 0; --l) {
    dy = dy.cwiseProduct((cache.post[l].array() > S(0)).template cast<S>().matrix());
    const Mat<S>& xhat = cache.xhat[l];
    g.bn_gamma[l] = dy.cwiseProduct(xhat).rowwise().sum();
    g.bn_beta[l] = dy.rowwise().sum();
    const Mat<S> dxhat = p.bn_gamma[l].asDiagonal() * dy;
    const auto m = static_cast<S>(dxhat.cols());
    const Vec<S> sum_dxhat = dxhat.rowwise().sum();
    const Vec<S> sum_dxhat_xhat = dxhat.cwiseProduct(xhat).rowwise().sum();
    Mat<S> dz = dxhat * m;
    dz.colwise() -= sum_dxhat;
    dz -= sum_dxhat_xhat.asDiagonal() * xhat;
    dz = (cache.inv_std[l] / m).asDiagonal() * dz;
    g.conv_w[l] = dz * cache.cols[l].transpose();
    if (l > 0) {
      const int in_size = cache.out_size[l] + 2;
      const Mat<S> dcols = p.conv_w[l].transpose() * dz;
      dy = col2im(dcols, p.conv_w[l].cols() / 9, n, in_size, in_size);
    }
  }
  return g;
}

template <class S>
Tensor4<S> gather_batch(const PatchSet& set, const std::vector<int>& indices) {
  const int p = set.patch;
  const int area = p * p;
  Tensor4<S> t{static_cast<int>(indices.size()), p, p, Mat<S>(set.channels, static_cast<Eigen::Index>(indices.size()) * area)};
  for (std::size_t s = 0; s < indices.size(); ++s) {
    const int idx = indices[s];
    if (idx < 0 || idx >= set.size()) throw InvalidArgument("gather_batch: sample index out of range");
    const float* src = set.data.data() + static_cast<std::size_t>(idx) * set.sample_stride();
    for (int k = 0; k < area; ++k) {
      for (int c = 0; c < set.channels; ++c) {
        t.data(c, static_cast<Eigen::Index>(s) * area + k) = static_cast<S>(src[static_cast<std::size_t>(k) * set.channels + c]);
      }
    }
  }
  return t;
}

TrainResult net_train(const PatchSet& data, const NetArch& arch, const TrainConfig& cfg, const TrainLog& log,
                      const NetParams<float>* init) {
  cfg.validate();
  arch.validate();
  if (data.size() == 0) throw InvalidArgument("net_train: empty dataset");
  if (data.patch != arch.patch || data.channels != arch.in_channels) {
    throw InvalidArgument("net_train: dataset does not match the architecture");
  }
  for (int y : data.labels) {
    if (y < 0 || y >= arch.labels) throw InvalidArgument("net_train: label out of range");
  }

  TrainResult result;
  if (init) {
    if (!(init->arch == arch)) throw InvalidArgument("net_train: initial parameters have a different architecture");
    result.params = *init;
  } else {
    result.params = init_params<float>(arch, cfg.seed);
    double mean = 0.0;
    for (float v : data.data) mean += v;
    mean /= static_cast<double>(data.data.size());
    double var = 0.0;
    for (float v : data.data) var += (v - mean) * (v - mean);
    var /= static_cast<double>(data.data.size());
    result.params.input_shift = static_cast<float>(mean);
    result.params.input_scale = static_cast<float>(var > 0.0 ? 1.0 / std::sqrt(var) : 1.0);
  }
  NetParams<float>& p = result.params;
  NetParams<float> velocity = zero_params<float>(arch);

  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<int> order(static_cast<std::size_t>(data.size()));
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::size_t cursor = 0;
  const int batch = std::min(cfg.batch, data.size());

  for (int it = 1; it <= cfg.max_iters; ++it) {
    const double lr = cfg.base_lr * std::pow(0.1, (it - 1) / cfg.step);
    std::vector<int> idx(static_cast<std::size_t>(batch));
    std::vector<int> labels(static_cast<std::size_t>(batch));
    for (int b = 0; b < batch; ++b) {
      if (cursor == order.size()) {
        std::shuffle(order.begin(), order.end(), rng);
        cursor = 0;
      }
      idx[static_cast<std::size_t>(b)] = order[cursor++];
      labels[static_cast<std::size_t>(b)] = data.labels[static_cast<std::size_t>(idx[static_cast<std::size_t>(b)])];
    }
    ForwardCache<float> cache;
    const Mat<float> logits = net_forward(p, gather_batch<float>(data, idx), NetMode::train, &cache);
    Mat<float> dlogits;
    const double loss = cross_entropy(logits, labels, &dlogits);
    if (!std::isfinite(loss)) throw TrainingDiverged("net_train: non-finite loss at iteration " + std::to_string(it));
    NetParams<float> g = net_backward(p, cache, dlogits);

    const auto decay = static_cast<float>(cfg.weight_decay);
    for (int l = 0; l < 3; ++l) g.conv_w[l] += decay * p.conv_w[l];
    g.fc1_w += decay * p.fc1_w;
    g.fc2_w += decay * p.fc2_w;

    const auto mu = static_cast<float>(cfg.momentum);
    const auto rate = static_cast<float>(lr);
    const auto update = [&](auto& w, auto& v, const auto& grad) {
      v = mu * v - rate * grad;
      w += v;
    };
    for (int l = 0; l < 3; ++l) {
      update(p.conv_w[l], velocity.conv_w[l], g.conv_w[l]);
      update(p.bn_gamma[l], velocity.bn_gamma[l], g.bn_gamma[l]);
      update(p.bn_beta[l], velocity.bn_beta[l], g.bn_beta[l]);
      const auto bm = static_cast<float>(cfg.bn_momentum);
      p.bn_mean[l] = (1.0F - bm) * p.bn_mean[l] + bm * cache.batch_mean[l];
      p.bn_var[l] = (1.0F - bm) * p.bn_var[l] + bm * cache.batch_var[l];
    }
    update(p.fc1_w, velocity.fc1_w, g.fc1_w);
    update(p.fc1_b, velocity.fc1_b, g.fc1_b);
    update(p.fc2_w, velocity.fc2_w, g.fc2_w);
    update(p.fc2_b, velocity.fc2_b, g.fc2_b);

    result.loss_trace.push_back(loss);
    if (log) log({it, loss, lr});
  }
  return result;
}

template <class S>
std::vector<int> predict(const NetParams<S>& p, const PatchSet& set, int chunk) {
  if (chunk < 1) throw InvalidArgument("predict: chunk must be >= 1");
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(set.size()));
  for (int start = 0; start < set.size(); start += chunk) {
    std::vector<int> idx(static_cast<std::size_t>(std::min(chunk, set.size() - start)));
    std::iota(idx.begin(), idx.end(), start);
    const Mat<S> logits = net_forward(p, gather_batch<S>(set, idx), NetMode::eval);
    for (Eigen::Index j = 0; j < logits.cols(); ++j) {
      Eigen::Index best = 0;
      logits.col(j).maxCoeff(&best);
      out.push_back(static_cast<int>(best));
    }
  }
  return out;
}

double accuracy(const std::vector<int>& predicted, const std::vector<int>& labels) {
  if (predicted.size() != labels.size() || labels.empty()) throw InvalidArgument("accuracy: size mismatch");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hits += predicted[i] == labels[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

#define LFSEP_NET_INSTANTIATE(S)                                                                                   \
  template NetParams<S> zero_params<S>(const NetArch&);                                                           \
  template NetParams<S> init_params<S>(const NetArch&, std::uint64_t);                                            \
  template Tensor4<S> conv_stack<S>(const NetParams<S>&, const Tensor4<S>&, NetMode, ForwardCache<S>*,            \
                                    MacCounter*);                                                                 \
  template Mat<S> fc_head<S>(const NetParams<S>&, const Mat<S>&, ForwardCache<S>*, MacCounter*);                  \
  template Mat<S> net_forward<S>(const NetParams<S>&, const Tensor4<S>&, NetMode, ForwardCache<S>*, MacCounter*); \
  template Mat<S> softmax<S>(const Mat<S>&);                                                                      \
  template double cross_entropy<S>(const Mat<S>&, const std::vector<int>&, Mat<S>*);                              \
  template NetParams<S> net_backward<S>(const NetParams<S>&, const ForwardCache<S>&, const Mat<S>&);              \
  template Tensor4<S> gather_batch<S>(const PatchSet&, const std::vector<int>&);                                  \
  template std::vector<int> predict<S>(const NetParams<S>&, const PatchSet&, int);

LFSEP_NET_INSTANTIATE(float)
LFSEP_NET_INSTANTIATE(double)
#undef LFSEP_NET_INSTANTIATE

template NetParams<float> cast_params<float, double>(const NetParams<double>&);
template NetParams<double> cast_params<double, float>(const NetParams<float>&);
template NetParams<float> cast_params<float, float>(const NetParams<float>&);
template NetParams<double> cast_params<double, double>(const NetParams<double>&);

}  // namespace lfsep
