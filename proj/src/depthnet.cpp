#include "lfsep/depthnet.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>

#include "lfsep/operators.hpp"

namespace lfsep {

LabelSet::LabelSet(DepthLevelSet levels, std::vector<Label> labels, double min_gap)
    : levels_(std::move(levels)), labels_(std::move(labels)), min_gap_(min_gap) {
  const int n = levels_.size();
  for (std::size_t k = 0; k < labels_.size(); ++k) {
    const Label& l = labels_[k];
    if (l.near < 0 || l.near >= n || l.far >= n || (l.is_pair() && l.far <= l.near)) {
      throw InvalidArgument("LabelSet: label levels out of range or unordered");
    }
    if (l.is_pair() && pair_gap(levels_, l.near, l.far) < min_gap_ * (1.0 - 1e-12)) {
      throw InvalidArgument("LabelSet: pair closer than the minimum gap");
    }
    for (std::size_t m = 0; m < k; ++m) {
      if (labels_[m] == l) throw InvalidArgument("LabelSet: duplicate label");
    }
  }
}

int LabelSet::find(const Label& label) const {
  const Label key = label.is_pair() ? label : Label{label.near, -1};
  for (std::size_t k = 0; k < labels_.size(); ++k) {
    if (labels_[k] == key) return static_cast<int>(k);
  }
  return -1;
}

double pair_gap(const DepthLevelSet& levels, int i, int j) { return std::abs(1.0 / levels[i] - 1.0 / levels[j]); }

LabelSet build_label_set(const DepthLevelSet& levels, int pair_count, double min_gap) {
  if (levels.size() < 1) throw InvalidArgument("build_label_set: no depth levels");
  if (pair_count < 0 || !(min_gap >= 0.0)) throw InvalidArgument("build_label_set: bad pair count or gap");
  std::vector<Label> labels;
  for (int i = 0; i < levels.size(); ++i) labels.push_back({i, -1});
  std::vector<Label> pairs;
  for (int i = 0; i < levels.size(); ++i) {
    for (int j = i + 1; j < levels.size(); ++j) {
      if (pair_gap(levels, i, j) >= min_gap * (1.0 - 1e-12)) pairs.push_back({i, j});
    }
  }
  if (pair_count > static_cast<int>(pairs.size())) {
    throw InvalidArgument("build_label_set: only " + std::to_string(pairs.size()) + " pairs satisfy the minimum gap");
  }
  // Gaps are compared on a 1e-9 D grid so that rounding cannot break lexicographic ties.
  const auto key = [&](const Label& l) { return std::llround(pair_gap(levels, l.near, l.far) * 1e9); };
  std::stable_sort(pairs.begin(), pairs.end(), [&](const Label& a, const Label& b) { return key(a) > key(b); });
  labels.insert(labels.end(), pairs.begin(), pairs.begin() + pair_count);
  return LabelSet(levels, std::move(labels), min_gap);
}

bool adjacent_labels(const LabelSet& set, int a, int b) {
  const Label& x = set[a];
  const Label& y = set[b];
  const int xf = x.is_pair() ? x.far : x.near;
  const int yf = y.is_pair() ? y.far : y.near;
  return std::abs(x.near - y.near) <= 1 && std::abs(xf - yf) <= 1;
}

void TrainingSetConfig::validate() const {
  if (patch < 7 || margin < 0 || patches_per_label < 1) throw InvalidArgument("TrainingSetConfig: bad patch settings");
  if (!(gain_min > 0.0) || gain_max < gain_min) throw InvalidArgument("TrainingSetConfig: bad gain range");
  if (!(intensity_min > 0.0) || intensity_max < intensity_min) {
    throw InvalidArgument("TrainingSetConfig: bad intensity range");
  }
  if (!(noise_sigma >= 0.0) || !(rho > 0.0)) throw InvalidArgument("TrainingSetConfig: bad noise or border factor");
}

PatchRenderer::PatchRenderer(const CameraConfig& cfg, LabelSet labels, const std::vector<Image>& corpus,
                             TrainingSetConfig config)
    : labels_(std::move(labels)), corpus_(&corpus), config_(config) {
  config_.validate();
  if (corpus.empty()) throw InvalidArgument("PatchRenderer: empty texture corpus");
  const int units = config_.patch + 2 * config_.margin;
  patch_cfg_ = cfg.with_units({units, units});
  const Extent tex = patch_cfg_.texture_size();
  for (const Image& img : corpus) {
    if (img.rows() < tex.height || img.cols() < tex.width) {
      throw InvalidArgument("PatchRenderer: corpus images must be at least " + std::to_string(tex.height) + "x" +
                            std::to_string(tex.width));
    }
  }
  for (double d : labels_.levels().depths()) banks_.push_back(build_psf_bank(patch_cfg_, d));
}

int PatchRenderer::channels() const { return static_cast<int>(kept_positions(patch_cfg_, config_.rho).size()); }

PatchRecipe PatchRenderer::draw(int label, std::mt19937_64& rng) const {
  if (label < 0 || label >= labels_.size()) throw InvalidArgument("PatchRenderer::draw: label out of range");
  const Extent tex = patch_cfg_.texture_size();
  std::uniform_int_distribution<int> pick(0, static_cast<int>(corpus_->size()) - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto crop_for = [&](int t) {
    const Image& img = (*corpus_)[static_cast<std::size_t>(t)];
    std::uniform_int_distribution<int> row(0, img.rows() - tex.height);
    std::uniform_int_distribution<int> col(0, img.cols() - tex.width);
    const int r = row(rng);
    return Pixel{r, col(rng)};
  };
  PatchRecipe r;
  r.label = label;
  r.texture_near = pick(rng);
  r.crop_near = crop_for(r.texture_near);
  r.texture_far = pick(rng);
  r.crop_far = crop_for(r.texture_far);
  r.scale = config_.intensity_min + (config_.intensity_max - config_.intensity_min) * unit(rng);
  r.gain = config_.gain_min + (config_.gain_max - config_.gain_min) * unit(rng);
  r.gain_on_far = unit(rng) < 0.5;
  r.noise_seed = rng();
  return r;
}

Image PatchRenderer::layer_image(int level, int texture, Pixel origin, double scale) const {
  const Image tex = crop((*corpus_)[static_cast<std::size_t>(texture)], origin, patch_cfg_.texture_size());
  return apply_psf(banks_[static_cast<std::size_t>(level)], scaled(tex, scale));
}

ViewTensor PatchRenderer::render(const PatchRecipe& recipe) const {
  const Label& label = labels_[recipe.label];
  Image l = layer_image(label.near, recipe.texture_near, recipe.crop_near, recipe.scale);
  if (label.is_pair()) {
    const Image far = layer_image(label.far, recipe.texture_far, recipe.crop_far, recipe.scale);
    if (recipe.gain_on_far) {
      for (std::size_t i = 0; i < l.size(); ++i) l[i] += recipe.gain * far[i];
    } else {
      for (std::size_t i = 0; i < l.size(); ++i) l[i] = recipe.gain * l[i] + far[i];
    }
  }
  if (config_.noise_sigma > 0.0) {
    std::mt19937_64 rng(recipe.noise_seed);
    std::normal_distribution<double> noise(0.0, config_.noise_sigma);
    for (double& v : l) v = std::max(v + noise(rng), 0.0);
  }
  const ViewTensor full = rearrange_views(LightFieldImage(patch_cfg_, std::move(l)), config_.rho);
  return extract_patch(full, {config_.margin, config_.margin}, config_.patch);
}

void append_patch(PatchSet& set, const ViewTensor& patch, int label) {
  if (patch.units_h() != set.patch || patch.units_w() != set.patch || patch.depth() != set.channels) {
    throw InvalidArgument("append_patch: patch shape does not match the set");
  }
  for (double v : patch.data()) set.data.push_back(static_cast<float>(v));
  set.labels.push_back(label);
}

PatchSet generate_training_set(const std::vector<Image>& corpus, const CameraConfig& cfg, const LabelSet& labels,
                               const TrainingSetConfig& config) {
  const PatchRenderer renderer(cfg, labels, corpus, config);
  PatchSet set;
  set.patch = config.patch;
  set.channels = renderer.channels();
  set.data.reserve(set.sample_stride() * static_cast<std::size_t>(labels.size()) *
                   static_cast<std::size_t>(config.patches_per_label));
  std::mt19937_64 rng(config.seed);
  for (int n = 0; n < config.patches_per_label; ++n) {
    for (int k = 0; k < labels.size(); ++k) append_patch(set, renderer.render(renderer.draw(k, rng)), k);
  }
  return set;
}

template <class S>
Tensor4<S> to_tensor(const ViewTensor& vt) {
  const int h = vt.units_h();
  const int w = vt.units_w();
  const int c = vt.depth();
  Tensor4<S> t{1, h, w, Mat<S>(c, static_cast<Eigen::Index>(h) * w)};
  const std::vector<double>& d = vt.data();
  for (Eigen::Index pos = 0; pos < static_cast<Eigen::Index>(h) * w; ++pos) {
    for (int k = 0; k < c; ++k) t.data(k, pos) = static_cast<S>(d[static_cast<std::size_t>(pos * c + k)]);
  }
  return t;
}

namespace {

template <class S>
LabelMap finish_map(const Mat<S>& logits, int rows, int cols) {
  LabelMap map{Grid2<int>(rows, cols), Image(rows, cols), logits.template cast<double>()};
  const Mat<S> prob = softmax(logits);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) {
      const Eigen::Index pos = static_cast<Eigen::Index>(i) * cols + j;
      Eigen::Index best = 0;
      logits.col(pos).maxCoeff(&best);
      map.labels(i, j) = static_cast<int>(best);
      map.confidence(i, j) = static_cast<double>(prob(best, pos));
    }
  }
  return map;
}

template <class S>
ViewTensor checked_views(const NetParams<S>& params, const LightFieldImage& lf, double rho) {
  const ViewTensor vt = rearrange_views(lf, rho);
  if (vt.depth() != params.arch.in_channels) throw InvalidArgument("classify: view count does not match the network");
  if (vt.units_h() < params.arch.patch || vt.units_w() < params.arch.patch) {
    throw InvalidArgument("classify: image smaller than one patch");
  }
  return vt;
}

}  // namespace

template <class S>
LabelMap classify_full_image(const NetParams<S>& params, const LightFieldImage& lf, MacCounter* macs, double rho) {
  const ViewTensor vt = checked_views(params, lf, rho);
  const Tensor4<S> fmap = conv_stack<S>(params, to_tensor<S>(vt), NetMode::eval, nullptr, macs);
  const int f = params.arch.feature_size();
  const int rows = vt.units_h() - params.arch.patch + 1;
  const int cols = vt.units_w() - params.arch.patch + 1;
  const Eigen::Index channels = fmap.data.rows();
  Mat<S> features(channels * f * f, static_cast<Eigen::Index>(rows) * cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) {
      const Eigen::Index pos = static_cast<Eigen::Index>(i) * cols + j;
      for (Eigen::Index c = 0; c < channels; ++c) {
        for (int y = 0; y < f; ++y) {
          for (int x = 0; x < f; ++x) {
            features(c * f * f + y * f + x, pos) = fmap.data(c, static_cast<Eigen::Index>(i + y) * fmap.width + j + x);
          }
        }
      }
    }
  }
  return finish_map(fc_head<S>(params, features, nullptr, macs), rows, cols);
}

template <class S>
LabelMap classify_sliding_window(const NetParams<S>& params, const LightFieldImage& lf, MacCounter* macs, double rho) {
  const ViewTensor vt = checked_views(params, lf, rho);
  const int p = params.arch.patch;
  const int rows = vt.units_h() - p + 1;
  const int cols = vt.units_w() - p + 1;
  Mat<S> logits(params.arch.labels, static_cast<Eigen::Index>(rows) * cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) {
      const Mat<S> out = net_forward<S>(params, to_tensor<S>(extract_patch(vt, {i, j}, p)), NetMode::eval, nullptr, macs);
      logits.col(static_cast<Eigen::Index>(i) * cols + j) = out.col(0);
    }
  }
  return finish_map(logits, rows, cols);
}

DepthMapPair labels_to_depth_maps(const LabelMap& map, const LabelSet& labels) {
  const int rows = map.labels.rows();
  const int cols = map.labels.cols();
  DepthMapPair out{Image(rows, cols), Image(rows, cols, kNoReflection), Grid2<std::uint8_t>(rows, cols)};
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) {
      const int k = map.labels(i, j);
      if (k < 0 || k >= labels.size()) throw InvalidArgument("labels_to_depth_maps: label index out of range");
      const Label& l = labels[k];
      out.depth_near(i, j) = labels.levels()[l.near];
      if (l.is_pair()) {
        out.depth_far(i, j) = labels.levels()[l.far];
        out.reflection_mask(i, j) = 1;
      }
    }
  }
  return out;
}

namespace {

double lower_median(std::vector<double> v) {
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>((v.size() - 1) / 2);
  std::nth_element(v.begin(), mid, v.end());
  return *mid;
}

}  // namespace

LayerDepths median_depths(const DepthMapPair& maps) {
  if (maps.depth_near.empty()) throw InvalidArgument("median_depths: empty depth map");
  std::vector<double> near(maps.depth_near.begin(), maps.depth_near.end());
  std::vector<double> far;
  for (std::size_t i = 0; i < maps.depth_far.size(); ++i) {
    if (maps.reflection_mask[i] != 0) far.push_back(maps.depth_far[i]);
  }
  LayerDepths out;
  out.d_t = lower_median(std::move(near));
  if (!far.empty()) out.d_r = lower_median(std::move(far));
  return out;
}

template Tensor4<float> to_tensor<float>(const ViewTensor&);
template Tensor4<double> to_tensor<double>(const ViewTensor&);
template LabelMap classify_full_image<float>(const NetParams<float>&, const LightFieldImage&, MacCounter*, double);
template LabelMap classify_full_image<double>(const NetParams<double>&, const LightFieldImage&, MacCounter*, double);
template LabelMap classify_sliding_window<float>(const NetParams<float>&, const LightFieldImage&, MacCounter*, double);
template LabelMap classify_sliding_window<double>(const NetParams<double>&, const LightFieldImage&, MacCounter*,
                                                  double);

}  // namespace lfsep
