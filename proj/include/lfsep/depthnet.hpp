#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "lfsep/grid.hpp"
#include "lfsep/lightfield.hpp"
#include "lfsep/net.hpp"
#include "lfsep/optics.hpp"

namespace lfsep {

/// Single(near) when far < 0, otherwise Pair(near, far) with near < far (level indices).
struct Label {
  int near = 0;
  int far = -1;

  [[nodiscard]] bool is_pair() const { return far >= 0; }
  friend bool operator==(const Label&, const Label&) = default;
};

/// Classifier targets: all singles first, then the selected pairs.
class LabelSet {
 public:
  LabelSet() = default;
  LabelSet(DepthLevelSet levels, std::vector<Label> labels, double min_gap);

  [[nodiscard]] const DepthLevelSet& levels() const { return levels_; }
  [[nodiscard]] const std::vector<Label>& labels() const { return labels_; }
  [[nodiscard]] int size() const { return static_cast<int>(labels_.size()); }
  [[nodiscard]] const Label& operator[](int k) const { return labels_.at(static_cast<std::size_t>(k)); }
  /// Minimum inverse-depth gap of pairs, in diopters.
  [[nodiscard]] double min_gap() const { return min_gap_; }
  /// Index of `label`, or -1.
  [[nodiscard]] int find(const Label& label) const;
  [[nodiscard]] int single(int level) const { return find({level, -1}); }

 private:
  DepthLevelSet levels_;
  std::vector<Label> labels_;
  double min_gap_ = 0.0;
};

/// Inverse-depth gap 1/d_i - 1/d_j of a level pair, in diopters.
double pair_gap(const DepthLevelSet& levels, int i, int j);

/// All singles plus the `pair_count` admissible pairs (gap >= min_gap) with the
/// largest gaps; ties go to the lexicographically smaller (i, j).
LabelSet build_label_set(const DepthLevelSet& levels, int pair_count, double min_gap);

/// Labels whose near and far levels each differ by at most one step (a single
/// counts as near = far).
bool adjacent_labels(const LabelSet& set, int a, int b);

struct TrainingSetConfig {
  int patch = 10;                  // units
  int margin = 3;                  // simulated units around the patch
  int patches_per_label = 500;
  double gain_min = 0.3;           // attenuation of the reflected component
  double gain_max = 1.0;
  double intensity_min = 0.7;      // global texture scale jitter
  double intensity_max = 1.3;
  double noise_sigma = 0.0;
  double rho = kBorderRadiusFactor;
  std::uint64_t seed = 1;

  void validate() const;
};

/// Everything needed to re-render one training patch.
struct PatchRecipe {
  int label = 0;
  int texture_near = 0;  // corpus indices
  int texture_far = 0;
  Pixel crop_near;       // top-left texture pixel in the corpus image
  Pixel crop_far;
  double scale = 1.0;
  double gain = 1.0;
  bool gain_on_far = true;  // which layer plays the attenuated reflection
  std::uint64_t noise_seed = 0;
};

/// Simulates single-depth and superposed patches from a texture corpus.
class PatchRenderer {
 public:
  PatchRenderer(const CameraConfig& cfg, LabelSet labels, const std::vector<Image>& corpus, TrainingSetConfig config);

  [[nodiscard]] PatchRecipe draw(int label, std::mt19937_64& rng) const;
  /// Pair patches are near + gain * far (or gain * near + far) before cropping.
  [[nodiscard]] ViewTensor render(const PatchRecipe& recipe) const;
  [[nodiscard]] const CameraConfig& patch_camera() const { return patch_cfg_; }
  [[nodiscard]] int channels() const;

 private:
  [[nodiscard]] Image layer_image(int level, int texture, Pixel origin, double scale) const;

  CameraConfig patch_cfg_;
  LabelSet labels_;
  const std::vector<Image>* corpus_;
  TrainingSetConfig config_;
  std::vector<PsfKernelBank> banks_;  // one per depth level
};

/// Balanced dataset: exactly patches_per_label samples per label, interleaved
/// by label. Deterministic in config.seed.
PatchSet generate_training_set(const std::vector<Image>& corpus, const CameraConfig& cfg, const LabelSet& labels,
                               const TrainingSetConfig& config);

/// Copies a view tensor into the flat per-sample layout of PatchSet.
void append_patch(PatchSet& set, const ViewTensor& patch, int label);

/// One sample (n = 1) network tensor from a whole view tensor.
template <class S>
Tensor4<S> to_tensor(const ViewTensor& vt);

/// Per-position labels; entry (i, j) classifies the patch whose top-left unit is (i, j).
struct LabelMap {
  Grid2<int> labels;
  Image confidence;   // max softmax probability
  Mat<double> logits; // labels x positions, row-major positions
};

/// Shared-convolution inference: the conv stack runs once on the whole view
/// tensor and the FC head reads each (p-6) x (p-6) block of the feature map.
template <class S>
LabelMap classify_full_image(const NetParams<S>& params, const LightFieldImage& lf, MacCounter* macs = nullptr,
                             double rho = kBorderRadiusFactor);

/// Reference path: every p x p patch is classified independently.
template <class S>
LabelMap classify_sliding_window(const NetParams<S>& params, const LightFieldImage& lf, MacCounter* macs = nullptr,
                                 double rho = kBorderRadiusFactor);

/// Marks depth_far entries of units without a reflection.
inline constexpr double kNoReflection = 0.0;

struct DepthMapPair {
  Image depth_near;
  Image depth_far;                    // kNoReflection where the mask is false
  Grid2<std::uint8_t> reflection_mask;
};

DepthMapPair labels_to_depth_maps(const LabelMap& map, const LabelSet& labels);

struct LayerDepths {
  double d_t = 0.0;
  std::optional<double> d_r;  // absent when no unit shows a reflection
};

/// Medians of the near map (all units) and the far map (masked units). Even
/// counts take the lower middle value, so the result is always a level depth.
LayerDepths median_depths(const DepthMapPair& maps);

}  // namespace lfsep
