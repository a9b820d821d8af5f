#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "lfsep/depthnet.hpp"
#include "lfsep/net.hpp"
#include "lfsep/operators.hpp"
#include "lfsep/optics.hpp"
#include "lfsep/recon.hpp"

namespace lfsep {

namespace fs = std::filesystem;

/// Blur kernel recipe: "delta", "box" or "line" (length in px, angle in degrees).
struct BlurSpec {
  std::string type = "delta";
  int size = 1;
  double length = 0.0;
  double angle = 0.0;

  void validate() const;
  [[nodiscard]] BlurKernel make() const;
};

struct SweepSpec {
  std::vector<double> fixed_depths = {0.35, 0.80, 1.7};  // m
  double depth_min = 0.35;
  double depth_max = 2.3;
  double depth_step = 0.15;
  int texture_pairs = 4;     // corpus images (2i, 2i + 1)
  int threads = 1;
  bool save_layers = false;  // write every reconstruction as PFM

  void validate() const;
  /// depth_min, depth_min + step, ... up to depth_max (inclusive within 1e-9).
  [[nodiscard]] std::vector<double> depths() const;
};

/// Label set, architecture and training schedule of the classifier.
struct DepthNetSpec {
  int levels = 6;
  double level_min = 0.2;   // m
  double level_max = 2.5;
  int pairs = 10;
  double min_gap = 1.38;    // diopters
  NetArch arch;             // in_channels and labels are derived
  TrainingSetConfig dataset;
  TrainConfig train;
  int corpus_size = 128;    // training texture side, px
  int corpus_count = 16;
  std::uint64_t corpus_seed = 11;
  int validation_per_label = 100;
  std::uint64_t validation_seed = 12345;  // held-out textures and draws

  void validate() const;
  [[nodiscard]] LabelSet label_set() const;
};

/// Desk-scale classifier preset (6 levels, 16 labels, narrow layers, batch 64).
DepthNetSpec desk_depthnet();

/// Everything a run depends on; saved next to its outputs.
struct ExperimentManifest {
  static constexpr int kSchema = 1;

  std::string camera = "desk";
  std::optional<Extent> units;  // override of the preset's units
  double depth_t = 0.35;        // m
  double depth_r = 1.7;
  std::vector<fs::path> texture_files;  // empty: procedural corpus
  int texture_count = 8;
  std::uint64_t texture_seed = 7;
  int texture_t = 0;  // corpus indices of the scene layers
  int texture_r = 1;
  std::optional<BlurSpec> blur_t;
  std::optional<BlurSpec> blur_r;
  double noise_sigma = 0.0;
  std::uint64_t seed = 1;
  ReconConfig recon;
  int deblur_kernel_size = 5;
  int deblur_outer_iters = 8;
  DeblurOptions deblur;
  SweepSpec sweep;
  DepthNetSpec depthnet = desk_depthnet();
  fs::path output_dir = "out";

  /// Throws InvalidArgument on the first inconsistency.
  void validate() const;
  [[nodiscard]] CameraConfig camera_config() const;
  /// Texture files (resolved against the manifest directory) or the procedural corpus,
  /// at the camera's texture size.
  [[nodiscard]] std::vector<Image> textures() const;
  [[nodiscard]] TextureVolume scene(const std::vector<Image>& textures) const;
  [[nodiscard]] ObservationOptions observation_options() const;
};

/// Parses a YAML manifest; missing keys keep their defaults, unknown keys are errors.
/// Relative texture paths and output_dir resolve against `base_dir`.
ExperimentManifest parse_manifest(const std::string& yaml, const fs::path& base_dir = {});
ExperimentManifest load_manifest(const fs::path& path);
/// Fully resolved manifest with every field written out.
std::string manifest_to_yaml(const ExperimentManifest& m);

/// One sweep point, averaged over the texture pairs.
struct SweepPoint {
  double fixed_depth = 0.0;  // m, depth of layer t
  double other_depth = 0.0;  // m, depth of layer r
  double mean_ncc_t = 0.0;
  double mean_ncc_r = 0.0;
  std::vector<double> ncc_t;  // per texture pair
  std::vector<double> ncc_r;
  std::vector<TextureVolume> layers;  // reconstructions when kept
};

/// Reconstructs every (fixed, other) pair of the sweep grid, skipping equal depths.
/// Results are ordered by fixed depth, then other depth, regardless of threads.
std::vector<SweepPoint> run_sweep(const ExperimentManifest& m, bool keep_layers = false,
                                  const std::function<void(const SweepPoint&)>& progress = {});

/// CSV with header fixed_layer_depth,other_layer_depth,mean_ncc_t,mean_ncc_r.
std::string ncc_curve_csv(const std::vector<SweepPoint>& points);

/// RGB plot of the mean of both layers' NCC against the other layer's depth, one
/// coloured curve per fixed depth.
struct Raster {
  int height = 0;
  int width = 0;
  std::vector<unsigned char> rgb;
};
Raster plot_ncc_curve(const std::vector<SweepPoint>& points, int height = 360, int width = 540);

/// Writes `<stem>.csv` and `<stem>.ppm`. Throws InvalidArgument on empty input.
void emit_ncc_curve(const std::vector<SweepPoint>& points, const fs::path& stem);

}  // namespace lfsep
