#include "lfsep/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <mutex>
#include <set>
#include <thread>

#include <fmt/format.h>
#include <yaml-cpp/yaml.h>

#include "lfsep/errors.hpp"
#include "lfsep/io.hpp"
#include "lfsep/textures.hpp"

namespace lfsep {

void BlurSpec::validate() const {
  if (size < 1 || size % 2 == 0) throw InvalidArgument("blur: size must be odd and positive");
  if (type == "delta" || type == "box") return;
  if (type != "line") throw InvalidArgument("blur: type must be delta, box or line");
  if (!(length > 0.0) || !std::isfinite(angle)) throw InvalidArgument("blur: line needs a positive length");
}

BlurKernel BlurSpec::make() const {
  validate();
  if (type == "delta") return BlurKernel::delta(size);
  if (type == "box") return BlurKernel::box(size);
  return BlurKernel::line(size, length, angle);
}

void SweepSpec::validate() const {
  if (fixed_depths.empty()) throw InvalidArgument("sweep: fixed_depths is empty");
  for (double d : fixed_depths) {
    if (!(d > 0.0)) throw InvalidArgument("sweep: fixed depths must be positive");
  }
  if (!(depth_min > 0.0) || !(depth_max >= depth_min) || !(depth_step > 0.0)) {
    throw InvalidArgument("sweep: need 0 < depth_min <= depth_max and depth_step > 0");
  }
  if ((depth_max - depth_min) / depth_step > 1000.0) throw InvalidArgument("sweep: more than 1000 depths");
  if (texture_pairs < 1) throw InvalidArgument("sweep: texture_pairs must be >= 1");
  if (threads < 1) throw InvalidArgument("sweep: threads must be >= 1");
}

std::vector<double> SweepSpec::depths() const {
  std::vector<double> d;
  for (int i = 0;; ++i) {
    const double v = std::round((depth_min + i * depth_step) * 1e9) / 1e9;
    if (v > depth_max + 1e-9) break;
    d.push_back(v);
  }
  return d;
}

void DepthNetSpec::validate() const {
  if (levels < 2) throw InvalidArgument("depthnet: need at least two levels");
  if (!(level_min > 0.0) || !(level_max > level_min)) throw InvalidArgument("depthnet: need 0 < level_min < level_max");
  if (pairs < 0) throw InvalidArgument("depthnet: pairs must be >= 0");
  if (!(min_gap >= 0.0)) throw InvalidArgument("depthnet: min_gap must be >= 0");
  if (dataset.patch != arch.patch) throw InvalidArgument("depthnet: dataset patch differs from the network patch");
  if (corpus_size < 8 || corpus_count < 1) throw InvalidArgument("depthnet: corpus too small");
  if (validation_per_label < 1) throw InvalidArgument("depthnet: validation_per_label must be >= 1");
  dataset.validate();
  train.validate();
  NetArch a = arch;
  a.in_channels = std::max(a.in_channels, 1);
  a.labels = std::max(a.labels, 2);
  a.validate();
  (void)label_set();
}

LabelSet DepthNetSpec::label_set() const {
  return build_label_set(make_depth_levels(level_min, level_max, levels), pairs, min_gap);
}

DepthNetSpec desk_depthnet() {
  DepthNetSpec s;
  s.arch.patch = 10;
  s.arch.c1 = 32;
  s.arch.c2 = 64;
  s.arch.c3 = 64;
  s.arch.hidden = 128;
  s.dataset.patch = 10;
  s.dataset.patches_per_label = 500;
  s.dataset.seed = 5;
  s.train.batch = 64;
  s.train.base_lr = 0.01;
  s.train.step = 2500;
  s.train.max_iters = 4000;
  s.train.seed = 3;
  return s;
}

void ExperimentManifest::validate() const {
  const CameraConfig cfg = camera_config();
  if (!(depth_t > 0.0) || !(depth_r > 0.0)) throw InvalidArgument("scene: depths must be positive");
  if (texture_files.empty() && texture_count < 2) throw InvalidArgument("textures: count must be >= 2");
  const int available = texture_files.empty() ? texture_count : static_cast<int>(texture_files.size());
  if (texture_t < 0 || texture_t >= available || texture_r < 0 || texture_r >= available) {
    throw InvalidArgument("scene: texture index out of range");
  }
  for (const fs::path& f : texture_files) {
    if (!fs::exists(f)) throw InvalidArgument("textures: missing file '" + f.string() + "'");
  }
  if (blur_t) blur_t->validate();
  if (blur_r) blur_r->validate();
  if (!(noise_sigma >= 0.0)) throw InvalidArgument("scene: noise_sigma must be >= 0");
  recon.validate();
  if (deblur_kernel_size < 1 || deblur_kernel_size % 2 == 0) throw InvalidArgument("deblur: kernel_size must be odd");
  if (deblur_outer_iters < 1 || deblur.texture_iters < 1 || deblur.kernel.max_iters < 1) {
    throw InvalidArgument("deblur: iteration counts must be positive");
  }
  sweep.validate();
  if (2 * sweep.texture_pairs > available) throw InvalidArgument("sweep: not enough textures for texture_pairs");
  depthnet.validate();
  if (output_dir.empty()) throw InvalidArgument("output: dir is empty");
  (void)cfg;
}

CameraConfig ExperimentManifest::camera_config() const {
  CameraConfig cfg = camera_preset(camera);
  if (units) cfg = cfg.with_units(*units);
  cfg.validate();
  return cfg;
}

std::vector<Image> ExperimentManifest::textures() const {
  const Extent size = camera_config().texture_size();
  if (texture_files.empty()) return texture_corpus(size, texture_count, texture_seed);
  std::vector<Image> out;
  for (const fs::path& f : texture_files) {
    Image img = f.extension() == ".pgm" ? read_pgm16(f) : read_pfm(f).front();
    if (img.extent() != size) {
      throw InvalidArgument(fmt::format("textures: '{}' is {}x{}, the camera needs {}x{}", f.string(), img.rows(),
                                        img.cols(), size.height, size.width));
    }
    out.push_back(std::move(img));
  }
  return out;
}

TextureVolume ExperimentManifest::scene(const std::vector<Image>& tex) const {
  return {tex.at(static_cast<std::size_t>(texture_t)), tex.at(static_cast<std::size_t>(texture_r)), depth_t, depth_r};
}

ObservationOptions ExperimentManifest::observation_options() const {
  ObservationOptions o;
  if (blur_t) o.blur_t = blur_t->make();
  if (blur_r) o.blur_r = blur_r->make();
  o.noise_sigma = noise_sigma;
  o.seed = seed;
  return o;
}

namespace {

/// Map reader that rejects keys nobody asked for.
class Section {
 public:
  Section(YAML::Node node, std::string where) : node_(std::move(node)), where_(std::move(where)) {
    if (node_ && !node_.IsNull() && !node_.IsMap()) throw InvalidArgument("manifest: '" + where_ + "' must be a map");
  }

  [[nodiscard]] bool has(const std::string& key) {
    used_.insert(key);
    return node_ && node_.IsMap() && at(key) && !at(key).IsNull();
  }

  template <class T>
  void get(const std::string& key, T& out) {
    if (!has(key)) return;
    try {
      out = at(key).as<T>();
    } catch (const YAML::Exception&) {
      throw InvalidArgument("manifest: bad value for '" + where_ + key + "'");
    }
  }

  void get_extent(const std::string& key, std::optional<Extent>& out) {
    std::vector<int> v;
    get(key, v);
    if (v.empty()) return;
    if (v.size() != 2) throw InvalidArgument("manifest: '" + where_ + key + "' must be [height, width]");
    out = Extent{v[0], v[1]};
  }

  Section child(const std::string& key) {
    used_.insert(key);
    return Section(node_ && node_.IsMap() ? at(key) : YAML::Node(), where_ + key + ".");
  }

  [[nodiscard]] YAML::Node raw(const std::string& key) {
    used_.insert(key);
    return node_ && node_.IsMap() ? at(key) : YAML::Node();
  }

  void finish() const {
    if (!node_ || !node_.IsMap()) return;
    for (const auto& kv : node_) {
      const auto key = kv.first.as<std::string>();
      if (used_.count(key) == 0) throw InvalidArgument("manifest: unknown key '" + where_ + key + "'");
    }
  }

 private:
  [[nodiscard]] YAML::Node at(const std::string& key) const {
    const YAML::Node& n = node_;
    return n[key];
  }

  YAML::Node node_;
  std::string where_;
  std::set<std::string> used_;
};

std::optional<BlurSpec> read_blur(Section& parent, const std::string& key) {
  if (!parent.has(key)) return std::nullopt;
  Section s = parent.child(key);
  BlurSpec b;
  s.get("type", b.type);
  s.get("size", b.size);
  s.get("length", b.length);
  s.get("angle", b.angle);
  s.finish();
  return b;
}

fs::path resolve(const fs::path& base, const fs::path& p) {
  return p.is_absolute() || base.empty() ? p : base / p;
}

}  // namespace

ExperimentManifest parse_manifest(const std::string& yaml, const fs::path& base_dir) {
  YAML::Node root;
  try {
    root = YAML::Load(yaml);
  } catch (const YAML::Exception& e) {
    throw InvalidArgument(std::string("manifest: malformed YAML: ") + e.what());
  }
  ExperimentManifest m;
  Section top(root, "");
  int schema = 0;
  top.get("schema", schema);
  if (schema != ExperimentManifest::kSchema) {
    throw InvalidArgument(fmt::format("manifest: schema must be {}", ExperimentManifest::kSchema));
  }

  Section cam = top.child("camera");
  cam.get("preset", m.camera);
  cam.get_extent("units", m.units);
  cam.finish();

  Section scene = top.child("scene");
  scene.get("depth_t", m.depth_t);
  scene.get("depth_r", m.depth_r);
  scene.get("texture_t", m.texture_t);
  scene.get("texture_r", m.texture_r);
  scene.get("noise_sigma", m.noise_sigma);
  scene.get("seed", m.seed);
  m.blur_t = read_blur(scene, "blur_t");
  m.blur_r = read_blur(scene, "blur_r");
  scene.finish();

  Section tex = top.child("textures");
  std::vector<std::string> files;
  tex.get("files", files);
  for (const std::string& f : files) m.texture_files.push_back(resolve(base_dir, f));
  tex.get("count", m.texture_count);
  tex.get("seed", m.texture_seed);
  tex.finish();

  Section rc = top.child("recon");
  if (rc.has("nu")) {
    const YAML::Node nu = rc.raw("nu");
    if (!(nu.IsScalar() && nu.Scalar() == "auto")) {
      double v = 0.0;
      rc.get("nu", v);
      m.recon.nu = v;
    }
  }
  rc.get("tv_epsilon", m.recon.tv_epsilon);
  rc.get("step_size", m.recon.step_size);
  rc.get("max_iters", m.recon.max_iters);
  rc.get("rel_tol", m.recon.rel_tol);
  rc.finish();

  Section db = top.child("deblur");
  db.get("kernel_size", m.deblur_kernel_size);
  db.get("outer_iters", m.deblur_outer_iters);
  db.get("texture_iters", m.deblur.texture_iters);
  db.get("kernel_max_iters", m.deblur.kernel.max_iters);
  db.get("kernel_rel_tol", m.deblur.kernel.rel_tol);
  db.get("kernel_step_size", m.deblur.kernel.step_size);
  db.finish();

  Section sw = top.child("sweep");
  sw.get("fixed_depths", m.sweep.fixed_depths);
  sw.get("depth_min", m.sweep.depth_min);
  sw.get("depth_max", m.sweep.depth_max);
  sw.get("depth_step", m.sweep.depth_step);
  sw.get("texture_pairs", m.sweep.texture_pairs);
  sw.get("threads", m.sweep.threads);
  sw.get("save_layers", m.sweep.save_layers);
  sw.finish();

  Section dn = top.child("depthnet");
  DepthNetSpec& d = m.depthnet;
  dn.get("levels", d.levels);
  dn.get("level_min", d.level_min);
  dn.get("level_max", d.level_max);
  dn.get("pairs", d.pairs);
  dn.get("min_gap", d.min_gap);
  Section arch = dn.child("arch");
  arch.get("patch", d.arch.patch);
  arch.get("c1", d.arch.c1);
  arch.get("c2", d.arch.c2);
  arch.get("c3", d.arch.c3);
  arch.get("hidden", d.arch.hidden);
  arch.finish();
  d.dataset.patch = d.arch.patch;
  Section ds = dn.child("dataset");
  ds.get("margin", d.dataset.margin);
  ds.get("patches_per_label", d.dataset.patches_per_label);
  ds.get("gain_min", d.dataset.gain_min);
  ds.get("gain_max", d.dataset.gain_max);
  ds.get("intensity_min", d.dataset.intensity_min);
  ds.get("intensity_max", d.dataset.intensity_max);
  ds.get("noise_sigma", d.dataset.noise_sigma);
  ds.get("rho", d.dataset.rho);
  ds.get("seed", d.dataset.seed);
  ds.finish();
  Section tr = dn.child("train");
  tr.get("batch", d.train.batch);
  tr.get("base_lr", d.train.base_lr);
  tr.get("step", d.train.step);
  tr.get("max_iters", d.train.max_iters);
  tr.get("momentum", d.train.momentum);
  tr.get("weight_decay", d.train.weight_decay);
  tr.get("bn_momentum", d.train.bn_momentum);
  tr.get("seed", d.train.seed);
  tr.finish();
  Section corpus = dn.child("corpus");
  corpus.get("size", d.corpus_size);
  corpus.get("count", d.corpus_count);
  corpus.get("seed", d.corpus_seed);
  corpus.finish();
  Section val = dn.child("validation");
  val.get("per_label", d.validation_per_label);
  val.get("seed", d.validation_seed);
  val.finish();
  dn.finish();

  Section out = top.child("output");
  std::string dir = m.output_dir.string();
  out.get("dir", dir);
  m.output_dir = resolve(base_dir, dir);
  out.finish();
  top.finish();

  m.validate();
  return m;
}

ExperimentManifest load_manifest(const fs::path& path) {
  return parse_manifest(read_text(path), path.parent_path());
}

namespace {

std::string blur_yaml(const char* key, const std::optional<BlurSpec>& b) {
  if (!b) return fmt::format("  {}: null\n", key);
  return fmt::format("  {}: {{type: {}, size: {}, length: {}, angle: {}}}\n", key, b->type, b->size, b->length,
                     b->angle);
}

std::string list_yaml(const std::vector<double>& v) {
  std::string s = "[";
  for (std::size_t i = 0; i < v.size(); ++i) s += fmt::format("{}{}", i ? ", " : "", v[i]);
  return s + "]";
}

}  // namespace

std::string manifest_to_yaml(const ExperimentManifest& m) {
  const DepthNetSpec& d = m.depthnet;
  std::string s = fmt::format("# lfsep experiment manifest (resolved)\nschema: {}\n", ExperimentManifest::kSchema);
  const Extent units = m.camera_config().units();
  s += fmt::format("camera:\n  preset: {}\n  units: [{}, {}]\n", m.camera, units.height, units.width);
  s += fmt::format("scene:\n  depth_t: {}  # m\n  depth_r: {}  # m\n  texture_t: {}\n  texture_r: {}\n", m.depth_t,
                   m.depth_r, m.texture_t, m.texture_r);
  s += fmt::format("  noise_sigma: {}\n  seed: {}\n", m.noise_sigma, m.seed);
  s += blur_yaml("blur_t", m.blur_t);
  s += blur_yaml("blur_r", m.blur_r);
  s += "textures:\n";
  if (m.texture_files.empty()) {
    s += "  files: []\n";
  } else {
    s += "  files:\n";
    for (const fs::path& f : m.texture_files) s += fmt::format("    - \"{}\"\n", fs::absolute(f).string());
  }
  s += fmt::format("  count: {}\n  seed: {}\n", m.texture_count, m.texture_seed);
  s += "recon:\n";
  s += m.recon.nu ? fmt::format("  nu: {}\n", *m.recon.nu) : std::string("  nu: auto\n");
  s += fmt::format("  tv_epsilon: {}\n  step_size: {}\n  max_iters: {}\n  rel_tol: {}\n", m.recon.tv_epsilon,
                   m.recon.step_size, m.recon.max_iters, m.recon.rel_tol);
  s += fmt::format(
      "deblur:\n  kernel_size: {}\n  outer_iters: {}\n  texture_iters: {}\n  kernel_max_iters: {}\n"
      "  kernel_rel_tol: {}\n  kernel_step_size: {}\n",
      m.deblur_kernel_size, m.deblur_outer_iters, m.deblur.texture_iters, m.deblur.kernel.max_iters,
      m.deblur.kernel.rel_tol, m.deblur.kernel.step_size);
  s += fmt::format(
      "sweep:\n  fixed_depths: {}  # m\n  depth_min: {}\n  depth_max: {}\n  depth_step: {}\n  texture_pairs: {}\n"
      "  threads: {}\n  save_layers: {}\n",
      list_yaml(m.sweep.fixed_depths), m.sweep.depth_min, m.sweep.depth_max, m.sweep.depth_step,
      m.sweep.texture_pairs, m.sweep.threads, m.sweep.save_layers);
  s += fmt::format("depthnet:\n  levels: {}\n  level_min: {}  # m\n  level_max: {}  # m\n  pairs: {}\n"
                   "  min_gap: {}  # diopters\n",
                   d.levels, d.level_min, d.level_max, d.pairs, d.min_gap);
  s += fmt::format("  arch: {{patch: {}, c1: {}, c2: {}, c3: {}, hidden: {}}}\n", d.arch.patch, d.arch.c1, d.arch.c2,
                   d.arch.c3, d.arch.hidden);
  s += fmt::format(
      "  dataset: {{margin: {}, patches_per_label: {}, gain_min: {}, gain_max: {}, intensity_min: {}, "
      "intensity_max: {}, noise_sigma: {}, rho: {}, seed: {}}}\n",
      d.dataset.margin, d.dataset.patches_per_label, d.dataset.gain_min, d.dataset.gain_max, d.dataset.intensity_min,
      d.dataset.intensity_max, d.dataset.noise_sigma, d.dataset.rho, d.dataset.seed);
  s += fmt::format(
      "  train: {{batch: {}, base_lr: {}, step: {}, max_iters: {}, momentum: {}, weight_decay: {}, "
      "bn_momentum: {}, seed: {}}}\n",
      d.train.batch, d.train.base_lr, d.train.step, d.train.max_iters, d.train.momentum, d.train.weight_decay,
      d.train.bn_momentum, d.train.seed);
  s += fmt::format("  corpus: {{size: {}, count: {}, seed: {}}}\n", d.corpus_size, d.corpus_count, d.corpus_seed);
  s += fmt::format("  validation: {{per_label: {}, seed: {}}}\n", d.validation_per_label, d.validation_seed);
  s += fmt::format("output:\n  dir: \"{}\"\n", fs::absolute(m.output_dir).string());
  return s;
}

std::vector<SweepPoint> run_sweep(const ExperimentManifest& m, bool keep_layers,
                                  const std::function<void(const SweepPoint&)>& progress) {
  m.validate();
  const CameraConfig cfg = m.camera_config();
  const std::vector<Image> tex = m.textures();
  const std::vector<double> grid = m.sweep.depths();

  // One bank per distinct depth; equal depths share a bank.
  std::map<double, std::size_t> bank_index;
  std::vector<double> bank_depths;
  for (double d : m.sweep.fixed_depths) bank_depths.push_back(d);
  for (double d : grid) bank_depths.push_back(d);
  for (double d : bank_depths) bank_index.emplace(d, 0);
  std::vector<PsfKernelBank> banks;
  for (auto& [depth, idx] : bank_index) {
    idx = banks.size();
    banks.push_back(build_psf_bank(cfg, depth));
  }

  struct Job {
    double fixed;
    double other;
  };
  std::vector<Job> jobs;
  for (double f : m.sweep.fixed_depths) {
    for (double o : grid) {
      if (std::abs(o - f) > 1e-9) jobs.push_back({f, o});
    }
  }

  ObservationOptions base = m.observation_options();
  std::vector<SweepPoint> results(jobs.size());
  const auto run_job = [&](std::size_t j) {
    const Job& job = jobs[j];
    const PsfKernelBank& bt = banks[bank_index.at(job.fixed)];
    const PsfKernelBank& br = banks[bank_index.at(job.other)];
    SweepPoint p;
    p.fixed_depth = job.fixed;
    p.other_depth = job.other;
    for (int k = 0; k < m.sweep.texture_pairs; ++k) {
      const TextureVolume truth{tex[static_cast<std::size_t>(2 * k)], tex[static_cast<std::size_t>(2 * k + 1)],
                                job.fixed, job.other};
      ObservationOptions o = base;
      o.seed = m.seed + 1000003ULL * j + static_cast<std::uint64_t>(k);
      const LightFieldImage l = simulate_observation(truth, bt, br, o);
      TextureVolume est = reconstruct_layers(l, bt, br, m.recon);
      p.ncc_t.push_back(ncc(est.layer_t, truth.layer_t));
      p.ncc_r.push_back(ncc(est.layer_r, truth.layer_r));
      if (keep_layers) p.layers.push_back(std::move(est));
    }
    for (std::size_t k = 0; k < p.ncc_t.size(); ++k) {
      p.mean_ncc_t += p.ncc_t[k];
      p.mean_ncc_r += p.ncc_r[k];
    }
    p.mean_ncc_t /= static_cast<double>(p.ncc_t.size());
    p.mean_ncc_r /= static_cast<double>(p.ncc_r.size());
    results[j] = std::move(p);
  };

  const int threads = std::min<int>(m.sweep.threads, static_cast<int>(jobs.size()));
  if (threads <= 1) {
    for (std::size_t j = 0; j < jobs.size(); ++j) {
      run_job(j);
      if (progress) progress(results[j]);
    }
  } else {
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) {
      pool.emplace_back([&] {
        for (std::size_t j = next++; j < jobs.size(); j = next++) {
          try {
            run_job(j);
          } catch (...) {
            const std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
          }
        }
      });
    }
    for (std::thread& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
    if (progress) {
      for (const SweepPoint& p : results) progress(p);
    }
  }
  return results;
}

std::string ncc_curve_csv(const std::vector<SweepPoint>& points) {
  std::string s = "fixed_layer_depth,other_layer_depth,mean_ncc_t,mean_ncc_r\n";
  for (const SweepPoint& p : points) {
    s += fmt::format("{:.4f},{:.4f},{:.10f},{:.10f}\n", p.fixed_depth, p.other_depth, p.mean_ncc_t, p.mean_ncc_r);
  }
  return s;
}

namespace {

struct Rgb {
  unsigned char r, g, b;
};

class Canvas {
 public:
  Canvas(int h, int w) : h_(h), w_(w), rgb_(static_cast<std::size_t>(h) * static_cast<std::size_t>(w) * 3, 255) {}

  void set(int r, int c, Rgb col) {
    if (r < 0 || c < 0 || r >= h_ || c >= w_) return;
    const std::size_t i = (static_cast<std::size_t>(r) * static_cast<std::size_t>(w_) + static_cast<std::size_t>(c)) * 3;
    rgb_[i] = col.r;
    rgb_[i + 1] = col.g;
    rgb_[i + 2] = col.b;
  }

  void line(int r0, int c0, int r1, int c1, Rgb col) {
    const int dr = std::abs(r1 - r0);
    const int dc = std::abs(c1 - c0);
    const int sr = r0 < r1 ? 1 : -1;
    const int sc = c0 < c1 ? 1 : -1;
    int err = dc - dr;
    for (;;) {
      set(r0, c0, col);
      set(r0 + 1, c0, col);
      if (r0 == r1 && c0 == c1) return;
      const int e2 = 2 * err;
      if (e2 > -dr) {
        err -= dr;
        c0 += sc;
      }
      if (e2 < dc) {
        err += dc;
        r0 += sr;
      }
    }
  }

  void square(int r, int c, int half, Rgb col) {
    for (int i = -half; i <= half; ++i) {
      for (int j = -half; j <= half; ++j) set(r + i, c + j, col);
    }
  }

  Raster take() { return {h_, w_, std::move(rgb_)}; }

 private:
  int h_;
  int w_;
  std::vector<unsigned char> rgb_;
};

}  // namespace

Raster plot_ncc_curve(const std::vector<SweepPoint>& points, int height, int width) {
  if (points.empty()) throw InvalidArgument("plot_ncc_curve: no points");
  if (height < 64 || width < 64) throw InvalidArgument("plot_ncc_curve: raster too small");
  double x_lo = points.front().other_depth;
  double x_hi = x_lo;
  double y_lo = 1.0;
  for (const SweepPoint& p : points) {
    x_lo = std::min(x_lo, p.other_depth);
    x_hi = std::max(x_hi, p.other_depth);
    y_lo = std::min(y_lo, 0.5 * (p.mean_ncc_t + p.mean_ncc_r));
  }
  // y spans [floor to 0.1, 1]; grid lines every 0.1 in y and every 0.5 m in x.
  y_lo = std::min(0.8, std::floor(y_lo * 10.0) / 10.0);
  const double y_hi = 1.0;
  if (x_hi - x_lo < 1e-9) {
    x_lo -= 0.1;
    x_hi += 0.1;
  }
  const int left = 40;
  const int right = width - 20;
  const int top = 20;
  const int bottom = height - 30;
  const auto px = [&](double x) {
    return left + static_cast<int>(std::lround((x - x_lo) / (x_hi - x_lo) * (right - left)));
  };
  const auto py = [&](double y) {
    return bottom - static_cast<int>(std::lround((y - y_lo) / (y_hi - y_lo) * (bottom - top)));
  };

  Canvas cv(height, width);
  const Rgb grid{225, 225, 225};
  const Rgb axis{0, 0, 0};
  for (double y = y_lo; y <= y_hi + 1e-9; y += 0.1) cv.line(py(y), left, py(y), right, grid);
  for (double x = std::ceil(x_lo * 2.0) / 2.0; x <= x_hi + 1e-9; x += 0.5) cv.line(top, px(x), bottom, px(x), grid);
  cv.line(bottom, left, bottom, right, axis);
  cv.line(top, left, bottom, left, axis);

  static constexpr Rgb kPalette[] = {{31, 119, 180}, {214, 39, 40}, {44, 160, 44}, {255, 127, 14}, {148, 103, 189}};
  std::vector<double> fixed;
  for (const SweepPoint& p : points) {
    if (std::find(fixed.begin(), fixed.end(), p.fixed_depth) == fixed.end()) fixed.push_back(p.fixed_depth);
  }
  for (std::size_t c = 0; c < fixed.size(); ++c) {
    const Rgb col = kPalette[c % std::size(kPalette)];
    std::vector<std::pair<int, int>> pts;
    for (const SweepPoint& p : points) {
      if (p.fixed_depth == fixed[c]) pts.emplace_back(px(p.other_depth), py(0.5 * (p.mean_ncc_t + p.mean_ncc_r)));
    }
    std::sort(pts.begin(), pts.end());
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
      cv.line(pts[i].second, pts[i].first, pts[i + 1].second, pts[i + 1].first, col);
    }
    for (const auto& [x, y] : pts) cv.square(y, x, 2, col);
    // Fixed-depth marker on the x axis.
    cv.square(bottom + 8, px(fixed[c]), 3, col);
  }
  return cv.take();
}

void emit_ncc_curve(const std::vector<SweepPoint>& points, const fs::path& stem) {
  if (points.empty()) throw InvalidArgument("emit_ncc_curve: no sweep results");
  write_text(fs::path(stem).concat(".csv"), ncc_curve_csv(points));
  const Raster plot = plot_ncc_curve(points);
  write_ppm(fs::path(stem).concat(".ppm"), plot.height, plot.width, plot.rgb);
}

}  // namespace lfsep
