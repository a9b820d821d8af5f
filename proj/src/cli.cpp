#include "lfsep/cli.hpp"

#include <chrono>
#include <cmath>
#include <optional>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <yaml-cpp/yaml.h>

#include "lfsep/errors.hpp"
#include "lfsep/experiment.hpp"
#include "lfsep/io.hpp"
#include "lfsep/textures.hpp"

namespace lfsep {

namespace {

/// Usage problems detected after flag parsing.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Options {
  fs::path manifest;
  fs::path out;
  fs::path input;
  fs::path params;
  fs::path dataset;
  fs::path validation;
  fs::path depths;
  double tolerance = 1e-6;
};

template <class... Args>
void log(fmt::format_string<Args...> f, Args&&... args) {
  fmt::print(stderr, "{}\n", fmt::format(f, std::forward<Args>(args)...));
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

ExperimentManifest load_checked(const Options& o) {
  if (!fs::exists(o.manifest)) throw UsageError("manifest '" + o.manifest.string() + "' does not exist");
  try {
    ExperimentManifest m = load_manifest(o.manifest);
    if (!o.out.empty()) m.output_dir = o.out;
    return m;
  } catch (const InvalidArgument& e) {
    throw UsageError(e.what());
  }
}

fs::path or_default(const fs::path& flag, const fs::path& fallback) { return flag.empty() ? fallback : flag; }

void write_resolved(const ExperimentManifest& m) {
  fs::create_directories(m.output_dir);
  write_text(m.output_dir / "manifest.yaml", manifest_to_yaml(m));
}

std::string fmt_metric(double v) { return fmt::format("{:.10f}", v); }

void cmd_simulate(const Options& o) {
  const ExperimentManifest m = load_checked(o);
  write_resolved(m);
  const CameraConfig cfg = m.camera_config();
  const std::vector<Image> tex = m.textures();
  const TextureVolume vol = m.scene(tex);
  const auto t0 = std::chrono::steady_clock::now();
  const LightFieldImage l = simulate_observation(vol, cfg, m.observation_options());
  save_lightfield(m.output_dir / "observation.pfm", l);
  write_pfm(m.output_dir / "texture_t.pfm", vol.layer_t);
  write_pfm(m.output_dir / "texture_r.pfm", vol.layer_r);
  save_camera(m.output_dir / "camera.yaml", cfg);
  log("simulate: {}x{} px observation at depths {} / {} m in {:.2f} s", cfg.sensor_size.height, cfg.sensor_size.width,
      m.depth_t, m.depth_r, seconds_since(t0));
}

void cmd_verify(const Options& o) {
  const ExperimentManifest m = load_checked(o);
  const fs::path input = or_default(o.input, m.output_dir / "observation.pfm");
  const CameraConfig cfg = m.camera_config();
  const LightFieldImage stored = load_lightfield(input, cfg);
  const TextureVolume vol = m.scene(m.textures());
  const ObservationOptions opts = m.observation_options();
  Image ref;
  if (m.noise_sigma == 0.0) {
    TextureVolume blurred = vol;
    if (opts.blur_t) blurred.layer_t = blur_texture(vol.layer_t, *opts.blur_t);
    if (opts.blur_r) blurred.layer_r = blur_texture(vol.layer_r, *opts.blur_r);
    ref = forward_model(blurred, build_psf_bank(cfg, vol.depth_t), build_psf_bank(cfg, vol.depth_r));
  } else {
    ref = simulate_observation(vol, cfg, opts).plane(0);
  }
  double max_diff = 0.0;
  double max_ref = 0.0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    max_diff = std::max(max_diff, std::abs(stored.plane(0).data()[i] - ref.data()[i]));
    max_ref = std::max(max_ref, std::abs(ref.data()[i]));
  }
  const double tol = o.tolerance * std::max(max_ref, 1e-300);
  log("verify: max |stored - forward model| = {:.3e} (tolerance {:.3e})", max_diff, tol);
  if (!(max_diff <= tol)) throw std::runtime_error("verify: observation does not match the forward model");
  log("verify: OK");
}

void cmd_gen_dataset(const Options& o) {
  const ExperimentManifest m = load_checked(o);
  write_resolved(m);
  const DepthNetSpec& d = m.depthnet;
  const CameraConfig cfg = m.camera_config();
  const LabelSet labels = d.label_set();
  const auto t0 = std::chrono::steady_clock::now();
  const auto corpus = texture_corpus({d.corpus_size, d.corpus_size}, d.corpus_count, d.corpus_seed);
  const PatchSet train = generate_training_set(corpus, cfg, labels, d.dataset);
  const auto held_out = texture_corpus({d.corpus_size, d.corpus_size}, d.corpus_count, d.validation_seed);
  TrainingSetConfig vc = d.dataset;
  vc.patches_per_label = d.validation_per_label;
  vc.seed = d.validation_seed;
  const PatchSet val = generate_training_set(held_out, cfg, labels, vc);
  save_patch_set(m.output_dir / "dataset", train);
  save_patch_set(m.output_dir / "validation", val);
  log("gen-dataset: {} labels, {} training and {} validation patches ({} channels) in {:.1f} s", labels.size(),
      train.size(), val.size(), train.channels, seconds_since(t0));
}

void cmd_train(const Options& o) {
  const ExperimentManifest m = load_checked(o);
  write_resolved(m);
  const DepthNetSpec& d = m.depthnet;
  const LabelSet labels = d.label_set();
  const PatchSet train = load_patch_set(or_default(o.dataset, m.output_dir / "dataset"));
  const fs::path val_dir = or_default(o.validation, m.output_dir / "validation");
  std::optional<PatchSet> val;
  if (fs::exists(val_dir / "manifest.yaml")) val = load_patch_set(val_dir);

  NetArch arch = d.arch;
  arch.in_channels = train.channels;
  arch.labels = labels.size();
  std::string log_csv = "iteration,loss,lr\n";
  const auto t0 = std::chrono::steady_clock::now();
  const TrainResult res = net_train(train, arch, d.train, [&](const TrainLogEntry& e) {
    log_csv += fmt::format("{},{:.8f},{}\n", e.iteration, e.loss, e.lr);
    if (e.iteration % 200 == 0) log("train: iteration {} loss {:.4f} lr {}", e.iteration, e.loss, e.lr);
  });
  save_params(m.output_dir / "params.bin", res.params);
  write_text(m.output_dir / "train_log.csv", log_csv);

  std::string metrics = fmt::format("train_accuracy: {}\n", fmt_metric(accuracy(predict(res.params, train), train.labels)));
  if (val) {
    const std::vector<int> pred = predict(res.params, *val);
    int errors = 0;
    int adjacent = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
      if (pred[i] == val->labels[i]) continue;
      ++errors;
      adjacent += adjacent_labels(labels, pred[i], val->labels[i]) ? 1 : 0;
    }
    metrics += fmt::format("validation_accuracy: {}\nvalidation_errors: {}\nadjacent_errors: {}\n",
                           fmt_metric(accuracy(pred, val->labels)), errors, adjacent);
  }
  write_text(m.output_dir / "metrics.yaml", metrics);
  log("train: done in {:.1f} s\n{}", seconds_since(t0), metrics);
}

void cmd_classify(const Options& o) {
  const ExperimentManifest m = load_checked(o);
  write_resolved(m);
  const LabelSet labels = m.depthnet.label_set();
  const NetParams<float> params = load_params(or_default(o.params, m.output_dir / "params.bin"));
  if (params.arch.labels != labels.size()) throw UsageError("classify: parameters do not match the manifest label set");
  const LightFieldImage l = load_lightfield(or_default(o.input, m.output_dir / "observation.pfm"), m.camera_config());
  const LabelMap map = classify_full_image(params, l, nullptr, m.depthnet.dataset.rho);
  const DepthMapPair maps = labels_to_depth_maps(map, labels);
  const LayerDepths depths = median_depths(maps);
  write_pfm(m.output_dir / "depth_near.pfm", maps.depth_near);
  write_pfm(m.output_dir / "depth_far.pfm", maps.depth_far);
  Image mask(maps.reflection_mask.rows(), maps.reflection_mask.cols());
  for (int r = 0; r < mask.rows(); ++r) {
    for (int c = 0; c < mask.cols(); ++c) mask(r, c) = maps.reflection_mask(r, c) != 0 ? 1.0 : 0.0;
  }
  write_pgm16(m.output_dir / "reflection_mask.pgm", mask);
  std::string tsv = "row\tcol\tlabel\tnear_m\tfar_m\tconfidence\n";
  for (int r = 0; r < map.labels.rows(); ++r) {
    for (int c = 0; c < map.labels.cols(); ++c) {
      tsv += fmt::format("{}\t{}\t{}\t{}\t{}\t{:.6f}\n", r, c, map.labels(r, c), maps.depth_near(r, c),
                         maps.depth_far(r, c), map.confidence(r, c));
    }
  }
  write_text(m.output_dir / "labels.tsv", tsv);
  std::string yaml = fmt::format("d_t: {}  # m, median of the near map\n", depths.d_t);
  yaml += depths.d_r ? fmt::format("d_r: {}  # m, median of the far map over reflection units\n", *depths.d_r)
                     : std::string("d_r: null  # no reflection detected\n");
  write_text(m.output_dir / "depths.yaml", yaml);
  log("classify: {}x{} label map, d_t = {} m, d_r = {}", map.labels.rows(), map.labels.cols(), depths.d_t,
      depths.d_r ? fmt::format("{} m", *depths.d_r) : std::string("none"));
}

/// Layer depths from a classify result, or the manifest scene.
std::pair<double, double> layer_depths(const ExperimentManifest& m, const Options& o) {
  if (o.depths.empty()) return {m.depth_t, m.depth_r};
  YAML::Node n;
  try {
    n = YAML::LoadFile(o.depths.string());
  } catch (const YAML::BadFile&) {
    throw IoError("cannot read '" + o.depths.string() + "'");
  }
  if (!n["d_t"]) throw UsageError("depths file has no d_t");
  const auto d_t = n["d_t"].as<double>();
  if (!n["d_r"] || n["d_r"].IsNull()) {
    log("warning: no reflection detected; both layers use d_t");
    return {d_t, d_t};
  }
  return {d_t, n["d_r"].as<double>()};
}

std::string trace_csv(const std::vector<double>& objective) {
  std::string s = "iteration,objective\n";
  for (std::size_t i = 0; i < objective.size(); ++i) s += fmt::format("{},{:.17g}\n", i, objective[i]);
  return s;
}

void cmd_reconstruct(const Options& o) {
  const ExperimentManifest m = load_checked(o);
  write_resolved(m);
  const CameraConfig cfg = m.camera_config();
  const LightFieldImage l = load_lightfield(or_default(o.input, m.output_dir / "observation.pfm"), cfg);
  const auto [d_t, d_r] = layer_depths(m, o);
  const auto t0 = std::chrono::steady_clock::now();
  SolverTrace trace;
  const TextureVolume est =
      reconstruct_layers(l, build_psf_bank(cfg, d_t), build_psf_bank(cfg, d_r), m.recon, &trace);
  write_pfm(m.output_dir / "layer_t.pfm", est.layer_t);
  write_pfm(m.output_dir / "layer_r.pfm", est.layer_r);
  write_text(m.output_dir / "recon_trace.csv", trace_csv(trace.objective));
  const TextureVolume truth = m.scene(m.textures());
  const double nt = ncc(est.layer_t, truth.layer_t);
  const double nr = ncc(est.layer_r, truth.layer_r);
  write_text(m.output_dir / "recon_metrics.yaml",
             fmt::format("depth_t: {}\ndepth_r: {}\niterations: {}\nconverged: {}\nncc_t: {}\nncc_r: {}\n", d_t, d_r,
                         trace.iterations, trace.converged, fmt_metric(nt), fmt_metric(nr)));
  log("reconstruct: depths {} / {} m, {} iterations in {:.1f} s, NCC t {:.4f} r {:.4f}", d_t, d_r, trace.iterations,
      seconds_since(t0), nt, nr);
}

void cmd_deblur(const Options& o) {
  const ExperimentManifest m = load_checked(o);
  write_resolved(m);
  const CameraConfig cfg = m.camera_config();
  const LightFieldImage l = load_lightfield(or_default(o.input, m.output_dir / "observation.pfm"), cfg);
  const auto [d_t, d_r] = layer_depths(m, o);
  const auto t0 = std::chrono::steady_clock::now();
  const DeblurState st =
      deblur_and_separate(l, build_psf_bank(cfg, d_t), build_psf_bank(cfg, d_r), m.recon, m.deblur_kernel_size,
                          m.deblur_outer_iters, m.deblur, [](const IterationRecord& r) {
                            log("deblur: outer iteration {} objective {:.6e}", r.iteration, r.objective);
                          });
  if (st.diverged) throw Diverged("deblur: solver diverged");
  write_pfm(m.output_dir / "deblur_t.pfm", st.u_t);
  write_pfm(m.output_dir / "deblur_r.pfm", st.u_r);
  write_pfm(m.output_dir / "kernel_t.pfm", st.m_t.weights());
  write_pfm(m.output_dir / "kernel_r.pfm", st.m_r.weights());
  write_text(m.output_dir / "deblur_trace.csv", trace_csv(st.objective_trace));
  const TextureVolume truth = m.scene(m.textures());
  std::string metrics = fmt::format("ncc_t: {}\nncc_r: {}\n", fmt_metric(ncc(st.u_t, truth.layer_t)),
                                    fmt_metric(ncc(st.u_r, truth.layer_r)));
  const auto kernel_l1 = [&](const char* key, const std::optional<BlurSpec>& spec, const BlurKernel& est) {
    const BlurKernel known = spec ? spec->make() : BlurKernel::delta(m.deblur_kernel_size);
    if (known.size() == est.size()) metrics += fmt::format("{}: {}\n", key, fmt_metric(kernel_l1_distance(est, known)));
  };
  kernel_l1("kernel_l1_t", m.blur_t, st.m_t);
  kernel_l1("kernel_l1_r", m.blur_r, st.m_r);
  write_text(m.output_dir / "deblur_metrics.yaml", metrics);
  log("deblur: done in {:.1f} s\n{}", seconds_since(t0), metrics);
}

void cmd_evaluate_sweep(const Options& o) {
  const ExperimentManifest m = load_checked(o);
  write_resolved(m);
  const auto t0 = std::chrono::steady_clock::now();
  const std::vector<SweepPoint> points = run_sweep(m, m.sweep.save_layers, [](const SweepPoint& p) {
    log("evaluate-sweep: {:.2f} m / {:.2f} m  NCC t {:.4f} r {:.4f}", p.fixed_depth, p.other_depth, p.mean_ncc_t,
        p.mean_ncc_r);
  });
  emit_ncc_curve(points, m.output_dir / "ncc_curve");
  if (m.sweep.save_layers) {
    for (const SweepPoint& p : points) {
      for (std::size_t k = 0; k < p.layers.size(); ++k) {
        const std::string stem = fmt::format("layers/{:.2f}_{:.2f}_pair{}", p.fixed_depth, p.other_depth, k);
        write_pfm(m.output_dir / (stem + "_t.pfm"), p.layers[k].layer_t);
        write_pfm(m.output_dir / (stem + "_r.pfm"), p.layers[k].layer_r);
      }
    }
  }
  log("evaluate-sweep: {} points in {:.1f} s", points.size(), seconds_since(t0));
}

}  // namespace

int run_command(const std::vector<std::string>& args) {
  CLI::App app{"Reflection separation with a simulated light-field camera", args.empty() ? "lfsep" : args[0]};
  app.require_subcommand(1);
  app.fallthrough(false);
  Options o;

  const auto manifest_flag = [&](CLI::App* sub) {
    sub->add_option("-m,--manifest", o.manifest, "Experiment manifest (YAML)")->required();
    sub->add_option("-o,--out", o.out, "Output directory (overrides output.dir)");
  };
  struct Entry {
    CLI::App* app;
    void (*run)(const Options&);
  };
  std::vector<Entry> subs;

  CLI::App* sim = app.add_subcommand("simulate", "Render the manifest scene to observation.pfm");
  manifest_flag(sim);
  subs.push_back({sim, cmd_simulate});

  CLI::App* gen = app.add_subcommand("gen-dataset", "Generate training and held-out patch datasets");
  manifest_flag(gen);
  subs.push_back({gen, cmd_gen_dataset});

  CLI::App* train = app.add_subcommand("train", "Train the depth classifier on a patch dataset");
  manifest_flag(train);
  train->add_option("--dataset", o.dataset, "Training dataset directory (default <out>/dataset)");
  train->add_option("--validation", o.validation, "Held-out dataset directory (default <out>/validation)");
  subs.push_back({train, cmd_train});

  CLI::App* cls = app.add_subcommand("classify", "Label map, depth maps and median layer depths of an observation");
  manifest_flag(cls);
  cls->add_option("-i,--input", o.input, "Observation (.pfm or .pgm, default <out>/observation.pfm)");
  cls->add_option("--params", o.params, "Network parameters (default <out>/params.bin)");
  subs.push_back({cls, cmd_classify});

  CLI::App* rec = app.add_subcommand("reconstruct", "Separate the two layers at known or classified depths");
  manifest_flag(rec);
  rec->add_option("-i,--input", o.input, "Observation (default <out>/observation.pfm)");
  rec->add_option("--depths", o.depths, "depths.yaml from classify (default: manifest scene depths)");
  subs.push_back({rec, cmd_reconstruct});

  CLI::App* deb = app.add_subcommand("deblur", "Joint layer separation and blur kernel estimation");
  manifest_flag(deb);
  deb->add_option("-i,--input", o.input, "Observation (default <out>/observation.pfm)");
  deb->add_option("--depths", o.depths, "depths.yaml from classify (default: manifest scene depths)");
  subs.push_back({deb, cmd_deblur});

  CLI::App* sweep = app.add_subcommand("evaluate-sweep", "Mean NCC over the depth-pair sweep (CSV and PPM plot)");
  manifest_flag(sweep);
  subs.push_back({sweep, cmd_evaluate_sweep});

  CLI::App* ver = app.add_subcommand("verify", "Check a stored observation against the forward model");
  manifest_flag(ver);
  ver->add_option("-i,--input", o.input, "Observation (default <out>/observation.pfm)");
  ver->add_option("--tolerance", o.tolerance, "Allowed max difference relative to the largest value")
      ->check(CLI::PositiveNumber);
  subs.push_back({ver, cmd_verify});

  try {
    // CLI11 consumes a reversed argument list without the program name.
    std::vector<std::string> rest(args.rbegin(), args.rend());
    if (!rest.empty()) rest.pop_back();
    app.parse(rest);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  for (const Entry& s : subs) {
    if (!s.app->parsed()) continue;
    try {
      s.run(o);
      return kExitOk;
    } catch (const UsageError& e) {
      fmt::print(stderr, "error: {}\n", e.what());
      return kExitUsage;
    } catch (const std::exception& e) {
      fmt::print(stderr, "error: {}\n", e.what());
      return kExitFailure;
    }
  }
  return kExitUsage;
}

int run_command(int argc, const char* const* argv) {
  return run_command(std::vector<std::string>(argv, argv + argc));
}

}  // namespace lfsep
