// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <fmt/core.h>

#include "lfsep/cli.hpp"
#include "lfsep/depthnet.hpp"
#include "lfsep/experiment.hpp"
#include "lfsep/io.hpp"
#include "lfsep/recon.hpp"
#include "lfsep/textures.hpp"
#include "oracles.hpp"
#include "scratch_dir.hpp"

using namespace lfsep;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

void note(const std::string& s) { fmt::print(stderr, "  {}\n", s); }

// 1. Dense-matrix oracles and the adjoint dot test.
Outcome operators() {
  double worst = 0.0;
  const CameraConfig tiny = desk_camera({4, 4});  // 12 x 12 texture
  const Extent tex = tiny.texture_size();
  for (double depth : {0.25, 0.35, 0.5, 0.8, 1.7, 2.5}) {
    const PsfKernelBank bank = build_psf_bank(tiny, depth);
    const Eigen::MatrixXd h = oracle::dense_psf_matrix(tiny, depth);
    const Image f = oracle::random_image(tex.height, tex.width, 1, -1.0, 1.0);
    const Image l = oracle::random_image(tiny.sensor_size.height, tiny.sensor_size.width, 2, -1.0, 1.0);
    worst = std::max(worst, (oracle::flat(apply_psf(bank, f)) - h * oracle::flat(f)).cwiseAbs().maxCoeff());
    worst = std::max(worst,
                     (oracle::flat(apply_psf_adjoint(bank, l)) - h.transpose() * oracle::flat(l)).cwiseAbs().maxCoeff());
  }
  const Image u = oracle::random_image(16, 16, 3);
  for (const BlurKernel& m : {BlurKernel::box(3), BlurKernel::line(5, 4.0, 30.0), BlurKernel::line(5, 4.0, 120.0)}) {
    const Eigen::MatrixXd b = oracle::dense_blur_matrix(m.weights(), 16, 16);
    worst = std::max(worst, (oracle::flat(blur_texture(u, m)) - b * oracle::flat(u)).cwiseAbs().maxCoeff());
    worst = std::max(worst,
                     (oracle::flat(blur_texture_adjoint(u, m)) - b.transpose() * oracle::flat(u)).cwiseAbs().maxCoeff());
  }

  double dot_err = 0.0;
  const CameraConfig cfg = desk_camera({16, 16});
  const Extent t16 = cfg.texture_size();
  for (int i = 0; i < 50; ++i) {
    const PsfKernelBank bank = build_psf_bank(cfg, 0.3 + 0.04 * i);
    const Image f = oracle::random_image(t16.height, t16.width, 100 + i, -1.0, 1.0);
    const Image l = oracle::random_image(cfg.sensor_size.height, cfg.sensor_size.width, 200 + i, -1.0, 1.0);
    dot_err = std::max(dot_err, oracle::rel_err(dot(apply_psf(bank, f), l), dot(f, apply_psf_adjoint(bank, l))));
  }
  return {worst < 1e-10 && dot_err < 1e-10,
          fmt::format("dense oracle max abs diff {:.2e}, dot test max rel err {:.2e} over 50 pairs", worst, dot_err)};
}

// 2. TV and data-term gradients against finite differences.
Outcome gradients() {
  double tv_err = 0.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const Image u = oracle::random_image(8, 8, seed);
    const TvResult tv = tv_value_grad(u, 1e-2);
    for (std::size_t i = 0; i < u.size(); ++i) {
      const double fd = oracle::five_point_difference([](const Image& x) { return tv_value_grad(x, 1e-2).value; }, u, i, 1e-4);
      tv_err = std::max(tv_err, oracle::rel_err(tv.gradient[i], fd));
    }
  }
  const CameraConfig cfg = desk_camera({4, 4});
  const Extent tex = cfg.texture_size();
  const PsfKernelBank bt = build_psf_bank(cfg, 0.35);
  const PsfKernelBank br = build_psf_bank(cfg, 1.7);
  const LightFieldImage l(cfg, oracle::random_image(cfg.sensor_size.height, cfg.sensor_size.width, 9));
  const Image ut = oracle::random_image(tex.height, tex.width, 10);
  const Image ur = oracle::random_image(tex.height, tex.width, 11);
  const TextureObjective obj = texture_objective(l, bt, br, ut, ur, 0.0, 1e-2);
  double data_err = 0.0;
  for (std::size_t i = 0; i < ut.size(); ++i) {
    const double ft = oracle::central_difference(
        [&](const Image& x) { return texture_objective(l, bt, br, x, ur, 0.0, 1e-2).value; }, ut, i, 1e-5);
    const double fr = oracle::central_difference(
        [&](const Image& x) { return texture_objective(l, bt, br, ut, x, 0.0, 1e-2).value; }, ur, i, 1e-5);
    data_err = std::max({data_err, oracle::rel_err(obj.grad_t[i], ft), oracle::rel_err(obj.grad_r[i], fr)});
  }
  return {tv_err < 1e-5 && data_err < 1e-5,
          fmt::format("TV max rel err {:.2e}, data term max rel err {:.2e}", tv_err, data_err)};
}

// 3. Depth-pair sweep: quality at large gaps, degradation towards equal depth,
// dip at the focal-conjugate depth.
Outcome sweep(const fs::path& manifest) {
  const ExperimentManifest m = load_manifest(manifest);
  const auto t0 = std::chrono::steady_clock::now();
  const std::vector<SweepPoint> points = run_sweep(m);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const double min_gap = m.depthnet.min_gap;
  const double focal = m.camera_config().focal_conjugate_depth();
  const auto mean = [](const SweepPoint& p) { return 0.5 * (p.mean_ncc_t + p.mean_ncc_r); };
  const auto is_focal = [&](double d) { return std::abs(d - focal) < 1e-6; };

  // (a) both layers >= 0.90 wherever the inverse-depth gap exceeds min_gap.
  double worst_far = 1.0;
  int far_pairs = 0;
  for (const SweepPoint& p : points) {
    if (std::abs(1.0 / p.fixed_depth - 1.0 / p.other_depth) <= min_gap) continue;
    ++far_pairs;
    worst_far = std::min({worst_far, p.mean_ncc_t, p.mean_ncc_r});
  }
  const bool a = far_pairs > 0 && worst_far >= 0.90;

  // (b) walking towards the fixed depth from either side, the mean NCC never
  // rises by more than 0.02. The focal-conjugate point is left to (c).
  std::map<double, std::vector<const SweepPoint*>> curves;
  for (const SweepPoint& p : points) curves[p.fixed_depth].push_back(&p);
  double worst_rise = 0.0;
  for (auto& [fixed, curve] : curves) {
    std::vector<const SweepPoint*> below;
    std::vector<const SweepPoint*> above;
    for (const SweepPoint* p : curve) {
      if (is_focal(p->other_depth)) continue;
      (p->other_depth < fixed ? below : above).push_back(p);
    }
    std::reverse(above.begin(), above.end());  // both now end next to the fixed depth
    for (const auto* side : {&below, &above}) {
      for (std::size_t i = 1; i < side->size(); ++i) {
        worst_rise = std::max(worst_rise, mean(*(*side)[i]) - mean(*(*side)[i - 1]));
      }
    }
  }
  const bool b = worst_rise <= 0.02;

  // (c) the focal-conjugate point is a strict local minimum on some curve.
  std::string dip = "none";
  for (auto& [fixed, curve] : curves) {
    for (std::size_t i = 1; i + 1 < curve.size(); ++i) {
      if (!is_focal(curve[i]->other_depth)) continue;
      const double v = mean(*curve[i]);
      if (v < mean(*curve[i - 1]) && v < mean(*curve[i + 1])) {
        dip = fmt::format("{:.2f} m curve: {:.4f} vs {:.4f} / {:.4f}", fixed, v, mean(*curve[i - 1]),
                          mean(*curve[i + 1]));
        break;
      }
    }
    if (dip != "none") break;
  }
  const bool c = dip != "none";

  for (const SweepPoint& p : points) {
    note(fmt::format("sweep {:.2f} / {:.2f} m  NCC t {:.4f} r {:.4f}", p.fixed_depth, p.other_depth, p.mean_ncc_t,
                     p.mean_ncc_r));
  }
  return {a && b && c,
          fmt::format("{} points in {:.0f} s; (a) {} min NCC {:.4f} over {} pairs with gap > {:.2f} D; (b) {} max rise "
                      "{:.4f} towards equal depth; (c) {} dip at {:.2f} m ({})",
                      points.size(), secs, a ? "ok" : "FAIL", worst_far, far_pairs, min_gap, b ? "ok" : "FAIL",
                      worst_rise, c ? "ok" : "FAIL", focal, dip)};
}

// 4. Joint deblurring with known 5 x 5 motion kernels.
Outcome deblurring(const fs::path& manifest) {
  const ExperimentManifest m = load_manifest(manifest);
  const CameraConfig cfg = m.camera_config();
  const TextureVolume truth = m.scene(m.textures());
  const ObservationOptions opts = m.observation_options();
  const PsfKernelBank bt = build_psf_bank(cfg, truth.depth_t);
  const PsfKernelBank br = build_psf_bank(cfg, truth.depth_r);
  const LightFieldImage l = simulate_observation(truth, bt, br, opts);

  const DeblurState st = deblur_and_separate(l, bt, br, m.recon, m.deblur_kernel_size, m.deblur_outer_iters, m.deblur);
  const double nt = ncc(st.u_t, truth.layer_t);
  const double nr = ncc(st.u_r, truth.layer_r);
  double worst_rise = 0.0;
  for (std::size_t i = 1; i < st.objective_trace.size(); ++i) {
    worst_rise = std::max(worst_rise, st.objective_trace[i] - st.objective_trace[i - 1]);
  }
  const bool monotone = !st.diverged && st.objective_trace.size() >= 2 && worst_rise <= 1e-9;

  const KernelPair given = solve_blurs_given_textures(l, bt, br, truth.layer_t, truth.layer_r, m.deblur_kernel_size,
                                                      m.deblur.kernel);
  const double l1_t = kernel_l1_distance(given.t, *opts.blur_t);
  const double l1_r = kernel_l1_distance(given.r, *opts.blur_r);
  const double joint_l1 = std::max(kernel_l1_distance(st.m_t, *opts.blur_t), kernel_l1_distance(st.m_r, *opts.blur_r));
  return {nt >= 0.80 && nr >= 0.80 && l1_t < 0.05 && l1_r < 0.05 && monotone,
          fmt::format("joint NCC t {:.4f} r {:.4f}; kernel L1 with textures given t {:.2e} r {:.2e}; objective trace "
                      "max rise {:.2e} over {} outer iterations; joint kernel L1 {:.3f} (not a criterion)",
                      nt, nr, l1_t, l1_r, worst_rise, st.objective_trace.size() - 1, joint_l1)};
}

// 5. Desk-scale classifier. The trained parameters feed criterion 6.
Outcome classifier(const ExperimentManifest& m, std::optional<NetParams<float>>& trained) {
  const DepthNetSpec& d = m.depthnet;
  const CameraConfig cfg = m.camera_config();
  const LabelSet labels = d.label_set();
  const auto t0 = std::chrono::steady_clock::now();
  const PatchSet train =
      generate_training_set(texture_corpus({d.corpus_size, d.corpus_size}, d.corpus_count, d.corpus_seed), cfg, labels,
                            d.dataset);
  TrainingSetConfig vc = d.dataset;
  vc.patches_per_label = d.validation_per_label;
  vc.seed = d.validation_seed;
  const PatchSet val = generate_training_set(
      texture_corpus({d.corpus_size, d.corpus_size}, d.corpus_count, d.validation_seed), cfg, labels, vc);

  NetArch arch = d.arch;
  arch.in_channels = train.channels;
  arch.labels = labels.size();
  const TrainResult res = net_train(train, arch, d.train);
  trained = res.params;
  const std::vector<int> pred = predict(res.params, val);
  const double acc = accuracy(pred, val.labels);
  int errors = 0;
  int adjacent = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] == val.labels[i]) continue;
    ++errors;
    const bool adj = adjacent_labels(labels, pred[i], val.labels[i]);
    adjacent += adj ? 1 : 0;
    const Label& t = labels[val.labels[i]];
    const Label& p = labels[pred[i]];
    note(fmt::format("held-out error: true ({}, {}) predicted ({}, {}){}", t.near, t.far, p.near, p.far,
                     adj ? " adjacent" : ""));
  }
  const double adjacent_share = errors == 0 ? 1.0 : static_cast<double>(adjacent) / errors;
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  // Overfit: ten training patches, ten distinct labels.
  PatchSet ten{train.patch, train.channels, {}, {}};
  for (int i = 0; i < 10; ++i) {
    const auto first = train.data.begin() + static_cast<std::ptrdiff_t>(train.sample_stride()) * i;
    ten.data.insert(ten.data.end(), first, first + static_cast<std::ptrdiff_t>(train.sample_stride()));
    ten.labels.push_back(train.labels[static_cast<std::size_t>(i)]);
  }
  TrainConfig oc = d.train;
  oc.batch = 10;
  oc.max_iters = 300;
  oc.weight_decay = 0.0;
  const double overfit = accuracy(predict(net_train(ten, arch, oc).params, ten), ten.labels);

  return {acc >= 0.90 && adjacent_share >= 0.95 && overfit == 1.0,
          fmt::format("held-out accuracy {:.4f} ({} of {} wrong), adjacent errors {} of {} ({:.0f}%), 10-sample overfit "
                      "accuracy {:.2f}; {:.0f} s",
                      acc, errors, pred.size(), adjacent, errors, 100.0 * adjacent_share, overfit, secs)};
}

// 6. Shared-convolution inference against the sliding window.
Outcome inference(const ExperimentManifest& m, const std::optional<NetParams<float>>& trained) {
  NetParams<double> p;
  if (trained) {
    p = cast_params<double>(*trained);
  } else {
    NetArch arch = m.depthnet.arch;
    arch.in_channels = 88;
    arch.labels = m.depthnet.label_set().size();
    p = init_params<double>(arch, 1);
  }
  ExperimentManifest big = m;
  big.units = Extent{40, 40};
  const CameraConfig cfg = big.camera_config();
  const TextureVolume vol = big.scene(big.textures());
  const LightFieldImage l = simulate_observation(vol, cfg);

  MacCounter fast_macs;
  MacCounter slow_macs;
  const LabelMap fast = classify_full_image(p, l, &fast_macs, m.depthnet.dataset.rho);
  const LabelMap slow = classify_sliding_window(p, l, &slow_macs, m.depthnet.dataset.rho);
  std::size_t agree = 0;
  for (std::size_t i = 0; i < fast.labels.size(); ++i) agree += fast.labels[i] == slow.labels[i] ? 1 : 0;
  const double share = static_cast<double>(agree) / static_cast<double>(fast.labels.size());
  const double logit_diff = (fast.logits - slow.logits).cwiseAbs().maxCoeff();
  const double ratio = static_cast<double>(slow_macs.conv) / static_cast<double>(fast_macs.conv);
  const int patch = p.arch.patch;
  const double bound = patch * patch / 4.0;
  return {share >= 0.999 && agree == fast.labels.size() && logit_diff < 1e-4 && ratio >= bound,
          fmt::format("{} of {} units agree ({} params), max logit diff {:.2e}; conv MAC ratio {:.1f} (bound {:.0f})",
                      agree, fast.labels.size(), trained ? "trained" : "random", logit_diff, ratio, bound)};
}

// 7. Simplex projection against an enumeration QP oracle.
Outcome simplex() {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> len(1, 12);
  std::normal_distribution<double> g(0.0, 1.0);
  double worst = 0.0;
  bool idempotent = true;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> v(static_cast<std::size_t>(len(rng)));
    for (double& x : v) x = g(rng) * (trial % 3 == 0 ? 5.0 : 1.0);
    const std::vector<double> p = project_simplex(v);
    const std::vector<double> ref = oracle::brute_force_simplex(v);
    for (std::size_t i = 0; i < v.size(); ++i) worst = std::max(worst, std::abs(p[i] - ref[i]));
    idempotent = idempotent && project_simplex(p) == p;
  }
  return {worst < 1e-10 && idempotent,
          fmt::format("max abs diff {:.2e} over 100 vectors, idempotence {}", worst, idempotent ? "exact" : "broken")};
}

// 8. Reruns of the same manifests give byte-identical CSV files.
Outcome reproducibility() {
  const ScratchDir dir("acceptance_repro");
  write_text(dir / "run.yaml", R"(schema: 1
camera: {preset: desk, units: [12, 12]}
scene: {depth_t: 0.35, depth_r: 1.7, noise_sigma: 0.01, seed: 3,
        blur_t: {type: line, size: 3, length: 2, angle: 30}}
textures: {count: 4, seed: 7}
deblur: {kernel_size: 3, outer_iters: 2, texture_iters: 20}
sweep: {fixed_depths: [0.5], depth_min: 0.35, depth_max: 0.95, depth_step: 0.15, texture_pairs: 2, threads: 2}
depthnet:
  levels: 4
  pairs: 2
  min_gap: 1.5
  arch: {patch: 8, c1: 4, c2: 4, c3: 4, hidden: 8}
  dataset: {margin: 1, patches_per_label: 4, noise_sigma: 0.01}
  train: {batch: 8, max_iters: 20}
  corpus: {size: 48, count: 2}
  validation: {per_label: 2}
)");
  const std::vector<std::vector<std::string>> steps = {
      {"simulate"}, {"reconstruct"}, {"deblur"}, {"evaluate-sweep"}, {"gen-dataset"}, {"train"}, {"classify"}};
  for (const char* run : {"a", "b"}) {
    for (const auto& step : steps) {
      std::vector<std::string> args{"lfsep", step[0], "-m", (dir / "run.yaml").string(), "-o", (dir / run).string()};
      if (run_command(args) != kExitOk) return {false, fmt::format("'{}' failed in run {}", step[0], run)};
    }
  }
  std::vector<std::string> files;
  bool identical = true;
  for (const auto& entry : fs::recursive_directory_iterator(dir / "a")) {
    if (entry.path().extension() != ".csv") continue;
    const fs::path rel = fs::relative(entry.path(), dir / "a");
    files.push_back(rel.string());
    identical = identical && fs::exists(dir / "b" / rel) && read_text(entry.path()) == read_text(dir / "b" / rel);
  }
  std::sort(files.begin(), files.end());
  std::string list;
  for (const std::string& f : files) list += (list.empty() ? "" : ", ") + f;
  return {identical && files.size() >= 4, fmt::format("{} CSV files compared ({}): {}", files.size(), list,
                                                      identical ? "byte-identical" : "DIFFERENT")};
}

}  // namespace

int main() {
  const fs::path manifests = LFSEP_MANIFEST_DIR;
  std::optional<NetParams<float>> trained;
  const ExperimentManifest desk = load_manifest(manifests / "desk.yaml");
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"operator correctness", operators},
      {"gradient checks", gradients},
      {"depth-pair sweep", [&] { return sweep(manifests / "sweep.yaml"); }},
      {"joint deblurring", [&] { return deblurring(manifests / "deblur.yaml"); }},
      {"depth classifier", [&] { return classifier(desk, trained); }},
      {"shared-conv inference", [&] { return inference(desk, trained); }},
      {"simplex projection", simplex},
      {"reproducibility", reproducibility},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += o.pass ? 0 : 1;
    fmt::print("[{}] {} {}: {}\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail);
    std::fflush(stdout);
  }
  fmt::print("{} of {} criteria passed\n", criteria.size() - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
