#include <doctest.h>

#include <fstream>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "lfsep/cli.hpp"
#include "lfsep/errors.hpp"
#include "lfsep/experiment.hpp"
#include "lfsep/io.hpp"
#include "scratch_dir.hpp"

using namespace lfsep;

namespace {

const char* const kSmall = R"(schema: 1
camera:
  preset: desk
  units: [10, 10]
scene:
  depth_t: 0.35
  depth_r: 1.7
textures:
  count: 4
  seed: 7
recon:
  max_iters: 40
sweep:
  fixed_depths: [0.35]
  depth_min: 0.35
  depth_max: 0.65
  depth_step: 0.15
  texture_pairs: 1
output:
  dir: out
)";

int run(const std::vector<std::string>& args) {
  std::vector<std::string> full{"lfsep"};
  full.insert(full.end(), args.begin(), args.end());
  return run_command(full);
}

std::string manifest_in(const ScratchDir& dir, const std::string& extra = "") {
  const fs::path path = dir / "manifest.yaml";
  write_text(path, std::string(kSmall) + extra);
  return path.string();
}

}  // namespace

TEST_CASE("manifest parsing") {
  const ExperimentManifest m = parse_manifest(kSmall, "/data/run");
  CHECK(m.units == Extent{10, 10});
  CHECK(m.recon.max_iters == 40);
  CHECK(m.output_dir == fs::path("/data/run/out"));
  CHECK(m.sweep.depths().size() == 3);
  CHECK(m.sweep.depths()[1] == 0.5);
  CHECK(m.depthnet.label_set().size() == 16);
  CHECK(m.camera_config().sensor_size == Extent{120, 120});

  const ExperimentManifest again = parse_manifest(manifest_to_yaml(m));
  CHECK(manifest_to_yaml(again) == manifest_to_yaml(m));

  CHECK_THROWS_AS(parse_manifest(std::string(kSmall) + "bogus: 1\n"), InvalidArgument);
  CHECK_THROWS_AS(parse_manifest("schema: 1\nscene:\n  depht_t: 0.4\n"), InvalidArgument);
  CHECK_THROWS_AS(parse_manifest("schema: 2\n"), InvalidArgument);
  CHECK_THROWS_AS(parse_manifest("schema: 1\nscene:\n  depth_t: [1\n"), InvalidArgument);
  CHECK_THROWS_AS(parse_manifest("schema: 1\nscene:\n  blur_t: {type: line, size: 4, length: 3, angle: 0}\n"),
                  InvalidArgument);
  CHECK_FALSE(parse_manifest("schema: 1\nrecon:\n  nu: auto\n").recon.nu.has_value());
}

TEST_CASE("command line exit codes") {
  const ScratchDir dir("cli_codes");
  CHECK(run({"--help"}) == kExitOk);
  CHECK(run({}) == kExitUsage);
  CHECK(run({"frobnicate"}) == kExitUsage);
  CHECK(run({"simulate"}) == kExitUsage);
  CHECK(run({"simulate", "-m", manifest_in(dir), "--bogus"}) == kExitUsage);
  CHECK(run({"simulate", "-m", (dir / "absent.yaml").string()}) == kExitUsage);
  write_text(dir / "bad.yaml", "schema: 1\nscene:\n  depth_t: -1\n");
  CHECK(run({"simulate", "-m", (dir / "bad.yaml").string()}) == kExitUsage);
  CHECK(run({"reconstruct", "-m", manifest_in(dir), "-i", (dir / "absent.pfm").string()}) == kExitFailure);
}

TEST_CASE("simulate, verify, classify and reconstruct") {
  const ScratchDir dir("cli_pipeline");
  const std::string manifest = manifest_in(dir);
  const fs::path out = dir / "out";
  REQUIRE(run({"simulate", "-m", manifest}) == kExitOk);
  for (const char* f : {"observation.pfm", "texture_t.pfm", "texture_r.pfm", "camera.yaml", "manifest.yaml"}) {
    CHECK(fs::exists(out / f));
  }
  CHECK(run({"verify", "-m", manifest}) == kExitOk);

  const ExperimentManifest m = load_manifest(manifest);
  const CameraConfig cfg = m.camera_config();
  CHECK(load_camera(out / "camera.yaml") == cfg);
  LightFieldImage obs = load_lightfield(out / "observation.pfm", cfg);
  Image tampered = obs.plane(0);
  tampered(5, 5) += 0.5;
  save_lightfield(dir / "tampered.pfm", LightFieldImage(cfg, tampered));
  CHECK(run({"verify", "-m", manifest, "-i", (dir / "tampered.pfm").string()}) == kExitFailure);

  NetArch arch = m.depthnet.arch;
  arch.in_channels = 88;
  arch.labels = m.depthnet.label_set().size();
  save_params(out / "params.bin", init_params<float>(arch, 4));
  REQUIRE(run({"classify", "-m", manifest}) == kExitOk);
  const YAML::Node depths = YAML::LoadFile((out / "depths.yaml").string());
  const LabelMap map = classify_full_image(load_params(out / "params.bin"), obs, nullptr, m.depthnet.dataset.rho);
  const LayerDepths expect = median_depths(labels_to_depth_maps(map, m.depthnet.label_set()));
  CHECK(depths["d_t"].as<double>() == expect.d_t);
  CHECK(depths["d_r"].IsNull() == !expect.d_r.has_value());

  write_text(dir / "known.yaml", "d_t: 0.35\nd_r: 1.7\n");
  REQUIRE(run({"reconstruct", "-m", manifest, "--depths", (dir / "known.yaml").string()}) == kExitOk);
  const TextureVolume direct = reconstruct_layers(obs, build_psf_bank(cfg, 0.35), build_psf_bank(cfg, 1.7), m.recon);
  Image t32 = direct.layer_t;
  for (double& v : t32) v = static_cast<float>(v);
  CHECK(read_pfm(out / "layer_t.pfm").at(0) == t32);
  const YAML::Node metrics = YAML::LoadFile((out / "recon_metrics.yaml").string());
  CHECK(metrics["ncc_t"].as<double>() == doctest::Approx(ncc(direct.layer_t, m.scene(m.textures()).layer_t)));

  write_text(dir / "flat.yaml", "d_t: 0.8\nd_r: null\n");
  CHECK(run({"reconstruct", "-m", manifest, "--depths", (dir / "flat.yaml").string()}) == kExitOk);
  CHECK(YAML::LoadFile((out / "recon_metrics.yaml").string())["depth_r"].as<double>() == 0.8);
}

TEST_CASE("sweep outputs: recomputation oracle and byte-identical reruns") {
  const ScratchDir dir("cli_sweep");
  const std::string manifest = manifest_in(dir);
  REQUIRE(run({"evaluate-sweep", "-m", manifest, "-o", (dir / "a").string()}) == kExitOk);
  REQUIRE(run({"evaluate-sweep", "-m", manifest, "-o", (dir / "b").string()}) == kExitOk);
  const std::string csv = read_text(dir / "a" / "ncc_curve.csv");
  CHECK(csv == read_text(dir / "b" / "ncc_curve.csv"));
  CHECK(read_text(dir / "a" / "ncc_curve.ppm") == read_text(dir / "b" / "ncc_curve.ppm"));

  // Independent recomputation of the 0.35 / 0.65 point.
  const ExperimentManifest m = load_manifest(manifest);
  const CameraConfig cfg = m.camera_config();
  const std::vector<Image> tex = m.textures();
  const TextureVolume truth{tex[0], tex[1], 0.35, 0.65};
  const PsfKernelBank bt = build_psf_bank(cfg, 0.35);
  const PsfKernelBank br = build_psf_bank(cfg, 0.65);
  const TextureVolume est = reconstruct_layers(LightFieldImage(cfg, forward_model(truth, bt, br)), bt, br, m.recon);

  std::istringstream lines(csv);
  std::string line;
  std::getline(lines, line);
  CHECK(line == "fixed_layer_depth,other_layer_depth,mean_ncc_t,mean_ncc_r");
  std::vector<std::vector<double>> rows;
  while (std::getline(lines, line)) {
    std::vector<double> row;
    std::istringstream cells(line);
    for (std::string cell; std::getline(cells, cell, ',');) row.push_back(std::stod(cell));
    rows.push_back(row);
  }
  REQUIRE(rows.size() == 2);
  CHECK(rows[0][0] == 0.35);
  CHECK(rows[0][1] == 0.5);
  CHECK(rows[1][1] == 0.65);
  CHECK(std::abs(rows[1][2] - ncc(est.layer_t, truth.layer_t)) < 1e-9);
  CHECK(std::abs(rows[1][3] - ncc(est.layer_r, truth.layer_r)) < 1e-9);

  ExperimentManifest threaded = m;
  threaded.sweep.threads = 2;
  CHECK(ncc_curve_csv(run_sweep(threaded)) == csv);
}

TEST_CASE("NCC curve emission") {
  const ScratchDir dir("curve");
  SweepPoint p;
  p.fixed_depth = 0.35;
  p.other_depth = 1.1;
  p.mean_ncc_t = 0.97;
  p.mean_ncc_r = 0.95;
  emit_ncc_curve({p}, dir / "curve");
  CHECK(read_text(dir / "curve.csv") ==
        "fixed_layer_depth,other_layer_depth,mean_ncc_t,mean_ncc_r\n0.3500,1.1000,0.9700000000,0.9500000000\n");
  const std::string ppm = read_text(dir / "curve.ppm");
  CHECK(ppm.rfind("P6\n540 360\n255\n", 0) == 0);
  CHECK(ppm.size() == 15 + 540 * 360 * 3);
  CHECK_THROWS_AS(emit_ncc_curve({}, dir / "empty"), InvalidArgument);
}
