#include <doctest.h>

#include <cstring>
#include <fstream>

#include <yaml-cpp/yaml.h>

#include "lfsep/errors.hpp"
#include "lfsep/io.hpp"
#include "oracles.hpp"
#include "scratch_dir.hpp"

using namespace lfsep;

namespace {

Image float_exact(Image img) {
  for (double& v : img) v = static_cast<float>(v);
  return img;
}

}  // namespace

TEST_CASE("PFM: round trip and row order") {
  const ScratchDir dir("pfm");
  const Image a = float_exact(oracle::random_image(5, 7, 1));
  write_pfm(dir / "a.pfm", a);
  const std::vector<Image> back = read_pfm(dir / "a.pfm");
  REQUIRE(back.size() == 1);
  CHECK(back[0] == a);

  const std::vector<Image> rgb{float_exact(oracle::random_image(3, 4, 2)), float_exact(oracle::random_image(3, 4, 3)),
                               float_exact(oracle::random_image(3, 4, 4))};
  write_pfm(dir / "rgb.pfm", rgb);
  CHECK(read_pfm(dir / "rgb.pfm") == rgb);

  // Hand-written file: rows are stored bottom to top.
  {
    std::ofstream out(dir / "hand.pfm", std::ios::binary);
    out << "Pf\n# comment\n1 2\n-1.0\n";
    const float rows[2] = {2.0f, 7.0f};
    out.write(reinterpret_cast<const char*>(rows), sizeof rows);
  }
  const Image hand = read_pfm(dir / "hand.pfm").at(0);
  CHECK(hand(0, 0) == 7.0);
  CHECK(hand(1, 0) == 2.0);

  write_text(dir / "bad.pfm", "P6\n1 1\n255\n");
  CHECK_THROWS_AS(read_pfm(dir / "bad.pfm"), IoError);
  write_text(dir / "short.pfm", "Pf\n4 4\n-1.0\n1234");
  CHECK_THROWS_AS(read_pfm(dir / "short.pfm"), IoError);
  CHECK_THROWS_AS(read_pfm(dir / "missing.pfm"), IoError);
  CHECK_THROWS_AS(write_pfm(dir / "two.pfm", std::vector<Image>{a, a}), InvalidArgument);
}

TEST_CASE("16-bit PGM round trip") {
  const ScratchDir dir("pgm");
  Image img(3, 5);
  for (std::size_t i = 0; i < img.size(); ++i) img[i] = static_cast<double>(i * 4000) / 65535.0;
  img[2] = 3.0;  // clamps
  write_pgm16(dir / "a.pgm", img);
  const Image back = read_pgm16(dir / "a.pgm");
  CHECK(back(0, 2) == 1.0);
  for (std::size_t i = 0; i < img.size(); ++i) {
    if (i != 2) CHECK(std::abs(back[i] - img[i]) < 1e-12);
  }
  const std::string bytes = read_text(dir / "a.pgm");
  CHECK(bytes.rfind("P5", 0) == 0);
  // Big-endian samples: pixel 1 is 4000 = 0x0FA0.
  const std::size_t data = bytes.size() - 30;
  CHECK(static_cast<unsigned char>(bytes[data + 2]) == 0x0F);
  CHECK(static_cast<unsigned char>(bytes[data + 3]) == 0xA0);
}

TEST_CASE("light field files") {
  const ScratchDir dir("lf");
  const CameraConfig cfg = desk_camera({3, 2});
  const LightFieldImage lf(cfg, float_exact(oracle::random_image(cfg.sensor_size.height, cfg.sensor_size.width, 9)));
  save_lightfield(dir / "obs.pfm", lf);
  CHECK(load_lightfield(dir / "obs.pfm", cfg).plane(0) == lf.plane(0));
  save_lightfield(dir / "obs.pgm", lf);
  CHECK(max_abs_diff(load_lightfield(dir / "obs.pgm", cfg).plane(0), lf.plane(0)) < 1.0 / 65535.0);
  CHECK_THROWS_AS(save_lightfield(dir / "obs.png", lf), InvalidArgument);
  CHECK_THROWS_AS(load_lightfield(dir / "obs.pfm", desk_camera({4, 4})), InvalidArgument);
}

TEST_CASE("camera YAML round trip") {
  const ScratchDir dir("cam");
  for (const CameraConfig& cfg : {desk_camera(), reference_camera(), desk_camera({5, 9})}) {
    save_camera(dir / "camera.yaml", cfg);
    const CameraConfig back = load_camera(dir / "camera.yaml");
    CHECK(back == cfg);
  }
  YAML::Node node = YAML::Load(camera_to_yaml(desk_camera()));
  node.remove("pixel_pitch");
  CHECK_THROWS_AS(camera_from_yaml(node), InvalidArgument);
  node = YAML::Load(camera_to_yaml(desk_camera()));
  node["texture_downsample"] = 5;
  CHECK_THROWS_AS(camera_from_yaml(node), InvalidArgument);
}

TEST_CASE("kernel bank directory round trip") {
  const ScratchDir dir("bank");
  const CameraConfig cfg = desk_camera({6, 6});
  const PsfKernelBank bank = build_psf_bank(cfg, 0.8);
  save_bank(dir / "bank", bank);
  const PsfKernelBank back = load_bank(dir / "bank");
  CHECK(back.depth() == bank.depth());
  CHECK(back.period() == bank.period());
  REQUIRE(back.phases().size() == bank.phases().size());
  for (std::size_t i = 0; i < bank.phases().size(); ++i) {
    CHECK(back.phases()[i].anchor == bank.phases()[i].anchor);
    CHECK(max_abs_diff(back.phases()[i].kernel, bank.phases()[i].kernel) < 1e-7);
    CHECK(std::abs(sum(back.phases()[i].kernel) - 1.0) < 1e-12);
  }
  const Image f = oracle::random_image(cfg.texture_size().height, cfg.texture_size().width, 3);
  CHECK(max_abs_diff(apply_psf(back, f), apply_psf(bank, f)) < 1e-6);
}

TEST_CASE("network parameter container round trip") {
  const ScratchDir dir("params");
  NetArch a;
  a.in_channels = 5;
  a.patch = 8;
  a.c1 = 3;
  a.c2 = 4;
  a.c3 = 2;
  a.hidden = 6;
  a.labels = 4;
  NetParams<float> p = init_params<float>(a, 3);
  p.bn_mean[1].setConstant(0.25f);
  p.input_shift = 0.125f;
  p.input_scale = 3.5f;
  save_params(dir / "net.bin", p);
  const NetParams<float> back = load_params(dir / "net.bin");
  CHECK(back.arch == a);
  for (int l = 0; l < 3; ++l) {
    CHECK(back.conv_w[l] == p.conv_w[l]);
    CHECK(back.bn_gamma[l] == p.bn_gamma[l]);
    CHECK(back.bn_beta[l] == p.bn_beta[l]);
    CHECK(back.bn_mean[l] == p.bn_mean[l]);
    CHECK(back.bn_var[l] == p.bn_var[l]);
  }
  CHECK(back.fc1_w == p.fc1_w);
  CHECK(back.fc1_b == p.fc1_b);
  CHECK(back.fc2_w == p.fc2_w);
  CHECK(back.fc2_b == p.fc2_b);
  CHECK(back.input_shift == p.input_shift);
  CHECK(back.input_scale == p.input_scale);

  const std::string bytes = read_text(dir / "net.bin");
  CHECK(bytes.substr(0, 8) == "LFSEPNET");
  write_text(dir / "cut.bin", bytes.substr(0, bytes.size() / 2));
  CHECK_THROWS_AS(load_params(dir / "cut.bin"), IoError);
  write_text(dir / "junk.bin", "NOTANET!" + bytes.substr(8));
  CHECK_THROWS_AS(load_params(dir / "junk.bin"), IoError);
}

TEST_CASE("patch set directory round trip") {
  const ScratchDir dir("patches");
  PatchSet set{7, 3, {}, {}};
  set.data.resize(set.sample_stride() * 4);
  for (std::size_t i = 0; i < set.data.size(); ++i) set.data[i] = static_cast<float>(i) * 0.5f;
  set.labels = {2, 0, 1, 2};
  save_patch_set(dir / "ds", set);
  const PatchSet back = load_patch_set(dir / "ds");
  CHECK(back.patch == 7);
  CHECK(back.channels == 3);
  CHECK(back.labels == set.labels);
  CHECK(back.data == set.data);
  CHECK(read_text(dir / "ds" / "labels.tsv").find("000003.f32\t2") != std::string::npos);
  std::filesystem::remove(dir / "ds" / "patches" / "000002.f32");
  CHECK_THROWS(load_patch_set(dir / "ds"));
}
