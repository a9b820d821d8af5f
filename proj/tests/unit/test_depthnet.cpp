#include <doctest.h>

#include <algorithm>
#include <random>
#include <tuple>

#include "lfsep/depthnet.hpp"
#include "lfsep/errors.hpp"
#include "lfsep/textures.hpp"
#include "oracles.hpp"

using namespace lfsep;

namespace {

NetArch small_arch(int in_channels, int labels) {
  NetArch a;
  a.in_channels = in_channels;
  a.patch = 7;
  a.c1 = 6;
  a.c2 = 5;
  a.c3 = 4;
  a.hidden = 8;
  a.labels = labels;
  return a;
}

template <class S>
NetParams<S> random_net(const NetArch& a, std::uint64_t seed) {
  NetParams<S> p = init_params<S>(a, seed);
  std::mt19937_64 rng(seed + 1);
  std::uniform_real_distribution<double> u(0.5, 1.5);
  for (int l = 0; l < 3; ++l) {
    for (Eigen::Index c = 0; c < p.bn_mean[l].size(); ++c) {
      p.bn_mean[l](c) = static_cast<S>(u(rng) - 1.0);
      p.bn_var[l](c) = static_cast<S>(u(rng));
      p.bn_beta[l](c) = static_cast<S>(u(rng) - 1.0);
    }
  }
  p.input_shift = static_cast<S>(0.5);
  p.input_scale = static_cast<S>(3.0);
  return p;
}

}  // namespace

TEST_CASE("reference label set matches a brute-force enumeration") {
  const DepthLevelSet levels = make_depth_levels(0.2, 2.5, 15);
  const double step = 4.6 / 14.0;
  const LabelSet set = build_label_set(levels, 30, 2.0 * step);
  REQUIRE(set.size() == 45);

  // Levels are uniform in diopters, so the gap of (i, j) is (j - i) steps.
  std::vector<std::tuple<int, int, int>> all;
  for (int i = 0; i < 15; ++i) {
    for (int j = i + 1; j < 15; ++j) {
      if (j - i >= 2) all.emplace_back(-(j - i), i, j);
    }
  }
  std::sort(all.begin(), all.end());
  for (int k = 0; k < 15; ++k) CHECK(set[k] == Label{k, -1});
  for (int k = 0; k < 30; ++k) {
    const Label& l = set[15 + k];
    CHECK(l.near < l.far);
    CHECK(l.near == std::get<1>(all[static_cast<std::size_t>(k)]));
    CHECK(l.far == std::get<2>(all[static_cast<std::size_t>(k)]));
  }
  CHECK(set.find({0, 14}) == 15);
  CHECK(set.single(3) == 3);
  CHECK(set.find({6, 7}) == -1);

  CHECK_THROWS_AS(build_label_set(levels, 92, 2.0 * step), InvalidArgument);
  CHECK(build_label_set(levels, 91, 2.0 * step).size() == 15 + 91);
  CHECK_THROWS_AS(LabelSet(levels, {{3, -1}, {3, -1}}, 0.0), InvalidArgument);
  CHECK_THROWS_AS(LabelSet(levels, {{5, 4}}, 0.0), InvalidArgument);
  CHECK_THROWS_AS(LabelSet(levels, {{4, 5}}, 1.0), InvalidArgument);
}

TEST_CASE("adjacency of labels") {
  const LabelSet set = build_label_set(make_depth_levels(0.2, 2.5, 6), 10, 1.38);
  CHECK(set.size() == 16);
  CHECK(adjacent_labels(set, set.single(2), set.single(3)));
  CHECK_FALSE(adjacent_labels(set, set.single(1), set.single(3)));
  CHECK(adjacent_labels(set, set.find({0, 3}), set.find({0, 4})));
  CHECK(adjacent_labels(set, set.find({0, 3}), set.find({1, 4})));
  CHECK_FALSE(adjacent_labels(set, set.find({0, 3}), set.find({0, 5})));
}

TEST_CASE("training set: balance, determinism, superposition") {
  const CameraConfig cfg = desk_camera();
  const LabelSet labels = build_label_set(make_depth_levels(0.2, 2.5, 4), 2, 1.5);
  const std::vector<Image> corpus = texture_corpus({40, 40}, 3, 4);
  TrainingSetConfig tc;
  tc.patch = 7;
  tc.margin = 1;
  tc.patches_per_label = 3;
  tc.seed = 21;
  const PatchSet set = generate_training_set(corpus, cfg, labels, tc);
  CHECK(set.size() == 3 * labels.size());
  CHECK(set.channels == 88);
  CHECK(set.data.size() == set.sample_stride() * static_cast<std::size_t>(set.size()));
  for (int k = 0; k < labels.size(); ++k) CHECK(std::count(set.labels.begin(), set.labels.end(), k) == 3);
  const PatchSet again = generate_training_set(corpus, cfg, labels, tc);
  CHECK(again.data == set.data);
  CHECK(again.labels == set.labels);

  tc.gain_min = tc.gain_max = 1.0;
  tc.intensity_min = tc.intensity_max = 1.0;
  const PatchRenderer renderer(cfg, labels, corpus, tc);
  std::mt19937_64 rng(5);
  for (int k = labels.size() - 2; k < labels.size(); ++k) {
    const PatchRecipe pair = renderer.draw(k, rng);
    PatchRecipe near = pair;
    near.label = labels.single(labels[k].near);
    PatchRecipe far = pair;
    far.label = labels.single(labels[k].far);
    far.texture_near = pair.texture_far;
    far.crop_near = pair.crop_far;
    const ViewTensor sum = renderer.render(pair);
    const ViewTensor a = renderer.render(near);
    const ViewTensor b = renderer.render(far);
    double diff = 0.0;
    for (std::size_t i = 0; i < sum.data().size(); ++i) {
      diff = std::max(diff, std::abs(sum.data()[i] - a.data()[i] - b.data()[i]));
    }
    CHECK(diff < 1e-12);
  }

  CHECK_THROWS_AS(generate_training_set(texture_corpus({20, 20}, 2, 1), cfg, labels, tc), InvalidArgument);
  CHECK_THROWS_AS(generate_training_set({}, cfg, labels, tc), InvalidArgument);
}

TEST_CASE("label maps to depth maps and medians") {
  const LabelSet set = build_label_set(make_depth_levels(0.2, 2.5, 15), 30, 2.0 * 4.6 / 14.0);
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> pick(0, set.size() - 1);
  LabelMap map{Grid2<int>(9, 11), Image(9, 11), {}};
  for (int& v : map.labels) v = pick(rng);
  const DepthMapPair maps = labels_to_depth_maps(map, set);
  const DepthLevelSet& lv = set.levels();
  for (int i = 0; i < 9; ++i) {
    for (int j = 0; j < 11; ++j) {
      const Label& l = set[map.labels(i, j)];
      CHECK(maps.depth_near(i, j) == lv[l.near]);
      CHECK((maps.reflection_mask(i, j) != 0) == l.is_pair());
      if (l.is_pair()) {
        CHECK(maps.depth_far(i, j) == lv[l.far]);
        CHECK(maps.depth_near(i, j) < maps.depth_far(i, j));
      } else {
        CHECK(maps.depth_far(i, j) == kNoReflection);
      }
      const int near = lv.nearest(maps.depth_near(i, j));
      const int far = maps.reflection_mask(i, j) ? lv.nearest(maps.depth_far(i, j)) : -1;
      CHECK(set.find({near, far}) == map.labels(i, j));
    }
  }

  LabelMap singles{Grid2<int>(4, 4, set.single(6)), Image(4, 4), {}};
  const DepthMapPair s = labels_to_depth_maps(singles, set);
  for (auto m : s.reflection_mask) CHECK(m == 0);
  const LayerDepths sd = median_depths(s);
  CHECK(sd.d_t == lv[6]);
  CHECK_FALSE(sd.d_r.has_value());

  singles.labels(0, 0) = 99;
  CHECK_THROWS_AS(labels_to_depth_maps(singles, set), InvalidArgument);

  DepthMapPair mixed{Image(10, 10), Image(10, 10, kNoReflection), Grid2<std::uint8_t>(10, 10)};
  for (std::size_t i = 0; i < 100; ++i) mixed.depth_near[i] = i < 60 ? 0.35 : 0.5;
  mixed.reflection_mask[3] = mixed.reflection_mask[50] = 1;
  mixed.depth_far[3] = 0.8;
  mixed.depth_far[50] = 1.7;
  const LayerDepths md = median_depths(mixed);
  CHECK(md.d_t == 0.35);
  REQUIRE(md.d_r.has_value());
  CHECK(*md.d_r == 0.8);
  CHECK_THROWS_AS(median_depths(DepthMapPair{}), InvalidArgument);
}

TEST_CASE("shared-conv inference equals the sliding window") {
  const CameraConfig cfg = desk_camera({11, 10});
  std::vector<Image> planes{oracle::random_image(cfg.sensor_size.height, cfg.sensor_size.width, 4)};
  const LightFieldImage lf(cfg, planes);
  const NetArch a = small_arch(88, 5);
  const NetParams<double> p = random_net<double>(a, 12);

  MacCounter fast_macs;
  MacCounter slow_macs;
  const LabelMap fast = classify_full_image(p, lf, &fast_macs);
  const LabelMap slow = classify_sliding_window(p, lf, &slow_macs);
  CHECK(fast.labels.extent() == Extent{5, 4});
  CHECK(fast.labels == slow.labels);
  CHECK((fast.logits - slow.logits).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(max_abs_diff(fast.confidence, slow.confidence) < 1e-12);
  CHECK(fast_macs.fc == slow_macs.fc);
  CHECK(fast_macs.conv < slow_macs.conv);

  const NetParams<float> pf = cast_params<float>(p);
  const LabelMap ff = classify_full_image(pf, lf);
  const LabelMap sf = classify_sliding_window(pf, lf);
  CHECK((ff.logits - sf.logits).cwiseAbs().maxCoeff() < 1e-4);
  CHECK((ff.logits - fast.logits).cwiseAbs().maxCoeff() < 1e-3);

  const CameraConfig tiny = desk_camera({6, 12});
  CHECK_THROWS_AS(classify_full_image(p, LightFieldImage(tiny, Image(tiny.sensor_size, 0.5))), InvalidArgument);
  CHECK_THROWS_AS(classify_full_image(random_net<double>(small_arch(40, 5), 1), lf), InvalidArgument);
}

TEST_CASE("featureless input gives a spatially uniform label map") {
  const CameraConfig cfg = desk_camera({12, 12});
  const LightFieldImage lf(cfg, Image(cfg.sensor_size, 0.3));
  const LabelMap map = classify_full_image(random_net<double>(small_arch(88, 7), 2), lf);
  for (int v : map.labels) CHECK(v == map.labels[0]);
  CHECK((map.logits.colwise() - map.logits.col(0)).cwiseAbs().maxCoeff() < 1e-12);
}
