#include "lfsep/optics.hpp"

#include <cmath>
#include <limits>
#include <set>

namespace lfsep {

namespace {

bool positive(double v) { return std::isfinite(v) && v > 0.0; }

}  // namespace

void CameraConfig::validate() const {
  if (!positive(main_focal_length) || !positive(aperture_diameter) || !positive(mla_distance) ||
      !positive(microlens_focal_length) || !positive(sensor_distance) || !positive(pixel_pitch)) {
    throw InvalidArgument("camera '" + name + "': all lengths must be strictly positive");
  }
  if (!(mla_distance > main_focal_length)) {
    throw InvalidArgument("camera '" + name + "': mla_distance must exceed main_focal_length");
  }
  if (unit_cell.height <= 0 || unit_cell.width <= 0) throw InvalidArgument("camera: empty unit cell");
  if (texture_downsample < 1) throw InvalidArgument("camera: texture_downsample must be >= 1");
  if (unit_cell.height % texture_downsample != 0 || unit_cell.width % texture_downsample != 0) {
    throw InvalidArgument("camera: unit cell must be divisible by texture_downsample");
  }
  if (sensor_size.height <= 0 || sensor_size.width <= 0 || sensor_size.height % unit_cell.height != 0 ||
      sensor_size.width % unit_cell.width != 0) {
    throw InvalidArgument("camera: sensor size must be a positive whole number of unit cells");
  }
  if (microlenses_per_cell != 1 && microlenses_per_cell != 2) {
    throw InvalidArgument("camera: microlenses_per_cell must be 1 (rectangular) or 2 (hexagonal)");
  }
  if (aperture_samples < 1) throw InvalidArgument("camera: aperture_samples must be >= 1");
}

Extent CameraConfig::units() const {
  return {sensor_size.height / unit_cell.height, sensor_size.width / unit_cell.width};
}

Extent CameraConfig::texture_size() const {
  return {sensor_size.height / texture_downsample, sensor_size.width / texture_downsample};
}

Extent CameraConfig::phase_period() const {
  return {unit_cell.height / texture_downsample, unit_cell.width / texture_downsample};
}

Pixel CameraConfig::axis_pixel() const {
  const Extent u = units();
  return {(u.height / 2) * unit_cell.height, (u.width / 2) * unit_cell.width};
}

double CameraConfig::focal_conjugate_depth() const {
  return 1.0 / (1.0 / main_focal_length - 1.0 / mla_distance);
}

double CameraConfig::blur_diameter(double depth) const {
  return aperture_diameter * mla_distance * std::abs(1.0 / focal_conjugate_depth() - 1.0 / depth);
}

double CameraConfig::microlens_pitch() const {
  const double w = static_cast<double>(unit_cell.width) / microlenses_per_cell;
  return w * pixel_pitch * mla_distance / (mla_distance + sensor_distance);
}

std::vector<std::pair<double, double>> CameraConfig::lens_centres_in_cell() const {
  const double h = unit_cell.height;
  const double w = unit_cell.width;
  if (microlenses_per_cell == 1) return {{h / 2.0, w / 2.0}};
  return {{h / 4.0, w / 2.0}, {3.0 * h / 4.0, 0.0}};
}

CameraConfig CameraConfig::with_units(Extent u) const {
  CameraConfig c = *this;
  c.sensor_size = {u.height * unit_cell.height, u.width * unit_cell.width};
  return c;
}

CameraConfig desk_camera(Extent units) {
  CameraConfig c;
  c.name = "desk";
  c.main_focal_length = 0.05;
  c.mla_distance = 1.0 / 18.0;  // focal conjugate at 0.5 m
  c.aperture_diameter = 3.25e-4;
  c.microlens_focal_length = 2.3e-3;
  c.sensor_distance = 2.3e-3;
  c.pixel_pitch = 1.4e-6;
  c.unit_cell = {12, 12};
  c.microlenses_per_cell = 1;
  c.texture_downsample = 4;
  c.aperture_samples = 64;
  c.sensor_size = {units.height * 12, units.width * 12};
  c.validate();
  return c;
}

CameraConfig reference_camera() {
  CameraConfig c;
  c.name = "reference";
  c.main_focal_length = 0.03;
  c.mla_distance = 1.0 / (1.0 / 0.03 - 2.0);  // focal conjugate at 0.5 m
  c.aperture_diameter = 1.32e-3;
  c.microlens_focal_length = 4.74e-4;
  c.sensor_distance = 4.74e-4;
  c.pixel_pitch = 1.4e-6;
  c.unit_cell = {28, 16};
  c.microlenses_per_cell = 2;
  c.texture_downsample = 4;
  c.aperture_samples = 64;
  c.sensor_size = {6048, 8640};
  c.validate();
  return c;
}

CameraConfig camera_preset(std::string_view name) {
  if (name == "desk") return desk_camera();
  if (name == "reference") return reference_camera();
  throw InvalidArgument("unknown camera preset '" + std::string(name) + "'");
}

DepthLevelSet::DepthLevelSet(std::vector<double> depths) : depths_(std::move(depths)) {
  if (depths_.empty()) throw InvalidArgument("depth level set is empty");
  for (std::size_t i = 0; i < depths_.size(); ++i) {
    if (!positive(depths_[i])) throw InvalidArgument("depth levels must be positive");
    if (i > 0 && !(depths_[i] > depths_[i - 1])) throw InvalidArgument("depth levels must be strictly increasing");
    if (i > 1) {
      const double prev = depths_[i - 1] - depths_[i - 2];
      const double gap = depths_[i] - depths_[i - 1];
      if (gap < prev * (1.0 - 1e-12)) throw InvalidArgument("depth level spacing must not shrink with depth");
    }
  }
}

int DepthLevelSet::nearest(double depth) const {
  int best = 0;
  double best_gap = std::numeric_limits<double>::infinity();
  for (int i = 0; i < size(); ++i) {
    const double gap = std::abs(1.0 / depth - 1.0 / depths_[static_cast<std::size_t>(i)]);
    if (gap < best_gap) {
      best_gap = gap;
      best = i;
    }
  }
  return best;
}

DepthLevelSet make_depth_levels(double d_min, double d_max, int count) {
  if (!positive(d_min) || !positive(d_max) || !(d_min < d_max)) {
    throw InvalidArgument("make_depth_levels: need 0 < d_min < d_max");
  }
  if (count < 2) throw InvalidArgument("make_depth_levels: need at least two levels");
  const double inv_near = 1.0 / d_min;
  const double inv_far = 1.0 / d_max;
  std::vector<double> depths(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    const double t = static_cast<double>(i) / (count - 1);
    depths[static_cast<std::size_t>(i)] = 1.0 / (inv_near + (inv_far - inv_near) * t);
  }
  depths.front() = d_min;
  depths.back() = d_max;
  return DepthLevelSet(std::move(depths));
}

namespace {

struct TraceGeometry {
  double image_distance;  // v
  double mla;             // D
  double sensor;          // s
  double lens_focal;      // f_m
  double pitch;           // pixel pitch
  double px_to_mla;       // sensor-plane px -> MLA metres along chief rays
};

TraceGeometry geometry_for(const CameraConfig& cfg, double depth) {
  cfg.validate();
  if (!(std::isfinite(depth) && depth > cfg.main_focal_length)) {
    throw InvalidArgument("trace: depth must exceed the main focal length");
  }
  TraceGeometry g;
  g.image_distance = 1.0 / (1.0 / cfg.main_focal_length - 1.0 / depth);
  g.mla = cfg.mla_distance;
  g.sensor = cfg.sensor_distance;
  g.lens_focal = cfg.microlens_focal_length;
  g.pitch = cfg.pixel_pitch;
  g.px_to_mla = cfg.pixel_pitch * g.mla / (g.mla + g.sensor);
  return g;
}

/// Nearest microlens centre (sensor-projected px, relative to the axis) for a
/// sensor-projected position `u`. The axis sits on a cell corner, so the lens
/// lattice is aligned with the origin.
std::pair<double, double> nearest_lens(const CameraConfig& cfg, double ur, double uc, Pixel& key) {
  const double h = cfg.unit_cell.height;
  const double w = cfg.unit_cell.width;
  const double kr = std::floor(ur / h);
  const double kc = std::floor(uc / w);
  if (cfg.microlenses_per_cell == 1) {
    key = {static_cast<int>(4.0 * kr + 2.0), static_cast<int>(2.0 * kc + 1.0)};
    return {(kr + 0.5) * h, (kc + 0.5) * w};
  }
  double best_d = std::numeric_limits<double>::infinity();
  std::pair<double, double> best{0.0, 0.0};
  for (int dr = -1; dr <= 1; ++dr) {
    for (int dc = -1; dc <= 1; ++dc) {
      for (const auto& [cr, cc] : cfg.lens_centres_in_cell()) {
        const double r = (kr + dr) * h + cr;
        const double c = (kc + dc) * w + cc;
        const double d = (r - ur) * (r - ur) + (c - uc) * (c - uc);
        if (d < best_d) {
          best_d = d;
          best = {r, c};
        }
      }
    }
  }
  key = {static_cast<int>(std::llround(best.first * 4.0 / h)), static_cast<int>(std::llround(best.second * 2.0 / w))};
  return best;
}

/// Stratified aperture grid restricted to the circular pupil.
std::vector<std::pair<double, double>> aperture_samples(const CameraConfig& cfg) {
  const int n = cfg.aperture_samples;
  const double radius = cfg.aperture_diameter / 2.0;
  std::vector<std::pair<double, double>> out;
  out.reserve(static_cast<std::size_t>(n) * n);
  for (int i = 0; i < n; ++i) {
    const double y = (-1.0 + (2.0 * i + 1.0) / n) * radius;
    for (int j = 0; j < n; ++j) {
      const double x = (-1.0 + (2.0 * j + 1.0) / n) * radius;
      if (y * y + x * x <= radius * radius) out.emplace_back(y, x);
    }
  }
  return out;
}

/// Traces every pupil sample of the point whose chief ray meets the sensor plane
/// at `chief` (px, relative to the axis). Hits are reported in px relative to the axis.
template <class Visit>
void trace_core(const CameraConfig& cfg, const TraceGeometry& g, double chief_r, double chief_c, Visit&& visit) {
  const double v = g.image_distance;
  // Image point along the chief ray.
  const double xr = chief_r * g.px_to_mla * v / g.mla;
  const double xc = chief_c * g.px_to_mla * v / g.mla;
  const double mla_to_px = 1.0 / g.px_to_mla;
  for (const auto& [ar, ac] : aperture_samples(cfg)) {
    const double slope_r = (xr - ar) / v;
    const double slope_c = (xc - ac) / v;
    const double yr = ar + slope_r * g.mla;
    const double yc = ac + slope_c * g.mla;
    Pixel key;
    const auto [cr_px, cc_px] = nearest_lens(cfg, yr * mla_to_px, yc * mla_to_px, key);
    const double cr = cr_px * g.px_to_mla;
    const double cc = cc_px * g.px_to_mla;
    const double out_r = slope_r - (yr - cr) / g.lens_focal;
    const double out_c = slope_c - (yc - cc) / g.lens_focal;
    visit((yr + g.sensor * out_r) / g.pitch, (yc + g.sensor * out_c) / g.pitch, key);
  }
}

/// Unclipped unit-mass footprint of texture phase `phase`, relative to the cell corner.
struct LocalFootprint {
  Pixel top_left;
  Image values;
};

LocalFootprint trace_phase(const CameraConfig& cfg, const TraceGeometry& g, double phase_r, double phase_c) {
  const double ds = cfg.texture_downsample;
  std::vector<Pixel> hits;
  trace_core(cfg, g, (phase_r + 0.5) * ds, (phase_c + 0.5) * ds, [&](double r, double c, Pixel) {
    hits.push_back({static_cast<int>(std::floor(r)), static_cast<int>(std::floor(c))});
  });
  if (hits.empty()) throw EmptyFootprint("trace: no aperture samples inside the pupil");
  Pixel lo{std::numeric_limits<int>::max(), std::numeric_limits<int>::max()};
  Pixel hi{std::numeric_limits<int>::min(), std::numeric_limits<int>::min()};
  for (const Pixel& p : hits) {
    lo = {std::min(lo.row, p.row), std::min(lo.col, p.col)};
    hi = {std::max(hi.row, p.row), std::max(hi.col, p.col)};
  }
  Grid2<long long> counts(hi.row - lo.row + 1, hi.col - lo.col + 1, 0);
  for (const Pixel& p : hits) ++counts(p.row - lo.row, p.col - lo.col);
  Image values(counts.rows(), counts.cols());
  const double total = static_cast<double>(hits.size());
  for (std::size_t i = 0; i < counts.size(); ++i) values[i] = static_cast<double>(counts[i]) / total;
  return {lo, std::move(values)};
}

/// Splits a texture coordinate into whole cells and an in-period remainder.
void split_point(const CameraConfig& cfg, TexturePoint p, Pixel& cell, double& rem_r, double& rem_c) {
  const Extent period = cfg.phase_period();
  const double nr = std::floor(p.row / period.height);
  const double nc = std::floor(p.col / period.width);
  cell = {static_cast<int>(nr), static_cast<int>(nc)};
  rem_r = p.row - nr * period.height;
  rem_c = p.col - nc * period.width;
}

}  // namespace

std::vector<RayHit> trace_rays(const CameraConfig& cfg, TexturePoint point, double depth) {
  const TraceGeometry g = geometry_for(cfg, depth);
  const Pixel axis = cfg.axis_pixel();
  const double ds = cfg.texture_downsample;
  std::vector<RayHit> out;
  trace_core(cfg, g, (point.row + 0.5) * ds - axis.row, (point.col + 0.5) * ds - axis.col,
             [&](double r, double c, Pixel key) { out.push_back({r + axis.row, c + axis.col, key}); });
  return out;
}

Image SensorPatch::to_dense(Extent sensor) const {
  Image out(sensor);
  for (int r = 0; r < values.rows(); ++r) {
    for (int c = 0; c < values.cols(); ++c) {
      const int sr = top_left.row + r;
      const int sc = top_left.col + c;
      if (out.contains(sr, sc)) out(sr, sc) += values(r, c);
    }
  }
  return out;
}

double SensorPatch::total() const { return sum(values); }

SensorPatch trace_point_psf(const CameraConfig& cfg, TexturePoint point, double depth, double weight) {
  const TraceGeometry g = geometry_for(cfg, depth);
  Pixel cell;
  double rem_r = 0.0;
  double rem_c = 0.0;
  split_point(cfg, point, cell, rem_r, rem_c);
  const LocalFootprint local = trace_phase(cfg, g, rem_r, rem_c);

  const Pixel origin{cell.row * cfg.unit_cell.height + local.top_left.row,
                     cell.col * cfg.unit_cell.width + local.top_left.col};
  const int r0 = std::max(origin.row, 0);
  const int c0 = std::max(origin.col, 0);
  const int r1 = std::min(origin.row + local.values.rows(), cfg.sensor_size.height);
  const int c1 = std::min(origin.col + local.values.cols(), cfg.sensor_size.width);
  SensorPatch patch;
  bool any = false;
  if (r1 > r0 && c1 > c0) {
    patch.top_left = {r0, c0};
    patch.values = Image(r1 - r0, c1 - c0);
    for (int r = r0; r < r1; ++r) {
      for (int c = c0; c < c1; ++c) {
        const double v = local.values(r - origin.row, c - origin.col);
        any = any || v > 0.0;
        patch.values(r - r0, c - c0) = v * weight;
      }
    }
  }
  if (!any) throw EmptyFootprint("trace_point_psf: every ray fell outside the sensor");
  return patch;
}

PsfKernelBank::PsfKernelBank(CameraConfig camera, double depth, std::vector<PhaseKernel> phases)
    : camera_(std::move(camera)), depth_(depth), period_(camera_.phase_period()), phases_(std::move(phases)) {
  if (phases_.size() != static_cast<std::size_t>(period_.area())) {
    throw InvalidArgument("PsfKernelBank: need one kernel per texture phase");
  }
  for (std::size_t i = 0; i < phases_.size(); ++i) {
    const Pixel expect{static_cast<int>(i) / period_.width, static_cast<int>(i) % period_.width};
    if (phases_[i].phase != expect) throw InvalidArgument("PsfKernelBank: phases must be in row-major order");
    const PhaseKernel& pk = phases_[i];
    std::vector<KernelTap> taps;
    for (int r = 0; r < pk.kernel.rows(); ++r) {
      for (int c = 0; c < pk.kernel.cols(); ++c) {
        const double w = pk.kernel(r, c);
        if (!(w >= 0.0)) throw InvalidArgument("PsfKernelBank: kernel entries must be nonnegative");
        if (w != 0.0) taps.push_back({pk.anchor + Pixel{r, c}, w});
      }
    }
    taps_.push_back(std::move(taps));
  }
}

const PhaseKernel& PsfKernelBank::kernel_for(Pixel phase) const {
  if (phase.row < 0 || phase.col < 0 || phase.row >= period_.height || phase.col >= period_.width) {
    throw InvalidArgument("PsfKernelBank: phase out of range");
  }
  return phases_[static_cast<std::size_t>(phase.row * period_.width + phase.col)];
}

PsfKernelBank build_psf_bank(const CameraConfig& cfg, double depth) {
  const TraceGeometry g = geometry_for(cfg, depth);
  const Extent period = cfg.phase_period();
  std::vector<PhaseKernel> phases;
  phases.reserve(static_cast<std::size_t>(period.area()));
  for (int r = 0; r < period.height; ++r) {
    for (int c = 0; c < period.width; ++c) {
      LocalFootprint local = trace_phase(cfg, g, r, c);
      phases.push_back({{r, c}, local.top_left, std::move(local.values)});
    }
  }
  return PsfKernelBank(cfg, depth, std::move(phases));
}

Image dense_column(const PsfKernelBank& bank, Pixel q) {
  const CameraConfig& cfg = bank.camera();
  const Extent tex = cfg.texture_size();
  if (q.row < 0 || q.col < 0 || q.row >= tex.height || q.col >= tex.width) {
    throw InvalidArgument("dense_column: texture pixel out of bounds");
  }
  const Extent period = bank.period();
  const Pixel cell{q.row / period.height, q.col / period.width};
  const PhaseKernel& pk = bank.kernel_for({q.row % period.height, q.col % period.width});
  SensorPatch patch{{cell.row * cfg.unit_cell.height + pk.anchor.row, cell.col * cfg.unit_cell.width + pk.anchor.col},
                    pk.kernel};
  return patch.to_dense(cfg.sensor_size);
}

int footprint_lens_count(const CameraConfig& cfg, TexturePoint point, double depth) {
  std::set<Pixel> lenses;
  for (const RayHit& h : trace_rays(cfg, point, depth)) lenses.insert(h.lens);
  return static_cast<int>(lenses.size());
}

}  // namespace lfsep
