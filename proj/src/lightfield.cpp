#include "lfsep/lightfield.hpp"

#include <cmath>
#include <limits>

namespace lfsep {

LightFieldImage::LightFieldImage(CameraConfig camera, std::vector<Image> planes)
    : camera_(std::move(camera)), planes_(std::move(planes)) {
  camera_.validate();
  if (planes_.empty()) throw InvalidArgument("LightFieldImage: need at least one channel");
  for (const Image& p : planes_) {
    if (p.extent() != camera_.sensor_size) throw InvalidArgument("LightFieldImage: plane does not match sensor size");
    for (double v : p) {
      if (!(v >= 0.0)) throw InvalidArgument("LightFieldImage: pixel values must be nonnegative");
    }
  }
}

LightFieldImage::LightFieldImage(CameraConfig camera, Image plane)
    : LightFieldImage(std::move(camera), std::vector<Image>{std::move(plane)}) {}

std::vector<Pixel> kept_positions(const CameraConfig& cfg, double rho) {
  cfg.validate();
  const double h = cfg.unit_cell.height;
  const double w = cfg.unit_cell.width;
  const double radius = rho * std::min(h, w) / 2.0;
  std::vector<Pixel> out;
  for (int r = 0; r < cfg.unit_cell.height; ++r) {
    for (int c = 0; c < cfg.unit_cell.width; ++c) {
      const double y = r + 0.5;
      const double x = c + 0.5;
      double best = std::numeric_limits<double>::infinity();
      for (int dr = -1; dr <= 1; ++dr) {
        for (int dc = -1; dc <= 1; ++dc) {
          for (const auto& [cy, cx] : cfg.lens_centres_in_cell()) {
            best = std::min(best, std::hypot(y - (cy + dr * h), x - (cx + dc * w)));
          }
        }
      }
      if (best <= radius) out.push_back({r, c});
    }
  }
  return out;
}

ViewTensor::ViewTensor(int units_h, int units_w, std::vector<Pixel> kept, int colours)
    : units_h_(units_h), units_w_(units_w), colours_(colours), kept_(std::move(kept)) {
  if (units_h < 0 || units_w < 0 || colours < 1 || kept_.empty()) throw InvalidArgument("ViewTensor: bad shape");
  data_.assign(static_cast<std::size_t>(units_h) * static_cast<std::size_t>(units_w) * static_cast<std::size_t>(depth()),
               0.0);
}

ViewTensor rearrange_views(const LightFieldImage& lf, double rho) {
  const CameraConfig& cfg = lf.camera();
  const Extent units = cfg.units();
  if (lf.extent() != Extent{units.height * cfg.unit_cell.height, units.width * cfg.unit_cell.width}) {
    throw InvalidArgument("rearrange_views: mosaic is not a whole number of units");
  }
  ViewTensor vt(units.height, units.width, kept_positions(cfg, rho), lf.channels());
  const int v_count = vt.views();
  for (int ch = 0; ch < lf.channels(); ++ch) {
    const Image& plane = lf.plane(ch);
    for (int i = 0; i < units.height; ++i) {
      for (int j = 0; j < units.width; ++j) {
        for (int v = 0; v < v_count; ++v) {
          const Pixel off = vt.kept_positions()[static_cast<std::size_t>(v)];
          vt.at(i, j, ch * v_count + v) = plane(i * cfg.unit_cell.height + off.row, j * cfg.unit_cell.width + off.col);
        }
      }
    }
  }
  return vt;
}

LightFieldImage scatter_views(const ViewTensor& vt, const CameraConfig& cfg) {
  const CameraConfig out_cfg = cfg.with_units({vt.units_h(), vt.units_w()});
  std::vector<Image> planes(static_cast<std::size_t>(vt.colours()), Image(out_cfg.sensor_size));
  const int v_count = vt.views();
  for (int ch = 0; ch < vt.colours(); ++ch) {
    for (int i = 0; i < vt.units_h(); ++i) {
      for (int j = 0; j < vt.units_w(); ++j) {
        for (int v = 0; v < v_count; ++v) {
          const Pixel off = vt.kept_positions()[static_cast<std::size_t>(v)];
          planes[static_cast<std::size_t>(ch)](i * cfg.unit_cell.height + off.row, j * cfg.unit_cell.width + off.col) =
              vt.at(i, j, ch * v_count + v);
        }
      }
    }
  }
  return LightFieldImage(out_cfg, std::move(planes));
}

ViewTensor extract_patch(const ViewTensor& vt, Pixel top_left_unit, int p) {
  if (p < 1 || top_left_unit.row < 0 || top_left_unit.col < 0 || top_left_unit.row + p > vt.units_h() ||
      top_left_unit.col + p > vt.units_w()) {
    throw InvalidArgument("extract_patch: patch outside the view tensor");
  }
  ViewTensor out(p, p, vt.kept_positions(), vt.colours());
  for (int i = 0; i < p; ++i) {
    for (int j = 0; j < p; ++j) {
      for (int k = 0; k < vt.depth(); ++k) out.at(i, j, k) = vt.at(top_left_unit.row + i, top_left_unit.col + j, k);
    }
  }
  return out;
}

LightFieldImage crop_units(const LightFieldImage& lf, Pixel top_left_unit, Extent units) {
  const CameraConfig& cfg = lf.camera();
  const Extent have = cfg.units();
  if (top_left_unit.row < 0 || top_left_unit.col < 0 || units.height < 1 || units.width < 1 ||
      top_left_unit.row + units.height > have.height || top_left_unit.col + units.width > have.width) {
    throw InvalidArgument("crop_units: window outside the mosaic");
  }
  const CameraConfig out_cfg = cfg.with_units(units);
  std::vector<Image> planes;
  for (const Image& p : lf.planes()) {
    planes.push_back(crop(p, {top_left_unit.row * cfg.unit_cell.height, top_left_unit.col * cfg.unit_cell.width},
                          out_cfg.sensor_size));
  }
  return LightFieldImage(out_cfg, std::move(planes));
}

}  // namespace lfsep
