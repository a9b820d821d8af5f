#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "lfsep/depthnet.hpp"
#include "lfsep/grid.hpp"
#include "lfsep/lightfield.hpp"
#include "lfsep/net.hpp"
#include "lfsep/optics.hpp"

namespace YAML {
class Node;
}

namespace lfsep {

namespace fs = std::filesystem;

/// Portable float map: one plane ("Pf") or three ("PF"), little-endian, rows
/// stored bottom to top as the format prescribes.
void write_pfm(const fs::path& path, const std::vector<Image>& planes);
void write_pfm(const fs::path& path, const Image& plane);
std::vector<Image> read_pfm(const fs::path& path);

/// 16-bit binary PGM; values are stored as round(v * scale) clamped to [0, 65535].
void write_pgm16(const fs::path& path, const Image& img, double scale = 65535.0);
Image read_pgm16(const fs::path& path, double scale = 65535.0);

/// 8-bit binary PPM from interleaved RGB bytes.
void write_ppm(const fs::path& path, int height, int width, const std::vector<unsigned char>& rgb);

/// Mosaic I/O: `.pfm` keeps full precision, `.pgm` is 16-bit single channel.
void save_lightfield(const fs::path& path, const LightFieldImage& lf);
LightFieldImage load_lightfield(const fs::path& path, const CameraConfig& cfg);

/// Camera config as commented YAML (units in comments).
std::string camera_to_yaml(const CameraConfig& cfg);
CameraConfig camera_from_yaml(const YAML::Node& node);
void save_camera(const fs::path& path, const CameraConfig& cfg);
CameraConfig load_camera(const fs::path& path);

/// Kernel bank directory: index.yaml plus one PFM per phase kernel.
void save_bank(const fs::path& dir, const PsfKernelBank& bank);
PsfKernelBank load_bank(const fs::path& dir);

/// Binary container: "LFSEPNET", format version, YAML architecture manifest,
/// then named float64 tensors each with a rank and shape header.
void save_params(const fs::path& path, const NetParams<float>& params);
NetParams<float> load_params(const fs::path& path);

/// Dataset directory: manifest.yaml, labels.tsv (index, file, label) and one
/// float32 tensor file per patch under patches/.
void save_patch_set(const fs::path& dir, const PatchSet& set);
PatchSet load_patch_set(const fs::path& dir);

std::string read_text(const fs::path& path);
void write_text(const fs::path& path, const std::string& text);

}  // namespace lfsep
