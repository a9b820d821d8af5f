#include "lfsep/io.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <yaml-cpp/yaml.h>

namespace lfsep {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

namespace {

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  return out;
}

std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  return in;
}

void check_written(const std::ostream& out, const fs::path& path) {
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

/// Next whitespace-delimited header token, skipping '#' comments.
std::string header_token(std::istream& in, const fs::path& path) {
  std::string tok;
  char ch = 0;
  while (in.get(ch)) {
    if (ch == '#') {
      std::string skip;
      std::getline(in, skip);
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(ch)) != 0) {
      if (!tok.empty()) return tok;
      continue;
    }
    tok.push_back(ch);
  }
  if (tok.empty()) throw IoError("truncated header in '" + path.string() + "'");
  return tok;
}

int header_int(std::istream& in, const fs::path& path) {
  const std::string tok = header_token(in, path);
  try {
    return std::stoi(tok);
  } catch (const std::exception&) {
    throw IoError("bad header value '" + tok + "' in '" + path.string() + "'");
  }
}

template <class T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& in, const fs::path& path) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) throw IoError("unexpected end of '" + path.string() + "'");
  return v;
}

YAML::Node load_yaml_file(const fs::path& path) {
  try {
    return YAML::LoadFile(path.string());
  } catch (const YAML::BadFile&) {
    throw IoError("cannot read '" + path.string() + "'");
  } catch (const YAML::Exception& e) {
    throw InvalidArgument("malformed YAML in '" + path.string() + "': " + e.what());
  }
}

template <class T>
T required(const YAML::Node& node, const char* key) {
  if (!node[key]) throw InvalidArgument(std::string("missing key '") + key + "'");
  try {
    return node[key].as<T>();
  } catch (const YAML::Exception&) {
    throw InvalidArgument(std::string("bad value for '") + key + "'");
  }
}

Extent required_extent(const YAML::Node& node, const char* key) {
  const auto v = required<std::vector<int>>(node, key);
  if (v.size() != 2) throw InvalidArgument(std::string("'") + key + "' must be [height, width]");
  return {v[0], v[1]};
}

}  // namespace

void write_pfm(const fs::path& path, const std::vector<Image>& planes) {
  if (planes.size() != 1 && planes.size() != 3) throw InvalidArgument("write_pfm: need 1 or 3 planes");
  const Extent e = planes.front().extent();
  for (const Image& p : planes) {
    if (p.extent() != e) throw InvalidArgument("write_pfm: planes differ in size");
  }
  std::ofstream out = open_out(path);
  out << (planes.size() == 3 ? "PF" : "Pf") << '\n' << e.width << ' ' << e.height << "\n-1.0\n";
  for (int r = e.height - 1; r >= 0; --r) {
    for (int c = 0; c < e.width; ++c) {
      for (const Image& p : planes) put(out, static_cast<float>(p(r, c)));
    }
  }
  check_written(out, path);
}

void write_pfm(const fs::path& path, const Image& plane) { write_pfm(path, std::vector<Image>{plane}); }

std::vector<Image> read_pfm(const fs::path& path) {
  std::ifstream in = open_in(path);
  const std::string magic = header_token(in, path);
  if (magic != "Pf" && magic != "PF") throw IoError("'" + path.string() + "' is not a PFM file");
  const int width = header_int(in, path);
  const int height = header_int(in, path);
  const double scale = std::stod(header_token(in, path));
  if (width < 1 || height < 1) throw IoError("bad PFM size in '" + path.string() + "'");
  if (scale > 0.0) throw IoError("big-endian PFM is not supported: '" + path.string() + "'");
  const std::size_t channels = magic == "PF" ? 3 : 1;
  std::vector<Image> planes(channels, Image(height, width));
  for (int r = height - 1; r >= 0; --r) {
    for (int c = 0; c < width; ++c) {
      for (Image& p : planes) p(r, c) = get<float>(in, path);
    }
  }
  return planes;
}

void write_pgm16(const fs::path& path, const Image& img, double scale) {
  if (!(scale > 0.0)) throw InvalidArgument("write_pgm16: scale must be positive");
  std::ofstream out = open_out(path);
  out << "P5\n" << img.cols() << ' ' << img.rows() << "\n65535\n";
  for (double v : img) {
    const double q = std::clamp(std::round(v * scale), 0.0, 65535.0);
    const auto u = static_cast<std::uint16_t>(q);
    out.put(static_cast<char>(u >> 8));
    out.put(static_cast<char>(u & 0xff));
  }
  check_written(out, path);
}

Image read_pgm16(const fs::path& path, double scale) {
  if (!(scale > 0.0)) throw InvalidArgument("read_pgm16: scale must be positive");
  std::ifstream in = open_in(path);
  if (header_token(in, path) != "P5") throw IoError("'" + path.string() + "' is not a binary PGM file");
  const int width = header_int(in, path);
  const int height = header_int(in, path);
  const int maxval = header_int(in, path);
  if (width < 1 || height < 1 || maxval < 1 || maxval > 65535) throw IoError("bad PGM header in '" + path.string() + "'");
  Image img(height, width);
  for (double& v : img) {
    unsigned value = 0;
    if (maxval > 255) {
      const auto hi = static_cast<unsigned char>(get<char>(in, path));
      const auto lo = static_cast<unsigned char>(get<char>(in, path));
      value = (static_cast<unsigned>(hi) << 8) | lo;
    } else {
      value = static_cast<unsigned char>(get<char>(in, path));
    }
    v = static_cast<double>(value) / scale;
  }
  return img;
}

void write_ppm(const fs::path& path, int height, int width, const std::vector<unsigned char>& rgb) {
  if (height < 1 || width < 1 || rgb.size() != static_cast<std::size_t>(height) * static_cast<std::size_t>(width) * 3) {
    throw InvalidArgument("write_ppm: buffer does not match the size");
  }
  std::ofstream out = open_out(path);
  out << "P6\n" << width << ' ' << height << "\n255\n";
  out.write(reinterpret_cast<const char*>(rgb.data()), static_cast<std::streamsize>(rgb.size()));
  check_written(out, path);
}

void save_lightfield(const fs::path& path, const LightFieldImage& lf) {
  const std::string ext = path.extension().string();
  if (ext == ".pfm") {
    write_pfm(path, lf.planes());
  } else if (ext == ".pgm") {
    if (lf.channels() != 1) throw InvalidArgument("save_lightfield: PGM holds a single channel");
    write_pgm16(path, lf.plane(0));
  } else {
    throw InvalidArgument("save_lightfield: unsupported extension '" + ext + "' (use .pfm or .pgm)");
  }
}

LightFieldImage load_lightfield(const fs::path& path, const CameraConfig& cfg) {
  const std::string ext = path.extension().string();
  std::vector<Image> planes;
  if (ext == ".pfm") {
    planes = read_pfm(path);
  } else if (ext == ".pgm") {
    planes.push_back(read_pgm16(path));
  } else {
    throw InvalidArgument("load_lightfield: unsupported extension '" + ext + "'");
  }
  for (Image& p : planes) {
    for (double& v : p) v = std::max(v, 0.0);
  }
  return LightFieldImage(cfg, std::move(planes));
}

std::string camera_to_yaml(const CameraConfig& cfg) {
  std::string s;
  s += "# lfsep camera configuration\n";
  s += fmt::format("name: {}\n", cfg.name);
  s += fmt::format("main_focal_length: {:.17g}  # m\n", cfg.main_focal_length);
  s += fmt::format("aperture_diameter: {:.17g}  # m\n", cfg.aperture_diameter);
  s += fmt::format("mla_distance: {:.17g}  # m, main lens to microlens array\n", cfg.mla_distance);
  s += fmt::format("microlens_focal_length: {:.17g}  # m\n", cfg.microlens_focal_length);
  s += fmt::format("sensor_distance: {:.17g}  # m, microlens array to sensor\n", cfg.sensor_distance);
  s += fmt::format("pixel_pitch: {:.17g}  # m\n", cfg.pixel_pitch);
  s += fmt::format("unit_cell: [{}, {}]  # sensor px, height x width\n", cfg.unit_cell.height, cfg.unit_cell.width);
  s += fmt::format("microlenses_per_cell: {}  # 1 rectangular, 2 hexagonal super-cell\n", cfg.microlenses_per_cell);
  s += fmt::format("texture_downsample: {}  # sensor px per texture px\n", cfg.texture_downsample);
  s += fmt::format("sensor_size: [{}, {}]  # px, height x width\n", cfg.sensor_size.height, cfg.sensor_size.width);
  s += fmt::format("aperture_samples: {}  # A, stratified A x A pupil grid\n", cfg.aperture_samples);
  return s;
}

CameraConfig camera_from_yaml(const YAML::Node& node) {
  CameraConfig c;
  if (node["name"]) c.name = node["name"].as<std::string>();
  c.main_focal_length = required<double>(node, "main_focal_length");
  c.aperture_diameter = required<double>(node, "aperture_diameter");
  c.mla_distance = required<double>(node, "mla_distance");
  c.microlens_focal_length = required<double>(node, "microlens_focal_length");
  c.sensor_distance = required<double>(node, "sensor_distance");
  c.pixel_pitch = required<double>(node, "pixel_pitch");
  c.unit_cell = required_extent(node, "unit_cell");
  c.microlenses_per_cell = required<int>(node, "microlenses_per_cell");
  c.texture_downsample = required<int>(node, "texture_downsample");
  c.sensor_size = required_extent(node, "sensor_size");
  c.aperture_samples = required<int>(node, "aperture_samples");
  c.validate();
  return c;
}

void save_camera(const fs::path& path, const CameraConfig& cfg) {
  cfg.validate();
  write_text(path, camera_to_yaml(cfg));
}

CameraConfig load_camera(const fs::path& path) { return camera_from_yaml(load_yaml_file(path)); }

void save_bank(const fs::path& dir, const PsfKernelBank& bank) {
  fs::create_directories(dir);
  std::string index = "# lfsep PSF kernel bank\nformat: 1\n";
  index += fmt::format("depth: {:.17g}  # m\n", bank.depth());
  index += fmt::format("period: [{}, {}]  # texture phases, height x width\n", bank.period().height,
                       bank.period().width);
  index += "camera:\n";
  std::istringstream cam(camera_to_yaml(bank.camera()));
  for (std::string line; std::getline(cam, line);) {
    if (!line.empty() && line[0] != '#') index += "  " + line + "\n";
  }
  index += "phases:\n";
  for (const PhaseKernel& pk : bank.phases()) {
    const std::string file = fmt::format("phase_{}_{}.pfm", pk.phase.row, pk.phase.col);
    write_pfm(dir / file, pk.kernel);
    index += fmt::format("  - {{phase: [{}, {}], anchor: [{}, {}], sum: {:.17g}, file: {}}}\n", pk.phase.row,
                         pk.phase.col, pk.anchor.row, pk.anchor.col, sum(pk.kernel), file);
  }
  write_text(dir / "index.yaml", index);
}

PsfKernelBank load_bank(const fs::path& dir) {
  const YAML::Node index = load_yaml_file(dir / "index.yaml");
  if (required<int>(index, "format") != 1) throw InvalidArgument("load_bank: unsupported format version");
  const CameraConfig cfg = camera_from_yaml(index["camera"]);
  const auto depth = required<double>(index, "depth");
  std::vector<PhaseKernel> phases;
  for (const YAML::Node& entry : index["phases"]) {
    PhaseKernel pk;
    pk.phase = [&] {
      const Extent e = required_extent(entry, "phase");
      return Pixel{e.height, e.width};
    }();
    pk.anchor = [&] {
      const Extent e = required_extent(entry, "anchor");
      return Pixel{e.height, e.width};
    }();
    const std::vector<Image> planes = read_pfm(dir / required<std::string>(entry, "file"));
    if (planes.size() != 1) throw IoError("load_bank: kernel files must hold one plane");
    pk.kernel = planes.front();
    // Kernels are stored as float32; restore the recorded double-precision mass.
    const double stored = sum(pk.kernel);
    const auto recorded = required<double>(entry, "sum");
    if (stored > 0.0) {
      for (double& v : pk.kernel) v *= recorded / stored;
    }
    phases.push_back(std::move(pk));
  }
  return PsfKernelBank(cfg, depth, std::move(phases));
}

namespace {

constexpr char kParamsMagic[8] = {'L', 'F', 'S', 'E', 'P', 'N', 'E', 'T'};
constexpr std::uint32_t kParamsVersion = 1;

void put_tensor(std::ostream& out, const std::string& name, const std::vector<std::uint64_t>& shape, const float* data) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
  out.write(name.data(), static_cast<std::streamsize>(name.size()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(shape.size()));
  std::uint64_t count = 1;
  for (std::uint64_t d : shape) {
    put<std::uint64_t>(out, d);
    count *= d;
  }
  for (std::uint64_t i = 0; i < count; ++i) put<double>(out, static_cast<double>(data[i]));
}

struct RawTensor {
  std::vector<std::uint64_t> shape;
  std::vector<double> values;
};

RawTensor get_tensor(std::istream& in, const fs::path& path, const std::string& expected) {
  const auto name_len = get<std::uint32_t>(in, path);
  if (name_len > 256) throw IoError("corrupt tensor header in '" + path.string() + "'");
  std::string name(name_len, '\0');
  in.read(name.data(), name_len);
  if (name != expected) throw IoError("expected tensor '" + expected + "', found '" + name + "'");
  const auto rank = get<std::uint32_t>(in, path);
  if (rank > 4) throw IoError("corrupt tensor rank in '" + path.string() + "'");
  RawTensor t;
  std::uint64_t count = 1;
  for (std::uint32_t i = 0; i < rank; ++i) {
    t.shape.push_back(get<std::uint64_t>(in, path));
    count *= t.shape.back();
  }
  if (count > (1ULL << 32)) throw IoError("corrupt tensor size in '" + path.string() + "'");
  t.values.resize(count);
  for (double& v : t.values) v = get<double>(in, path);
  return t;
}

template <class M>
void assign(M& target, const RawTensor& t, const std::string& name) {
  const auto expected = static_cast<std::uint64_t>(target.size());
  std::uint64_t count = 1;
  for (std::uint64_t d : t.shape) count *= d;
  if (count != expected || (t.shape.size() == 2 && (t.shape[0] != static_cast<std::uint64_t>(target.rows()) ||
                                                    t.shape[1] != static_cast<std::uint64_t>(target.cols())))) {
    throw IoError("tensor '" + name + "' has the wrong shape");
  }
  for (Eigen::Index i = 0; i < target.size(); ++i) target.data()[i] = static_cast<float>(t.values[static_cast<std::size_t>(i)]);
}

std::string arch_manifest(const NetArch& a) {
  return fmt::format(
      "architecture: conv3x3-bn-relu x3, fc-relu, fc\n"
      "in_channels: {}\npatch: {}\nc1: {}\nc2: {}\nc3: {}\nhidden: {}\nlabels: {}\n",
      a.in_channels, a.patch, a.c1, a.c2, a.c3, a.hidden, a.labels);
}

}  // namespace

void save_params(const fs::path& path, const NetParams<float>& p) {
  p.arch.validate();
  std::ofstream out = open_out(path);
  out.write(kParamsMagic, sizeof kParamsMagic);
  put<std::uint32_t>(out, kParamsVersion);
  const std::string manifest = arch_manifest(p.arch);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(manifest.size()));
  out.write(manifest.data(), static_cast<std::streamsize>(manifest.size()));
  const auto mat = [&](const std::string& name, const Mat<float>& m) {
    put_tensor(out, name, {static_cast<std::uint64_t>(m.rows()), static_cast<std::uint64_t>(m.cols())}, m.data());
  };
  const auto vec = [&](const std::string& name, const Vec<float>& v) {
    put_tensor(out, name, {static_cast<std::uint64_t>(v.size())}, v.data());
  };
  for (int l = 0; l < 3; ++l) {
    const std::string tag = "conv" + std::to_string(l + 1);
    mat(tag + ".weight", p.conv_w[l]);
    vec(tag + ".bn_gamma", p.bn_gamma[l]);
    vec(tag + ".bn_beta", p.bn_beta[l]);
    vec(tag + ".bn_mean", p.bn_mean[l]);
    vec(tag + ".bn_var", p.bn_var[l]);
  }
  mat("fc1.weight", p.fc1_w);
  vec("fc1.bias", p.fc1_b);
  mat("fc2.weight", p.fc2_w);
  vec("fc2.bias", p.fc2_b);
  const float norm[2] = {p.input_shift, p.input_scale};
  put_tensor(out, "input.normalization", {2}, norm);
  check_written(out, path);
}

NetParams<float> load_params(const fs::path& path) {
  std::ifstream in = open_in(path);
  char magic[8] = {};
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kParamsMagic, sizeof magic) != 0) {
    throw IoError("'" + path.string() + "' is not a parameter file");
  }
  if (get<std::uint32_t>(in, path) != kParamsVersion) throw IoError("unsupported parameter file version");
  const auto manifest_len = get<std::uint32_t>(in, path);
  if (manifest_len > (1U << 20)) throw IoError("corrupt manifest length in '" + path.string() + "'");
  std::string manifest(manifest_len, '\0');
  in.read(manifest.data(), manifest_len);
  YAML::Node m;
  try {
    m = YAML::Load(manifest);
  } catch (const YAML::Exception&) {
    throw IoError("corrupt architecture manifest in '" + path.string() + "'");
  }
  NetArch arch;
  arch.in_channels = required<int>(m, "in_channels");
  arch.patch = required<int>(m, "patch");
  arch.c1 = required<int>(m, "c1");
  arch.c2 = required<int>(m, "c2");
  arch.c3 = required<int>(m, "c3");
  arch.hidden = required<int>(m, "hidden");
  arch.labels = required<int>(m, "labels");
  NetParams<float> p = zero_params<float>(arch);
  const auto read_into = [&](auto& target, const std::string& name) { assign(target, get_tensor(in, path, name), name); };
  for (int l = 0; l < 3; ++l) {
    const std::string tag = "conv" + std::to_string(l + 1);
    read_into(p.conv_w[l], tag + ".weight");
    read_into(p.bn_gamma[l], tag + ".bn_gamma");
    read_into(p.bn_beta[l], tag + ".bn_beta");
    read_into(p.bn_mean[l], tag + ".bn_mean");
    read_into(p.bn_var[l], tag + ".bn_var");
  }
  read_into(p.fc1_w, "fc1.weight");
  read_into(p.fc1_b, "fc1.bias");
  read_into(p.fc2_w, "fc2.weight");
  read_into(p.fc2_b, "fc2.bias");
  const RawTensor norm = get_tensor(in, path, "input.normalization");
  if (norm.values.size() != 2) throw IoError("bad input normalization tensor");
  p.input_shift = static_cast<float>(norm.values[0]);
  p.input_scale = static_cast<float>(norm.values[1]);
  return p;
}

void save_patch_set(const fs::path& dir, const PatchSet& set) {
  fs::create_directories(dir / "patches");
  write_text(dir / "manifest.yaml",
             fmt::format("# lfsep patch dataset\nformat: 1\npatch: {}  # units\nchannels: {}  # views x colours\n"
                         "count: {}\nlayout: row, col, channel (float32, little-endian)\n",
                         set.patch, set.channels, set.size()));
  std::string labels = "index\tfile\tlabel\n";
  for (int i = 0; i < set.size(); ++i) {
    const std::string file = fmt::format("patches/{:06d}.f32", i);
    std::ofstream out = open_out(dir / file);
    const float* src = set.data.data() + static_cast<std::size_t>(i) * set.sample_stride();
    out.write(reinterpret_cast<const char*>(src), static_cast<std::streamsize>(set.sample_stride() * sizeof(float)));
    check_written(out, dir / file);
    labels += fmt::format("{}\t{}\t{}\n", i, file, set.labels[static_cast<std::size_t>(i)]);
  }
  write_text(dir / "labels.tsv", labels);
}

PatchSet load_patch_set(const fs::path& dir) {
  const YAML::Node m = load_yaml_file(dir / "manifest.yaml");
  if (required<int>(m, "format") != 1) throw InvalidArgument("load_patch_set: unsupported format version");
  PatchSet set;
  set.patch = required<int>(m, "patch");
  set.channels = required<int>(m, "channels");
  const int count = required<int>(m, "count");
  std::istringstream labels(read_text(dir / "labels.tsv"));
  std::string line;
  std::getline(labels, line);  // header
  for (int i = 0; i < count; ++i) {
    if (!std::getline(labels, line)) throw IoError("labels.tsv has fewer rows than the manifest count");
    std::istringstream row(line);
    int index = 0;
    std::string file;
    int label = 0;
    if (!(row >> index >> file >> label) || index != i) throw IoError("malformed labels.tsv row " + std::to_string(i));
    std::ifstream in = open_in(dir / file);
    const std::size_t offset = set.data.size();
    set.data.resize(offset + set.sample_stride());
    in.read(reinterpret_cast<char*>(set.data.data() + offset),
            static_cast<std::streamsize>(set.sample_stride() * sizeof(float)));
    if (!in) throw IoError("patch file '" + file + "' is truncated");
    set.labels.push_back(label);
  }
  return set;
}

std::string read_text(const fs::path& path) {
  std::ifstream in = open_in(path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out = open_out(path);
  out << text;
  check_written(out, path);
}

}  // namespace lfsep
