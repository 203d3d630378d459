#include "flowsynth/dataset_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <mutex>
#include <set>
#include <sstream>

#include <json.hpp>
#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>
#include <png.h>
#include <zlib.h>

#include "fs_util.hpp"

namespace flowsynth {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// ---- raw buffers ----------------------------------------------------------

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed: " + path.string());
  return bytes;
}

template <typename T>
void put_le(std::string& out, T value) {
  static_assert(sizeof(T) == 4);
  auto bits = std::bit_cast<std::uint32_t>(value);
  if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap32(bits);
  char b[4];
  std::memcpy(b, &bits, 4);
  out.append(b, 4);
}

template <typename T>
T get_le(const char* p) {
  static_assert(sizeof(T) == 4);
  std::uint32_t bits;
  std::memcpy(&bits, p, 4);
  if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap32(bits);
  return std::bit_cast<T>(bits);
}

// ---- OpenCV bridging ------------------------------------------------------

// Same as lround(v * 255) on [0, 1]: the double sum is exact.
std::uint8_t to_u8(float v) {
  return static_cast<std::uint8_t>(static_cast<int>(double(std::clamp(v, 0.0f, 1.0f)) * 255.0 + 0.5));
}

// Any 8-bit BGR(A)/gray mat to an RGB float image.
Image from_mat8(const cv::Mat& m) {
  cv::Mat bgr;
  if (m.channels() == 1) {
    cv::cvtColor(m, bgr, cv::COLOR_GRAY2BGR);
  } else if (m.channels() == 4) {
    cv::cvtColor(m, bgr, cv::COLOR_BGRA2BGR);
  } else {
    bgr = m;
  }
  Image out(bgr.rows, bgr.cols, 3);
  for (int y = 0; y < bgr.rows; ++y) {
    const auto* src = bgr.ptr<std::uint8_t>(y);
    float* dst = out.pixel(y, 0);
    for (int x = 0; x < bgr.cols; ++x) {
      for (int c = 0; c < 3; ++c) dst[x * 3 + c] = src[x * 3 + 2 - c] / 255.0f;
    }
  }
  return out;
}

std::string encode_mat_png(const cv::Mat& m) {
  std::vector<std::uint8_t> buf;
  if (!cv::imencode(".png", m, buf, {cv::IMWRITE_PNG_COMPRESSION, kPngCompression})) {
    throw IoError("PNG encoding failed");
  }
  return {buf.begin(), buf.end()};
}

// 8-bit gray or RGB rows, encoded with libpng. The Paeth filter with
// Huffman-only deflate compresses photographs about as well as the adaptive
// filter at half the time.
std::string encode_png8(const std::uint8_t* pixels, int height, int width, int channels) {
  std::string out;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw IoError("PNG encoding failed");
  png_infop info = png_create_info_struct(png);
  if (!info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("PNG encoding failed");
  }
  png_set_write_fn(
      png, &out,
      [](png_structp p, png_bytep data, png_size_t n) {
        static_cast<std::string*>(png_get_io_ptr(p))->append(reinterpret_cast<const char*>(data), n);
      },
      nullptr);
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8,
               channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_set_filter(png, PNG_FILTER_TYPE_BASE, PNG_FILTER_PAETH);
  png_set_compression_level(png, kPngCompression);
  png_set_compression_strategy(png, Z_HUFFMAN_ONLY);
  png_write_info(png, info);
  const std::size_t stride = std::size_t(width) * channels;
  for (int y = 0; y < height; ++y) {
    png_write_row(png, const_cast<png_bytep>(pixels + y * stride));
  }
  png_write_end(png, info);
  png_destroy_write_struct(&png, &info);
  return out;
}

cv::Mat read_mat(const fs::path& path, int flags) {
  const std::string bytes = read_file(path);
  const cv::Mat raw(1, static_cast<int>(bytes.size()), CV_8U, const_cast<char*>(bytes.data()));
  cv::Mat m = cv::imdecode(raw, flags);
  if (m.empty()) throw FormatError("cannot decode image " + path.string());
  return m;
}

bool is_raster_extension(const fs::path& p) {
  static const std::set<std::string> kExt{".png", ".jpg", ".jpeg", ".bmp", ".tif",
                                          ".tiff", ".webp", ".ppm", ".pgm", ".pnm"};
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return kExt.contains(ext);
}

// ---- JSON -----------------------------------------------------------------

json pair(double x, double y) { return json::array({x, y}); }
json pair(int x, int y) { return json::array({x, y}); }

json to_json(const JitterParams& j) {
  return {{"brightness", j.brightness}, {"contrast", j.contrast},
          {"saturation", j.saturation}, {"hue", j.hue}, {"contrast_mean", j.contrast_mean}};
}

JitterParams jitter_from(const json& j) {
  return {j.at("brightness").get<double>(), j.at("contrast").get<double>(),
          j.at("saturation").get<double>(), j.at("hue").get<double>(),
          j.at("contrast_mean").get<double>()};
}

json to_json(const Rect& r) { return json::array({r.x0, r.y0, r.x1, r.y1}); }
Rect rect_from(const json& j) {
  return {j.at(0).get<int>(), j.at(1).get<int>(), j.at(2).get<int>(), j.at(3).get<int>()};
}

template <typename T>
json optional_json(const std::optional<T>& v) {
  return v ? to_json(*v) : json(nullptr);
}

json to_json(const Provenance& p) {
  json layers = json::array();
  for (const LayerRecord& l : p.layers) {
    layers.push_back({{"granularity", l.granularity},
                      {"target_size", l.target_size},
                      {"seed_segment", l.seed_segment},
                      {"mask_pixels", l.mask_pixels},
                      {"kind", l.kind == LayerKind::kShadow ? "shadow" : "opaque"},
                      {"shadow_opacity", l.shadow_opacity},
                      {"grid_size1", l.grid_size1},
                      {"grid_size0", l.grid_size0},
                      {"p0", pair(l.p0.x, l.p0.y)},
                      {"p1", pair(l.p1.x, l.p1.y)}});
  }
  json out = {{"seed", p.seed},
              {"source_index", p.source_index},
              {"aux_index", p.aux_index},
              {"background",
               {{"grid_size1", p.background.grid_size1},
                {"grid_size0", p.background.grid_size0},
                {"shift", pair(p.background.shift.x, p.background.shift.y)}}},
              {"layers", layers},
              {"augment", nullptr}};
  if (p.augment) {
    const AugmentRecord& a = *p.augment;
    out["augment"] = {{"jitter0", optional_json(a.jitter0)}, {"jitter1", optional_json(a.jitter1)},
                      {"scale", a.scale},  {"h_flip", a.h_flip},
                      {"v_flip", a.v_flip}, {"crop", optional_json(a.crop)},
                      {"erase", optional_json(a.erase)}};
  }
  return out;
}

Provenance provenance_from(const json& j) {
  Provenance p;
  p.seed = j.at("seed").get<std::uint64_t>();
  p.source_index = j.at("source_index").get<int>();
  p.aux_index = j.at("aux_index").get<int>();
  const json& bg = j.at("background");
  p.background.grid_size1 = bg.at("grid_size1").get<int>();
  p.background.grid_size0 = bg.at("grid_size0").get<int>();
  p.background.shift = {bg.at("shift").at(0).get<double>(), bg.at("shift").at(1).get<double>()};
  for (const json& l : j.at("layers")) {
    LayerRecord r;
    r.granularity = l.at("granularity").get<int>();
    r.target_size = l.at("target_size").get<std::int64_t>();
    r.seed_segment = l.at("seed_segment").get<int>();
    r.mask_pixels = l.at("mask_pixels").get<std::int64_t>();
    r.kind = l.at("kind").get<std::string>() == "shadow" ? LayerKind::kShadow : LayerKind::kOpaque;
    r.shadow_opacity = l.at("shadow_opacity").get<double>();
    r.grid_size1 = l.at("grid_size1").get<int>();
    r.grid_size0 = l.at("grid_size0").get<int>();
    r.p0 = {l.at("p0").at(0).get<int>(), l.at("p0").at(1).get<int>()};
    r.p1 = {l.at("p1").at(0).get<int>(), l.at("p1").at(1).get<int>()};
    p.layers.push_back(r);
  }
  const json& a = j.at("augment");
  if (!a.is_null()) {
    AugmentRecord r;
    if (!a.at("jitter0").is_null()) r.jitter0 = jitter_from(a.at("jitter0"));
    if (!a.at("jitter1").is_null()) r.jitter1 = jitter_from(a.at("jitter1"));
    r.scale = a.at("scale").get<double>();
    r.h_flip = a.at("h_flip").get<bool>();
    r.v_flip = a.at("v_flip").get<bool>();
    if (!a.at("crop").is_null()) r.crop = rect_from(a.at("crop"));
    if (!a.at("erase").is_null()) r.erase = rect_from(a.at("erase"));
    p.augment = r;
  }
  return p;
}

std::string header_line(const std::string& config_json) {
  json config;
  try {
    config = json::parse(config_json.empty() ? "{}" : config_json);
  } catch (const json::exception& e) {
    throw InvalidParameter(std::string("manifest config snapshot is not valid JSON: ") + e.what());
  }
  return json{{"type", "header"},
              {"schema_version", kManifestSchemaVersion},
              {"generator", generator_version()},
              {"config", config}}
      .dump();
}

}  // namespace

// ---- ingestion ------------------------------------------------------------

Image fit_to_size(const Image& img, Size2 target) {
  if (target.width < 1 || target.height < 1) throw InvalidParameter("fit_to_size: empty target");
  if (img.width() == target.width && img.height() == target.height) return img;
  const double s = std::max(double(target.width) / img.width(), double(target.height) / img.height());
  const int rw = std::max(target.width, static_cast<int>(std::lround(img.width() * s)));
  const int rh = std::max(target.height, static_cast<int>(std::lround(img.height() * s)));
  const cv::Mat src(img.height(), img.width(), CV_32FC(img.channels()),
                    const_cast<float*>(img.data().data()));
  cv::Mat resized;
  cv::resize(src, resized, cv::Size(rw, rh), 0, 0, s < 1.0 ? cv::INTER_AREA : cv::INTER_LINEAR);
  const int x0 = (rw - target.width) / 2, y0 = (rh - target.height) / 2;
  const cv::Mat roi = resized(cv::Rect(x0, y0, target.width, target.height));
  Image out(target.height, target.width, img.channels());
  const std::size_t row_floats = std::size_t(target.width) * img.channels();
  for (int y = 0; y < target.height; ++y) {
    const float* r = roi.ptr<float>(y);
    float* o = out.pixel(y, 0);
    for (std::size_t k = 0; k < row_floats; ++k) o[k] = std::clamp(r[k], 0.0f, 1.0f);
  }
  return out;
}

ImageCorpus ingest_images(const fs::path& directory, Size2 min_size, std::optional<Size2> target_size) {
  std::vector<fs::path> paths;
  std::error_code ec;
  fs::directory_iterator it(directory, ec);
  if (ec) throw IoError("cannot read directory " + directory.string() + ": " + ec.message());
  for (const fs::directory_entry& e : it) {
    if (e.is_regular_file() && is_raster_extension(e.path())) paths.push_back(e.path());
  }
  std::sort(paths.begin(), paths.end());

  ImageCorpus corpus;
  for (const fs::path& p : paths) {
    cv::Mat m;
    try {
      m = read_mat(p, cv::IMREAD_COLOR);
    } catch (const Error& e) {
      corpus.skipped.push_back({p, e.what()});
      continue;
    }
    if (m.cols < min_size.width || m.rows < min_size.height) {
      corpus.skipped.push_back({p, "smaller than the minimum size (" + std::to_string(m.cols) + "x" +
                                       std::to_string(m.rows) + ")"});
      continue;
    }
    Image img = from_mat8(m);
    if (target_size) img = fit_to_size(img, *target_size);
    corpus.images.push_back({p, std::move(img)});
  }
  if (corpus.images.empty()) {
    throw EmptyCorpus("empty corpus: no usable images in " + directory.string());
  }
  return corpus;
}

// ---- PNG ------------------------------------------------------------------

std::string encode_png(const Image& img) {
  const int nc = img.channels();
  if (nc != 1 && nc != 3) throw InvalidDimension("PNG output needs 1 or 3 channels");
  std::vector<std::uint8_t> px(img.data().size());
  std::transform(img.data().begin(), img.data().end(), px.begin(), to_u8);
  return encode_png8(px.data(), img.height(), img.width(), nc);
}

void write_png(const Image& img, const fs::path& path) { detail::write_file_atomic(path, encode_png(img)); }

Image read_png(const fs::path& path) { return from_mat8(read_mat(path, cv::IMREAD_COLOR)); }

void write_mask_png(const Mask& mask, const fs::path& path) {
  std::vector<std::uint8_t> px(mask.data().size());
  std::transform(mask.data().begin(), mask.data().end(), px.begin(), to_u8);
  detail::write_file_atomic(path, encode_png8(px.data(), mask.height(), mask.width(), 1));
}

Mask read_mask_png(const fs::path& path) {
  const cv::Mat m = read_mat(path, cv::IMREAD_GRAYSCALE);
  Mask out(m.rows, m.cols);
  for (int y = 0; y < m.rows; ++y) {
    const auto* src = m.ptr<std::uint8_t>(y);
    auto dst = out.row(y);
    for (int x = 0; x < m.cols; ++x) dst[x] = src[x] / 255.0f;
  }
  return out;
}

// ---- .flo -----------------------------------------------------------------

std::string encode_flo(const FlowField& flow) {
  std::string out;
  out.reserve(12 + flow.size() * 8);
  put_le(out, kFloMagic);
  put_le(out, static_cast<std::int32_t>(flow.width()));
  put_le(out, static_cast<std::int32_t>(flow.height()));
  for (const FlowVec& f : flow.data()) {
    if (!std::isfinite(f.u) || !std::isfinite(f.v)) throw EncodeError("write_flo: non-finite flow");
    put_le(out, f.u);
    put_le(out, f.v);
  }
  return out;
}

FlowField decode_flo(std::string_view bytes) {
  if (bytes.size() < 12) throw FormatError(".flo: truncated header");
  if (get_le<float>(bytes.data()) != kFloMagic) throw FormatError(".flo: bad magic number");
  const auto w = get_le<std::int32_t>(bytes.data() + 4);
  const auto h = get_le<std::int32_t>(bytes.data() + 8);
  if (w < 0 || h < 0) throw FormatError(".flo: negative dimensions");
  const std::uint64_t payload = std::uint64_t(w) * std::uint64_t(h) * 8;
  if (bytes.size() - 12 != payload) {
    throw FormatError(".flo: payload is " + std::to_string(bytes.size() - 12) + " bytes, expected " +
                      std::to_string(payload));
  }
  FlowField flow(h, w);
  const char* p = bytes.data() + 12;
  for (FlowVec& f : flow.data()) {
    f.u = get_le<float>(p);
    f.v = get_le<float>(p + 4);
    p += 8;
  }
  return flow;
}

void write_flo(const FlowField& flow, const fs::path& path) {
  detail::write_file_atomic(path, encode_flo(flow));
}

FlowField read_flo(const fs::path& path) {
  try {
    return decode_flo(read_file(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

// ---- KITTI ----------------------------------------------------------------

void write_kitti_png(const FlowField& flow, const Mask& valid, const fs::path& path) {
  if (!valid.same_shape(flow.height(), flow.width())) {
    throw InvalidDimension("write_kitti_png: validity mask does not match the flow");
  }
  // OpenCV orders channels B, G, R; KITTI stores u in R, v in G, valid in B.
  cv::Mat m(flow.height(), flow.width(), CV_16UC3);
  for (int y = 0; y < flow.height(); ++y) {
    auto* dst = m.ptr<std::uint16_t>(y);
    for (int x = 0; x < flow.width(); ++x) {
      const FlowVec f = flow(y, x);
      const bool ok = mask_set(valid(y, x));
      if (ok && !(std::abs(f.u) < kKittiMaxFlow && std::abs(f.v) < kKittiMaxFlow)) {
        throw EncodeError("write_kitti_png: flow (" + std::to_string(f.u) + ", " +
                          std::to_string(f.v) + ") at (" + std::to_string(x) + ", " +
                          std::to_string(y) + ") is outside the encodable range");
      }
      auto enc = [&](float c) {
        return static_cast<std::uint16_t>(ok ? std::lround(c * kKittiScale + 32768.0) : 32768);
      };
      dst[3 * x + 0] = ok ? 1 : 0;
      dst[3 * x + 1] = enc(f.v);
      dst[3 * x + 2] = enc(f.u);
    }
  }
  detail::write_file_atomic(path, encode_mat_png(m));
}

KittiFlow read_kitti_png(const fs::path& path) {
  const cv::Mat m = read_mat(path, cv::IMREAD_UNCHANGED);
  if (m.depth() != CV_16U || m.channels() != 3) {
    throw FormatError(path.string() + ": not a 16-bit 3-channel KITTI flow PNG");
  }
  KittiFlow out{FlowField(m.rows, m.cols), Mask(m.rows, m.cols)};
  for (int y = 0; y < m.rows; ++y) {
    const auto* src = m.ptr<std::uint16_t>(y);
    for (int x = 0; x < m.cols; ++x) {
      const bool ok = src[3 * x] > 0;
      out.valid(y, x) = ok ? 1.0f : 0.0f;
      if (!ok) continue;
      out.flow(y, x) = {static_cast<float>((src[3 * x + 2] - 32768.0) / kKittiScale),
                        static_cast<float>((src[3 * x + 1] - 32768.0) / kKittiScale)};
    }
  }
  return out;
}

// ---- visualization --------------------------------------------------------

Image colorize_flow(const FlowField& flow, std::optional<double> max_magnitude) {
  const int h = flow.height(), w = flow.width();
  std::vector<float> mag(flow.size());
  for (std::size_t i = 0; i < mag.size(); ++i) {
    mag[i] = std::hypot(flow.data()[i].u, flow.data()[i].v);
  }
  double scale = max_magnitude.value_or(0.0);
  if (!max_magnitude && !mag.empty()) {
    std::vector<float> sorted = mag;
    const std::size_t k = static_cast<std::size_t>(std::ceil(0.99 * sorted.size())) - 1;
    std::nth_element(sorted.begin(), sorted.begin() + k, sorted.end());
    scale = sorted[k];
  }
  if (!(scale > 0.0)) scale = 1.0;

  cv::Mat hsv(h, w, CV_32FC3);
  for (int y = 0; y < h; ++y) {
    auto* p = hsv.ptr<float>(y);
    for (int x = 0; x < w; ++x) {
      const FlowVec f = flow(y, x);
      const double r = mag[std::size_t(y) * w + x] / scale;
      double hue = std::atan2(double(f.v), double(f.u)) * (180.0 / 3.14159265358979323846);
      if (hue < 0.0) hue += 360.0;
      p[3 * x] = static_cast<float>(hue);
      p[3 * x + 1] = static_cast<float>(std::min(r, 1.0));
      p[3 * x + 2] = r <= 1.0 ? 1.0f : 0.75f;
    }
  }
  cv::Mat rgb;
  cv::cvtColor(hsv, rgb, cv::COLOR_HSV2RGB);
  Image out(h, w, 3);
  for (int y = 0; y < h; ++y) {
    const float* r = rgb.ptr<float>(y);
    std::copy_n(r, std::size_t(w) * 3, out.pixel(y, 0));
  }
  return out;
}

// ---- samples --------------------------------------------------------------

std::string sample_id(std::int64_t index) {
  std::string s = std::to_string(index);
  return s.size() >= 6 ? s : std::string(6 - s.size(), '0') + s;
}

std::string generator_version() { return std::string("flowsynth ") + FLOWSYNTH_VERSION; }

SampleRecord write_sample(const SceneSample& sample, const fs::path& root, const std::string& id,
                          const OutputFormats& formats) {
  const int h = sample.frame0.height(), w = sample.frame0.width();
  if (!sample.frame1.same_shape(sample.frame0) || !sample.flow.same_shape(h, w) ||
      !sample.occlusion.same_shape(h, w) || !sample.shadow_region.same_shape(h, w)) {
    throw InvalidDimension("write_sample: rasters of sample " + id + " differ in size");
  }
  std::error_code ec;
  fs::create_directories(root, ec);
  if (ec) throw IoError("cannot create " + root.string() + ": " + ec.message());

  SampleRecord rec;
  rec.id = id;
  rec.frame0 = id + "_img1.png";
  rec.frame1 = id + "_img2.png";
  rec.occlusion = id + "_occ.png";
  rec.shadow = id + "_shadow.png";
  rec.width = w;
  rec.height = h;
  rec.generator = generator_version();
  rec.provenance = sample.provenance;
  write_png(sample.frame0, root / rec.frame0);
  write_png(sample.frame1, root / rec.frame1);
  if (formats.flo) {
    rec.flow_flo = id + "_flow.flo";
    write_flo(sample.flow, root / rec.flow_flo);
  }
  if (formats.kitti) {
    rec.flow_kitti = id + "_flow.png";
    Mask valid(h, w, 1.0f);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const FlowVec f = sample.flow(y, x);
        if (!(std::abs(f.u) < kKittiMaxFlow && std::abs(f.v) < kKittiMaxFlow)) valid(y, x) = 0.0f;
      }
    }
    write_kitti_png(sample.flow, valid, root / rec.flow_kitti);
  }
  write_mask_png(sample.occlusion, root / rec.occlusion);
  write_mask_png(sample.shadow_region, root / rec.shadow);
  return rec;
}

SceneSample read_sample(const SampleRecord& record, const fs::path& root) {
  SceneSample s;
  s.frame0 = read_png(root / record.frame0);
  s.frame1 = read_png(root / record.frame1);
  if (!record.flow_flo.empty()) {
    s.flow = read_flo(root / record.flow_flo);
  } else if (!record.flow_kitti.empty()) {
    s.flow = read_kitti_png(root / record.flow_kitti).flow;
  } else {
    throw FormatError("sample " + record.id + " has no flow file");
  }
  s.occlusion = read_mask_png(root / record.occlusion);
  s.shadow_region = read_mask_png(root / record.shadow);
  s.provenance = record.provenance;
  const int h = s.frame0.height(), w = s.frame0.width();
  if (!s.frame1.same_shape(s.frame0) || !s.flow.same_shape(h, w) || !s.occlusion.same_shape(h, w) ||
      !s.shadow_region.same_shape(h, w)) {
    throw FormatError("sample " + record.id + ": files differ in size");
  }
  return s;
}

std::string record_to_json(const SampleRecord& r) {
  json j = {{"schema_version", kManifestSchemaVersion},
            {"id", r.id},
            {"frame0", r.frame0},
            {"frame1", r.frame1},
            {"flow", r.flow_flo.empty() ? json(nullptr) : json(r.flow_flo)},
            {"flow_kitti", r.flow_kitti.empty() ? json(nullptr) : json(r.flow_kitti)},
            {"occlusion", r.occlusion},
            {"shadow", r.shadow},
            {"width", r.width},
            {"height", r.height},
            {"seed", r.provenance.seed},
            {"generator", r.generator},
            {"params", to_json(r.provenance)}};
  return j.dump();
}

SampleRecord record_from_json(const std::string& line) {
  try {
    const json j = json::parse(line);
    if (j.at("schema_version").get<int>() != kManifestSchemaVersion) {
      throw FormatError("unsupported manifest schema version " + j.at("schema_version").dump());
    }
    SampleRecord r;
    r.id = j.at("id").get<std::string>();
    r.frame0 = j.at("frame0").get<std::string>();
    r.frame1 = j.at("frame1").get<std::string>();
    if (!j.at("flow").is_null()) r.flow_flo = j.at("flow").get<std::string>();
    if (!j.at("flow_kitti").is_null()) r.flow_kitti = j.at("flow_kitti").get<std::string>();
    r.occlusion = j.at("occlusion").get<std::string>();
    r.shadow = j.at("shadow").get<std::string>();
    r.width = j.at("width").get<int>();
    r.height = j.at("height").get<int>();
    r.generator = j.at("generator").get<std::string>();
    r.provenance = provenance_from(j.at("params"));
    return r;
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed manifest record: ") + e.what());
  }
}

// ---- manifest -------------------------------------------------------------

struct ManifestWriter::Impl {
  fs::path path;
  std::string header;
  std::ofstream out;
  std::vector<std::pair<std::string, std::string>> lines;  // (id, json)
  mutable std::mutex mu;
  bool finished = false;
};

ManifestWriter::ManifestWriter(const fs::path& root, const std::string& config_json)
    : impl_(std::make_unique<Impl>()) {
  std::error_code ec;
  fs::create_directories(root, ec);
  if (ec) throw IoError("cannot create " + root.string() + ": " + ec.message());
  impl_->path = root / kManifestName;
  impl_->header = header_line(config_json);
  impl_->out.open(impl_->path, std::ios::binary | std::ios::trunc);
  if (!impl_->out) throw IoError("cannot open " + impl_->path.string());
  impl_->out << impl_->header << '\n';
  impl_->out.flush();
}

ManifestWriter::~ManifestWriter() = default;

void ManifestWriter::add(const SampleRecord& record) {
  std::string line = record_to_json(record);
  std::lock_guard lock(impl_->mu);
  if (impl_->finished) throw InvalidParameter("ManifestWriter::add after finish");
  impl_->out << line << '\n';
  impl_->out.flush();
  if (!impl_->out) throw IoError("manifest append failed: " + impl_->path.string());
  impl_->lines.emplace_back(record.id, std::move(line));
}

void ManifestWriter::finish() {
  std::lock_guard lock(impl_->mu);
  if (impl_->finished) return;
  impl_->out.close();
  std::sort(impl_->lines.begin(), impl_->lines.end());
  std::string text = impl_->header + '\n';
  for (const auto& [id, line] : impl_->lines) text += line + '\n';
  detail::write_file_atomic(impl_->path, text);
  impl_->finished = true;
}

std::size_t ManifestWriter::size() const {
  std::lock_guard lock(impl_->mu);
  return impl_->lines.size();
}

Manifest read_manifest(const fs::path& path) {
  if (!fs::exists(path)) throw IoError("manifest not found: " + path.string());
  const std::string text = read_file(path);
  Manifest m;
  std::size_t pos = 0;
  bool header = false;
  for (std::size_t line_no = 1; pos < text.size(); ++line_no) {
    const std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) break;  // interrupted append
    const std::string line = text.substr(pos, end - pos);
    pos = end + 1;
    if (line.empty()) continue;
    if (!header) {
      try {
        const json j = json::parse(line);
        if (j.at("type").get<std::string>() != "header") throw FormatError("missing header");
        m.schema_version = j.at("schema_version").get<int>();
        m.config_json = j.at("config").dump();
      } catch (const json::exception& e) {
        throw FormatError(path.string() + ": bad header line: " + e.what());
      }
      if (m.schema_version != kManifestSchemaVersion) {
        throw FormatError(path.string() + ": unsupported schema version " +
                          std::to_string(m.schema_version));
      }
      header = true;
      continue;
    }
    try {
      m.records.push_back(record_from_json(line));
    } catch (const FormatError& e) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (!header) throw FormatError(path.string() + ": missing header line");
  return m;
}

ManifestCheck validate_manifest(const fs::path& path) {
  const Manifest m = read_manifest(path);
  const fs::path root = path.parent_path();
  ManifestCheck check;
  check.n_records = m.records.size();
  std::set<std::string> ids;
  std::set<std::uint64_t> seeds;
  for (const SampleRecord& r : m.records) {
    auto problem = [&](const std::string& what) { check.problems.push_back(r.id + ": " + what); };
    if (!ids.insert(r.id).second) problem("duplicate id");
    if (!seeds.insert(r.provenance.seed).second) problem("duplicate seed");
    auto check_raster = [&](const std::string& rel, int flags) {
      if (rel.empty()) return;
      const fs::path p = root / rel;
      if (!fs::exists(p)) return problem("missing file " + rel);
      try {
        const cv::Mat img = read_mat(p, flags);
        if (img.cols != r.width || img.rows != r.height) problem("wrong dimensions in " + rel);
      } catch (const Error& e) {
        problem(e.what());
      }
    };
    check_raster(r.frame0, cv::IMREAD_UNCHANGED);
    check_raster(r.frame1, cv::IMREAD_UNCHANGED);
    check_raster(r.occlusion, cv::IMREAD_UNCHANGED);
    check_raster(r.shadow, cv::IMREAD_UNCHANGED);
    check_raster(r.flow_kitti, cv::IMREAD_UNCHANGED);
    if (r.flow_flo.empty() && r.flow_kitti.empty()) problem("no flow file");
    if (!r.flow_flo.empty()) {
      const fs::path p = root / r.flow_flo;
      if (!fs::exists(p)) {
        problem("missing file " + r.flow_flo);
      } else {
        try {
          const FlowField f = read_flo(p);
          if (!f.same_shape(r.height, r.width)) problem("wrong dimensions in " + r.flow_flo);
        } catch (const Error& e) {
          problem(e.what());
        }
      }
    }
  }
  return check;
}

}  // namespace flowsynth
