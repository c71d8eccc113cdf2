#include "pstnet/image_io.hpp"

#include <png.h>

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <vector>

#include "pstnet/error.hpp"

namespace pstnet::io {
namespace {

using json = nlohmann::json;

static_assert(std::endian::native == std::endian::little,
              "flow IO assumes a little-endian host");

std::string describe_format(png_uint_32 format) {
  std::string out;
  if (format & PNG_FORMAT_FLAG_COLORMAP) out += "palette-indexed, ";
  if (format & PNG_FORMAT_FLAG_LINEAR) out += "16-bit depth, ";
  if (format & PNG_FORMAT_FLAG_ALPHA) out += "alpha channel, ";
  if (!(format & PNG_FORMAT_FLAG_COLOR)) out += "grayscale color type, ";
  if (!out.empty()) out.resize(out.size() - 2);
  return out;
}

struct DecodedPng {
  png_uint_32 width = 0;
  png_uint_32 height = 0;
  std::vector<std::uint8_t> bytes;
};

DecodedPng decode_png(const fs::path& path, png_uint_32 want_format, const char* want_name) {
  if (!fs::exists(path)) {
    throw IoError("no such file: " + path.string());
  }
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.string().c_str())) {
    throw FormatError("cannot decode PNG " + path.string() + ": " + image.message);
  }
  // The simplified API reports the file's native layout before any conversion.
  const png_uint_32 native = image.format;
  if (native != want_format) {
    png_image_free(&image);
    throw FormatError(path.string() + ": expected 8-bit " + want_name + " PNG, found " +
                      describe_format(native));
  }
  DecodedPng out;
  out.width = image.width;
  out.height = image.height;
  out.bytes.resize(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, out.bytes.data(), 0, nullptr)) {
    throw FormatError("cannot decode PNG " + path.string() + ": " + image.message);
  }
  return out;
}

void encode_png(const fs::path& path, png_uint_32 format, png_uint_32 width, png_uint_32 height,
                const std::vector<std::uint8_t>& bytes) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  image.width = width;
  image.height = height;
  image.format = format;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&image, nullptr, &size, 0, bytes.data(), 0, nullptr)) {
    throw IoError("cannot encode PNG: " + std::string(image.message));
  }
  std::string buffer(size, '\0');
  if (!png_image_write_to_memory(&image, buffer.data(), &size, 0, bytes.data(), 0, nullptr)) {
    throw IoError("cannot encode PNG: " + std::string(image.message));
  }
  buffer.resize(size);
  write_file_atomic(path, buffer);
}

std::uint8_t to_byte(float v) {
  // round-half-up on the [0, 255] scale
  const float scaled = std::floor(v * 255.0f + 0.5f);
  return static_cast<std::uint8_t>(std::clamp(scaled, 0.0f, 255.0f));
}

template <typename T>
void put_le(std::string& out, T value) {
  char raw[sizeof(T)];
  std::memcpy(raw, &value, sizeof(T));
  out.append(raw, sizeof(T));
}

template <typename T>
T get_le(const std::string& in, std::size_t offset) {
  T value;
  std::memcpy(&value, in.data() + offset, sizeof(T));
  return value;
}

std::array<double, 3> read_triplet(const json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_array() || j.at(key).size() != 3) {
    throw FormatError(std::string("exposure patch field '") + key + "' must be a 3-array");
  }
  std::array<double, 3> out{};
  for (std::size_t c = 0; c < 3; ++c) out[c] = j.at(key).at(c).get<double>();
  return out;
}

}  // namespace

Frame load_frame(const fs::path& path) {
  auto png = decode_png(path, PNG_FORMAT_RGB, "RGB");
  auto bytes = torch::from_blob(png.bytes.data(),
                                {static_cast<int64_t>(png.height), static_cast<int64_t>(png.width), 3},
                                torch::kUInt8);
  return Frame(bytes.permute({2, 0, 1}).to(torch::kFloat32) / 255.0f);
}

void save_frame(const Frame& frame, const fs::path& path) {
  const auto h = frame.height();
  const auto w = frame.width();
  auto hwc = frame.tensor().permute({1, 2, 0}).contiguous();
  const float* src = hwc.data_ptr<float>();
  std::vector<std::uint8_t> bytes(static_cast<std::size_t>(h * w * 3));
  for (std::size_t i = 0; i < bytes.size(); ++i) bytes[i] = to_byte(src[i]);
  encode_png(path, PNG_FORMAT_RGB, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), bytes);
}

Frame quantize(const Frame& frame) {
  return Frame(torch::floor(frame.tensor() * 255.0f + 0.5f).clamp(0.0, 255.0) / 255.0f);
}

Mask load_mask(const fs::path& path) {
  auto png = decode_png(path, PNG_FORMAT_GRAY, "grayscale");
  auto bytes = torch::from_blob(png.bytes.data(),
                                {1, static_cast<int64_t>(png.height), static_cast<int64_t>(png.width)},
                                torch::kUInt8);
  return Mask(bytes.to(torch::kFloat32) / 255.0f);
}

void save_mask(const Mask& mask, const fs::path& path) {
  auto t = mask.tensor().contiguous();
  const float* src = t.data_ptr<float>();
  std::vector<std::uint8_t> bytes(static_cast<std::size_t>(t.numel()));
  for (std::size_t i = 0; i < bytes.size(); ++i) bytes[i] = to_byte(src[i]);
  encode_png(path, PNG_FORMAT_GRAY, static_cast<png_uint_32>(mask.width()),
             static_cast<png_uint_32>(mask.height()), bytes);
}

FlowField read_flow(const fs::path& path) {
  const std::string raw = read_file(path);
  constexpr std::size_t header = 12;
  if (raw.size() < header || raw.compare(0, 4, "FLO2") != 0) {
    throw FormatError(path.string() + ": bad magic, expected FLO2");
  }
  const auto h = get_le<std::uint32_t>(raw, 4);
  const auto w = get_le<std::uint32_t>(raw, 8);
  const std::size_t expected = header + static_cast<std::size_t>(h) * w * 2 * sizeof(float);
  if (raw.size() != expected) {
    throw FormatError(path.string() + ": size " + std::to_string(raw.size()) +
                      " does not match header (" + std::to_string(expected) + " bytes expected)");
  }
  auto hw2 = torch::empty({static_cast<int64_t>(h), static_cast<int64_t>(w), 2}, torch::kFloat32);
  std::memcpy(hw2.data_ptr<float>(), raw.data() + header, expected - header);
  return FlowField(hw2.permute({2, 0, 1}));
}

void write_flow(const FlowField& flow, const fs::path& path) {
  auto hw2 = flow.tensor().permute({1, 2, 0}).contiguous();
  std::string out = "FLO2";
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(flow.height()));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(flow.width()));
  out.append(reinterpret_cast<const char*>(hw2.data_ptr<float>()),
             static_cast<std::size_t>(hw2.numel()) * sizeof(float));
  write_file_atomic(path, out);
}

std::string exposure_to_json(const ExposureParams& params) {
  json patches = json::array();
  for (const auto& p : params.patches()) {
    patches.push_back({{"w", p.w}, {"b", p.b}});
  }
  json doc = {{"grid", params.grid()}, {"patches", patches}};
  return doc.dump(2) + "\n";
}

ExposureParams exposure_from_json(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("exposure JSON: ") + e.what());
  }
  if (!doc.contains("grid") || !doc.contains("patches") || !doc["patches"].is_array()) {
    throw FormatError("exposure JSON needs 'grid' and 'patches'");
  }
  std::vector<PatchExposure> patches;
  for (const auto& jp : doc["patches"]) {
    patches.push_back({read_triplet(jp, "w"), read_triplet(jp, "b")});
  }
  return ExposureParams(doc["grid"].get<int>(), std::move(patches));
}

ExposureParams read_exposure(const fs::path& path) {
  return exposure_from_json(read_file(path));
}

ExposureParams read_exposure(const fs::path& path, int expected_grid) {
  auto doc = json::parse(read_file(path), nullptr, false);
  if (doc.is_discarded()) {
    throw FormatError(path.string() + ": not valid JSON");
  }
  const std::size_t want = static_cast<std::size_t>(expected_grid) * expected_grid;
  if (doc.contains("patches") && doc["patches"].is_array() && doc["patches"].size() != want) {
    throw ValidationError(path.string() + ": " + std::to_string(doc["patches"].size()) +
                          " patches, configured grid " + std::to_string(expected_grid) + "x" +
                          std::to_string(expected_grid) + " needs " + std::to_string(want));
  }
  auto params = exposure_from_json(doc.dump());
  if (params.grid() != expected_grid) {
    throw ValidationError(path.string() + ": grid " + std::to_string(params.grid()) +
                          " differs from configured " + std::to_string(expected_grid));
  }
  return params;
}

void write_exposure(const ExposureParams& params, const fs::path& path) {
  write_file_atomic(path, exposure_to_json(params));
}

void write_file_atomic(const fs::path& path, std::string_view bytes) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw IoError("cannot open for writing: " + path.string());
    }
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
      throw IoError("write failed: " + path.string());
    }
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw IoError("cannot move into place: " + path.string());
  }
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open: " + path.string());
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace pstnet::io
