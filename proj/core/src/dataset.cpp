#include "pstnet/dataset.hpp"

#include <algorithm>
#include <cstdio>
#include <json.hpp>

#include "pstnet/error.hpp"
#include "pstnet/image_io.hpp"

namespace pstnet::data {

using json = nlohmann::json;

Manifest read_manifest(const fs::path& root) {
  const auto path = root / "manifest.json";
  if (!fs::exists(path)) {
    throw IoError("dataset manifest not found: " + path.string());
  }
  try {
    const auto doc = json::parse(io::read_file(path));
    Manifest m;
    m.grid = doc.at("grid").get<int>();
    m.frames = doc.at("frames").get<int>();
    m.height = doc.at("height").get<int>();
    m.width = doc.at("width").get<int>();
    m.train = doc.at("train").get<std::vector<std::string>>();
    m.test = doc.at("test").get<std::vector<std::string>>();
    return m;
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

fs::path video_dir(const fs::path& root, const std::string& split, const std::string& id) {
  return root / split / id;
}

std::string frame_name(int index, const std::string& extension) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%03d", index);
  return buf + extension;
}

Video load_video(const fs::path& dir, int grid, bool pseudo_masks) {
  if (!fs::is_directory(dir / "shadow")) {
    throw IoError("not a video directory: " + dir.string());
  }
  Video v;
  v.id = dir.filename().string();
  for (int t = 0;; ++t) {
    const auto shadow_path = dir / "shadow" / frame_name(t, ".png");
    if (!fs::exists(shadow_path)) break;
    v.shadow.push_back(io::load_frame(shadow_path));
    v.free.push_back(io::load_frame(dir / "free" / frame_name(t, ".png")));
    v.mask.push_back(io::load_mask(dir / (pseudo_masks ? "pseudo_mask" : "mask") / frame_name(t, ".png")));
    v.flow.push_back(io::read_flow(dir / "flow" / frame_name(t, ".flo2")));
    v.exposure.push_back(io::read_exposure(dir / "exposure" / frame_name(t, ".json"), grid));
  }
  if (v.shadow.size() < 2) {
    throw IoError("video needs at least two frames: " + dir.string());
  }
  return v;
}

void write_video(const fs::path& dir, const std::vector<ClipSample>& clip,
                 const std::vector<Mask>& pseudo_masks) {
  for (const char* sub : {"shadow", "free", "mask", "pseudo_mask", "flow", "exposure"}) {
    fs::create_directories(dir / sub);
  }
  for (std::size_t t = 0; t < clip.size(); ++t) {
    const int i = static_cast<int>(t);
    io::save_frame(clip[t].shadow_t, dir / "shadow" / frame_name(i, ".png"));
    io::save_frame(clip[t].free_t, dir / "free" / frame_name(i, ".png"));
    io::save_mask(clip[t].mask_t, dir / "mask" / frame_name(i, ".png"));
    if (t < pseudo_masks.size()) io::save_mask(pseudo_masks[t], dir / "pseudo_mask" / frame_name(i, ".png"));
    io::write_flow(clip[t].flow_t, dir / "flow" / frame_name(i, ".flo2"));
    io::write_exposure(clip[t].exposure_t, dir / "exposure" / frame_name(i, ".json"));
  }
}

ClipSample sample_at(const Video& video, int t) {
  if (t < 0 || t >= video.size()) {
    throw ValidationError("frame index out of range: " + std::to_string(t));
  }
  // Stored flow for the last frame already follows the predecessor convention.
  const int next = t + 1 < video.size() ? t + 1 : t - 1;
  ClipSample s{video.shadow[t], video.shadow[next], video.free[t],
               video.mask[t],   video.flow[t],       video.exposure[t]};
  validate_sample(s);
  return s;
}

std::vector<fs::path> list_pngs(const fs::path& dir) {
  std::vector<fs::path> out;
  if (!fs::is_directory(dir)) return out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".png") out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<Frame> load_frame_sequence(const fs::path& dir) {
  auto files = list_pngs(fs::is_directory(dir / "shadow") ? dir / "shadow" : dir);
  if (files.empty()) {
    throw IoError("no frames found in " + dir.string());
  }
  std::vector<Frame> frames;
  frames.reserve(files.size());
  for (const auto& f : files) frames.push_back(io::load_frame(f));
  return frames;
}

}  // namespace pstnet::data
