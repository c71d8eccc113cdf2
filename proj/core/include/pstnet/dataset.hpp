#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "pstnet/types.hpp"

namespace pstnet::data {

namespace fs = std::filesystem;

/// Parsed `<root>/manifest.json`.
struct Manifest {
  int grid = 2;
  int frames = 0;
  int height = 0;
  int width = 0;
  std::vector<std::string> train;
  std::vector<std::string> test;
};

Manifest read_manifest(const fs::path& root);

fs::path video_dir(const fs::path& root, const std::string& split, const std::string& id);

/// `%03d` frame file name with the given extension (including the dot).
std::string frame_name(int index, const std::string& extension);

/// Every record of one video, in frame order.
struct Video {
  std::string id;
  std::vector<Frame> shadow;
  std::vector<Frame> free;
  std::vector<Mask> mask;
  std::vector<FlowField> flow;
  std::vector<ExposureParams> exposure;

  int size() const { return static_cast<int>(shadow.size()); }
};

/// Loads a video directory in the dataset layout. With pseudo_masks the
/// thresholded difference masks replace the ground-truth masks.
Video load_video(const fs::path& dir, int grid, bool pseudo_masks = false);

/// Writes one video's records into `dir` using the dataset layout.
void write_video(const fs::path& dir, const std::vector<ClipSample>& clip,
                 const std::vector<Mask>& pseudo_masks);

/// Frame t of the video as a training record. The last frame pairs with its
/// predecessor and carries the negated predecessor flow.
ClipSample sample_at(const Video& video, int t);

/// Sorted PNG files of a plain frame directory.
std::vector<fs::path> list_pngs(const fs::path& dir);

/// Frames of an input video: `<dir>/shadow/*.png` when present, else `<dir>/*.png`.
std::vector<Frame> load_frame_sequence(const fs::path& dir);

}  // namespace pstnet::data
