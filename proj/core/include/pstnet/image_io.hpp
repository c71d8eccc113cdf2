#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "pstnet/types.hpp"

namespace pstnet::io {

namespace fs = std::filesystem;

/// Reads an 8-bit RGB PNG; values are byte / 255.
Frame load_frame(const fs::path& path);

/// Writes an 8-bit RGB PNG with byte = floor(value * 255 + 0.5).
void save_frame(const Frame& frame, const fs::path& path);

/// Rounds every value onto the 8-bit lattice used by save_frame.
Frame quantize(const Frame& frame);

/// Masks are stored as 8-bit grayscale PNGs.
Mask load_mask(const fs::path& path);
void save_mask(const Mask& mask, const fs::path& path);

/// ".flo2": "FLO2", u32 H, u32 W (LE), then H*W*2 LE float32, row-major, u before v.
FlowField read_flow(const fs::path& path);
void write_flow(const FlowField& flow, const fs::path& path);

/// JSON `{"grid": g, "patches": [{"w": [r,g,b], "b": [r,g,b]}, ...]}`.
/// Throws ValidationError when the file's grid differs from expected_grid.
ExposureParams read_exposure(const fs::path& path, int expected_grid);
/// Accepts whatever grid the file declares.
ExposureParams read_exposure(const fs::path& path);
void write_exposure(const ExposureParams& params, const fs::path& path);

std::string exposure_to_json(const ExposureParams& params);
ExposureParams exposure_from_json(std::string_view text);

/// Writes to a sibling temporary file and renames it into place.
void write_file_atomic(const fs::path& path, std::string_view bytes);
std::string read_file(const fs::path& path);

}  // namespace pstnet::io
