#pragma once

#include <filesystem>
#include <string>

#include "transsplat/common.hpp"

namespace transsplat {

// On-disk raster: `<stem>.json` header {height, width, channels, dtype, field}
// next to `<stem>.bin`, a raw little-endian payload, row-major, channel-last.
// dtype is "f32" for float rasters and "u8" for masks.

void store_raster(const std::filesystem::path& dir, const std::string& field, const RasterF& raster);
void store_raster(const std::filesystem::path& dir, const std::string& field, const MaskRaster& raster);

RasterF load_raster_f32(const std::filesystem::path& dir, const std::string& field);
MaskRaster load_raster_u8(const std::filesystem::path& dir, const std::string& field);

}  // namespace transsplat
