#include "transsplat/raster_io.hpp"

#include <bit>
#include <cstring>

#include "json.hpp"

namespace transsplat {

namespace {

static_assert(std::endian::native == std::endian::little,
              "raster payloads are written in native order; big-endian hosts need byte swapping");

struct Header {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::string dtype;
};

void write_header(const std::filesystem::path& dir, const std::string& field, int h, int w, int c,
                  const char* dtype) {
  nlohmann::json j{{"height", h}, {"width", w}, {"channels", c}, {"dtype", dtype}, {"field", field}};
  write_file_atomic(dir / (field + ".json"), j.dump(2) + "\n");
}

Header read_header(const std::filesystem::path& dir, const std::string& field, const char* dtype) {
  Header h;
  try {
    const auto j = nlohmann::json::parse(read_file(dir / (field + ".json")));
    h.height = j.at("height").get<int>();
    h.width = j.at("width").get<int>();
    h.channels = j.at("channels").get<int>();
    h.dtype = j.at("dtype").get<std::string>();
    if (j.contains("field") && j.at("field").get<std::string>() != field)
      throw Error(ErrorCode::ShapeMismatch, field + ": header names field " + j.at("field").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ShapeMismatch, field + ": malformed header: " + e.what());
  }
  if (h.dtype != dtype)
    throw Error(ErrorCode::ShapeMismatch, field + ": expected dtype " + dtype + ", found " + h.dtype);
  if (h.height < 1 || h.width < 1 || h.channels < 1)
    throw Error(ErrorCode::ShapeMismatch, field + ": non-positive raster dimensions");
  return h;
}

template <class T>
void store(const std::filesystem::path& dir, const std::string& field, const Raster<T>& r, const char* dtype) {
  if (r.data.size() != r.pixel_count() * static_cast<std::size_t>(r.channels))
    throw Error(ErrorCode::ShapeMismatch, field + ": raster data does not match its shape");
  write_header(dir, field, r.height, r.width, r.channels, dtype);
  std::string bytes(r.data.size() * sizeof(T), '\0');
  std::memcpy(bytes.data(), r.data.data(), bytes.size());
  write_file_atomic(dir / (field + ".bin"), bytes);
}

template <class T>
Raster<T> load(const std::filesystem::path& dir, const std::string& field, const char* dtype) {
  const Header h = read_header(dir, field, dtype);
  const std::string bytes = read_file(dir / (field + ".bin"));
  Raster<T> r(h.height, h.width, h.channels);
  if (bytes.size() != r.data.size() * sizeof(T))
    throw Error(ErrorCode::ShapeMismatch, field + ": payload has " + std::to_string(bytes.size()) +
                                              " bytes, header implies " + std::to_string(r.data.size() * sizeof(T)));
  std::memcpy(r.data.data(), bytes.data(), bytes.size());
  return r;
}

}  // namespace

void store_raster(const std::filesystem::path& dir, const std::string& field, const RasterF& raster) {
  store(dir, field, raster, "f32");
}

void store_raster(const std::filesystem::path& dir, const std::string& field, const MaskRaster& raster) {
  store(dir, field, raster, "u8");
}

RasterF load_raster_f32(const std::filesystem::path& dir, const std::string& field) {
  return load<float>(dir, field, "f32");
}

MaskRaster load_raster_u8(const std::filesystem::path& dir, const std::string& field) {
  return load<std::uint8_t>(dir, field, "u8");
}

}  // namespace transsplat
