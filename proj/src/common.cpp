#include "transsplat/common.hpp"

#include <fstream>
#include <sstream>

namespace transsplat {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::Io: return "Io";
    case ErrorCode::NonSpdCovariance: return "NonSpdCovariance";
    case ErrorCode::NoVisibleTarget: return "NoVisibleTarget";
    case ErrorCode::AllZeroAttention: return "AllZeroAttention";
    case ErrorCode::EmptySupport: return "EmptySupport";
    case ErrorCode::TooFewPixels: return "TooFewPixels";
    case ErrorCode::ZeroRegionAttention: return "ZeroRegionAttention";
    case ErrorCode::NoVisibleGaussians: return "NoVisibleGaussians";
    case ErrorCode::ZeroFootprint: return "ZeroFootprint";
    case ErrorCode::NumericalOverflow: return "NumericalOverflow";
    case ErrorCode::MisalignedViews: return "MisalignedViews";
    case ErrorCode::NoValidViews: return "NoValidViews";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stage, std::uint64_t index) {
  return mix64(mix64(mix64(seed) ^ stage) ^ index);
}

void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
  namespace fs = std::filesystem;
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    if (ec) throw Error(ErrorCode::Io, "cannot create directory " + path.parent_path().string());
  }
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, "cannot open " + tmp.string() + " for writing");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw Error(ErrorCode::Io, "write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::Io, "rename to " + path.string() + " failed: " + ec.message());
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace transsplat
