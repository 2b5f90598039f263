#include "fsvc/feature_file.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>
#include <vector>

#include "fsvc/error.hpp"

namespace fsvc {

namespace {

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::string printable(const unsigned char* p, std::size_t n) {
  std::ostringstream os;
  for (std::size_t i = 0; i < n; ++i) {
    if (p[i] >= 0x20 && p[i] < 0x7f) {
      os << static_cast<char>(p[i]);
    } else {
      os << "\\x" << std::hex << static_cast<int>(p[i]) << std::dec;
    }
  }
  return os.str();
}

}  // namespace

void FeatureSequence::validate() const {
  if (frames.rows() < 1 || frames.cols() < 1) {
    throw ValidationError("sequence '" + video_id + "' must have T >= 1 and C_in >= 1, got " +
                          std::to_string(frames.rows()) + "x" + std::to_string(frames.cols()));
  }
  if (class_id < 0) throw ValidationError("sequence '" + video_id + "' has negative class_id");
  for (Eigen::Index t = 0; t < frames.rows(); ++t) {
    for (Eigen::Index c = 0; c < frames.cols(); ++c) {
      if (!std::isfinite(frames(t, c))) {
        throw ValidationError("sequence '" + video_id + "' has a non-finite entry at frame " +
                              std::to_string(t) + ", dim " + std::to_string(c));
      }
    }
  }
}

void write_feature_file(const FeatureSequence& seq, const std::filesystem::path& path) {
  seq.validate();
  const auto rows = static_cast<std::uint32_t>(seq.frames.rows());
  const auto cols = static_cast<std::uint32_t>(seq.frames.cols());
  std::vector<unsigned char> bytes;
  bytes.reserve(kFeatureHeaderBytes + 4ull * rows * cols);
  bytes.insert(bytes.end(), std::begin(kFeatureMagic), std::end(kFeatureMagic));
  put_u32(bytes, kFeatureVersion);
  put_u32(bytes, rows);
  put_u32(bytes, cols);
  for (std::uint32_t t = 0; t < rows; ++t) {
    for (std::uint32_t c = 0; c < cols; ++c) {
      const auto f = static_cast<float>(seq.frames(t, c));
      if (!std::isfinite(f)) {
        throw ValidationError("sequence '" + seq.video_id + "' overflows float32 at frame " +
                              std::to_string(t) + ", dim " + std::to_string(c));
      }
      put_u32(bytes, std::bit_cast<std::uint32_t>(f));
    }
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

FeatureSequence read_feature_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < kFeatureHeaderBytes) {
    if (bytes.size() >= 4 && std::memcmp(bytes.data(), kFeatureMagic, 4) != 0) {
      throw FormatError("'" + path.string() + "': bad magic '" + printable(bytes.data(), 4) + "', expected 'FSVF'");
    }
    throw LengthError("'" + path.string() + "': header needs " + std::to_string(kFeatureHeaderBytes) +
                      " bytes, file has " + std::to_string(bytes.size()));
  }
  if (std::memcmp(bytes.data(), kFeatureMagic, 4) != 0) {
    throw FormatError("'" + path.string() + "': bad magic '" + printable(bytes.data(), 4) + "', expected 'FSVF'");
  }
  const std::uint32_t version = get_u32(bytes.data() + 4);
  if (version != kFeatureVersion) {
    throw FormatError("'" + path.string() + "': unsupported version " + std::to_string(version));
  }
  const std::uint32_t rows = get_u32(bytes.data() + 8);
  const std::uint32_t cols = get_u32(bytes.data() + 12);
  if (rows == 0 || cols == 0) {
    throw FormatError("'" + path.string() + "': empty shape " + std::to_string(rows) + "x" + std::to_string(cols));
  }
  const std::uint64_t expected = 4ull * rows * cols;
  const std::uint64_t actual = bytes.size() - kFeatureHeaderBytes;
  if (actual != expected) {
    throw LengthError("'" + path.string() + "': payload expected " + std::to_string(expected) +
                      " bytes, got " + std::to_string(actual));
  }
  FeatureSequence seq;
  seq.frames.resize(rows, cols);
  const unsigned char* p = bytes.data() + kFeatureHeaderBytes;
  for (std::uint32_t t = 0; t < rows; ++t) {
    for (std::uint32_t c = 0; c < cols; ++c, p += 4) {
      seq.frames(t, c) = static_cast<double>(std::bit_cast<float>(get_u32(p)));
    }
  }
  seq.video_id = path.filename().string();
  seq.validate();
  return seq;
}

}  // namespace fsvc
