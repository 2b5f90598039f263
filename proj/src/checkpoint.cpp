#include "fsvc/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <string>
#include <vector>

#include "fsvc/error.hpp"

namespace fsvc {

namespace {

class Writer {
 public:
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<unsigned char>(v >> (8 * i)));
  }
  void f64(double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) bytes.push_back(static_cast<unsigned char>(bits >> (8 * i)));
  }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes.insert(bytes.end(), s.begin(), s.end());
  }
  void block(const std::string& name, const Matrix& m) {
    str(name);
    u32(static_cast<std::uint32_t>(m.rows()));
    u32(static_cast<std::uint32_t>(m.cols()));
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) f64(m(r, c));
    }
  }
  std::vector<unsigned char> bytes;
};

class Reader {
 public:
  Reader(std::vector<unsigned char> data, std::string path) : data_(std::move(data)), path_(std::move(path)) {}

  void need(std::size_t n) const {
    if (pos_ + n > data_.size()) {
      throw LengthError("'" + path_ + "': truncated at byte " + std::to_string(pos_) + ", needed " +
                        std::to_string(n) + " more of " + std::to_string(data_.size()));
    }
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(data_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  double f64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(data_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return std::bit_cast<double>(v);
  }
  std::string str() {
    const std::uint32_t n = u32();
    need(n);
    std::string s(data_.begin() + static_cast<std::ptrdiff_t>(pos_), data_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
    pos_ += n;
    return s;
  }
  Matrix matrix() {
    const std::uint32_t rows = u32();
    const std::uint32_t cols = u32();
    need(8ull * rows * cols);
    Matrix m(rows, cols);
    for (std::uint32_t r = 0; r < rows; ++r) {
      for (std::uint32_t c = 0; c < cols; ++c) m(r, c) = f64();
    }
    return m;
  }
  bool at_end() const { return pos_ == data_.size(); }
  const std::string& path() const { return path_; }

 private:
  std::vector<unsigned char> data_;
  std::string path_;
  std::size_t pos_ = 0;
};

}  // namespace

void save_checkpoint(const TrainedModel& model, const std::filesystem::path& path) {
  model.validate();
  Writer w;
  w.bytes.insert(w.bytes.end(), std::begin(kModelMagic), std::end(kModelMagic));
  w.u32(kModelVersion);
  w.str(model.config.fingerprint());
  w.str(model.config.to_json());
  std::uint32_t blocks = 2;
  if (model.base_head) blocks += 2;
  if (model.saliency) blocks += 1;
  w.u32(blocks);
  w.block("embedding.W", model.embedding.W);
  w.block("embedding.b", model.embedding.b);
  if (model.base_head) {
    w.block("base_head.W", model.base_head->W);
    w.block("base_head.b", model.base_head->b);
  }
  if (model.saliency) w.block("saliency.queries", model.saliency->queries);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(w.bytes.data()), static_cast<std::streamsize>(w.bytes.size()));
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

TrainedModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint '" + path.string() + "'");
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kModelMagic, 4) != 0) {
    throw FormatError("'" + path.string() + "' is not a model checkpoint (bad magic)");
  }
  Reader r(std::vector<unsigned char>(bytes.begin() + 4, bytes.end()), path.string());
  const std::uint32_t version = r.u32();
  if (version != kModelVersion) throw FormatError("'" + path.string() + "': unsupported version " + std::to_string(version));
  const std::string fingerprint = r.str();
  TrainedModel model;
  model.config = MethodConfig::from_json(r.str());
  if (model.config.fingerprint() != fingerprint) {
    throw FormatError("'" + path.string() + "': config fingerprint " + fingerprint + " does not match stored config (" +
                      model.config.fingerprint() + ")");
  }
  std::map<std::string, Matrix> blocks;
  const std::uint32_t count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = r.str();
    blocks[name] = r.matrix();
  }
  if (!r.at_end()) throw LengthError("'" + path.string() + "': trailing bytes after the last block");
  const auto take = [&](const std::string& name) {
    const auto it = blocks.find(name);
    if (it == blocks.end()) throw FormatError("'" + path.string() + "': missing block '" + name + "'");
    Matrix m = std::move(it->second);
    blocks.erase(it);
    return m;
  };
  const auto take_vector = [&](const std::string& name) {
    Matrix m = take(name);
    if (m.cols() != 1) throw FormatError("'" + path.string() + "': block '" + name + "' must have one column");
    return Vector(m.col(0));
  };
  model.embedding.W = take("embedding.W");
  model.embedding.b = take_vector("embedding.b");
  if (is_classifier_based(model.config.method)) {
    Matrix w = take("base_head.W");
    model.base_head = LinearHead{std::move(w), take_vector("base_head.b")};
  }
  if (model.config.method == Method::cmn_lite) model.saliency = SaliencyParams{take("saliency.queries")};
  if (!blocks.empty()) throw FormatError("'" + path.string() + "': unexpected block '" + blocks.begin()->first + "'");
  model.validate();
  return model;
}

}  // namespace fsvc
