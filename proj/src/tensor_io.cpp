#include "vgp/tensor_io.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace vgp {
namespace {

constexpr std::array<char, 4> kMagic = {'V', 'G', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& out, std::uint32_t v) {
  const char bytes[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                         static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  out.write(bytes, 4);
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char bytes[4];
  if (!in.read(reinterpret_cast<char*>(bytes), 4)) {
    throw std::runtime_error("VGPT: truncated header");
  }
  return static_cast<std::uint32_t>(bytes[0]) | (static_cast<std::uint32_t>(bytes[1]) << 8) |
         (static_cast<std::uint32_t>(bytes[2]) << 16) | (static_cast<std::uint32_t>(bytes[3]) << 24);
}

}  // namespace

std::size_t Tensor::element_count() const {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return shape.empty() ? 0 : n;
}

void write_tensor(std::ostream& out, const Tensor& t) {
  if (t.element_count() != t.data.size()) {
    throw std::invalid_argument("VGPT: shape does not match payload size");
  }
  out.write(kMagic.data(), kMagic.size());
  put_u32(out, kVersion);
  put_u32(out, static_cast<std::uint32_t>(t.shape.size()));
  for (auto d : t.shape) put_u32(out, d);
  for (float f : t.data) put_u32(out, std::bit_cast<std::uint32_t>(f));
  if (!out) throw std::runtime_error("VGPT: write failed");
}

Tensor read_tensor(std::istream& in) {
  std::array<char, 4> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kMagic) {
    throw std::runtime_error("VGPT: bad magic");
  }
  const std::uint32_t version = get_u32(in);
  if (version != kVersion) {
    throw std::runtime_error("VGPT: unsupported version " + std::to_string(version));
  }
  Tensor t;
  const std::uint32_t ndim = get_u32(in);
  if (ndim > 16) throw std::runtime_error("VGPT: implausible ndim");
  t.shape.resize(ndim);
  for (auto& d : t.shape) d = get_u32(in);
  t.data.resize(t.element_count());
  for (auto& f : t.data) f = std::bit_cast<float>(get_u32(in));
  return t;
}

void save_tensor(const std::filesystem::path& path, const Tensor& t) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  write_tensor(out, t);
}

Tensor load_tensor(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return read_tensor(in);
}

Tensor to_tensor(const Eigen::MatrixXd& m) {
  Tensor t;
  t.shape = {static_cast<std::uint32_t>(m.rows()), static_cast<std::uint32_t>(m.cols())};
  t.data.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) t.data.push_back(static_cast<float>(m(r, c)));
  return t;
}

Eigen::MatrixXd to_matrix(const Tensor& t) {
  if (t.shape.size() == 1) {
    Eigen::MatrixXd m(t.shape[0], 1);
    for (std::uint32_t i = 0; i < t.shape[0]; ++i) m(i, 0) = t.data[i];
    return m;
  }
  if (t.shape.size() != 2) throw std::runtime_error("VGPT: expected a 1-D or 2-D tensor");
  Eigen::MatrixXd m(t.shape[0], t.shape[1]);
  std::size_t k = 0;
  for (std::uint32_t r = 0; r < t.shape[0]; ++r)
    for (std::uint32_t c = 0; c < t.shape[1]; ++c) m(r, c) = t.data[k++];
  return m;
}

}  // namespace vgp
