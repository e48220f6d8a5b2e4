#pragma once

// VGPT tensor files: magic "VGPT", u32 version (=1), u32 ndim, u32 dims[ndim],
// then row-major float32 payload. Everything little-endian.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace vgp {

struct Tensor {
  std::vector<std::uint32_t> shape;
  std::vector<float> data;

  std::size_t element_count() const;
};

void write_tensor(std::ostream& out, const Tensor& t);
Tensor read_tensor(std::istream& in);

void save_tensor(const std::filesystem::path& path, const Tensor& t);
Tensor load_tensor(const std::filesystem::path& path);

// Matrices are stored as 2-D tensors (rows, cols).
Tensor to_tensor(const Eigen::MatrixXd& m);
Eigen::MatrixXd to_matrix(const Tensor& t);

}  // namespace vgp
