#include "chaosnet/tensor.hpp"

#include <algorithm>
#include <functional>
#include <numeric>
#include <sstream>

#include "chaosnet/errors.hpp"

namespace chaosnet {

namespace {
std::size_t product(const std::vector<std::size_t>& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}
}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape, double fill)
    : shape_(std::move(shape)), values_(product(shape_), fill) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
  if (values_.size() != product(shape_)) {
    throw ContractError("tensor of shape " + shape_string(shape_) + " given " +
                        std::to_string(values_.size()) + " values");
  }
}

Tensor Tensor::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t n = rows.size();
  const std::size_t m = n == 0 ? 0 : rows.begin()->size();
  Tensor t = matrix(n, m);
  std::size_t r = 0;
  for (const auto& row : rows) {
    if (row.size() != m) throw ContractError("ragged rows in Tensor::from_rows");
    std::copy(row.begin(), row.end(), t.row(r++).begin());
  }
  return t;
}

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= shape_.size()) {
    throw ContractError("axis " + std::to_string(axis) + " out of range for shape " +
                        shape_string(shape_));
  }
  return shape_[axis];
}

void Tensor::fill(double v) { std::fill(values_.begin(), values_.end(), v); }

std::string shape_string(const std::vector<std::size_t>& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ']';
  return os.str();
}

void require_cols(const Tensor& t, std::size_t cols, const char* what) {
  if (t.rank() != 2 || t.cols() != cols) {
    throw ContractError(std::string(what) + ": expected shape [batch, " + std::to_string(cols) +
                        "], got " + shape_string(t.shape()));
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (!a.same_shape(b)) {
    throw ContractError(std::string(what) + ": shape mismatch " + shape_string(a.shape()) +
                        " vs " + shape_string(b.shape()));
  }
}

Tensor select_columns(const Tensor& x, std::span<const std::size_t> columns) {
  if (x.rank() != 2) throw ContractError("select_columns: expected rank-2 tensor, got " +
                                         shape_string(x.shape()));
  Tensor out = Tensor::matrix(x.rows(), columns.size());
  for (std::size_t c : columns) {
    if (c >= x.cols()) {
      throw ContractError("select_columns: column " + std::to_string(c) +
                          " out of range for shape " + shape_string(x.shape()));
    }
  }
  for (std::size_t r = 0; r < x.rows(); ++r) {
    for (std::size_t j = 0; j < columns.size(); ++j) out.at(r, j) = x.at(r, columns[j]);
  }
  return out;
}

Tensor concat_columns(std::span<const Tensor> parts) {
  if (parts.empty()) return {};
  const std::size_t rows = parts.front().rows();
  std::size_t width = 0;
  for (const Tensor& p : parts) {
    if (p.rank() != 2 || p.rows() != rows) {
      throw ContractError("concat_columns: row count mismatch, expected " +
                          std::to_string(rows) + " got " + shape_string(p.shape()));
    }
    width += p.cols();
  }
  Tensor out = Tensor::matrix(rows, width);
  for (std::size_t r = 0; r < rows; ++r) {
    std::size_t offset = 0;
    for (const Tensor& p : parts) {
      std::copy(p.row(r).begin(), p.row(r).end(), out.row(r).begin() + offset);
      offset += p.cols();
    }
  }
  return out;
}

}  // namespace chaosnet
