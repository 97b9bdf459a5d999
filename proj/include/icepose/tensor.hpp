#pragma once

#include <Eigen/Dense>
#include <array>
#include <functional>
#include <string>
#include <vector>

#include "icepose/errors.hpp"

namespace icepose::autodiff {

// Dense row-major tensor of 64-bit floats. Shapes are lists of positive
// dimensions; all stored values must be finite (checked at construction from
// data, and after every graph op in debug builds).
class Tensor {
 public:
  using MatrixView =
      Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
  using ConstMatrixView =
      Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

  Tensor() = default;

  static Tensor zeros(std::vector<int> shape);
  static Tensor full(std::vector<int> shape, double value);
  static Tensor scalar(double value) { return full({1}, value); }
  static Tensor from(std::vector<int> shape, std::vector<double> values);

  bool empty() const { return shape_.empty(); }
  const std::vector<int>& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_.at(static_cast<size_t>(i)); }
  Eigen::Index size() const { return values_.size(); }
  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }
  std::string shape_str() const;

  // 2-D view semantics: rank-2 is (rows, cols); rank-1 and scalars are a
  // single row. Used by the matrix ops, which require rank <= 2.
  int rows() const { return rank() == 2 ? shape_[0] : 1; }
  int cols() const {
    return rank() == 2 ? shape_[1] : static_cast<int>(size());
  }

  double* data() { return values_.data(); }
  const double* data() const { return values_.data(); }
  Eigen::ArrayXd& array() { return values_; }
  const Eigen::ArrayXd& array() const { return values_; }
  double& operator[](Eigen::Index i) { return values_[i]; }
  double operator[](Eigen::Index i) const { return values_[i]; }
  double& at(int r, int c) { return values_[static_cast<Eigen::Index>(r) * cols() + c]; }
  double at(int r, int c) const { return values_[static_cast<Eigen::Index>(r) * cols() + c]; }

  MatrixView matrix() { return {values_.data(), rows(), cols()}; }
  ConstMatrixView matrix() const { return {values_.data(), rows(), cols()}; }

  bool all_finite() const { return values_.isFinite().all(); }

  // Copies the i-th slice along the leading dimension (rank >= 2).
  Tensor slice_outer(int i) const;

  bool requires_grad = false;

 private:
  std::vector<int> shape_;
  Eigen::ArrayXd values_;
};

enum class Op {
  kLeaf,
  kMatMul,
  kAdd,
  kSub,
  kMul,
  kScale,
  kGelu,
  kSoftmax,
  kLayerNorm,
  kTranspose,
  kSliceRows,
  kSliceCols,
  kConcatRows,
  kConcatCols,
  kRepeatRows,
  kSum,
};

// Handle into a Graph's node sequence.
struct Value {
  int id = -1;
};

// Append-only reverse-mode tape. Inputs always precede outputs, so the node
// sequence is a topological order and backward is a single reverse sweep.
// A graph is confined to one thread; Tensors may be shared read-only.
class Graph {
 public:
  Value leaf(Tensor t);
  Value leaf(Tensor t, bool requires_grad);

  // a[m x k] * b[k x n] -> [m x n]
  Value matmul(Value a, Value b);
  Value add(Value a, Value b);
  Value sub(Value a, Value b);
  Value mul(Value a, Value b);  // Hadamard
  Value scale(Value a, double s);
  // tanh-approximation GELU: 0.5 x (1 + tanh(sqrt(2/pi) (x + 0.044715 x^3))).
  Value gelu(Value a);
  // Row-wise softmax over the last axis, max-subtracted for stability.
  Value softmax(Value a);
  // Per-row standardization over the last axis followed by a per-feature
  // affine map: gain and bias are [1 x d].
  Value layer_norm(Value x, Value gain, Value bias, double eps = 1e-5);
  Value transpose(Value a);
  Value slice_rows(Value a, int r0, int r1);  // half-open [r0, r1)
  Value slice_cols(Value a, int c0, int c1);
  Value concat_rows(Value a, Value b);
  Value concat_cols(Value a, Value b);
  Value repeat_rows(Value row, int n);  // [1 x d] -> [n x d]
  Value sum(Value a);                   // -> scalar [1]

  // Reverse accumulation from a scalar root. Gradients of requires_grad
  // nodes accumulate across calls until zero_grad().
  void backward(Value loss);
  void zero_grad();

  const Tensor& value(Value v) const { return node(v).value; }
  // Accumulated gradient of a requires_grad node; zeros if backward never
  // reached it.
  const Tensor& grad(Value v);
  bool requires_grad(Value v) const { return node(v).requires_grad; }
  size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Op op = Op::kLeaf;
    std::array<int, 3> in{-1, -1, -1};
    Tensor value;
    Tensor grad;  // empty until first accumulation
    bool requires_grad = false;
    double scalar = 0.0;  // kScale factor / kLayerNorm eps
    int i0 = 0, i1 = 0;   // slice bounds / repeat count / split sizes
  };

  const Node& node(Value v) const;
  Node& node(Value v);
  Value push(Node n);
  void accumulate(int id, const Eigen::Ref<const Eigen::ArrayXd>& g);
  void backward_node(int id);

  std::vector<Node> nodes_;
};

// Central-difference gradient of a scalar-valued function, same shape as x.
// Independent of the reverse-mode path; used as its verification oracle.
Tensor finite_diff_grad(const std::function<double(const Tensor&)>& f, const Tensor& x,
                        double h = 1e-5);

}  // namespace icepose::autodiff
