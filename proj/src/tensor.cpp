#include "icepose/tensor.hpp"

#include <cmath>
#include <numeric>
#include <sstream>
#include <utility>

namespace icepose::autodiff {

namespace {

constexpr double kGeluAlpha = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluCubic = 0.044715;

Eigen::Index checked_size(const std::vector<int>& shape) {
  if (shape.empty()) throw ShapeError("tensor shape must have at least one dimension");
  Eigen::Index n = 1;
  for (int d : shape) {
    if (d <= 0) throw ShapeError("tensor dimensions must be positive");
    n *= d;
  }
  return n;
}

std::string shape_str_of(const std::vector<int>& shape) {
  std::ostringstream os;
  os << '[';
  for (size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ']';
  return os.str();
}

}  // namespace

Tensor Tensor::zeros(std::vector<int> shape) {
  const Eigen::Index n = checked_size(shape);
  Tensor t;
  t.shape_ = std::move(shape);
  t.values_ = Eigen::ArrayXd::Zero(n);
  return t;
}

Tensor Tensor::full(std::vector<int> shape, double value) {
  if (!std::isfinite(value)) throw NumericError("tensor fill value must be finite");
  const Eigen::Index n = checked_size(shape);
  Tensor t;
  t.shape_ = std::move(shape);
  t.values_ = Eigen::ArrayXd::Constant(n, value);
  return t;
}

Tensor Tensor::from(std::vector<int> shape, std::vector<double> values) {
  const Eigen::Index n = checked_size(shape);
  if (n != static_cast<Eigen::Index>(values.size()))
    throw ShapeError("tensor shape " + shape_str_of(shape) + " does not match " +
                     std::to_string(values.size()) + " values");
  Tensor t;
  t.shape_ = std::move(shape);
  t.values_ = Eigen::Map<const Eigen::ArrayXd>(values.data(), n);
  if (!t.all_finite()) throw NumericError("tensor values must be finite");
  return t;
}

std::string Tensor::shape_str() const { return shape_str_of(shape_); }

Tensor Tensor::slice_outer(int i) const {
  if (rank() < 2) throw ShapeError("slice_outer requires rank >= 2, got " + shape_str());
  if (i < 0 || i >= shape_[0]) throw ContractError("slice_outer index out of range");
  std::vector<int> sub(shape_.begin() + 1, shape_.end());
  Tensor out = Tensor::zeros(sub);
  const Eigen::Index stride = out.size();
  out.values_ = values_.segment(static_cast<Eigen::Index>(i) * stride, stride);
  return out;
}

const Graph::Node& Graph::node(Value v) const {
  if (v.id < 0 || v.id >= static_cast<int>(nodes_.size()))
    throw ContractError("value handle does not belong to this graph");
  return nodes_[static_cast<size_t>(v.id)];
}

Graph::Node& Graph::node(Value v) {
  return const_cast<Node&>(static_cast<const Graph*>(this)->node(v));
}

Value Graph::push(Node n) {
#ifndef NDEBUG
  if (!n.value.all_finite()) throw NumericError("non-finite values produced by graph op");
#endif
  nodes_.push_back(std::move(n));
  return {static_cast<int>(nodes_.size()) - 1};
}

Value Graph::leaf(Tensor t) {
  const bool rg = t.requires_grad;
  return leaf(std::move(t), rg);
}

Value Graph::leaf(Tensor t, bool requires_grad) {
  if (t.empty()) throw ShapeError("leaf tensor must be non-empty");
  if (!t.all_finite()) throw NumericError("leaf tensor must be finite");
  Node n;
  n.op = Op::kLeaf;
  n.requires_grad = requires_grad;
  n.value = std::move(t);
  return push(std::move(n));
}

Value Graph::matmul(Value a, Value b) {
  const Tensor& ta = node(a).value;
  const Tensor& tb = node(b).value;
  if (ta.rank() != 2 || tb.rank() != 2)
    throw ShapeError("matmul requires rank-2 operands, got " + ta.shape_str() + " and " +
                     tb.shape_str());
  if (ta.cols() != tb.rows())
    throw ShapeError("matmul: inner dimensions differ: " + ta.shape_str() + " vs " +
                     tb.shape_str());
  Node n;
  n.op = Op::kMatMul;
  n.in = {a.id, b.id, -1};
  n.requires_grad = node(a).requires_grad || node(b).requires_grad;
  n.value = Tensor::zeros({ta.rows(), tb.cols()});
  n.value.matrix().noalias() = ta.matrix() * tb.matrix();
  return push(std::move(n));
}

namespace {
void check_same_shape(const Tensor& a, const Tensor& b, const char* opname) {
  if (!a.same_shape(b))
    throw ShapeError(std::string(opname) + ": operand shapes differ: " + a.shape_str() +
                     " vs " + b.shape_str());
}
}  // namespace

Value Graph::add(Value a, Value b) {
  const Tensor& ta = node(a).value;
  const Tensor& tb = node(b).value;
  check_same_shape(ta, tb, "add");
  Node n;
  n.op = Op::kAdd;
  n.in = {a.id, b.id, -1};
  n.requires_grad = node(a).requires_grad || node(b).requires_grad;
  n.value = Tensor::zeros(ta.shape());
  n.value.array() = ta.array() + tb.array();
  return push(std::move(n));
}

Value Graph::sub(Value a, Value b) {
  const Tensor& ta = node(a).value;
  const Tensor& tb = node(b).value;
  check_same_shape(ta, tb, "sub");
  Node n;
  n.op = Op::kSub;
  n.in = {a.id, b.id, -1};
  n.requires_grad = node(a).requires_grad || node(b).requires_grad;
  n.value = Tensor::zeros(ta.shape());
  n.value.array() = ta.array() - tb.array();
  return push(std::move(n));
}

Value Graph::mul(Value a, Value b) {
  const Tensor& ta = node(a).value;
  const Tensor& tb = node(b).value;
  check_same_shape(ta, tb, "mul");
  Node n;
  n.op = Op::kMul;
  n.in = {a.id, b.id, -1};
  n.requires_grad = node(a).requires_grad || node(b).requires_grad;
  n.value = Tensor::zeros(ta.shape());
  n.value.array() = ta.array() * tb.array();
  return push(std::move(n));
}

Value Graph::scale(Value a, double s) {
  if (!std::isfinite(s)) throw NumericError("scale factor must be finite");
  const Tensor& ta = node(a).value;
  Node n;
  n.op = Op::kScale;
  n.in = {a.id, -1, -1};
  n.scalar = s;
  n.requires_grad = node(a).requires_grad;
  n.value = Tensor::zeros(ta.shape());
  n.value.array() = ta.array() * s;
  return push(std::move(n));
}

Value Graph::gelu(Value a) {
  const Tensor& ta = node(a).value;
  Node n;
  n.op = Op::kGelu;
  n.in = {a.id, -1, -1};
  n.requires_grad = node(a).requires_grad;
  n.value = Tensor::zeros(ta.shape());
  const auto& x = ta.array();
  n.value.array() = 0.5 * x * (1.0 + (kGeluAlpha * (x + kGeluCubic * x.cube())).tanh());
  return push(std::move(n));
}

Value Graph::softmax(Value a) {
  const Tensor& ta = node(a).value;
  if (ta.rank() > 2) throw ShapeError("softmax supports rank <= 2, got " + ta.shape_str());
  Node n;
  n.op = Op::kSoftmax;
  n.in = {a.id, -1, -1};
  n.requires_grad = node(a).requires_grad;
  n.value = Tensor::zeros(ta.shape());
  auto src = ta.matrix();
  auto dst = n.value.matrix();
  for (Eigen::Index r = 0; r < src.rows(); ++r) {
    const double m = src.row(r).maxCoeff();
    dst.row(r) = (src.row(r).array() - m).exp();
    dst.row(r) /= dst.row(r).sum();
  }
  return push(std::move(n));
}

Value Graph::layer_norm(Value x, Value gain, Value bias, double eps) {
  if (!(eps > 0)) throw ContractError("layer_norm eps must be positive");
  const Tensor& tx = node(x).value;
  const Tensor& tg = node(gain).value;
  const Tensor& tb = node(bias).value;
  if (tx.rank() > 2) throw ShapeError("layer_norm supports rank <= 2, got " + tx.shape_str());
  const int d = tx.cols();
  if (tg.size() != d || tb.size() != d)
    throw ShapeError("layer_norm: gain " + tg.shape_str() + " / bias " + tb.shape_str() +
                     " do not match feature width of " + tx.shape_str());
  Node n;
  n.op = Op::kLayerNorm;
  n.in = {x.id, gain.id, bias.id};
  n.scalar = eps;
  n.requires_grad =
      node(x).requires_grad || node(gain).requires_grad || node(bias).requires_grad;
  n.value = Tensor::zeros(tx.shape());
  auto src = tx.matrix();
  auto dst = n.value.matrix();
  const auto g = Eigen::Map<const Eigen::RowVectorXd>(tg.data(), d);
  const auto b = Eigen::Map<const Eigen::RowVectorXd>(tb.data(), d);
  for (Eigen::Index r = 0; r < src.rows(); ++r) {
    const double mean = src.row(r).mean();
    const double var = (src.row(r).array() - mean).square().mean();
    const double inv_std = 1.0 / std::sqrt(var + eps);
    dst.row(r) =
        ((src.row(r).array() - mean) * inv_std * g.array() + b.array()).matrix();
  }
  return push(std::move(n));
}

Value Graph::transpose(Value a) {
  const Tensor& ta = node(a).value;
  if (ta.rank() != 2) throw ShapeError("transpose requires rank 2, got " + ta.shape_str());
  Node n;
  n.op = Op::kTranspose;
  n.in = {a.id, -1, -1};
  n.requires_grad = node(a).requires_grad;
  n.value = Tensor::zeros({ta.cols(), ta.rows()});
  n.value.matrix() = ta.matrix().transpose();
  return push(std::move(n));
}

Value Graph::slice_rows(Value a, int r0, int r1) {
  const Tensor& ta = node(a).value;
  if (ta.rank() != 2) throw ShapeError("slice_rows requires rank 2, got " + ta.shape_str());
  if (r0 < 0 || r1 > ta.rows() || r0 >= r1)
    throw ContractError("slice_rows range [" + std::to_string(r0) + ", " + std::to_string(r1) +
                        ") invalid for " + ta.shape_str());
  Node n;
  n.op = Op::kSliceRows;
  n.in = {a.id, -1, -1};
  n.i0 = r0;
  n.i1 = r1;
  n.requires_grad = node(a).requires_grad;
  n.value = Tensor::zeros({r1 - r0, ta.cols()});
  n.value.matrix() = ta.matrix().middleRows(r0, r1 - r0);
  return push(std::move(n));
}

Value Graph::slice_cols(Value a, int c0, int c1) {
  const Tensor& ta = node(a).value;
  if (ta.rank() != 2) throw ShapeError("slice_cols requires rank 2, got " + ta.shape_str());
  if (c0 < 0 || c1 > ta.cols() || c0 >= c1)
    throw ContractError("slice_cols range [" + std::to_string(c0) + ", " + std::to_string(c1) +
                        ") invalid for " + ta.shape_str());
  Node n;
  n.op = Op::kSliceCols;
  n.in = {a.id, -1, -1};
  n.i0 = c0;
  n.i1 = c1;
  n.requires_grad = node(a).requires_grad;
  n.value = Tensor::zeros({ta.rows(), c1 - c0});
  n.value.matrix() = ta.matrix().middleCols(c0, c1 - c0);
  return push(std::move(n));
}

Value Graph::concat_rows(Value a, Value b) {
  const Tensor& ta = node(a).value;
  const Tensor& tb = node(b).value;
  if (ta.rank() > 2 || tb.rank() > 2)
    throw ShapeError("concat_rows requires rank <= 2 operands");
  if (ta.cols() != tb.cols())
    throw ShapeError("concat_rows: column counts differ: " + ta.shape_str() + " vs " +
                     tb.shape_str());
  Node n;
  n.op = Op::kConcatRows;
  n.in = {a.id, b.id, -1};
  n.i0 = ta.rows();
  n.requires_grad = node(a).requires_grad || node(b).requires_grad;
  n.value = Tensor::zeros({ta.rows() + tb.rows(), ta.cols()});
  n.value.matrix().topRows(ta.rows()) = ta.matrix();
  n.value.matrix().bottomRows(tb.rows()) = tb.matrix();
  return push(std::move(n));
}

Value Graph::concat_cols(Value a, Value b) {
  const Tensor& ta = node(a).value;
  const Tensor& tb = node(b).value;
  if (ta.rank() != 2 || tb.rank() != 2)
    throw ShapeError("concat_cols requires rank-2 operands");
  if (ta.rows() != tb.rows())
    throw ShapeError("concat_cols: row counts differ: " + ta.shape_str() + " vs " +
                     tb.shape_str());
  Node n;
  n.op = Op::kConcatCols;
  n.in = {a.id, b.id, -1};
  n.i0 = ta.cols();
  n.requires_grad = node(a).requires_grad || node(b).requires_grad;
  n.value = Tensor::zeros({ta.rows(), ta.cols() + tb.cols()});
  n.value.matrix().leftCols(ta.cols()) = ta.matrix();
  n.value.matrix().rightCols(tb.cols()) = tb.matrix();
  return push(std::move(n));
}

Value Graph::repeat_rows(Value row, int count) {
  const Tensor& tr = node(row).value;
  if (tr.rows() != 1)
    throw ShapeError("repeat_rows requires a single row, got " + tr.shape_str());
  if (count <= 0) throw ContractError("repeat_rows count must be positive");
  Node n;
  n.op = Op::kRepeatRows;
  n.in = {row.id, -1, -1};
  n.i0 = count;
  n.requires_grad = node(row).requires_grad;
  n.value = Tensor::zeros({count, tr.cols()});
  n.value.matrix() = tr.matrix().row(0).replicate(count, 1);
  return push(std::move(n));
}

Value Graph::sum(Value a) {
  const Tensor& ta = node(a).value;
  Node n;
  n.op = Op::kSum;
  n.in = {a.id, -1, -1};
  n.requires_grad = node(a).requires_grad;
  n.value = Tensor::scalar(ta.array().sum());
  return push(std::move(n));
}

void Graph::zero_grad() {
  for (Node& n : nodes_) n.grad = Tensor();
}

const Tensor& Graph::grad(Value v) {
  Node& n = node(v);
  if (!n.requires_grad)
    throw ContractError("gradient requested for a node that does not require grad");
  if (n.grad.empty()) n.grad = Tensor::zeros(n.value.shape());
  return n.grad;
}

// Propagation uses per-call scratch buffers; only the persistent per-node
// accumulators see the results, so calling backward twice adds the same
// gradient twice instead of compounding.
void Graph::backward(Value loss) {
  Node& root = node(loss);
  if (root.value.size() != 1)
    throw ContractError("backward requires a scalar loss, got " + root.value.shape_str());
  if (!root.requires_grad) return;

  std::vector<Tensor> scratch(static_cast<size_t>(loss.id) + 1);
  scratch[static_cast<size_t>(loss.id)] = Tensor::full(root.value.shape(), 1.0);

  auto put = [&](int id, auto&& expr) {
    if (id < 0 || !nodes_[static_cast<size_t>(id)].requires_grad) return;
    Tensor& g = scratch[static_cast<size_t>(id)];
    if (g.empty()) g = Tensor::zeros(nodes_[static_cast<size_t>(id)].value.shape());
    g.array() += expr;
  };
  auto put_mat = [&](int id, auto&& mat_expr) {
    if (id < 0 || !nodes_[static_cast<size_t>(id)].requires_grad) return;
    Tensor& g = scratch[static_cast<size_t>(id)];
    if (g.empty()) g = Tensor::zeros(nodes_[static_cast<size_t>(id)].value.shape());
    g.matrix() += mat_expr;
  };

  for (int id = loss.id; id >= 0; --id) {
    Node& n = nodes_[static_cast<size_t>(id)];
    Tensor& g = scratch[static_cast<size_t>(id)];
    if (g.empty() || !n.requires_grad) continue;

    switch (n.op) {
      case Op::kLeaf:
        break;
      case Op::kMatMul: {
        const Tensor& a = nodes_[static_cast<size_t>(n.in[0])].value;
        const Tensor& b = nodes_[static_cast<size_t>(n.in[1])].value;
        put_mat(n.in[0], g.matrix() * b.matrix().transpose());
        put_mat(n.in[1], a.matrix().transpose() * g.matrix());
        break;
      }
      case Op::kAdd:
        put(n.in[0], g.array());
        put(n.in[1], g.array());
        break;
      case Op::kSub:
        put(n.in[0], g.array());
        put(n.in[1], -g.array());
        break;
      case Op::kMul: {
        const Tensor& a = nodes_[static_cast<size_t>(n.in[0])].value;
        const Tensor& b = nodes_[static_cast<size_t>(n.in[1])].value;
        put(n.in[0], g.array() * b.array());
        put(n.in[1], g.array() * a.array());
        break;
      }
      case Op::kScale:
        put(n.in[0], g.array() * n.scalar);
        break;
      case Op::kGelu: {
        const auto& x = nodes_[static_cast<size_t>(n.in[0])].value.array();
        const Eigen::ArrayXd u = kGeluAlpha * (x + kGeluCubic * x.cube());
        const Eigen::ArrayXd t = u.tanh();
        const Eigen::ArrayXd du = kGeluAlpha * (1.0 + 3.0 * kGeluCubic * x.square());
        put(n.in[0], g.array() * (0.5 * (1.0 + t) + 0.5 * x * (1.0 - t.square()) * du));
        break;
      }
      case Op::kSoftmax: {
        // dx = s ⊙ (g - <g, s>) per row.
        Tensor dx = Tensor::zeros(n.value.shape());
        auto s = n.value.matrix();
        auto gm = g.matrix();
        auto dm = dx.matrix();
        for (Eigen::Index r = 0; r < s.rows(); ++r) {
          const double dot = gm.row(r).dot(s.row(r));
          dm.row(r) = (s.row(r).array() * (gm.row(r).array() - dot)).matrix();
        }
        put(n.in[0], dx.array());
        break;
      }
      case Op::kLayerNorm: {
        const Tensor& tx = nodes_[static_cast<size_t>(n.in[0])].value;
        const Tensor& tg = nodes_[static_cast<size_t>(n.in[1])].value;
        const int d = tx.cols();
        const double inv_d = 1.0 / d;
        auto src = tx.matrix();
        auto gm = g.matrix();
        const auto gain = Eigen::Map<const Eigen::RowVectorXd>(tg.data(), d);
        Tensor dx = Tensor::zeros(tx.shape());
        Eigen::RowVectorXd dgain = Eigen::RowVectorXd::Zero(d);
        Eigen::RowVectorXd dbias = Eigen::RowVectorXd::Zero(d);
        for (Eigen::Index r = 0; r < src.rows(); ++r) {
          const double mean = src.row(r).mean();
          const double var = (src.row(r).array() - mean).square().mean();
          const double inv_std = 1.0 / std::sqrt(var + n.scalar);
          const Eigen::RowVectorXd xhat =
              ((src.row(r).array() - mean) * inv_std).matrix();
          dbias += gm.row(r);
          dgain += gm.row(r).cwiseProduct(xhat);
          const Eigen::RowVectorXd dxhat = gm.row(r).cwiseProduct(gain);
          const double m1 = dxhat.sum() * inv_d;
          const double m2 = dxhat.cwiseProduct(xhat).sum() * inv_d;
          dx.matrix().row(r) =
              ((dxhat.array() - m1 - xhat.array() * m2) * inv_std).matrix();
        }
        put(n.in[0], dx.array());
        if (n.in[1] >= 0 && nodes_[static_cast<size_t>(n.in[1])].requires_grad) {
          Tensor dgain_t = Tensor::zeros(tg.shape());
          dgain_t.matrix() = dgain;
          put(n.in[1], dgain_t.array());
        }
        if (n.in[2] >= 0 && nodes_[static_cast<size_t>(n.in[2])].requires_grad) {
          const Tensor& tb = nodes_[static_cast<size_t>(n.in[2])].value;
          Tensor dbias_t = Tensor::zeros(tb.shape());
          dbias_t.matrix() = dbias;
          put(n.in[2], dbias_t.array());
        }
        break;
      }
      case Op::kTranspose:
        put_mat(n.in[0], g.matrix().transpose());
        break;
      case Op::kSliceRows: {
        const Tensor& a = nodes_[static_cast<size_t>(n.in[0])].value;
        Tensor da = Tensor::zeros(a.shape());
        da.matrix().middleRows(n.i0, n.i1 - n.i0) = g.matrix();
        put(n.in[0], da.array());
        break;
      }
      case Op::kSliceCols: {
        const Tensor& a = nodes_[static_cast<size_t>(n.in[0])].value;
        Tensor da = Tensor::zeros(a.shape());
        da.matrix().middleCols(n.i0, n.i1 - n.i0) = g.matrix();
        put(n.in[0], da.array());
        break;
      }
      case Op::kConcatRows: {
        const Tensor& a = nodes_[static_cast<size_t>(n.in[0])].value;
        const Tensor& b = nodes_[static_cast<size_t>(n.in[1])].value;
        if (n.in[0] >= 0 && nodes_[static_cast<size_t>(n.in[0])].requires_grad) {
          Tensor da = Tensor::zeros(a.shape());
          da.matrix() = g.matrix().topRows(n.i0);
          put(n.in[0], da.array());
        }
        if (n.in[1] >= 0 && nodes_[static_cast<size_t>(n.in[1])].requires_grad) {
          Tensor db = Tensor::zeros(b.shape());
          db.matrix() = g.matrix().bottomRows(g.rows() - n.i0);
          put(n.in[1], db.array());
        }
        break;
      }
      case Op::kConcatCols: {
        const Tensor& a = nodes_[static_cast<size_t>(n.in[0])].value;
        const Tensor& b = nodes_[static_cast<size_t>(n.in[1])].value;
        if (nodes_[static_cast<size_t>(n.in[0])].requires_grad) {
          Tensor da = Tensor::zeros(a.shape());
          da.matrix() = g.matrix().leftCols(n.i0);
          put(n.in[0], da.array());
        }
        if (nodes_[static_cast<size_t>(n.in[1])].requires_grad) {
          Tensor db = Tensor::zeros(b.shape());
          db.matrix() = g.matrix().rightCols(g.cols() - n.i0);
          put(n.in[1], db.array());
        }
        break;
      }
      case Op::kRepeatRows: {
        const Tensor& a = nodes_[static_cast<size_t>(n.in[0])].value;
        Tensor da = Tensor::zeros(a.shape());
        da.matrix() = g.matrix().colwise().sum();
        put(n.in[0], da.array());
        break;
      }
      case Op::kSum:
        put(n.in[0], g[0]);
        break;
    }
  }

  // Fold scratch into the persistent accumulators.
  for (int id = 0; id <= loss.id; ++id) {
    Node& n = nodes_[static_cast<size_t>(id)];
    Tensor& s = scratch[static_cast<size_t>(id)];
    if (s.empty() || !n.requires_grad) continue;
    if (n.grad.empty()) n.grad = Tensor::zeros(n.value.shape());
    n.grad.array() += s.array();
  }
}

Tensor finite_diff_grad(const std::function<double(const Tensor&)>& f, const Tensor& x,
                        double h) {
  if (!(h > 0)) throw ContractError("finite_diff_grad step must be positive");
  Tensor grad = Tensor::zeros(x.shape());
  Tensor probe = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double x0 = probe[i];
    probe[i] = x0 + h;
    const double fp = f(probe);
    probe[i] = x0 - h;
    const double fm = f(probe);
    probe[i] = x0;
    grad[i] = (fp - fm) / (2.0 * h);
  }
  return grad;
}

}  // namespace icepose::autodiff
