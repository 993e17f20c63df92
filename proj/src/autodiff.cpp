// Copyright 2026 The ShortFT Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "shortft/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>

#include "kernels.hpp"

namespace shortft {

std::string_view op_name(OpKind kind) {
  switch (kind) {
    case OpKind::kLeaf: return "leaf";
    case OpKind::kMatMul: return "matmul";
    case OpKind::kAdd: return "add";
    case OpKind::kSub: return "sub";
    case OpKind::kMul: return "mul";
    case OpKind::kScale: return "scale";
    case OpKind::kAffine: return "affine";
    case OpKind::kTanh: return "tanh";
    case OpKind::kSilu: return "silu";
    case OpKind::kSum: return "sum";
    case OpKind::kMean: return "mean";
    case OpKind::kSquare: return "square";
    case OpKind::kConcatCols: return "concat_cols";
    case OpKind::kConcatRows: return "concat_rows";
    case OpKind::kSliceRows: return "slice_rows";
    case OpKind::kSliceCols: return "slice_cols";
    case OpKind::kHFlip: return "hflip";
    case OpKind::kStopGradient: return "stop_gradient";
    case OpKind::kLogSoftmax: return "log_softmax";
    case OpKind::kSmoothAbs: return "smooth_abs";
  }
  return "unknown";
}

const Tensor& Var::value() const { return tape_->node(id_).val(); }

bool Var::requires_grad() const { return tape_->node(id_).requires_grad; }

namespace {

[[noreturn]] void shape_fail(OpKind kind, std::initializer_list<const Tensor*> ts,
                             const std::string& detail = {}) {
  std::string msg = std::string(op_name(kind)) + ": shape mismatch";
  bool first = true;
  for (const Tensor* t : ts) {
    msg += first ? " " : " vs ";
    msg += shape_to_string(t->shape());
    first = false;
  }
  if (!detail.empty()) msg += " (" + detail + ")";
  throw ShapeError(msg);
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void flip_rows(const double* src, double* dst, std::size_t n, std::size_t width) {
  for (std::size_t r = 0; r < n; r += width) {
    for (std::size_t c = 0; c < width; ++c) dst[r + c] = src[r + width - 1 - c];
  }
}

Tensor forward(OpKind kind, const std::array<const Tensor*, 3>& in, const OpAttrs& at) {
  const Tensor* a = in[0];
  const Tensor* b = in[1];
  switch (kind) {
    case OpKind::kLeaf:
      break;
    case OpKind::kMatMul: {
      if (a->rank() != 2 || b->rank() != 2 || a->cols() != b->rows()) shape_fail(kind, {a, b});
      Tensor out({a->rows(), b->cols()});
      kernels::gemm(a->data().data(), b->data().data(), out.data().data(), a->rows(),
                    a->cols(), b->cols(), false, false, false);
      return out;
    }
    case OpKind::kAdd:
    case OpKind::kSub: {
      if (a->shape() != b->shape()) shape_fail(kind, {a, b});
      return kind == OpKind::kAdd ? *a + *b : *a - *b;
    }
    case OpKind::kMul: {
      Tensor out(a->shape());
      if (b->rank() == 0) {
        const double s = b->item();
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = (*a)[i] * s;
      } else {
        if (a->shape() != b->shape()) shape_fail(kind, {a, b});
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = (*a)[i] * (*b)[i];
      }
      return out;
    }
    case OpKind::kScale:
      return at.scalar * *a;
    case OpKind::kAffine: {
      const Tensor* bias = in[2];
      if (a->rank() != 2 || b->rank() != 2 || bias->rank() != 1 || a->cols() != b->rows() ||
          bias->dim(0) != b->cols()) {
        shape_fail(kind, {a, b, bias});
      }
      const std::size_t n = a->rows();
      const std::size_t m = b->cols();
      Tensor out({n, m});
      for (std::size_t r = 0; r < n; ++r) {
        std::copy(bias->data().begin(), bias->data().end(),
                  out.data().begin() + static_cast<std::ptrdiff_t>(r * m));
      }
      kernels::gemm(a->data().data(), b->data().data(), out.data().data(), n, a->cols(), m,
                    false, false, true);
      return out;
    }
    case OpKind::kTanh: {
      Tensor out(a->shape());
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh((*a)[i]);
      return out;
    }
    case OpKind::kSilu: {
      Tensor out(a->shape());
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = (*a)[i] * sigmoid((*a)[i]);
      return out;
    }
    case OpKind::kSum:
    case OpKind::kMean: {
      double s = 0.0;
      for (double v : a->data()) s += v;
      if (kind == OpKind::kMean) {
        if (a->size() == 0) shape_fail(kind, {a}, "empty");
        s /= static_cast<double>(a->size());
      }
      return Tensor::scalar(s);
    }
    case OpKind::kSquare: {
      Tensor out(a->shape());
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = (*a)[i] * (*a)[i];
      return out;
    }
    case OpKind::kConcatCols: {
      if (a->rank() != 2 || b->rank() != 2 || a->rows() != b->rows()) shape_fail(kind, {a, b});
      const std::size_t n = a->rows();
      const std::size_t ca = a->cols();
      const std::size_t cb = b->cols();
      Tensor out({n, ca + cb});
      for (std::size_t r = 0; r < n; ++r) {
        std::copy_n(a->data().data() + r * ca, ca, out.data().data() + r * (ca + cb));
        std::copy_n(b->data().data() + r * cb, cb, out.data().data() + r * (ca + cb) + ca);
      }
      return out;
    }
    case OpKind::kConcatRows: {
      if (a->rank() != 2 || b->rank() != 2 || a->cols() != b->cols()) shape_fail(kind, {a, b});
      Tensor out({a->rows() + b->rows(), a->cols()});
      std::copy(a->data().begin(), a->data().end(), out.data().begin());
      std::copy(b->data().begin(), b->data().end(),
                out.data().begin() + static_cast<std::ptrdiff_t>(a->size()));
      return out;
    }
    case OpKind::kSliceRows: {
      if (a->rank() != 2 || at.begin > at.end || at.end > a->rows()) {
        shape_fail(kind, {a}, "rows " + std::to_string(at.begin) + ":" + std::to_string(at.end));
      }
      return a->slice_rows(at.begin, at.end);
    }
    case OpKind::kSliceCols: {
      if (a->rank() != 2 || at.begin > at.end || at.end > a->cols()) {
        shape_fail(kind, {a}, "cols " + std::to_string(at.begin) + ":" + std::to_string(at.end));
      }
      const std::size_t n = a->rows();
      const std::size_t c = a->cols();
      const std::size_t w = at.end - at.begin;
      Tensor out({n, w});
      for (std::size_t r = 0; r < n; ++r) {
        std::copy_n(a->data().data() + r * c + at.begin, w, out.data().data() + r * w);
      }
      return out;
    }
    case OpKind::kHFlip: {
      const std::size_t width = at.begin;
      if (a->rank() != 2 || width == 0 || a->cols() % width != 0) {
        shape_fail(kind, {a}, "width " + std::to_string(width));
      }
      Tensor out(a->shape());
      flip_rows(a->data().data(), out.data().data(), a->size(), width);
      return out;
    }
    case OpKind::kStopGradient:
      return *a;
    case OpKind::kLogSoftmax: {
      if (a->rank() != 2 || a->cols() == 0) shape_fail(kind, {a});
      const std::size_t n = a->rows();
      const std::size_t c = a->cols();
      Tensor out(a->shape());
      for (std::size_t r = 0; r < n; ++r) {
        const double* row = a->data().data() + r * c;
        const double m = *std::max_element(row, row + c);
        double s = 0.0;
        for (std::size_t j = 0; j < c; ++j) s += std::exp(row[j] - m);
        const double lse = m + std::log(s);
        for (std::size_t j = 0; j < c; ++j) out.at(r, j) = row[j] - lse;
      }
      return out;
    }
    case OpKind::kSmoothAbs: {
      const double eps = at.scalar;
      const double offset = std::sqrt(eps);
      Tensor out(a->shape());
      for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = std::sqrt((*a)[i] * (*a)[i] + eps) - offset;
      }
      return out;
    }
  }
  throw ShapeError("record: unsupported op " + std::string(op_name(kind)));
}

std::size_t arity(OpKind kind) {
  switch (kind) {
    case OpKind::kLeaf: return 0;
    case OpKind::kMatMul:
    case OpKind::kAdd:
    case OpKind::kSub:
    case OpKind::kMul:
    case OpKind::kConcatCols:
    case OpKind::kConcatRows: return 2;
    case OpKind::kAffine: return 3;
    default: return 1;
  }
}

}  // namespace

Var Tape::push(Node n) {
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

Var Tape::constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  return push(std::move(n));
}

Var Tape::constant_ref(const Tensor& value) {
  Node n;
  n.external = &value;
  return push(std::move(n));
}

Var Tape::param(ParamId id, const Tensor& value, bool trainable) {
  if (auto it = param_nodes_.find(id); it != param_nodes_.end()) {
    const Node& existing = node(it->second);
    if (existing.external != &value) {
      throw std::invalid_argument("param: id bound to different storage on this tape");
    }
    if (existing.requires_grad != trainable) {
      throw std::invalid_argument("param: id rebound with a different trainable flag");
    }
    return Var(this, it->second);
  }
  Node n;
  n.external = &value;
  // Trainability belongs to the leaf; recording mode only gates the ops.
  n.requires_grad = trainable;
  Var v = push(std::move(n));
  param_nodes_.emplace(id, v.id());
  return v;
}

Var Tape::input(ParamId id, Tensor value) {
  if (param_nodes_.contains(id)) throw std::invalid_argument("input: id already bound");
  Node n;
  n.value = std::move(value);
  n.requires_grad = grad_enabled_;
  Var v = push(std::move(n));
  param_nodes_.emplace(id, v.id());
  return v;
}

Var Tape::record(OpKind kind, std::initializer_list<Var> inputs, OpAttrs attrs) {
  if (inputs.size() != arity(kind)) {
    throw std::invalid_argument(std::string(op_name(kind)) + ": expected " +
                                std::to_string(arity(kind)) + " inputs");
  }
  Node n;
  n.kind = kind;
  n.attrs = attrs;
  std::array<const Tensor*, 3> in{nullptr, nullptr, nullptr};
  std::size_t i = 0;
  bool any_grad = false;
  for (const Var& v : inputs) {
    if (v.tape_ != this) throw std::invalid_argument(std::string(op_name(kind)) + ": input from another tape");
    n.inputs[i] = v.id_;
    in[i] = &node(v.id_).val();
    any_grad = any_grad || node(v.id_).requires_grad;
    ++i;
  }
  n.value = forward(kind, in, attrs);
  if (!n.value.all_finite()) {
    throw NonFiniteError("gradient explosion: non-finite forward value in " +
                         std::string(op_name(kind)));
  }
  n.requires_grad = grad_enabled_ && any_grad && kind != OpKind::kStopGradient;
  if (!n.requires_grad) n.inputs = {-1, -1, -1};
  return push(std::move(n));
}

std::size_t Tape::grad_node_count() const noexcept {
  return static_cast<std::size_t>(std::count_if(
      nodes_.begin(), nodes_.end(), [](const Node& n) { return n.requires_grad; }));
}

GradMap Tape::backward(Var output, std::span<const GradRequest> wrt) const {
  if (output.tape_ != this || output.id_ < 0 ||
      static_cast<std::size_t>(output.id_) >= nodes_.size()) {
    throw std::invalid_argument("backward: output is not on this tape");
  }
  if (output.value().rank() != 0) {
    throw ShapeError("backward: output must be a scalar, got " +
                     shape_to_string(output.value().shape()));
  }

  std::vector<std::optional<Tensor>> grads(nodes_.size());
  auto accum = [&](int id) -> Tensor* {
    if (id < 0) return nullptr;
    const Node& target = node(id);
    if (!target.requires_grad) return nullptr;
    auto& g = grads[static_cast<std::size_t>(id)];
    if (!g) g.emplace(target.val().shape(), 0.0);
    return &*g;
  };

  if (node(output.id_).requires_grad) grads[static_cast<std::size_t>(output.id_)] = Tensor::scalar(1.0);

  for (int id = output.id_; id >= 0; --id) {
    const Node& n = node(id);
    const auto& gopt = grads[static_cast<std::size_t>(id)];
    if (!n.requires_grad || !gopt || n.kind == OpKind::kLeaf) continue;
    const Tensor& g = *gopt;
    const Tensor* a = n.inputs[0] >= 0 ? &node(n.inputs[0]).val() : nullptr;
    const Tensor* b = n.inputs[1] >= 0 ? &node(n.inputs[1]).val() : nullptr;
    Tensor* ga = accum(n.inputs[0]);
    Tensor* gb = accum(n.inputs[1]);

    switch (n.kind) {
      case OpKind::kLeaf:
      case OpKind::kStopGradient:
        break;
      case OpKind::kMatMul:
        if (ga) kernels::gemm(g.data().data(), b->data().data(), ga->data().data(), a->rows(),
                              b->cols(), a->cols(), false, true, true);
        if (gb) kernels::gemm(a->data().data(), g.data().data(), gb->data().data(), a->cols(),
                              a->rows(), b->cols(), true, false, true);
        break;
      case OpKind::kAdd:
        if (ga) for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i];
        if (gb) for (std::size_t i = 0; i < g.size(); ++i) (*gb)[i] += g[i];
        break;
      case OpKind::kSub:
        if (ga) for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i];
        if (gb) for (std::size_t i = 0; i < g.size(); ++i) (*gb)[i] -= g[i];
        break;
      case OpKind::kMul:
        if (b->rank() == 0) {
          const double s = b->item();
          if (ga) for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i] * s;
          if (gb) {
            double acc = 0.0;
            for (std::size_t i = 0; i < g.size(); ++i) acc += g[i] * (*a)[i];
            (*gb)[0] += acc;
          }
        } else {
          if (ga) for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i] * (*b)[i];
          if (gb) for (std::size_t i = 0; i < g.size(); ++i) (*gb)[i] += g[i] * (*a)[i];
        }
        break;
      case OpKind::kScale:
        if (ga) for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += n.attrs.scalar * g[i];
        break;
      case OpKind::kAffine: {
        const std::size_t rows = a->rows();
        const std::size_t in_dim = a->cols();
        const std::size_t out_dim = b->cols();
        if (ga) kernels::gemm(g.data().data(), b->data().data(), ga->data().data(), rows,
                              out_dim, in_dim, false, true, true);
        if (gb) kernels::gemm(a->data().data(), g.data().data(), gb->data().data(), in_dim,
                              rows, out_dim, true, false, true);
        if (Tensor* gbias = accum(n.inputs[2])) {
          for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t c = 0; c < out_dim; ++c) (*gbias)[c] += g[r * out_dim + c];
          }
        }
        break;
      }
      case OpKind::kTanh:
        if (ga) {
          for (std::size_t i = 0; i < g.size(); ++i) {
            const double y = n.value[i];
            (*ga)[i] += g[i] * (1.0 - y * y);
          }
        }
        break;
      case OpKind::kSilu:
        if (ga) {
          for (std::size_t i = 0; i < g.size(); ++i) {
            const double x = (*a)[i];
            const double s = sigmoid(x);
            (*ga)[i] += g[i] * (s + x * s * (1.0 - s));
          }
        }
        break;
      case OpKind::kSum:
      case OpKind::kMean:
        if (ga) {
          const double scale_factor =
              n.kind == OpKind::kMean ? 1.0 / static_cast<double>(a->size()) : 1.0;
          const double gv = g[0] * scale_factor;
          for (std::size_t i = 0; i < ga->size(); ++i) (*ga)[i] += gv;
        }
        break;
      case OpKind::kSquare:
        if (ga) for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += 2.0 * (*a)[i] * g[i];
        break;
      case OpKind::kConcatCols: {
        const std::size_t rows = g.rows();
        const std::size_t ca = a->cols();
        const std::size_t cb = b->cols();
        for (std::size_t r = 0; r < rows; ++r) {
          const double* src = g.data().data() + r * (ca + cb);
          if (ga) for (std::size_t c = 0; c < ca; ++c) ga->data()[r * ca + c] += src[c];
          if (gb) for (std::size_t c = 0; c < cb; ++c) gb->data()[r * cb + c] += src[ca + c];
        }
        break;
      }
      case OpKind::kConcatRows:
        if (ga) for (std::size_t i = 0; i < a->size(); ++i) (*ga)[i] += g[i];
        if (gb) for (std::size_t i = 0; i < b->size(); ++i) (*gb)[i] += g[a->size() + i];
        break;
      case OpKind::kSliceRows:
        if (ga) {
          const std::size_t offset = n.attrs.begin * a->cols();
          for (std::size_t i = 0; i < g.size(); ++i) (*ga)[offset + i] += g[i];
        }
        break;
      case OpKind::kSliceCols:
        if (ga) {
          const std::size_t rows = a->rows();
          const std::size_t c = a->cols();
          const std::size_t w = n.attrs.end - n.attrs.begin;
          for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t j = 0; j < w; ++j) ga->data()[r * c + n.attrs.begin + j] += g[r * w + j];
          }
        }
        break;
      case OpKind::kHFlip:
        if (ga) {
          std::vector<double> flipped(g.size());
          flip_rows(g.data().data(), flipped.data(), g.size(), n.attrs.begin);
          for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += flipped[i];
        }
        break;
      case OpKind::kLogSoftmax:
        if (ga) {
          const std::size_t rows = g.rows();
          const std::size_t c = g.cols();
          for (std::size_t r = 0; r < rows; ++r) {
            double gsum = 0.0;
            for (std::size_t j = 0; j < c; ++j) gsum += g.at(r, j);
            for (std::size_t j = 0; j < c; ++j) {
              ga->at(r, j) += g.at(r, j) - std::exp(n.value.at(r, j)) * gsum;
            }
          }
        }
        break;
      case OpKind::kSmoothAbs:
        if (ga) {
          for (std::size_t i = 0; i < g.size(); ++i) {
            const double x = (*a)[i];
            (*ga)[i] += g[i] * x / std::sqrt(x * x + n.attrs.scalar);
          }
        }
        break;
    }
  }

  GradMap result;
  for (const GradRequest& req : wrt) {
    Tensor g(req.shape, 0.0);
    if (auto it = param_nodes_.find(req.id); it != param_nodes_.end()) {
      const auto& got = grads[static_cast<std::size_t>(it->second)];
      if (node(it->second).val().shape() != req.shape) {
        throw ShapeError("backward: requested shape " + shape_to_string(req.shape) +
                         " does not match parameter shape " +
                         shape_to_string(node(it->second).val().shape()));
      }
      if (got) g = *got;
    }
    if (!g.all_finite()) {
      throw NonFiniteError("gradient explosion: non-finite gradient in backward pass");
    }
    if (!result.emplace(req.id, std::move(g)).second) {
      throw std::invalid_argument("backward: parameter requested twice");
    }
  }
  return result;
}

Var matmul(Var a, Var b) { return a.tape().record(OpKind::kMatMul, {a, b}); }
Var add(Var a, Var b) { return a.tape().record(OpKind::kAdd, {a, b}); }
Var sub(Var a, Var b) { return a.tape().record(OpKind::kSub, {a, b}); }
Var mul(Var a, Var b) { return a.tape().record(OpKind::kMul, {a, b}); }
Var scale(Var a, double factor) {
  return a.tape().record(OpKind::kScale, {a}, OpAttrs{factor, 0, 0});
}
Var affine(Var x, Var weight, Var bias) {
  return x.tape().record(OpKind::kAffine, {x, weight, bias});
}
Var tanh(Var a) { return a.tape().record(OpKind::kTanh, {a}); }
Var silu(Var a) { return a.tape().record(OpKind::kSilu, {a}); }
Var sum(Var a) { return a.tape().record(OpKind::kSum, {a}); }
Var mean(Var a) { return a.tape().record(OpKind::kMean, {a}); }
Var square(Var a) { return a.tape().record(OpKind::kSquare, {a}); }
Var concat_cols(Var a, Var b) { return a.tape().record(OpKind::kConcatCols, {a, b}); }
Var concat_rows(Var a, Var b) { return a.tape().record(OpKind::kConcatRows, {a, b}); }
Var slice_rows(Var a, std::size_t begin, std::size_t end) {
  return a.tape().record(OpKind::kSliceRows, {a}, OpAttrs{0.0, begin, end});
}
Var slice_cols(Var a, std::size_t begin, std::size_t end) {
  return a.tape().record(OpKind::kSliceCols, {a}, OpAttrs{0.0, begin, end});
}
Var hflip(Var a, std::size_t width) {
  return a.tape().record(OpKind::kHFlip, {a}, OpAttrs{0.0, width, 0});
}
Var stop_gradient(Var a) { return a.tape().record(OpKind::kStopGradient, {a}); }
Var log_softmax(Var a) { return a.tape().record(OpKind::kLogSoftmax, {a}); }
Var smooth_abs(Var a, double eps) {
  return a.tape().record(OpKind::kSmoothAbs, {a}, OpAttrs{eps, 0, 0});
}

}  // namespace shortft
