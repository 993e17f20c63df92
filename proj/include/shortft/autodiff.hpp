// Copyright 2026 The ShortFT Lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <initializer_list>
#include <map>
#include <span>
#include <string_view>
#include <vector>

#include "shortft/tensor.hpp"

namespace shortft {

/// Who owns a parameter. Ids are stable across runs: (role, index in owner).
enum class ParamRole : std::uint32_t {
  kInput = 0,
  kDenoiser = 1,
  kStudent = 2,
  kCritic = 3,
  kLora = 4,
};

struct ParamId {
  ParamRole role = ParamRole::kInput;
  std::uint32_t index = 0;
  auto operator<=>(const ParamId&) const = default;
};

struct GradRequest {
  ParamId id;
  Shape shape;
};

using GradMap = std::map<ParamId, Tensor>;

/// The closed set of differentiable primitives. Everything else is composed.
enum class OpKind : std::uint8_t {
  kLeaf,
  kMatMul,
  kAdd,
  kSub,
  kMul,
  kScale,
  kAffine,
  kTanh,
  kSilu,
  kSum,
  kMean,
  kSquare,
  kConcatCols,
  kConcatRows,
  kSliceRows,
  kSliceCols,
  kHFlip,
  kStopGradient,
  kLogSoftmax,
  kSmoothAbs,
};

std::string_view op_name(OpKind kind);

/// Non-tensor arguments of an op: the constant of kScale, the smoothing
/// epsilon of kSmoothAbs, the [begin, end) range of the slices, and the image
/// width of kHFlip (stored in `begin`).
struct OpAttrs {
  double scalar = 0.0;
  std::size_t begin = 0;
  std::size_t end = 0;
};

class Tape;

/// Handle to a node on a tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  bool requires_grad() const;
  Tape& tape() const { return *tape_; }
  int id() const noexcept { return id_; }
  bool valid() const noexcept { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}
  Tape* tape_ = nullptr;
  int id_ = -1;
};

/// Explicit per-forward-pass tape. Single-threaded; independent tapes may run
/// concurrently. Leaves bound with `constant_ref`/`param` alias caller storage,
/// which must stay alive and unmodified for the tape's lifetime.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  Var constant_ref(const Tensor& value);
  /// Leaf for a model parameter. Repeated calls with the same id return the
  /// same node, so gradients from every use accumulate.
  Var param(ParamId id, const Tensor& value, bool trainable);
  /// Owned leaf that requires gradient (e.g. a chain state under test).
  Var input(ParamId id, Tensor value);

  Var record(OpKind kind, std::initializer_list<Var> inputs, OpAttrs attrs = {});

  /// Reverse sweep from a scalar output. Every requested id appears exactly
  /// once in the result; ids the output does not depend on get zeros.
  GradMap backward(Var output, std::span<const GradRequest> wrt) const;

  bool grad_enabled() const noexcept { return grad_enabled_; }
  void set_grad_enabled(bool on) noexcept { grad_enabled_ = on; }

  std::size_t size() const noexcept { return nodes_.size(); }
  std::size_t grad_node_count() const noexcept;

 private:
  friend class Var;

  struct Node {
    OpKind kind = OpKind::kLeaf;
    std::array<int, 3> inputs{-1, -1, -1};
    OpAttrs attrs;
    Tensor value;
    const Tensor* external = nullptr;
    bool requires_grad = false;
    const Tensor& val() const { return external ? *external : value; }
  };

  Var push(Node node);
  const Node& node(int id) const { return nodes_[static_cast<std::size_t>(id)]; }

  std::vector<Node> nodes_;
  std::map<ParamId, int> param_nodes_;
  bool grad_enabled_ = true;
};

/// Disables gradient recording on a tape for the guard's lifetime.
class NoGradGuard {
 public:
  explicit NoGradGuard(Tape& tape) : tape_(tape), previous_(tape.grad_enabled()) {
    tape_.set_grad_enabled(false);
  }
  ~NoGradGuard() { tape_.set_grad_enabled(previous_); }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  Tape& tape_;
  bool previous_;
};

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
/// Elementwise product; `b` may also be a scalar (shape {}).
Var mul(Var a, Var b);
Var scale(Var a, double factor);
/// Dense layer x·W + bias with x [n, in], W [in, out], bias [out].
Var affine(Var x, Var weight, Var bias);
Var tanh(Var a);
Var silu(Var a);
Var sum(Var a);
Var mean(Var a);
Var square(Var a);
Var concat_cols(Var a, Var b);
Var concat_rows(Var a, Var b);
Var slice_rows(Var a, std::size_t begin, std::size_t end);
Var slice_cols(Var a, std::size_t begin, std::size_t end);
/// Mirrors each row of [n, h*w] viewed as h×w images along the width axis.
Var hflip(Var a, std::size_t width);
/// Identity forward; contributes nothing to upstream gradients.
Var stop_gradient(Var a);
Var log_softmax(Var a);
/// sqrt(x² + eps) − sqrt(eps), elementwise.
Var smooth_abs(Var a, double eps);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }
inline Var operator*(double s, Var a) { return scale(a, s); }

}  // namespace shortft
