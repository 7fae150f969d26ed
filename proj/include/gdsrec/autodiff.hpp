#pragma once

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace gdsrec::ad {

using ParamId = std::size_t;

// A named parameter. Matrices are row-major; embedding tables are marked
// row-sparse so gradients and optimizer updates touch only gathered rows.
struct Param {
  std::string name;
  std::size_t rows = 0;
  std::size_t cols = 0;  // 0 for a vector
  std::vector<double> value;
  bool row_sparse = false;

  std::size_t size() const { return value.size(); }
  std::size_t row_width() const { return cols == 0 ? 1 : cols; }
  std::vector<std::size_t> shape() const {
    return cols == 0 ? std::vector<std::size_t>{rows} : std::vector<std::size_t>{rows, cols};
  }
};

class ParamStore;

// Gradient buffers matching a ParamStore. Each worker owns one; they are
// reduced in a fixed order before the optimizer step.
class GradientSet {
 public:
  GradientSet() = default;
  explicit GradientSet(const ParamStore& params);

  std::vector<double>& operator[](ParamId id) { return grads_[id]; }
  const std::vector<double>& operator[](ParamId id) const { return grads_[id]; }
  std::size_t size() const { return grads_.size(); }

  void mark_row(ParamId id, std::size_t row);
  void mark_all(ParamId id);
  // Rows holding non-zero gradient; empty for params marked dense-touched.
  const std::vector<std::uint32_t>& touched_rows(ParamId id) const { return touched_list_[id]; }
  bool dense_touched(ParamId id) const { return dense_[id] != 0; }

  void zero();
  void accumulate(const GradientSet& other);

 private:
  std::vector<std::vector<double>> grads_;
  std::vector<std::size_t> row_width_;
  std::vector<std::vector<std::uint8_t>> touched_;
  std::vector<std::vector<std::uint32_t>> touched_list_;
  std::vector<std::uint8_t> dense_;
};

class ParamStore {
 public:
  ParamId add(std::string name, std::size_t rows, std::size_t cols, bool row_sparse = false);
  ParamId id(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  Param& operator[](ParamId id) { return params_[id]; }
  const Param& operator[](ParamId id) const { return params_[id]; }
  std::size_t size() const { return params_.size(); }
  std::size_t scalar_count() const;

  GradientSet& grads() { return grads_; }
  const GradientSet& grads() const { return grads_; }
  // Re-sizes gradient buffers after params have been added.
  void finalize();

  std::vector<std::vector<double>> snapshot() const;
  void restore(const std::vector<std::vector<double>>& values);

 private:
  std::vector<Param> params_;
  std::unordered_map<std::string, ParamId> index_;
  GradientSet grads_;
};

class Tape;

// Handle to a node on a tape.
struct Tensor {
  Tape* tape = nullptr;
  std::uint32_t id = 0;

  std::size_t size() const;
  std::vector<std::size_t> shape() const;
  std::span<const double> values() const;
  double item() const;
  bool requires_grad() const;
};

// Dynamic reverse-mode tape. Values live in a flat arena; parameter leaves
// and embedding rows reference the ParamStore directly, so parameters must
// not change while a tape that read them is alive.
class Tape {
 public:
  explicit Tape(const ParamStore* params = nullptr) : params_(params) {}

  Tensor constant(std::span<const double> values);
  Tensor constant(std::initializer_list<double> values) {
    return constant(std::span<const double>(values.begin(), values.size()));
  }
  Tensor scalar(double v) { return constant({v}); }
  // Whole parameter as a leaf; cached so repeated calls share one node.
  Tensor param(ParamId id);
  // One row of a matrix parameter (embedding gather).
  Tensor row(ParamId id, std::size_t r);

  // y = W x + b with W of shape m x n.
  Tensor affine(Tensor x, Tensor w, Tensor b);
  Tensor relu(Tensor x);
  Tensor sigmoid(Tensor x);
  Tensor concat(std::span<const Tensor> parts);
  Tensor concat(Tensor a, Tensor b) {
    const Tensor parts[2] = {a, b};
    return concat(parts);
  }
  Tensor softmax(Tensor x);
  // Every entry replaced by the maximum entry.
  Tensor max_broadcast(Tensor x);
  // sum_i w_i * v_i
  Tensor weighted_sum(Tensor weights, std::span<const Tensor> vectors);
  Tensor add(Tensor a, Tensor b);
  Tensor sub(Tensor a, Tensor b);
  Tensor mul(Tensor a, Tensor b);
  Tensor scale(Tensor a, double c);
  Tensor add_scalar(Tensor a, double c);
  Tensor sum(Tensor a);
  Tensor square(Tensor a);
  Tensor dot(Tensor a, Tensor b);

  // Accumulates d(loss)/d(param) into `grads`. `loss` must be a scalar.
  void backward(Tensor loss, GradientSet& grads);

  std::size_t node_count() const { return nodes_.size(); }
  void clear();

  // accessors used by Tensor
  std::size_t size_of(std::uint32_t id) const { return nodes_[id].size; }
  std::vector<std::size_t> shape_of(std::uint32_t id) const;
  std::span<const double> values_of(std::uint32_t id) const;
  bool requires_grad_of(std::uint32_t id) const { return nodes_[id].requires_grad; }

 private:
  enum class Op : std::uint8_t {
    kConstant, kParam, kRow, kAffine, kRelu, kSigmoid, kConcat, kSoftmax, kMaxBroadcast,
    kWeightedSum, kAdd, kSub, kMul, kScale, kAddScalar, kSum, kSquare, kDot
  };

  struct Node {
    Op op = Op::kConstant;
    bool requires_grad = false;
    std::uint32_t size = 0;
    std::uint32_t rows = 0;  // matrix leaves only
    std::uint32_t cols = 0;
    std::size_t value_offset = 0;
    std::size_t grad_offset = 0;
    std::uint32_t input_offset = 0;
    std::uint32_t input_count = 0;
    const double* external = nullptr;  // parameter storage for kParam/kRow
    ParamId param = 0;
    std::size_t aux = 0;  // row index for kRow, argmax for kMaxBroadcast
    double scalar = 0.0;
  };

  std::uint32_t push(Op op, std::size_t size, std::initializer_list<Tensor> inputs);
  std::uint32_t push(Op op, std::size_t size, std::span<const Tensor> inputs);
  double* out_values(std::uint32_t id) { return values_.data() + nodes_[id].value_offset; }
  const double* in_values(std::uint32_t id) const;
  const std::uint32_t* inputs_of(const Node& n) const { return inputs_.data() + n.input_offset; }
  void check_finite(std::uint32_t id) const;
  const Param& param_ref(ParamId id) const;

  const ParamStore* params_ = nullptr;
  std::vector<Node> nodes_;
  std::vector<double> values_;
  std::vector<std::uint32_t> inputs_;
  std::vector<double> grads_;
  std::size_t grad_size_ = 0;
  std::unordered_map<ParamId, std::uint32_t> param_nodes_;
};

// Adaptive-moment optimizer. Row-sparse params update only rows touched in
// the current step.
struct AdamOptions {
  double learning_rate = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.0;  // L2 coefficient folded into the gradient
};

class Adam {
 public:
  Adam(const ParamStore& params, AdamOptions options);
  void step(ParamStore& params, const GradientSet& grads);
  const AdamOptions& options() const { return options_; }

 private:
  AdamOptions options_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  std::uint64_t t_ = 0;
};

class Sgd {
 public:
  explicit Sgd(double learning_rate, double weight_decay = 0.0) : lr_(learning_rate), decay_(weight_decay) {}
  void step(ParamStore& params, const GradientSet& grads);

 private:
  double lr_;
  double decay_;
};

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t coordinates = 0;
  std::string worst_param;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

using ScalarFunction = std::function<Tensor(Tape&)>;

// Compares reverse-mode gradients with central differences for every
// parameter coordinate (or a random subset of `max_coords_per_param` per
// parameter). Relative error is |a - n| / max(|a|, |n|, floor).
GradCheckResult grad_check(ParamStore& params, const ScalarFunction& f, double eps = 1e-5,
                           std::size_t max_coords_per_param = static_cast<std::size_t>(-1),
                           std::uint64_t seed = 0, double floor = 1e-6);

}  // namespace gdsrec::ad
