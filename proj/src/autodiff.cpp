#include "gdsrec/autodiff.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "gdsrec/error.hpp"

namespace gdsrec::ad {

// ---------------------------------------------------------------------------
// GradientSet / ParamStore

GradientSet::GradientSet(const ParamStore& params) {
  const auto n = params.size();
  grads_.resize(n);
  row_width_.resize(n);
  touched_.resize(n);
  touched_list_.resize(n);
  dense_.assign(n, 0);
  for (ParamId i = 0; i < n; ++i) {
    grads_[i].assign(params[i].size(), 0.0);
    row_width_[i] = params[i].row_width();
    if (params[i].row_sparse) touched_[i].assign(params[i].rows, 0);
  }
}

void GradientSet::mark_row(ParamId id, std::size_t row) {
  if (touched_[id].empty()) {
    dense_[id] = 1;
    return;
  }
  if (!touched_[id][row]) {
    touched_[id][row] = 1;
    touched_list_[id].push_back(static_cast<std::uint32_t>(row));
  }
}

void GradientSet::mark_all(ParamId id) { dense_[id] = 1; }

void GradientSet::zero() {
  for (ParamId i = 0; i < grads_.size(); ++i) {
    if (dense_[i]) {
      std::fill(grads_[i].begin(), grads_[i].end(), 0.0);
    } else {
      const auto w = row_width_[i];
      for (auto r : touched_list_[i]) std::fill_n(grads_[i].begin() + static_cast<std::ptrdiff_t>(r * w), w, 0.0);
    }
    for (auto r : touched_list_[i]) touched_[i][r] = 0;
    touched_list_[i].clear();
    dense_[i] = 0;
  }
}

void GradientSet::accumulate(const GradientSet& other) {
  for (ParamId i = 0; i < grads_.size(); ++i) {
    if (other.dense_[i]) {
      for (std::size_t j = 0; j < grads_[i].size(); ++j) grads_[i][j] += other.grads_[i][j];
      dense_[i] = 1;
      continue;
    }
    const auto w = row_width_[i];
    for (auto r : other.touched_list_[i]) {
      for (std::size_t j = 0; j < w; ++j) grads_[i][r * w + j] += other.grads_[i][r * w + j];
      mark_row(i, r);
    }
  }
}

ParamId ParamStore::add(std::string name, std::size_t rows, std::size_t cols, bool row_sparse) {
  if (index_.count(name)) throw std::invalid_argument("duplicate parameter name " + name);
  if (row_sparse && cols == 0) throw std::invalid_argument("row-sparse parameter must be a matrix: " + name);
  Param p;
  p.name = std::move(name);
  p.rows = rows;
  p.cols = cols;
  p.value.assign(rows * (cols == 0 ? 1 : cols), 0.0);
  p.row_sparse = row_sparse;
  const ParamId id = params_.size();
  index_.emplace(p.name, id);
  params_.push_back(std::move(p));
  return id;
}

ParamId ParamStore::id(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("unknown parameter " + name);
  return it->second;
}

std::size_t ParamStore::scalar_count() const {
  return std::accumulate(params_.begin(), params_.end(), std::size_t{0},
                         [](std::size_t s, const Param& p) { return s + p.size(); });
}

void ParamStore::finalize() { grads_ = GradientSet(*this); }

std::vector<std::vector<double>> ParamStore::snapshot() const {
  std::vector<std::vector<double>> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(p.value);
  return out;
}

void ParamStore::restore(const std::vector<std::vector<double>>& values) {
  if (values.size() != params_.size()) throw std::invalid_argument("snapshot does not match parameter store");
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (values[i].size() != params_[i].size()) throw std::invalid_argument("snapshot shape mismatch");
    params_[i].value = values[i];
  }
}

// ---------------------------------------------------------------------------
// Tensor

std::size_t Tensor::size() const { return tape->size_of(id); }
std::vector<std::size_t> Tensor::shape() const { return tape->shape_of(id); }
std::span<const double> Tensor::values() const { return tape->values_of(id); }
double Tensor::item() const {
  if (size() != 1) throw std::logic_error("item() on a non-scalar tensor");
  return values()[0];
}
bool Tensor::requires_grad() const { return tape->requires_grad_of(id); }

// ---------------------------------------------------------------------------
// Tape

namespace {

[[noreturn]] void shape_error(const char* op, std::size_t a, std::size_t b) {
  throw std::invalid_argument(std::string(op) + ": shape mismatch (" + std::to_string(a) + " vs " +
                              std::to_string(b) + ")");
}

}  // namespace

std::vector<std::size_t> Tape::shape_of(std::uint32_t id) const {
  const auto& n = nodes_[id];
  if (n.cols != 0) return {n.rows, n.cols};
  return {n.size};
}

const double* Tape::in_values(std::uint32_t id) const {
  const auto& n = nodes_[id];
  return n.external ? n.external : values_.data() + n.value_offset;
}

std::span<const double> Tape::values_of(std::uint32_t id) const { return {in_values(id), nodes_[id].size}; }

const Param& Tape::param_ref(ParamId id) const {
  if (!params_) throw std::logic_error("tape has no parameter store");
  return (*params_)[id];
}

std::uint32_t Tape::push(Op op, std::size_t size, std::initializer_list<Tensor> inputs) {
  return push(op, size, std::span<const Tensor>(inputs.begin(), inputs.size()));
}

std::uint32_t Tape::push(Op op, std::size_t size, std::span<const Tensor> inputs) {
  Node n;
  n.op = op;
  n.size = static_cast<std::uint32_t>(size);
  n.input_offset = static_cast<std::uint32_t>(inputs_.size());
  n.input_count = static_cast<std::uint32_t>(inputs.size());
  for (const auto& t : inputs) {
    if (t.tape != this) throw std::logic_error("tensor belongs to a different tape");
    inputs_.push_back(t.id);
    n.requires_grad = n.requires_grad || nodes_[t.id].requires_grad;
  }
  if (op != Op::kParam && op != Op::kRow) {
    n.value_offset = values_.size();
    values_.resize(values_.size() + size);
  }
  n.grad_offset = grad_size_;
  grad_size_ += size;
  nodes_.push_back(n);
  return static_cast<std::uint32_t>(nodes_.size() - 1);
}

void Tape::check_finite(std::uint32_t id) const {
  const auto* v = in_values(id);
  for (std::uint32_t i = 0; i < nodes_[id].size; ++i)
    if (!std::isfinite(v[i])) throw DivergenceError("non-finite value produced on the tape");
}

Tensor Tape::constant(std::span<const double> values) {
  const auto id = push(Op::kConstant, values.size(), {});
  std::copy(values.begin(), values.end(), out_values(id));
  return {this, id};
}

Tensor Tape::param(ParamId pid) {
  if (auto it = param_nodes_.find(pid); it != param_nodes_.end()) return {this, it->second};
  const auto& p = param_ref(pid);
  const auto id = push(Op::kParam, p.size(), {});
  auto& n = nodes_[id];
  n.requires_grad = true;
  n.external = p.value.data();
  n.param = pid;
  n.rows = static_cast<std::uint32_t>(p.rows);
  n.cols = static_cast<std::uint32_t>(p.cols);
  param_nodes_.emplace(pid, id);
  return {this, id};
}

Tensor Tape::row(ParamId pid, std::size_t r) {
  const auto& p = param_ref(pid);
  if (p.cols == 0 || r >= p.rows) throw std::out_of_range("row " + std::to_string(r) + " of " + p.name);
  const auto id = push(Op::kRow, p.cols, {});
  auto& n = nodes_[id];
  n.requires_grad = true;
  n.external = p.value.data() + r * p.cols;
  n.param = pid;
  n.aux = r;
  return {this, id};
}

Tensor Tape::affine(Tensor x, Tensor w, Tensor b) {
  const auto& wn = nodes_[w.id];
  const std::size_t m = wn.cols == 0 ? 0 : wn.rows;
  const std::size_t k = wn.cols;
  if (m == 0) throw std::invalid_argument("affine: weight must be a matrix");
  if (nodes_[x.id].size != k) shape_error("affine input", nodes_[x.id].size, k);
  if (nodes_[b.id].size != m) shape_error("affine bias", nodes_[b.id].size, m);
  const auto id = push(Op::kAffine, m, {x, w, b});
  const double* xv = in_values(x.id);
  const double* wv = in_values(w.id);
  const double* bv = in_values(b.id);
  double* y = out_values(id);
  for (std::size_t i = 0; i < m; ++i) {
    double acc = bv[i];
    const double* wr = wv + i * k;
    for (std::size_t j = 0; j < k; ++j) acc += wr[j] * xv[j];
    y[i] = acc;
  }
  check_finite(id);
  return {this, id};
}

Tensor Tape::relu(Tensor x) {
  const auto n = nodes_[x.id].size;
  const auto id = push(Op::kRelu, n, {x});
  const double* xv = in_values(x.id);
  double* y = out_values(id);
  for (std::size_t i = 0; i < n; ++i) y[i] = xv[i] > 0.0 ? xv[i] : 0.0;
  return {this, id};
}

Tensor Tape::sigmoid(Tensor x) {
  const auto n = nodes_[x.id].size;
  const auto id = push(Op::kSigmoid, n, {x});
  const double* xv = in_values(x.id);
  double* y = out_values(id);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = xv[i] >= 0.0 ? 1.0 / (1.0 + std::exp(-xv[i])) : std::exp(xv[i]) / (1.0 + std::exp(xv[i]));
  }
  return {this, id};
}

Tensor Tape::concat(std::span<const Tensor> parts) {
  std::size_t total = 0;
  for (const auto& p : parts) total += nodes_[p.id].size;
  const auto id = push(Op::kConcat, total, parts);
  double* y = out_values(id);
  for (const auto& p : parts) {
    const auto n = nodes_[p.id].size;
    std::copy_n(in_values(p.id), n, y);
    y += n;
  }
  return {this, id};
}

Tensor Tape::softmax(Tensor x) {
  const auto n = nodes_[x.id].size;
  if (n == 0) throw std::invalid_argument("softmax of an empty tensor");
  const auto id = push(Op::kSoftmax, n, {x});
  const double* xv = in_values(x.id);
  double* y = out_values(id);
  const double mx = *std::max_element(xv, xv + n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) total += (y[i] = std::exp(xv[i] - mx));
  for (std::size_t i = 0; i < n; ++i) y[i] /= total;
  return {this, id};
}

Tensor Tape::max_broadcast(Tensor x) {
  const auto n = nodes_[x.id].size;
  if (n == 0) throw std::invalid_argument("max of an empty tensor");
  const auto id = push(Op::kMaxBroadcast, n, {x});
  const double* xv = in_values(x.id);
  const auto arg = static_cast<std::size_t>(std::max_element(xv, xv + n) - xv);
  nodes_[id].aux = arg;
  std::fill_n(out_values(id), n, xv[arg]);
  return {this, id};
}

Tensor Tape::weighted_sum(Tensor weights, std::span<const Tensor> vectors) {
  const auto count = nodes_[weights.id].size;
  if (count != vectors.size()) shape_error("weighted_sum count", count, vectors.size());
  if (vectors.empty()) throw std::invalid_argument("weighted_sum of no vectors");
  const auto d = nodes_[vectors[0].id].size;
  std::vector<Tensor> inputs;
  inputs.reserve(count + 1);
  inputs.push_back(weights);
  for (const auto& v : vectors) {
    if (nodes_[v.id].size != d) shape_error("weighted_sum vector", nodes_[v.id].size, d);
    inputs.push_back(v);
  }
  const auto id = push(Op::kWeightedSum, d, inputs);
  const double* w = in_values(weights.id);
  double* y = out_values(id);
  std::fill_n(y, d, 0.0);
  for (std::size_t i = 0; i < count; ++i) {
    const double* v = in_values(vectors[i].id);
    for (std::size_t j = 0; j < d; ++j) y[j] += w[i] * v[j];
  }
  check_finite(id);
  return {this, id};
}

Tensor Tape::add(Tensor a, Tensor b) {
  const auto n = nodes_[a.id].size;
  if (nodes_[b.id].size != n) shape_error("add", n, nodes_[b.id].size);
  const auto id = push(Op::kAdd, n, {a, b});
  const double* av = in_values(a.id);
  const double* bv = in_values(b.id);
  double* y = out_values(id);
  for (std::size_t i = 0; i < n; ++i) y[i] = av[i] + bv[i];
  check_finite(id);
  return {this, id};
}

Tensor Tape::sub(Tensor a, Tensor b) {
  const auto n = nodes_[a.id].size;
  if (nodes_[b.id].size != n) shape_error("sub", n, nodes_[b.id].size);
  const auto id = push(Op::kSub, n, {a, b});
  const double* av = in_values(a.id);
  const double* bv = in_values(b.id);
  double* y = out_values(id);
  for (std::size_t i = 0; i < n; ++i) y[i] = av[i] - bv[i];
  check_finite(id);
  return {this, id};
}

Tensor Tape::mul(Tensor a, Tensor b) {
  const auto n = nodes_[a.id].size;
  if (nodes_[b.id].size != n) shape_error("mul", n, nodes_[b.id].size);
  const auto id = push(Op::kMul, n, {a, b});
  const double* av = in_values(a.id);
  const double* bv = in_values(b.id);
  double* y = out_values(id);
  for (std::size_t i = 0; i < n; ++i) y[i] = av[i] * bv[i];
  check_finite(id);
  return {this, id};
}

Tensor Tape::scale(Tensor a, double c) {
  const auto n = nodes_[a.id].size;
  const auto id = push(Op::kScale, n, {a});
  nodes_[id].scalar = c;
  const double* av = in_values(a.id);
  double* y = out_values(id);
  for (std::size_t i = 0; i < n; ++i) y[i] = c * av[i];
  check_finite(id);
  return {this, id};
}

Tensor Tape::add_scalar(Tensor a, double c) {
  const auto n = nodes_[a.id].size;
  const auto id = push(Op::kAddScalar, n, {a});
  nodes_[id].scalar = c;
  const double* av = in_values(a.id);
  double* y = out_values(id);
  for (std::size_t i = 0; i < n; ++i) y[i] = av[i] + c;
  check_finite(id);
  return {this, id};
}

Tensor Tape::sum(Tensor a) {
  const auto n = nodes_[a.id].size;
  const auto id = push(Op::kSum, 1, {a});
  const double* av = in_values(a.id);
  out_values(id)[0] = std::accumulate(av, av + n, 0.0);
  check_finite(id);
  return {this, id};
}

Tensor Tape::square(Tensor a) {
  const auto n = nodes_[a.id].size;
  const auto id = push(Op::kSquare, n, {a});
  const double* av = in_values(a.id);
  double* y = out_values(id);
  for (std::size_t i = 0; i < n; ++i) y[i] = av[i] * av[i];
  check_finite(id);
  return {this, id};
}

Tensor Tape::dot(Tensor a, Tensor b) {
  const auto n = nodes_[a.id].size;
  if (nodes_[b.id].size != n) shape_error("dot", n, nodes_[b.id].size);
  const auto id = push(Op::kDot, 1, {a, b});
  const double* av = in_values(a.id);
  const double* bv = in_values(b.id);
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += av[i] * bv[i];
  out_values(id)[0] = acc;
  check_finite(id);
  return {this, id};
}

void Tape::backward(Tensor loss, GradientSet& grads) {
  if (loss.tape != this) throw std::logic_error("loss belongs to a different tape");
  if (nodes_[loss.id].size != 1) throw std::invalid_argument("backward needs a scalar loss");
  grads_.assign(grad_size_, 0.0);
  grads_[nodes_[loss.id].grad_offset] = 1.0;

  for (std::uint32_t id = loss.id + 1; id-- > 0;) {
    const Node& n = nodes_[id];
    if (!n.requires_grad) continue;
    const double* g = grads_.data() + n.grad_offset;
    const std::uint32_t* in = inputs_of(n);
    auto grad_of = [&](std::uint32_t input) { return grads_.data() + nodes_[input].grad_offset; };
    auto wants = [&](std::uint32_t input) { return nodes_[input].requires_grad; };

    switch (n.op) {
      case Op::kConstant:
        break;
      case Op::kParam: {
        auto& dst = grads[n.param];
        for (std::size_t i = 0; i < n.size; ++i) dst[i] += g[i];
        grads.mark_all(n.param);
        break;
      }
      case Op::kRow: {
        auto& dst = grads[n.param];
        const std::size_t base = n.aux * n.size;
        for (std::size_t i = 0; i < n.size; ++i) dst[base + i] += g[i];
        grads.mark_row(n.param, n.aux);
        break;
      }
      case Op::kAffine: {
        const auto x = in[0], w = in[1], b = in[2];
        const std::size_t m = n.size;
        const std::size_t k = nodes_[x].size;
        const double* xv = in_values(x);
        const double* wv = in_values(w);
        if (wants(w)) {
          double* gw = grad_of(w);
          for (std::size_t i = 0; i < m; ++i) {
            if (g[i] == 0.0) continue;
            double* row = gw + i * k;
            for (std::size_t j = 0; j < k; ++j) row[j] += g[i] * xv[j];
          }
        }
        if (wants(x)) {
          double* gx = grad_of(x);
          for (std::size_t i = 0; i < m; ++i) {
            if (g[i] == 0.0) continue;
            const double* row = wv + i * k;
            for (std::size_t j = 0; j < k; ++j) gx[j] += row[j] * g[i];
          }
        }
        if (wants(b)) {
          double* gb = grad_of(b);
          for (std::size_t i = 0; i < m; ++i) gb[i] += g[i];
        }
        break;
      }
      case Op::kRelu: {
        if (!wants(in[0])) break;
        const double* xv = in_values(in[0]);
        double* gx = grad_of(in[0]);
        for (std::size_t i = 0; i < n.size; ++i)
          if (xv[i] > 0.0) gx[i] += g[i];
        break;
      }
      case Op::kSigmoid: {
        if (!wants(in[0])) break;
        const double* y = values_.data() + n.value_offset;
        double* gx = grad_of(in[0]);
        for (std::size_t i = 0; i < n.size; ++i) gx[i] += g[i] * y[i] * (1.0 - y[i]);
        break;
      }
      case Op::kConcat: {
        std::size_t offset = 0;
        for (std::uint32_t p = 0; p < n.input_count; ++p) {
          const auto part = in[p];
          const auto len = nodes_[part].size;
          if (wants(part)) {
            double* gp = grad_of(part);
            for (std::size_t i = 0; i < len; ++i) gp[i] += g[offset + i];
          }
          offset += len;
        }
        break;
      }
      case Op::kSoftmax: {
        if (!wants(in[0])) break;
        const double* s = values_.data() + n.value_offset;
        double inner = 0.0;
        for (std::size_t i = 0; i < n.size; ++i) inner += g[i] * s[i];
        double* gx = grad_of(in[0]);
        for (std::size_t i = 0; i < n.size; ++i) gx[i] += s[i] * (g[i] - inner);
        break;
      }
      case Op::kMaxBroadcast: {
        if (!wants(in[0])) break;
        double total = 0.0;
        for (std::size_t i = 0; i < n.size; ++i) total += g[i];
        grad_of(in[0])[n.aux] += total;
        break;
      }
      case Op::kWeightedSum: {
        const auto w = in[0];
        const double* wv = in_values(w);
        const std::size_t count = n.input_count - 1;
        double* gw = wants(w) ? grad_of(w) : nullptr;
        for (std::size_t i = 0; i < count; ++i) {
          const auto v = in[i + 1];
          const double* vv = in_values(v);
          if (gw) {
            double acc = 0.0;
            for (std::size_t j = 0; j < n.size; ++j) acc += g[j] * vv[j];
            gw[i] += acc;
          }
          if (wants(v)) {
            double* gv = grad_of(v);
            for (std::size_t j = 0; j < n.size; ++j) gv[j] += wv[i] * g[j];
          }
        }
        break;
      }
      case Op::kAdd:
      case Op::kSub: {
        const double sign = n.op == Op::kAdd ? 1.0 : -1.0;
        if (wants(in[0])) {
          double* ga = grad_of(in[0]);
          for (std::size_t i = 0; i < n.size; ++i) ga[i] += g[i];
        }
        if (wants(in[1])) {
          double* gb = grad_of(in[1]);
          for (std::size_t i = 0; i < n.size; ++i) gb[i] += sign * g[i];
        }
        break;
      }
      case Op::kMul: {
        const double* av = in_values(in[0]);
        const double* bv = in_values(in[1]);
        if (wants(in[0])) {
          double* ga = grad_of(in[0]);
          for (std::size_t i = 0; i < n.size; ++i) ga[i] += g[i] * bv[i];
        }
        if (wants(in[1])) {
          double* gb = grad_of(in[1]);
          for (std::size_t i = 0; i < n.size; ++i) gb[i] += g[i] * av[i];
        }
        break;
      }
      case Op::kScale: {
        if (!wants(in[0])) break;
        double* ga = grad_of(in[0]);
        for (std::size_t i = 0; i < n.size; ++i) ga[i] += n.scalar * g[i];
        break;
      }
      case Op::kAddScalar: {
        if (!wants(in[0])) break;
        double* ga = grad_of(in[0]);
        for (std::size_t i = 0; i < n.size; ++i) ga[i] += g[i];
        break;
      }
      case Op::kSum: {
        if (!wants(in[0])) break;
        double* ga = grad_of(in[0]);
        for (std::size_t i = 0; i < nodes_[in[0]].size; ++i) ga[i] += g[0];
        break;
      }
      case Op::kSquare: {
        if (!wants(in[0])) break;
        const double* av = in_values(in[0]);
        double* ga = grad_of(in[0]);
        for (std::size_t i = 0; i < n.size; ++i) ga[i] += 2.0 * av[i] * g[i];
        break;
      }
      case Op::kDot: {
        const auto len = nodes_[in[0]].size;
        const double* av = in_values(in[0]);
        const double* bv = in_values(in[1]);
        if (wants(in[0])) {
          double* ga = grad_of(in[0]);
          for (std::size_t i = 0; i < len; ++i) ga[i] += g[0] * bv[i];
        }
        if (wants(in[1])) {
          double* gb = grad_of(in[1]);
          for (std::size_t i = 0; i < len; ++i) gb[i] += g[0] * av[i];
        }
        break;
      }
    }
  }
}

void Tape::clear() {
  nodes_.clear();
  values_.clear();
  inputs_.clear();
  grads_.clear();
  grad_size_ = 0;
  param_nodes_.clear();
}

// ---------------------------------------------------------------------------
// Optimizers

Adam::Adam(const ParamStore& params, AdamOptions options) : options_(options) {
  m_.resize(params.size());
  v_.resize(params.size());
  for (ParamId i = 0; i < params.size(); ++i) {
    m_[i].assign(params[i].size(), 0.0);
    v_[i].assign(params[i].size(), 0.0);
  }
}

void Adam::step(ParamStore& params, const GradientSet& grads) {
  ++t_;
  const double b1 = options_.beta1;
  const double b2 = options_.beta2;
  const double correction1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double correction2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  const double step = options_.learning_rate * std::sqrt(correction2) / correction1;

  auto update = [&](ParamId id, std::size_t begin, std::size_t end) {
    auto& value = params[id].value;
    const auto& g = grads[id];
    auto& m = m_[id];
    auto& v = v_[id];
    for (std::size_t j = begin; j < end; ++j) {
      const double gj = g[j] + options_.weight_decay * value[j];
      m[j] = b1 * m[j] + (1.0 - b1) * gj;
      v[j] = b2 * v[j] + (1.0 - b2) * gj * gj;
      value[j] -= step * m[j] / (std::sqrt(v[j]) + options_.epsilon);
    }
  };

  for (ParamId id = 0; id < params.size(); ++id) {
    const auto& p = params[id];
    if (p.row_sparse && !grads.dense_touched(id)) {
      const auto w = p.row_width();
      for (auto r : grads.touched_rows(id)) update(id, r * w, (r + 1) * w);
    } else {
      update(id, 0, p.size());
    }
  }
}

void Sgd::step(ParamStore& params, const GradientSet& grads) {
  for (ParamId id = 0; id < params.size(); ++id) {
    auto& p = params[id];
    const auto& g = grads[id];
    auto apply = [&](std::size_t begin, std::size_t end) {
      for (std::size_t j = begin; j < end; ++j) p.value[j] -= lr_ * (g[j] + decay_ * p.value[j]);
    };
    if (p.row_sparse && !grads.dense_touched(id)) {
      const auto w = p.row_width();
      for (auto r : grads.touched_rows(id)) apply(r * w, (r + 1) * w);
    } else {
      apply(0, p.size());
    }
  }
}

// ---------------------------------------------------------------------------
// Gradient check

GradCheckResult grad_check(ParamStore& params, const ScalarFunction& f, double eps,
                           std::size_t max_coords_per_param, std::uint64_t seed, double floor) {
  GradientSet analytic(params);
  {
    Tape tape(&params);
    auto loss = f(tape);
    tape.backward(loss, analytic);
  }
  auto evaluate = [&]() {
    Tape tape(&params);
    const double value = f(tape).item();
    if (!std::isfinite(value)) throw DivergenceError("grad_check: non-finite function value");
    return value;
  };

  GradCheckResult result;
  std::mt19937_64 rng(seed);
  for (ParamId id = 0; id < params.size(); ++id) {
    auto& value = params[id].value;
    std::vector<std::size_t> coords(value.size());
    std::iota(coords.begin(), coords.end(), 0);
    if (coords.size() > max_coords_per_param) {
      for (std::size_t i = 0; i < max_coords_per_param; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng() % (coords.size() - i));
        std::swap(coords[i], coords[j]);
      }
      coords.resize(max_coords_per_param);
    }
    for (auto c : coords) {
      const double saved = value[c];
      value[c] = saved + eps;
      const double plus = evaluate();
      value[c] = saved - eps;
      const double minus = evaluate();
      value[c] = saved;
      const double numeric = (plus - minus) / (2.0 * eps);
      const double a = analytic[id][c];
      const double err = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), floor});
      ++result.coordinates;
      if (err > result.max_relative_error || result.coordinates == 1) {
        result.max_relative_error = err;
        result.worst_param = params[id].name;
        result.worst_index = c;
        result.worst_analytic = a;
        result.worst_numeric = numeric;
      }
    }
  }
  return result;
}

}  // namespace gdsrec::ad
