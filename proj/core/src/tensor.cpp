#include "shapeinst/tensor.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

namespace shapeinst {

std::string shape_to_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << ',';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t extent : shape) n *= extent;
  return n;
}

namespace {

using detail::BackwardPass;
using detail::TensorNode;

std::shared_ptr<TensorNode> make_node(Shape shape, std::vector<double> data, bool requires_grad) {
  auto node = std::make_shared<TensorNode>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  node->requires_grad = requires_grad;
  return node;
}

bool any_requires_grad(const std::vector<Tensor>& parents) {
  for (const Tensor& p : parents)
    if (p.requires_grad()) return true;
  return false;
}

}  // namespace

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  std::size_t n = shape_numel(shape);
  return Tensor(make_node(std::move(shape), std::vector<double>(n, 0.0), requires_grad));
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  std::size_t n = shape_numel(shape);
  return Tensor(make_node(std::move(shape), std::vector<double>(n, value), requires_grad));
}

Tensor Tensor::from_data(Shape shape, std::vector<double> values, bool requires_grad) {
  if (shape_numel(shape) != values.size())
    throw std::invalid_argument("Tensor::from_data: shape " + shape_to_string(shape) +
                                " does not hold " + std::to_string(values.size()) + " values");
  return Tensor(make_node(std::move(shape), std::move(values), requires_grad));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return Tensor(make_node(Shape{1}, std::vector<double>{value}, requires_grad));
}

const Shape& Tensor::shape() const {
  if (!node_) throw std::invalid_argument("Tensor: undefined");
  return node_->shape;
}

std::size_t Tensor::size() const { return shape_numel(shape()); }

std::size_t Tensor::rank() const { return shape().size(); }

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

std::span<const double> Tensor::data() const {
  if (!node_) throw std::invalid_argument("Tensor: undefined");
  return node_->data;
}

std::span<double> Tensor::mutable_data() {
  if (!node_) throw std::invalid_argument("Tensor: undefined");
  return node_->data;
}

bool Tensor::has_grad() const { return node_ && !node_->grad.empty(); }

std::span<const double> Tensor::grad() const {
  if (!node_) throw std::invalid_argument("Tensor: undefined");
  if (node_->grad.empty())
    throw std::invalid_argument("Tensor::grad: no gradient present (run backward first)");
  return node_->grad;
}

void Tensor::zero_grad() {
  if (!node_) return;
  std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

double Tensor::value() const {
  if (!node_) throw std::invalid_argument("Tensor: undefined");
  if (node_->data.size() != 1)
    throw std::invalid_argument("Tensor::value: not a scalar, shape is " +
                                shape_to_string(node_->shape));
  return node_->data[0];
}

namespace {

/// Gradient buffers for one reverse sweep, keyed by node. Leaves flush into
/// the persistent accumulator afterwards; intermediates are discarded.
class Pass final : public BackwardPass {
 public:
  double* grad_for(const std::shared_ptr<TensorNode>& parent) override {
    if (!parent || !parent->requires_grad) return nullptr;
    auto [it, inserted] = grads_.try_emplace(parent.get());
    if (inserted) it->second.assign(parent->data.size(), 0.0);
    return it->second.data();
  }

  const std::vector<double>* find(TensorNode* node) const {
    auto it = grads_.find(node);
    return it == grads_.end() ? nullptr : &it->second;
  }

  std::vector<double>& seed(TensorNode* node) {
    auto [it, inserted] = grads_.try_emplace(node);
    if (inserted) it->second.assign(node->data.size(), 0.0);
    return it->second;
  }

 private:
  std::unordered_map<TensorNode*, std::vector<double>> grads_;
};

std::vector<TensorNode*> topological_order(TensorNode* root) {
  std::vector<TensorNode*> order;
  std::unordered_set<TensorNode*> visited;
  // Iterative post-order DFS.
  std::vector<std::pair<TensorNode*, std::size_t>> stack;
  stack.emplace_back(root, 0);
  visited.insert(root);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      TensorNode* parent = node->parents[next++].get();
      if (parent && visited.insert(parent).second) stack.emplace_back(parent, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  return order;  // parents before children; reverse for backprop
}

}  // namespace

void Tensor::backward() {
  if (!node_) throw std::invalid_argument("backward: undefined tensor");
  if (node_->data.size() != 1)
    throw std::invalid_argument("backward: loss must be a scalar, got shape " +
                                shape_to_string(node_->shape));
  if (!node_->requires_grad) return;  // nothing reachable

  std::vector<TensorNode*> order = topological_order(node_.get());
  Pass pass;
  pass.seed(node_.get())[0] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    TensorNode* node = *it;
    const std::vector<double>* g = pass.find(node);
    if (!g) continue;
    if (node->backprop) {
      node->backprop(g->data(), pass);
    } else if (node->requires_grad) {
      if (node->grad.empty()) node->grad.assign(node->data.size(), 0.0);
      for (std::size_t i = 0; i < node->grad.size(); ++i) node->grad[i] += (*g)[i];
    }
  }
}

Tensor make_op(Shape shape, std::vector<double> data, std::vector<Tensor> parents,
               detail::BackpropFn backprop) {
  if (shape_numel(shape) != data.size())
    throw std::invalid_argument("make_op: shape/data mismatch");
  auto node = make_node(std::move(shape), std::move(data), any_requires_grad(parents));
  if (node->requires_grad) {
    node->parents.reserve(parents.size());
    for (const Tensor& p : parents) node->parents.push_back(p.node());
    node->backprop = std::move(backprop);
  }
  return Tensor(node);
}

// --- conv2d ------------------------------------------------------------

Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias, int stride) {
  if (input.rank() != 4)
    throw std::invalid_argument("conv2d: input must be rank 4 [N,H,W,Cin], got " +
                                shape_to_string(input.shape()));
  if (kernel.rank() != 4)
    throw std::invalid_argument("conv2d: kernel must be rank 4 [Cin,K,K,Cout], got " +
                                shape_to_string(kernel.shape()));
  if (stride < 1) throw std::invalid_argument("conv2d: stride must be >= 1, got " +
                                              std::to_string(stride));
  const std::size_t n = input.shape()[0], h = input.shape()[1], w = input.shape()[2],
                    cin = input.shape()[3];
  const std::size_t kcin = kernel.shape()[0], k = kernel.shape()[1], k2 = kernel.shape()[2],
                    cout = kernel.shape()[3];
  if (k != k2)
    throw std::invalid_argument("conv2d: kernel window must be square, got " +
                                shape_to_string(kernel.shape()));
  if (kcin != cin)
    throw std::invalid_argument("conv2d: input channels do not match kernel: input " +
                                shape_to_string(input.shape()) + " vs kernel " +
                                shape_to_string(kernel.shape()));
  if (bias.rank() != 1 || bias.shape()[0] != cout)
    throw std::invalid_argument("conv2d: bias shape " + shape_to_string(bias.shape()) +
                                " does not match kernel output channels " +
                                shape_to_string(kernel.shape()));
  const std::size_t pad = k / 2;
  if (k > h + 2 * pad || k > w + 2 * pad)
    throw std::invalid_argument("conv2d: kernel " + shape_to_string(kernel.shape()) +
                                " exceeds padded input " + shape_to_string(input.shape()));
  const std::size_t s = static_cast<std::size_t>(stride);
  const std::size_t ho = h / s, wo = w / s;
  if (ho == 0 || wo == 0)
    throw std::invalid_argument("conv2d: output would be empty for input " +
                                shape_to_string(input.shape()) + " at stride " +
                                std::to_string(stride));

  const double* in = input.data().data();
  const double* ker = kernel.data().data();
  const double* b = bias.data().data();
  std::vector<double> out(n * ho * wo * cout);

  const long ih_lo = -static_cast<long>(pad);
  for (std::size_t ni = 0; ni < n; ++ni) {
    const double* in_n = in + ni * h * w * cin;
    double* out_n = out.data() + ni * ho * wo * cout;
    for (std::size_t oh = 0; oh < ho; ++oh) {
      for (std::size_t ow = 0; ow < wo; ++ow) {
        double* acc = out_n + (oh * wo + ow) * cout;
        for (std::size_t co = 0; co < cout; ++co) acc[co] = b[co];
        for (std::size_t kr = 0; kr < k; ++kr) {
          const long ih = static_cast<long>(oh * s) + ih_lo + static_cast<long>(kr);
          if (ih < 0 || ih >= static_cast<long>(h)) continue;
          for (std::size_t kc = 0; kc < k; ++kc) {
            const long iw = static_cast<long>(ow * s) + ih_lo + static_cast<long>(kc);
            if (iw < 0 || iw >= static_cast<long>(w)) continue;
            const double* ip = in_n + (static_cast<std::size_t>(ih) * w +
                                       static_cast<std::size_t>(iw)) * cin;
            for (std::size_t ci = 0; ci < cin; ++ci) {
              const double v = ip[ci];
              const double* kp = ker + ((ci * k + kr) * k + kc) * cout;
              for (std::size_t co = 0; co < cout; ++co) acc[co] += v * kp[co];
            }
          }
        }
      }
    }
  }

  auto in_node = input.node();
  auto ker_node = kernel.node();
  auto bias_node = bias.node();
  return make_op(
      Shape{n, ho, wo, cout}, std::move(out), {input, kernel, bias},
      [in_node, ker_node, bias_node, n, h, w, cin, k, cout, s, pad, ho, wo](
          const double* g, BackwardPass& pass) {
        double* gin = pass.grad_for(in_node);
        double* gker = pass.grad_for(ker_node);
        double* gbias = pass.grad_for(bias_node);
        const double* in = in_node->data.data();
        const double* ker = ker_node->data.data();
        const long lo = -static_cast<long>(pad);
        for (std::size_t ni = 0; ni < n; ++ni) {
          const double* in_n = in + ni * h * w * cin;
          double* gin_n = gin ? gin + ni * h * w * cin : nullptr;
          const double* g_n = g + ni * ho * wo * cout;
          for (std::size_t oh = 0; oh < ho; ++oh) {
            for (std::size_t ow = 0; ow < wo; ++ow) {
              const double* go = g_n + (oh * wo + ow) * cout;
              if (gbias)
                for (std::size_t co = 0; co < cout; ++co) gbias[co] += go[co];
              for (std::size_t kr = 0; kr < k; ++kr) {
                const long ih = static_cast<long>(oh * s) + lo + static_cast<long>(kr);
                if (ih < 0 || ih >= static_cast<long>(h)) continue;
                for (std::size_t kc = 0; kc < k; ++kc) {
                  const long iw = static_cast<long>(ow * s) + lo + static_cast<long>(kc);
                  if (iw < 0 || iw >= static_cast<long>(w)) continue;
                  const std::size_t off = (static_cast<std::size_t>(ih) * w +
                                           static_cast<std::size_t>(iw)) * cin;
                  const double* ip = in_n + off;
                  if (gker) {
                    for (std::size_t ci = 0; ci < cin; ++ci) {
                      const double v = ip[ci];
                      double* kp = gker + ((ci * k + kr) * k + kc) * cout;
                      for (std::size_t co = 0; co < cout; ++co) kp[co] += v * go[co];
                    }
                  }
                  if (gin_n) {
                    for (std::size_t ci = 0; ci < cin; ++ci) {
                      const double* kp = ker + ((ci * k + kr) * k + kc) * cout;
                      double acc = 0.0;
                      for (std::size_t co = 0; co < cout; ++co) acc += kp[co] * go[co];
                      gin_n[off + ci] += acc;
                    }
                  }
                }
              }
            }
          }
        }
      });
}

// --- dense -------------------------------------------------------------

Tensor dense(const Tensor& input, const Tensor& weight, const Tensor& bias) {
  if (input.rank() != 2)
    throw std::invalid_argument("dense: input must be rank 2 [N,Din], got " +
                                shape_to_string(input.shape()));
  if (weight.rank() != 2)
    throw std::invalid_argument("dense: weight must be rank 2 [Din,Dout], got " +
                                shape_to_string(weight.shape()));
  const std::size_t n = input.shape()[0], din = input.shape()[1];
  const std::size_t wdin = weight.shape()[0], dout = weight.shape()[1];
  if (din != wdin)
    throw std::invalid_argument("dense: input width does not match weight: input " +
                                shape_to_string(input.shape()) + " vs weight " +
                                shape_to_string(weight.shape()));
  if (bias.rank() != 1 || bias.shape()[0] != dout)
    throw std::invalid_argument("dense: bias shape " + shape_to_string(bias.shape()) +
                                " does not match weight " + shape_to_string(weight.shape()));

  const double* in = input.data().data();
  const double* wt = weight.data().data();
  const double* b = bias.data().data();
  std::vector<double> out(n * dout);
  for (std::size_t ni = 0; ni < n; ++ni) {
    double* o = out.data() + ni * dout;
    for (std::size_t j = 0; j < dout; ++j) o[j] = b[j];
    const double* row = in + ni * din;
    for (std::size_t i = 0; i < din; ++i) {
      const double v = row[i];
      const double* wrow = wt + i * dout;
      for (std::size_t j = 0; j < dout; ++j) o[j] += v * wrow[j];
    }
  }

  auto in_node = input.node();
  auto w_node = weight.node();
  auto b_node = bias.node();
  return make_op(Shape{n, dout}, std::move(out), {input, weight, bias},
                 [in_node, w_node, b_node, n, din, dout](const double* g, BackwardPass& pass) {
                   double* gin = pass.grad_for(in_node);
                   double* gw = pass.grad_for(w_node);
                   double* gb = pass.grad_for(b_node);
                   const double* in = in_node->data.data();
                   const double* wt = w_node->data.data();
                   for (std::size_t ni = 0; ni < n; ++ni) {
                     const double* go = g + ni * dout;
                     if (gb)
                       for (std::size_t j = 0; j < dout; ++j) gb[j] += go[j];
                     const double* row = in + ni * din;
                     for (std::size_t i = 0; i < din; ++i) {
                       if (gw) {
                         const double v = row[i];
                         double* gwrow = gw + i * dout;
                         for (std::size_t j = 0; j < dout; ++j) gwrow[j] += v * go[j];
                       }
                       if (gin) {
                         const double* wrow = wt + i * dout;
                         double acc = 0.0;
                         for (std::size_t j = 0; j < dout; ++j) acc += wrow[j] * go[j];
                         gin[ni * din + i] += acc;
                       }
                     }
                   }
                 });
}

// --- elementwise ---------------------------------------------------------

Tensor relu(const Tensor& input) {
  std::vector<double> out(input.data().begin(), input.data().end());
  for (double& x : out)
    if (x < 0.0) x = 0.0;
  auto in_node = input.node();
  return make_op(input.shape(), std::move(out), {input},
                 [in_node](const double* g, BackwardPass& pass) {
                   double* gin = pass.grad_for(in_node);
                   if (!gin) return;
                   const std::vector<double>& x = in_node->data;
                   for (std::size_t i = 0; i < x.size(); ++i)
                     if (x[i] > 0.0) gin[i] += g[i];
                 });
}

Tensor l2_penalty(std::span<const Tensor> params, double weight) {
  if (weight < 0.0)
    throw std::invalid_argument("l2_penalty: weight must be nonnegative, got " +
                                std::to_string(weight));
  double acc = 0.0;
  for (const Tensor& p : params)
    for (double x : p.data()) acc += x * x;

  std::vector<Tensor> parents(params.begin(), params.end());
  std::vector<std::shared_ptr<detail::TensorNode>> nodes;
  nodes.reserve(parents.size());
  for (const Tensor& p : parents) nodes.push_back(p.node());
  return make_op(Shape{1}, {weight * acc}, std::move(parents),
                 [nodes, weight](const double* g, BackwardPass& pass) {
                   const double f = 2.0 * weight * g[0];
                   for (const auto& node : nodes) {
                     double* gp = pass.grad_for(node);
                     if (!gp) continue;
                     const std::vector<double>& x = node->data;
                     for (std::size_t i = 0; i < x.size(); ++i) gp[i] += f * x[i];
                   }
                 });
}

Tensor reshape(const Tensor& input, Shape shape) {
  if (shape_numel(shape) != input.size())
    throw std::invalid_argument("reshape: cannot view " + shape_to_string(input.shape()) +
                                " as " + shape_to_string(shape));
  std::vector<double> out(input.data().begin(), input.data().end());
  auto in_node = input.node();
  return make_op(std::move(shape), std::move(out), {input},
                 [in_node](const double* g, BackwardPass& pass) {
                   double* gin = pass.grad_for(in_node);
                   if (!gin) return;
                   for (std::size_t i = 0; i < in_node->data.size(); ++i) gin[i] += g[i];
                 });
}

Tensor sum(const Tensor& input) {
  double acc = 0.0;
  for (double x : input.data()) acc += x;
  auto in_node = input.node();
  return make_op(Shape{1}, {acc}, {input}, [in_node](const double* g, BackwardPass& pass) {
    double* gin = pass.grad_for(in_node);
    if (!gin) return;
    for (std::size_t i = 0; i < in_node->data.size(); ++i) gin[i] += g[0];
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape())
    throw std::invalid_argument("add: shape mismatch " + shape_to_string(a.shape()) + " vs " +
                                shape_to_string(b.shape()));
  std::vector<double> out(a.size());
  const auto da = a.data(), db = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = da[i] + db[i];
  auto a_node = a.node();
  auto b_node = b.node();
  return make_op(a.shape(), std::move(out), {a, b},
                 [a_node, b_node](const double* g, BackwardPass& pass) {
                   for (const auto& node : {a_node, b_node}) {
                     double* gp = pass.grad_for(node);
                     if (!gp) continue;
                     for (std::size_t i = 0; i < node->data.size(); ++i) gp[i] += g[i];
                   }
                 });
}

Tensor scale(const Tensor& a, double factor) {
  std::vector<double> out(a.size());
  const auto da = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = factor * da[i];
  auto a_node = a.node();
  return make_op(a.shape(), std::move(out), {a},
                 [a_node, factor](const double* g, BackwardPass& pass) {
                   double* gp = pass.grad_for(a_node);
                   if (!gp) return;
                   for (std::size_t i = 0; i < a_node->data.size(); ++i) gp[i] += factor * g[i];
                 });
}

}  // namespace shapeinst
