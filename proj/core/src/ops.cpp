#include "ifthen/ops.hpp"

#include <algorithm>
#include <cmath>

#include "ifthen/common.hpp"

namespace ifthen {

namespace {

using detail::Node;

// C (M,N) += A (M,K) * B (K,N)
void gemm_nn(std::size_t M, std::size_t N, std::size_t K, const double* A, const double* B,
             double* C) {
  for (std::size_t i = 0; i < M; ++i) {
    const double* a = A + i * K;
    double* c = C + i * N;
    for (std::size_t k = 0; k < K; ++k) {
      const double av = a[k];
      const double* b = B + k * N;
      for (std::size_t j = 0; j < N; ++j) c[j] += av * b[j];
    }
  }
}

// C (M,N) += A (M,K) * B^T where B is (N,K)
void gemm_nt(std::size_t M, std::size_t N, std::size_t K, const double* A, const double* B,
             double* C) {
  for (std::size_t i = 0; i < M; ++i) {
    const double* a = A + i * K;
    double* c = C + i * N;
    for (std::size_t j = 0; j < N; ++j) {
      const double* b = B + j * K;
      double dot = 0.0;
      for (std::size_t k = 0; k < K; ++k) dot += a[k] * b[k];
      c[j] += dot;
    }
  }
}

// C (M,N) += A^T * B where A is (K,M), B is (K,N)
void gemm_tn(std::size_t M, std::size_t N, std::size_t K, const double* A, const double* B,
             double* C) {
  for (std::size_t k = 0; k < K; ++k) {
    const double* a = A + k * M;
    const double* b = B + k * N;
    for (std::size_t i = 0; i < M; ++i) {
      const double av = a[i];
      if (av == 0.0) continue;
      double* c = C + i * N;
      for (std::size_t j = 0; j < N; ++j) c[j] += av * b[j];
    }
  }
}

bool any_requires_grad(const std::vector<Tensor>& parents) {
  for (const Tensor& p : parents) {
    if (p.requires_grad()) return true;
  }
  return false;
}

// Builds the result node; parents and the backward closure are kept only when
// a gradient can flow.
Tensor make_op(Shape shape, std::vector<double> value, std::vector<Tensor> parents,
               std::function<void(Node&)> backward_fn) {
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  if (any_requires_grad(parents)) {
    node->requires_grad = true;
    node->parents.reserve(parents.size());
    for (Tensor& p : parents) node->parents.push_back(p.node());
    node->backward_fn = std::move(backward_fn);
  }
  return Tensor::wrap(std::move(node));
}

void check_defined(const Tensor& t, const char* op) {
  if (!t.defined()) throw ValidationError(std::string(op) + ": undefined tensor operand");
}

// b broadcasts over a when b.shape is a trailing suffix of a.shape.
bool trailing_suffix(const Shape& a, const Shape& b) {
  if (b.size() > a.size()) return false;
  for (std::size_t i = 0; i < b.size(); ++i) {
    if (a[a.size() - b.size() + i] != b[i]) return false;
  }
  return true;
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  check_defined(a, "matmul");
  check_defined(b, "matmul");
  if (a.rank() < 1 || b.rank() != 2) {
    throw ShapeError("matmul: unsupported ranks for shapes " + shape_str(a.shape()) + " and " +
                     shape_str(b.shape()));
  }
  const std::size_t k = a.shape().back();
  if (k != b.dim(0)) {
    throw ShapeError("matmul: inner dims disagree for shapes " + shape_str(a.shape()) + " and " +
                     shape_str(b.shape()));
  }
  const std::size_t n = b.dim(1);
  const std::size_t m = a.size() / k;

  Shape out_shape(a.shape().begin(), a.shape().end() - 1);
  out_shape.push_back(n);
  std::vector<double> out(m * n, 0.0);
  gemm_nn(m, n, k, a.value().data(), b.value().data(), out.data());

  return make_op(std::move(out_shape), std::move(out), {a, b}, [m, n, k](Node& node) {
    const double* g = node.grad.data();
    Node& pa = *node.parents[0];
    Node& pb = *node.parents[1];
    if (pa.requires_grad) {
      gemm_nt(m, k, n, g, pb.value.data(), pa.grad_buffer().data());
    }
    if (pb.requires_grad) {
      gemm_tn(k, n, m, pa.value.data(), g, pb.grad_buffer().data());
    }
  });
}

Tensor bmm(const Tensor& a, const Tensor& b, bool trans_b) {
  check_defined(a, "bmm");
  check_defined(b, "bmm");
  if (a.rank() < 3 || a.rank() != b.rank()) {
    throw ShapeError("bmm: expected equal ranks >= 3, got shapes " + shape_str(a.shape()) +
                     " and " + shape_str(b.shape()));
  }
  const std::size_t r = a.rank();
  std::size_t batch = 1;
  for (std::size_t i = 0; i + 2 < r; ++i) {
    if (a.shape()[i] != b.shape()[i]) {
      throw ShapeError("bmm: leading dims disagree for shapes " + shape_str(a.shape()) + " and " +
                       shape_str(b.shape()));
    }
    batch *= a.shape()[i];
  }
  const std::size_t m = a.shape()[r - 2];
  const std::size_t k = a.shape()[r - 1];
  const std::size_t kb = trans_b ? b.shape()[r - 1] : b.shape()[r - 2];
  const std::size_t n = trans_b ? b.shape()[r - 2] : b.shape()[r - 1];
  if (k != kb) {
    throw ShapeError("bmm: inner dims disagree for shapes " + shape_str(a.shape()) + " and " +
                     shape_str(b.shape()));
  }

  Shape out_shape(a.shape().begin(), a.shape().end() - 2);
  out_shape.push_back(m);
  out_shape.push_back(n);
  std::vector<double> out(batch * m * n, 0.0);
  for (std::size_t s = 0; s < batch; ++s) {
    const double* pa = a.value().data() + s * m * k;
    const double* pb = b.value().data() + s * n * k;  // same element count either way
    double* pc = out.data() + s * m * n;
    if (trans_b) {
      gemm_nt(m, n, k, pa, pb, pc);
    } else {
      gemm_nn(m, n, k, pa, pb, pc);
    }
  }

  return make_op(std::move(out_shape), std::move(out), {a, b},
                 [batch, m, n, k, trans_b](Node& node) {
                   Node& pa = *node.parents[0];
                   Node& pb = *node.parents[1];
                   for (std::size_t s = 0; s < batch; ++s) {
                     const double* g = node.grad.data() + s * m * n;
                     const double* av = pa.value.data() + s * m * k;
                     const double* bv = pb.value.data() + s * n * k;
                     if (pa.requires_grad) {
                       double* ga = pa.grad_buffer().data() + s * m * k;
                       if (trans_b) {
                         gemm_nn(m, k, n, g, bv, ga);  // dA = G * B
                       } else {
                         gemm_nt(m, k, n, g, bv, ga);  // dA = G * B^T
                       }
                     }
                     if (pb.requires_grad) {
                       double* gb = pb.grad_buffer().data() + s * n * k;
                       if (trans_b) {
                         gemm_tn(n, k, m, g, av, gb);  // dB = G^T * A
                       } else {
                         gemm_tn(k, n, m, av, g, gb);  // dB = A^T * G
                       }
                     }
                   }
                 });
}

namespace {

enum class EwKind { add, multiply };

Tensor elementwise(const Tensor& a, const Tensor& b, EwKind kind) {
  const char* name = kind == EwKind::add ? "add" : "multiply";
  check_defined(a, name);
  check_defined(b, name);
  if (!trailing_suffix(a.shape(), b.shape())) {
    throw ShapeError(std::string(name) + ": shape " + shape_str(b.shape()) +
                     " does not broadcast over " + shape_str(a.shape()));
  }
  const std::size_t bn = b.size();
  const std::size_t lead = a.size() / bn;
  std::vector<double> out(a.size());
  const double* av = a.value().data();
  const double* bv = b.value().data();
  if (kind == EwKind::add) {
    for (std::size_t l = 0; l < lead; ++l) {
      for (std::size_t j = 0; j < bn; ++j) out[l * bn + j] = av[l * bn + j] + bv[j];
    }
  } else {
    for (std::size_t l = 0; l < lead; ++l) {
      for (std::size_t j = 0; j < bn; ++j) out[l * bn + j] = av[l * bn + j] * bv[j];
    }
  }
  return make_op(a.shape(), std::move(out), {a, b}, [lead, bn, kind](Node& node) {
    Node& pa = *node.parents[0];
    Node& pb = *node.parents[1];
    const double* g = node.grad.data();
    if (kind == EwKind::add) {
      if (pa.requires_grad) {
        double* ga = pa.grad_buffer().data();
        for (std::size_t i = 0; i < lead * bn; ++i) ga[i] += g[i];
      }
      if (pb.requires_grad) {
        double* gb = pb.grad_buffer().data();
        for (std::size_t l = 0; l < lead; ++l) {
          for (std::size_t j = 0; j < bn; ++j) gb[j] += g[l * bn + j];
        }
      }
    } else {
      if (pa.requires_grad) {
        double* ga = pa.grad_buffer().data();
        const double* bv = pb.value.data();
        for (std::size_t l = 0; l < lead; ++l) {
          for (std::size_t j = 0; j < bn; ++j) ga[l * bn + j] += g[l * bn + j] * bv[j];
        }
      }
      if (pb.requires_grad) {
        double* gb = pb.grad_buffer().data();
        const double* av = pa.value.data();
        for (std::size_t l = 0; l < lead; ++l) {
          for (std::size_t j = 0; j < bn; ++j) gb[j] += g[l * bn + j] * av[l * bn + j];
        }
      }
    }
  });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) { return elementwise(a, b, EwKind::add); }

Tensor multiply(const Tensor& a, const Tensor& b) { return elementwise(a, b, EwKind::multiply); }

Tensor scale(const Tensor& a, double factor) {
  check_defined(a, "scale");
  std::vector<double> out(a.size());
  const double* av = a.value().data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * factor;
  return make_op(a.shape(), std::move(out), {a}, [factor](Node& node) {
    Node& p = *node.parents[0];
    if (!p.requires_grad) return;
    double* gp = p.grad_buffer().data();
    const double* g = node.grad.data();
    for (std::size_t i = 0; i < node.value.size(); ++i) gp[i] += g[i] * factor;
  });
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  if (parts.empty()) throw ValidationError("concat: no tensors given");
  for (const Tensor& p : parts) check_defined(p, "concat");
  const Shape& base = parts[0].shape();
  if (axis >= base.size()) {
    throw ShapeError("concat: axis " + std::to_string(axis) + " out of range for shape " +
                     shape_str(base));
  }
  std::size_t axis_total = 0;
  for (const Tensor& p : parts) {
    if (p.rank() != base.size()) {
      throw ShapeError("concat: rank mismatch between shapes " + shape_str(base) + " and " +
                       shape_str(p.shape()));
    }
    for (std::size_t i = 0; i < base.size(); ++i) {
      if (i != axis && p.shape()[i] != base[i]) {
        throw ShapeError("concat: shapes " + shape_str(base) + " and " + shape_str(p.shape()) +
                         " disagree off the concat axis");
      }
    }
    axis_total += p.shape()[axis];
  }

  Shape out_shape = base;
  out_shape[axis] = axis_total;
  std::size_t outer = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= base[i];
  std::size_t inner = 1;
  for (std::size_t i = axis + 1; i < base.size(); ++i) inner *= base[i];

  std::vector<double> out(shape_size(out_shape));
  std::vector<std::size_t> chunks;  // per-part axis_dim * inner
  chunks.reserve(parts.size());
  const std::size_t out_chunk = axis_total * inner;
  std::size_t offset = 0;
  for (const Tensor& p : parts) {
    const std::size_t chunk = p.shape()[axis] * inner;
    chunks.push_back(chunk);
    const double* pv = p.value().data();
    for (std::size_t o = 0; o < outer; ++o) {
      std::copy(pv + o * chunk, pv + (o + 1) * chunk, out.data() + o * out_chunk + offset);
    }
    offset += chunk;
  }

  std::vector<Tensor> parents = parts;
  return make_op(std::move(out_shape), std::move(out), std::move(parents),
                 [outer, out_chunk, chunks](Node& node) {
                   std::size_t offset = 0;
                   for (std::size_t pi = 0; pi < node.parents.size(); ++pi) {
                     Node& p = *node.parents[pi];
                     const std::size_t chunk = chunks[pi];
                     if (p.requires_grad) {
                       double* gp = p.grad_buffer().data();
                       const double* g = node.grad.data();
                       for (std::size_t o = 0; o < outer; ++o) {
                         const double* src = g + o * out_chunk + offset;
                         double* dst = gp + o * chunk;
                         for (std::size_t i = 0; i < chunk; ++i) dst[i] += src[i];
                       }
                     }
                     offset += chunk;
                   }
                 });
}

Tensor slice(const Tensor& a, std::size_t axis, std::size_t start, std::size_t stop) {
  check_defined(a, "slice");
  if (axis >= a.rank()) {
    throw ShapeError("slice: axis " + std::to_string(axis) + " out of range for shape " +
                     shape_str(a.shape()));
  }
  if (start >= stop || stop > a.dim(axis)) {
    throw ShapeError("slice: range [" + std::to_string(start) + ", " + std::to_string(stop) +
                     ") invalid for axis size " + std::to_string(a.dim(axis)));
  }
  std::size_t outer = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= a.shape()[i];
  std::size_t inner = 1;
  for (std::size_t i = axis + 1; i < a.rank(); ++i) inner *= a.shape()[i];

  Shape out_shape = a.shape();
  out_shape[axis] = stop - start;
  const std::size_t in_chunk = a.dim(axis) * inner;
  const std::size_t out_chunk = (stop - start) * inner;
  std::vector<double> out(outer * out_chunk);
  const double* av = a.value().data();
  for (std::size_t o = 0; o < outer; ++o) {
    std::copy(av + o * in_chunk + start * inner, av + o * in_chunk + stop * inner,
              out.data() + o * out_chunk);
  }
  return make_op(std::move(out_shape), std::move(out), {a},
                 [outer, inner, in_chunk, out_chunk, start](Node& node) {
                   Node& p = *node.parents[0];
                   if (!p.requires_grad) return;
                   double* gp = p.grad_buffer().data();
                   const double* g = node.grad.data();
                   for (std::size_t o = 0; o < outer; ++o) {
                     double* dst = gp + o * in_chunk + start * inner;
                     const double* src = g + o * out_chunk;
                     for (std::size_t i = 0; i < out_chunk; ++i) dst[i] += src[i];
                   }
                 });
}

namespace {

std::vector<std::size_t> row_major_strides(const Shape& shape) {
  std::vector<std::size_t> strides(shape.size(), 1);
  for (std::size_t i = shape.size(); i-- > 1;) {
    strides[i - 1] = strides[i] * shape[i];
  }
  return strides;
}

}  // namespace

Tensor transpose(const Tensor& a, std::size_t axis_a, std::size_t axis_b) {
  check_defined(a, "transpose");
  if (axis_a >= a.rank() || axis_b >= a.rank()) {
    throw ShapeError("transpose: axes (" + std::to_string(axis_a) + ", " + std::to_string(axis_b) +
                     ") out of range for shape " + shape_str(a.shape()));
  }
  Shape out_shape = a.shape();
  std::swap(out_shape[axis_a], out_shape[axis_b]);

  const auto in_strides = row_major_strides(a.shape());
  auto perm_strides = in_strides;
  std::swap(perm_strides[axis_a], perm_strides[axis_b]);

  const std::size_t total = a.size();
  std::vector<double> out(total);
  const double* av = a.value().data();
  // Walk the output in order, mapping each multi-index back through the
  // permuted strides.
  std::vector<std::size_t> idx(out_shape.size(), 0);
  for (std::size_t o = 0; o < total; ++o) {
    std::size_t src = 0;
    for (std::size_t d = 0; d < idx.size(); ++d) src += idx[d] * perm_strides[d];
    out[o] = av[src];
    for (std::size_t d = idx.size(); d-- > 0;) {
      if (++idx[d] < out_shape[d]) break;
      idx[d] = 0;
    }
  }
  return make_op(std::move(out_shape), std::move(out), {a},
                 [perm_strides](Node& node) {
                   Node& p = *node.parents[0];
                   if (!p.requires_grad) return;
                   double* gp = p.grad_buffer().data();
                   const double* g = node.grad.data();
                   std::vector<std::size_t> idx(node.shape.size(), 0);
                   for (std::size_t o = 0; o < node.value.size(); ++o) {
                     std::size_t src = 0;
                     for (std::size_t d = 0; d < idx.size(); ++d) src += idx[d] * perm_strides[d];
                     gp[src] += g[o];
                     for (std::size_t d = idx.size(); d-- > 0;) {
                       if (++idx[d] < node.shape[d]) break;
                       idx[d] = 0;
                     }
                   }
                 });
}

Tensor reshape(const Tensor& a, Shape shape) {
  check_defined(a, "reshape");
  if (shape_size(shape) != a.size()) {
    throw ShapeError("reshape: cannot view shape " + shape_str(a.shape()) + " as " +
                     shape_str(shape));
  }
  std::vector<double> out(a.value().begin(), a.value().end());
  return make_op(std::move(shape), std::move(out), {a}, [](Node& node) {
    Node& p = *node.parents[0];
    if (!p.requires_grad) return;
    double* gp = p.grad_buffer().data();
    const double* g = node.grad.data();
    for (std::size_t i = 0; i < node.value.size(); ++i) gp[i] += g[i];
  });
}

Tensor embedding_lookup(const Tensor& table, std::span<const int> ids, Shape out_prefix) {
  check_defined(table, "embedding_lookup");
  if (table.rank() != 2) {
    throw ShapeError("embedding_lookup: table must be rank 2, got " + shape_str(table.shape()));
  }
  if (ids.size() != shape_size(out_prefix)) {
    throw ShapeError("embedding_lookup: " + std::to_string(ids.size()) +
                     " ids do not fill prefix " + shape_str(out_prefix));
  }
  const std::size_t vocab = table.dim(0);
  const std::size_t dim = table.dim(1);
  for (int id : ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= vocab) {
      throw ValidationError("embedding_lookup: id " + std::to_string(id) +
                            " outside vocabulary of size " + std::to_string(vocab));
    }
  }
  Shape out_shape = out_prefix;
  out_shape.push_back(dim);
  std::vector<double> out(ids.size() * dim);
  const double* tv = table.value().data();
  for (std::size_t i = 0; i < ids.size(); ++i) {
    std::copy(tv + static_cast<std::size_t>(ids[i]) * dim,
              tv + (static_cast<std::size_t>(ids[i]) + 1) * dim, out.data() + i * dim);
  }
  std::vector<int> ids_copy(ids.begin(), ids.end());
  return make_op(std::move(out_shape), std::move(out), {table},
                 [ids_copy = std::move(ids_copy), dim](Node& node) {
                   Node& p = *node.parents[0];
                   if (!p.requires_grad) return;
                   double* gp = p.grad_buffer().data();
                   const double* g = node.grad.data();
                   for (std::size_t i = 0; i < ids_copy.size(); ++i) {
                     double* row = gp + static_cast<std::size_t>(ids_copy[i]) * dim;
                     const double* src = g + i * dim;
                     for (std::size_t d = 0; d < dim; ++d) row[d] += src[d];
                   }
                 });
}

namespace {

struct AxisSpan {
  std::size_t outer, mid, inner;
};

AxisSpan axis_span(const Shape& shape, std::size_t axis, const char* op) {
  if (axis >= shape.size()) {
    throw ShapeError(std::string(op) + ": axis " + std::to_string(axis) +
                     " out of range for shape " + shape_str(shape));
  }
  AxisSpan s{1, shape[axis], 1};
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

}  // namespace

Tensor softmax(const Tensor& a, std::size_t axis) {
  check_defined(a, "softmax");
  const AxisSpan s = axis_span(a.shape(), axis, "softmax");
  std::vector<double> out(a.size());
  const double* av = a.value().data();
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t i = 0; i < s.inner; ++i) {
      const std::size_t base = o * s.mid * s.inner + i;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < s.mid; ++k) mx = std::max(mx, av[base + k * s.inner]);
      double z = 0.0;
      for (std::size_t k = 0; k < s.mid; ++k) {
        const double e = std::exp(av[base + k * s.inner] - mx);
        out[base + k * s.inner] = e;
        z += e;
      }
      for (std::size_t k = 0; k < s.mid; ++k) out[base + k * s.inner] /= z;
    }
  }
  return make_op(a.shape(), std::move(out), {a}, [s](Node& node) {
    Node& p = *node.parents[0];
    if (!p.requires_grad) return;
    double* gp = p.grad_buffer().data();
    const double* g = node.grad.data();
    const double* y = node.value.data();
    for (std::size_t o = 0; o < s.outer; ++o) {
      for (std::size_t i = 0; i < s.inner; ++i) {
        const std::size_t base = o * s.mid * s.inner + i;
        double dot = 0.0;
        for (std::size_t k = 0; k < s.mid; ++k) {
          dot += g[base + k * s.inner] * y[base + k * s.inner];
        }
        for (std::size_t k = 0; k < s.mid; ++k) {
          const std::size_t at = base + k * s.inner;
          gp[at] += y[at] * (g[at] - dot);
        }
      }
    }
  });
}

namespace {

template <typename Fwd, typename Grad>
Tensor unary(const Tensor& a, const char* name, Fwd fwd, Grad grad_from_y) {
  check_defined(a, name);
  std::vector<double> out(a.size());
  const double* av = a.value().data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(av[i]);
  return make_op(a.shape(), std::move(out), {a}, [grad_from_y](Node& node) {
    Node& p = *node.parents[0];
    if (!p.requires_grad) return;
    double* gp = p.grad_buffer().data();
    const double* g = node.grad.data();
    const double* y = node.value.data();
    for (std::size_t i = 0; i < node.value.size(); ++i) gp[i] += g[i] * grad_from_y(y[i]);
  });
}

}  // namespace

Tensor tanh(const Tensor& a) {
  return unary(
      a, "tanh", [](double x) { return std::tanh(x); }, [](double y) { return 1.0 - y * y; });
}

Tensor sigmoid(const Tensor& a) {
  return unary(
      a, "sigmoid", [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
      [](double y) { return y * (1.0 - y); });
}

Tensor relu(const Tensor& a) {
  return unary(
      a, "relu", [](double x) { return x > 0.0 ? x : 0.0; },
      [](double y) { return y > 0.0 ? 1.0 : 0.0; });
}

Tensor layer_norm(const Tensor& a, double eps) {
  check_defined(a, "layer_norm");
  if (a.rank() < 1 || a.shape().back() < 1) {
    throw ShapeError("layer_norm: needs a non-empty last axis, got " + shape_str(a.shape()));
  }
  const std::size_t d = a.shape().back();
  const std::size_t rows = a.size() / d;
  std::vector<double> out(a.size());
  std::vector<double> inv_std(rows);
  const double* av = a.value().data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* x = av + r * d;
    double mean = 0.0;
    for (std::size_t i = 0; i < d; ++i) mean += x[i];
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t i = 0; i < d; ++i) var += (x[i] - mean) * (x[i] - mean);
    var /= static_cast<double>(d);
    const double inv = 1.0 / std::sqrt(var + eps);
    inv_std[r] = inv;
    double* y = out.data() + r * d;
    for (std::size_t i = 0; i < d; ++i) y[i] = (x[i] - mean) * inv;
  }
  return make_op(a.shape(), std::move(out), {a},
                 [rows, d, inv_std = std::move(inv_std)](Node& node) {
                   Node& p = *node.parents[0];
                   if (!p.requires_grad) return;
                   double* gp = p.grad_buffer().data();
                   const double* g = node.grad.data();
                   const double* y = node.value.data();
                   for (std::size_t r = 0; r < rows; ++r) {
                     const double* gr = g + r * d;
                     const double* yr = y + r * d;
                     double mean_g = 0.0;
                     double mean_gy = 0.0;
                     for (std::size_t i = 0; i < d; ++i) {
                       mean_g += gr[i];
                       mean_gy += gr[i] * yr[i];
                     }
                     mean_g /= static_cast<double>(d);
                     mean_gy /= static_cast<double>(d);
                     double* dst = gp + r * d;
                     for (std::size_t i = 0; i < d; ++i) {
                       dst[i] += inv_std[r] * (gr[i] - mean_g - yr[i] * mean_gy);
                     }
                   }
                 });
}

Tensor dropout(const Tensor& a, double p, bool train, Rng& rng) {
  check_defined(a, "dropout");
  if (p < 0.0 || p >= 1.0) {
    throw ValidationError("dropout: p must be in [0, 1), got " + std::to_string(p));
  }
  if (!train || p == 0.0) return a;

  const double keep_scale = 1.0 / (1.0 - p);
  std::vector<double> mask(a.size());
  for (double& m : mask) m = rng.uniform() >= p ? keep_scale : 0.0;
  std::vector<double> out(a.size());
  const double* av = a.value().data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * mask[i];
  return make_op(a.shape(), std::move(out), {a}, [mask = std::move(mask)](Node& node) {
    Node& parent = *node.parents[0];
    if (!parent.requires_grad) return;
    double* gp = parent.grad_buffer().data();
    const double* g = node.grad.data();
    for (std::size_t i = 0; i < node.value.size(); ++i) gp[i] += g[i] * mask[i];
  });
}

std::pair<Tensor, Tensor> lstm_cell_step(const Tensor& x, const Tensor& h_prev,
                                         const Tensor& c_prev, const Tensor& w_ih,
                                         const Tensor& w_hh, const Tensor& bias) {
  check_defined(x, "lstm_cell_step");
  check_defined(h_prev, "lstm_cell_step");
  check_defined(c_prev, "lstm_cell_step");
  if (h_prev.rank() != 2 || c_prev.shape() != h_prev.shape()) {
    throw ShapeError("lstm_cell_step: h " + shape_str(h_prev.shape()) + " and c " +
                     shape_str(c_prev.shape()) + " must be equal rank-2 shapes");
  }
  const std::size_t hidden = h_prev.dim(1);
  if (w_ih.rank() != 2 || w_ih.dim(1) != 4 * hidden || w_hh.rank() != 2 ||
      w_hh.dim(0) != hidden || w_hh.dim(1) != 4 * hidden) {
    throw ShapeError("lstm_cell_step: weight shapes " + shape_str(w_ih.shape()) + " / " +
                     shape_str(w_hh.shape()) + " do not match hidden size " +
                     std::to_string(hidden));
  }

  Tensor gates = add(add(matmul(x, w_ih), matmul(h_prev, w_hh)), bias);
  Tensor i_gate = sigmoid(slice(gates, 1, 0, hidden));
  Tensor f_gate = sigmoid(slice(gates, 1, hidden, 2 * hidden));
  Tensor g_gate = tanh(slice(gates, 1, 2 * hidden, 3 * hidden));
  Tensor o_gate = sigmoid(slice(gates, 1, 3 * hidden, 4 * hidden));
  Tensor c_next = add(multiply(f_gate, c_prev), multiply(i_gate, g_gate));
  Tensor h_next = multiply(o_gate, tanh(c_next));
  return {h_next, c_next};
}

Tensor cross_entropy(const Tensor& logits, std::span<const int> targets, int ignore_id) {
  check_defined(logits, "cross_entropy");
  if (logits.rank() < 2) {
    throw ShapeError("cross_entropy: logits must have rank >= 2, got " +
                     shape_str(logits.shape()));
  }
  const std::size_t vocab = logits.shape().back();
  const std::size_t rows = logits.size() / vocab;
  if (targets.size() != rows) {
    throw ShapeError("cross_entropy: " + std::to_string(targets.size()) +
                     " targets for " + std::to_string(rows) + " logit rows");
  }

  std::size_t counted = 0;
  double total = 0.0;
  std::vector<double> probs(logits.size(), 0.0);
  const double* lv = logits.value().data();
  for (std::size_t r = 0; r < rows; ++r) {
    if (targets[r] == ignore_id) continue;
    if (targets[r] < 0 || static_cast<std::size_t>(targets[r]) >= vocab) {
      throw ValidationError("cross_entropy: target id " + std::to_string(targets[r]) +
                            " outside vocabulary of size " + std::to_string(vocab));
    }
    ++counted;
    const double* row = lv + r * vocab;
    double mx = row[0];
    for (std::size_t v = 1; v < vocab; ++v) mx = std::max(mx, row[v]);
    double z = 0.0;
    for (std::size_t v = 0; v < vocab; ++v) z += std::exp(row[v] - mx);
    const double lse = mx + std::log(z);
    total += lse - row[static_cast<std::size_t>(targets[r])];
    double* prow = probs.data() + r * vocab;
    for (std::size_t v = 0; v < vocab; ++v) prow[v] = std::exp(row[v] - lse);
  }
  if (counted == 0) {
    throw ValidationError("cross_entropy: every target equals the ignore id " +
                          std::to_string(ignore_id));
  }

  std::vector<int> tgt(targets.begin(), targets.end());
  return make_op({1}, {total / static_cast<double>(counted)}, {logits},
                 [tgt = std::move(tgt), probs = std::move(probs), vocab, counted,
                  ignore_id](Node& node) {
                   Node& p = *node.parents[0];
                   if (!p.requires_grad) return;
                   const double gscale = node.grad[0] / static_cast<double>(counted);
                   double* gp = p.grad_buffer().data();
                   for (std::size_t r = 0; r < tgt.size(); ++r) {
                     if (tgt[r] == ignore_id) continue;
                     const double* prow = probs.data() + r * vocab;
                     double* grow = gp + r * vocab;
                     for (std::size_t v = 0; v < vocab; ++v) grow[v] += gscale * prow[v];
                     grow[static_cast<std::size_t>(tgt[r])] -= gscale;
                   }
                 });
}

Tensor sum(const Tensor& a) {
  check_defined(a, "sum");
  double total = 0.0;
  for (double v : a.value()) total += v;
  return make_op({1}, {total}, {a}, [](Node& node) {
    Node& p = *node.parents[0];
    if (!p.requires_grad) return;
    double* gp = p.grad_buffer().data();
    const double g = node.grad[0];
    for (std::size_t i = 0; i < p.value.size(); ++i) gp[i] += g;
  });
}

}  // namespace ifthen
