// Copyright 2026 The maskscribe Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "maskscribe/nn/ops.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include "maskscribe/nn/gemm.h"

namespace maskscribe::nn {
namespace {

template <typename S>
void require_matrix(const Tensor<S>& t, const char* what) {
  if (!t.defined()) throw UsageError(std::string(what) + ": undefined tensor");
}

template <typename S>
void add_into(std::vector<S>& dst, std::span<const S> src) {
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] += src[i];
}

Shape with_last(Shape shape, std::size_t last) {
  shape.back() = last;
  return shape;
}

// dA += dC * B^T  and  dB += A^T * dC for C = A[m x k] * B[k x n].
template <typename S>
void matmul_backward(Node<S>& self, Node<S>* a, Node<S>* b, std::size_t m, std::size_t k,
                     std::size_t n) {
  const S* dc = self.grad.data();
  if (a->requires_grad) {
    std::vector<S> bt(n * k);
    transpose(b->value.data(), bt.data(), k, n);
    gemm(dc, bt.data(), a->ensure_grad().data(), m, n, k, true);
  }
  if (b->requires_grad) {
    std::vector<S> at(k * m);
    transpose(a->value.data(), at.data(), m, k);
    gemm(at.data(), dc, b->ensure_grad().data(), k, m, n, true);
  }
}

}  // namespace

template <typename S>
Tensor<S> matmul(const Tensor<S>& a, const Tensor<S>& b) {
  require_matrix(a, "matmul");
  require_matrix(b, "matmul");
  if (b.shape().size() != 2 || b.shape()[0] != a.cols()) {
    throw DimensionError("matmul: inner dimensions disagree, " + shape_string(a.shape()) + " x " +
                         shape_string(b.shape()));
  }
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  std::vector<S> out(m * n);
  gemm(a.data().data(), b.data().data(), out.data(), m, k, n);
  return make_result<S>("matmul", with_last(a.shape(), n), std::move(out), {a, b},
                        [m, k, n](Node<S>& self) {
                          matmul_backward(self, self.parents[0].get(), self.parents[1].get(), m,
                                          k, n);
                        });
}

template <typename S>
Tensor<S> linear(const Tensor<S>& x, const Tensor<S>& w, const Tensor<S>& bias) {
  if (w.shape().size() != 2 || w.shape()[0] != x.cols()) {
    throw DimensionError("linear: input " + shape_string(x.shape()) + " vs weight " +
                         shape_string(w.shape()));
  }
  const std::size_t m = x.rows(), k = x.cols(), n = w.cols();
  if (bias.size() != n) throw DimensionError("linear: bias length does not match output width");
  std::vector<S> out(m * n);
  for (std::size_t i = 0; i < m; ++i) std::copy_n(bias.data().data(), n, out.data() + i * n);
  gemm(x.data().data(), w.data().data(), out.data(), m, k, n, true);
  return make_result<S>("linear", with_last(x.shape(), n), std::move(out), {x, w, bias},
                        [m, k, n](Node<S>& self) {
                          matmul_backward(self, self.parents[0].get(), self.parents[1].get(), m,
                                          k, n);
                          Node<S>* b = self.parents[2].get();
                          if (!b->requires_grad) return;
                          auto& db = b->ensure_grad();
                          for (std::size_t i = 0; i < m; ++i) {
                            for (std::size_t j = 0; j < n; ++j) db[j] += self.grad[i * n + j];
                          }
                        });
}

template <typename S>
Tensor<S> add(const Tensor<S>& a, const Tensor<S>& b) {
  if (a.size() != b.size()) {
    throw DimensionError("add: " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  }
  std::vector<S> out(a.data().begin(), a.data().end());
  add_into(out, b.data());
  return make_result<S>("add", a.shape(), std::move(out), {a, b}, [](Node<S>& self) {
    for (auto& p : self.parents) {
      if (p->requires_grad) add_into<S>(p->ensure_grad(), self.grad);
    }
  });
}

template <typename S>
Tensor<S> mul(const Tensor<S>& a, const Tensor<S>& b) {
  if (a.size() != b.size()) {
    throw DimensionError("mul: " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  }
  std::vector<S> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
  return make_result<S>("mul", a.shape(), std::move(out), {a, b}, [](Node<S>& self) {
    Node<S>* pa = self.parents[0].get();
    Node<S>* pb = self.parents[1].get();
    if (pa->requires_grad) {
      auto& g = pa->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pb->value[i];
    }
    if (pb->requires_grad) {
      auto& g = pb->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pa->value[i];
    }
  });
}

template <typename S>
Tensor<S> scale(const Tensor<S>& x, S factor) {
  std::vector<S> out(x.data().begin(), x.data().end());
  for (S& v : out) v *= factor;
  return make_result<S>("scale", x.shape(), std::move(out), {x}, [factor](Node<S>& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += factor * self.grad[i];
  });
}

template <typename S>
Tensor<S> gelu(const Tensor<S>& x) {
  // tanh approximation
  constexpr S kC = S(0.7978845608028654);
  constexpr S kA = S(0.044715);
  std::vector<S> out(x.size());
  std::vector<S> th(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const S v = x.data()[i];
    th[i] = std::tanh(kC * (v + kA * v * v * v));
    out[i] = S(0.5) * v * (S(1) + th[i]);
  }
  return make_result<S>("gelu", x.shape(), std::move(out), {x},
                        [th = std::move(th)](Node<S>& self) {
                          Node<S>* p = self.parents[0].get();
                          auto& g = p->ensure_grad();
                          for (std::size_t i = 0; i < g.size(); ++i) {
                            const S v = p->value[i];
                            const S t = th[i];
                            const S d = S(0.5) * (S(1) + t) +
                                        S(0.5) * v * (S(1) - t * t) * kC *
                                            (S(1) + S(3) * kA * v * v);
                            g[i] += self.grad[i] * d;
                          }
                        });
}

template <typename S>
Tensor<S> layer_norm(const Tensor<S>& x, const Tensor<S>& gain, const Tensor<S>& bias, S eps) {
  const std::size_t rows = x.rows(), d = x.cols();
  if (gain.size() != d || bias.size() != d) {
    throw DimensionError("layer_norm: gain/bias length must equal " + std::to_string(d));
  }
  std::vector<S> out(x.size()), xhat(x.size()), inv_std(rows);
  const S* g = gain.data().data();
  const S* b = bias.data().data();
  for (std::size_t r = 0; r < rows; ++r) {
    const S* row = x.data().data() + r * d;
    S mean = 0;
    for (std::size_t j = 0; j < d; ++j) mean += row[j];
    mean /= S(d);
    S var = 0;
    for (std::size_t j = 0; j < d; ++j) var += (row[j] - mean) * (row[j] - mean);
    var /= S(d);
    inv_std[r] = S(1) / std::sqrt(var + eps);
    for (std::size_t j = 0; j < d; ++j) {
      const S h = (row[j] - mean) * inv_std[r];
      xhat[r * d + j] = h;
      out[r * d + j] = g[j] * h + b[j];
    }
  }
  return make_result<S>(
      "layer_norm", x.shape(), std::move(out), {x, gain, bias},
      [rows, d, xhat = std::move(xhat), inv_std = std::move(inv_std)](Node<S>& self) {
        Node<S>* px = self.parents[0].get();
        Node<S>* pg = self.parents[1].get();
        Node<S>* pb = self.parents[2].get();
        const S* dy = self.grad.data();
        if (pg->requires_grad) {
          auto& dg = pg->ensure_grad();
          for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t j = 0; j < d; ++j) dg[j] += dy[r * d + j] * xhat[r * d + j];
          }
        }
        if (pb->requires_grad) {
          auto& db = pb->ensure_grad();
          for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t j = 0; j < d; ++j) db[j] += dy[r * d + j];
          }
        }
        if (!px->requires_grad) return;
        auto& dx = px->ensure_grad();
        std::vector<S> dh(d);
        for (std::size_t r = 0; r < rows; ++r) {
          S mean_dh = 0, mean_dh_h = 0;
          for (std::size_t j = 0; j < d; ++j) {
            dh[j] = dy[r * d + j] * pg->value[j];
            mean_dh += dh[j];
            mean_dh_h += dh[j] * xhat[r * d + j];
          }
          mean_dh /= S(d);
          mean_dh_h /= S(d);
          for (std::size_t j = 0; j < d; ++j) {
            dx[r * d + j] += inv_std[r] * (dh[j] - mean_dh - xhat[r * d + j] * mean_dh_h);
          }
        }
      });
}

template <typename S>
Tensor<S> softmax(const Tensor<S>& x, int axis) {
  check_finite(x.data(), "softmax input");
  const Shape& shape = x.shape();
  const int rank = static_cast<int>(shape.size());
  const int ax = axis < 0 ? axis + rank : axis;
  if (ax < 0 || ax >= rank) throw DimensionError("softmax: axis out of range");
  std::size_t outer = 1, inner = 1;
  for (int i = 0; i < ax; ++i) outer *= shape[i];
  for (int i = ax + 1; i < rank; ++i) inner *= shape[i];
  const std::size_t n = shape[ax];
  std::vector<S> out(x.size());
  const S* in = x.data().data();
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t c = 0; c < inner; ++c) {
      const std::size_t base = o * n * inner + c;
      S mx = -std::numeric_limits<S>::infinity();
      for (std::size_t i = 0; i < n; ++i) mx = std::max(mx, in[base + i * inner]);
      S z = 0;
      for (std::size_t i = 0; i < n; ++i) {
        const S e = std::exp(in[base + i * inner] - mx);
        out[base + i * inner] = e;
        z += e;
      }
      for (std::size_t i = 0; i < n; ++i) out[base + i * inner] /= z;
    }
  }
  return make_result<S>("softmax", shape, std::move(out), {x},
                        [outer, inner, n](Node<S>& self) {
                          auto& dx = self.parents[0]->ensure_grad();
                          const S* y = self.value.data();
                          const S* dy = self.grad.data();
                          for (std::size_t o = 0; o < outer; ++o) {
                            for (std::size_t c = 0; c < inner; ++c) {
                              const std::size_t base = o * n * inner + c;
                              S dot = 0;
                              for (std::size_t i = 0; i < n; ++i) {
                                dot += dy[base + i * inner] * y[base + i * inner];
                              }
                              for (std::size_t i = 0; i < n; ++i) {
                                const std::size_t at = base + i * inner;
                                dx[at] += y[at] * (dy[at] - dot);
                              }
                            }
                          }
                        });
}

template <typename S>
Tensor<S> embedding(const Tensor<S>& table, const std::vector<int>& ids) {
  if (table.shape().size() != 2) throw DimensionError("embedding: table must be 2-D");
  if (ids.empty()) throw DimensionError("embedding: no ids");
  const std::size_t vocab = table.rows(), d = table.cols();
  std::vector<S> out(ids.size() * d, S(0));
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const int id = ids[i];
    if (id == -1) continue;
    if (id < 0 || static_cast<std::size_t>(id) >= vocab) {
      throw IndexError("embedding: id " + std::to_string(id) + " outside table of " +
                       std::to_string(vocab));
    }
    std::copy_n(table.data().data() + id * d, d, out.data() + i * d);
  }
  return make_result<S>("embedding", {ids.size(), d}, std::move(out), {table},
                        [ids, d](Node<S>& self) {
                          auto& g = self.parents[0]->ensure_grad();
                          for (std::size_t i = 0; i < ids.size(); ++i) {
                            if (ids[i] < 0) continue;
                            S* dst = g.data() + ids[i] * d;
                            const S* src = self.grad.data() + i * d;
                            for (std::size_t j = 0; j < d; ++j) dst[j] += src[j];
                          }
                        });
}

template <typename S>
Tensor<S> reshape(const Tensor<S>& x, Shape shape) {
  if (shape_size(shape) != x.size()) {
    throw DimensionError("reshape: " + shape_string(x.shape()) + " to " + shape_string(shape));
  }
  std::vector<S> out(x.data().begin(), x.data().end());
  return make_result<S>("reshape", std::move(shape), std::move(out), {x}, [](Node<S>& self) {
    add_into<S>(self.parents[0]->ensure_grad(), self.grad);
  });
}

template <typename S>
Tensor<S> concat_rows(const std::vector<Tensor<S>>& parts) {
  if (parts.empty()) throw DimensionError("concat_rows: no parts");
  const std::size_t d = parts.front().cols();
  std::size_t rows = 0;
  for (const auto& p : parts) {
    if (p.cols() != d) throw DimensionError("concat_rows: column counts differ");
    rows += p.rows();
  }
  std::vector<S> out;
  out.reserve(rows * d);
  for (const auto& p : parts) out.insert(out.end(), p.data().begin(), p.data().end());
  return make_result<S>("concat_rows", {rows, d}, std::move(out), parts, [](Node<S>& self) {
    std::size_t offset = 0;
    for (auto& p : self.parents) {
      const std::size_t n = p->value.size();
      if (p->requires_grad) {
        auto& g = p->ensure_grad();
        for (std::size_t i = 0; i < n; ++i) g[i] += self.grad[offset + i];
      }
      offset += n;
    }
  });
}

template <typename S>
Tensor<S> gather_rows(const Tensor<S>& x, const std::vector<std::size_t>& rows) {
  if (rows.empty()) throw DimensionError("gather_rows: no rows");
  const std::size_t d = x.cols();
  std::vector<S> out(rows.size() * d);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= x.rows()) throw IndexError("gather_rows: row index out of range");
    std::copy_n(x.data().data() + rows[i] * d, d, out.data() + i * d);
  }
  return make_result<S>("gather_rows", {rows.size(), d}, std::move(out), {x},
                        [rows, d](Node<S>& self) {
                          auto& g = self.parents[0]->ensure_grad();
                          for (std::size_t i = 0; i < rows.size(); ++i) {
                            for (std::size_t j = 0; j < d; ++j) {
                              g[rows[i] * d + j] += self.grad[i * d + j];
                            }
                          }
                        });
}

template <typename S>
Tensor<S> sum(const Tensor<S>& x) {
  S total = 0;
  for (S v : x.data()) total += v;
  return make_result<S>("sum", {1}, {total}, {x}, [](Node<S>& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (S& v : g) v += self.grad[0];
  });
}

template <typename S>
Tensor<S> dropout(const Tensor<S>& x, double p, Rng& rng) {
  if (p < 0.0 || p >= 1.0) throw ConfigError("dropout probability must be in [0, 1)");
  if (p == 0.0) return x;
  const S keep_scale = S(1.0 / (1.0 - p));
  std::vector<S> mask(x.size());
  std::vector<S> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    mask[i] = rng.uniform() < p ? S(0) : keep_scale;
    out[i] = x.data()[i] * mask[i];
  }
  return make_result<S>("dropout", x.shape(), std::move(out), {x},
                        [mask = std::move(mask)](Node<S>& self) {
                          auto& g = self.parents[0]->ensure_grad();
                          for (std::size_t i = 0; i < g.size(); ++i) {
                            g[i] += self.grad[i] * mask[i];
                          }
                        });
}

template <typename S>
Tensor<S> attention(const Tensor<S>& q, const Tensor<S>& k, const Tensor<S>& v,
                    std::size_t heads, const std::vector<AttentionSegment>& segments) {
  const std::size_t d = q.cols();
  if (heads == 0 || d % heads != 0) {
    throw ConfigError("attention: width " + std::to_string(d) + " not divisible by " +
                      std::to_string(heads) + " heads");
  }
  if (k.cols() != d || v.cols() != d || k.rows() != v.rows()) {
    throw DimensionError("attention: q/k/v widths or key/value row counts disagree");
  }
  const std::size_t dh = d / heads;
  const S scl = S(1) / std::sqrt(S(dh));
  // Probabilities laid out per segment, then per head, as q_len x k_len.
  std::vector<std::size_t> prob_offset(segments.size());
  std::size_t total = 0;
  for (std::size_t s = 0; s < segments.size(); ++s) {
    const auto& seg = segments[s];
    if (seg.q_len == 0 || seg.k_len == 0 || seg.q_begin + seg.q_len > q.rows() ||
        seg.k_begin + seg.k_len > k.rows()) {
      throw DimensionError("attention: segment out of range");
    }
    prob_offset[s] = total;
    total += heads * seg.q_len * seg.k_len;
  }
  std::vector<S> probs(total);
  std::vector<S> out(q.size(), S(0));
  const S* qd = q.data().data();
  const S* kd = k.data().data();
  const S* vd = v.data().data();
  for (std::size_t s = 0; s < segments.size(); ++s) {
    const auto& seg = segments[s];
    for (std::size_t h = 0; h < heads; ++h) {
      S* p = probs.data() + prob_offset[s] + h * seg.q_len * seg.k_len;
      const std::size_t c0 = h * dh;
      for (std::size_t i = 0; i < seg.q_len; ++i) {
        const S* qrow = qd + (seg.q_begin + i) * d + c0;
        S* prow = p + i * seg.k_len;
        S mx = -std::numeric_limits<S>::infinity();
        for (std::size_t j = 0; j < seg.k_len; ++j) {
          const S* krow = kd + (seg.k_begin + j) * d + c0;
          S dot = 0;
          for (std::size_t c = 0; c < dh; ++c) dot += qrow[c] * krow[c];
          prow[j] = dot * scl;
          mx = std::max(mx, prow[j]);
        }
        S z = 0;
        for (std::size_t j = 0; j < seg.k_len; ++j) {
          prow[j] = std::exp(prow[j] - mx);
          z += prow[j];
        }
        S* orow = out.data() + (seg.q_begin + i) * d + c0;
        for (std::size_t j = 0; j < seg.k_len; ++j) {
          prow[j] /= z;
          const S* vrow = vd + (seg.k_begin + j) * d + c0;
          const S w = prow[j];
          for (std::size_t c = 0; c < dh; ++c) orow[c] += w * vrow[c];
        }
      }
    }
  }
  return make_result<S>(
      "attention", q.shape(), std::move(out), {q, k, v},
      [segments, prob_offset, probs = std::move(probs), heads, d, dh, scl](Node<S>& self) {
        Node<S>* pq = self.parents[0].get();
        Node<S>* pk = self.parents[1].get();
        Node<S>* pv = self.parents[2].get();
        const S* qd = pq->value.data();
        const S* kd = pk->value.data();
        const S* vd = pv->value.data();
        S* dq = pq->requires_grad ? pq->ensure_grad().data() : nullptr;
        S* dk = pk->requires_grad ? pk->ensure_grad().data() : nullptr;
        S* dv = pv->requires_grad ? pv->ensure_grad().data() : nullptr;
        const S* dout = self.grad.data();
        std::vector<S> ds;
        for (std::size_t s = 0; s < segments.size(); ++s) {
          const auto& seg = segments[s];
          ds.resize(seg.k_len);
          for (std::size_t h = 0; h < heads; ++h) {
            const S* p = probs.data() + prob_offset[s] + h * seg.q_len * seg.k_len;
            const std::size_t c0 = h * dh;
            for (std::size_t i = 0; i < seg.q_len; ++i) {
              const S* prow = p + i * seg.k_len;
              const S* gorow = dout + (seg.q_begin + i) * d + c0;
              S dot = 0;
              for (std::size_t j = 0; j < seg.k_len; ++j) {
                const S* vrow = vd + (seg.k_begin + j) * d + c0;
                S dp = 0;
                for (std::size_t c = 0; c < dh; ++c) dp += gorow[c] * vrow[c];
                ds[j] = dp;
                dot += dp * prow[j];
                if (dv) {
                  S* dvrow = dv + (seg.k_begin + j) * d + c0;
                  for (std::size_t c = 0; c < dh; ++c) dvrow[c] += prow[j] * gorow[c];
                }
              }
              const S* qrow = qd + (seg.q_begin + i) * d + c0;
              S* dqrow = dq ? dq + (seg.q_begin + i) * d + c0 : nullptr;
              for (std::size_t j = 0; j < seg.k_len; ++j) {
                const S g = prow[j] * (ds[j] - dot) * scl;
                const S* krow = kd + (seg.k_begin + j) * d + c0;
                if (dqrow) {
                  for (std::size_t c = 0; c < dh; ++c) dqrow[c] += g * krow[c];
                }
                if (dk) {
                  S* dkrow = dk + (seg.k_begin + j) * d + c0;
                  for (std::size_t c = 0; c < dh; ++c) dkrow[c] += g * qrow[c];
                }
              }
            }
          }
        }
      });
}

template <typename S>
Tensor<S> cross_entropy(const Tensor<S>& logits, const std::vector<int>& targets,
                        const std::vector<S>& weights) {
  const std::size_t rows = logits.rows(), vocab = logits.cols();
  if (targets.size() != rows || weights.size() != rows) {
    throw DimensionError("cross_entropy: need one target and one weight per row");
  }
  S total = 0;
  std::vector<S> soft(logits.size(), S(0));
  const S* x = logits.data().data();
  for (std::size_t r = 0; r < rows; ++r) {
    if (targets[r] < 0 || static_cast<std::size_t>(targets[r]) >= vocab) {
      throw IndexError("cross_entropy: target " + std::to_string(targets[r]) +
                       " outside vocabulary of " + std::to_string(vocab));
    }
    if (!(weights[r] >= S(0))) throw ContractViolation("cross_entropy: negative weight");
    if (weights[r] == S(0)) continue;
    const S* row = x + r * vocab;
    const S mx = *std::max_element(row, row + vocab);
    S z = 0;
    for (std::size_t j = 0; j < vocab; ++j) {
      soft[r * vocab + j] = std::exp(row[j] - mx);
      z += soft[r * vocab + j];
    }
    for (std::size_t j = 0; j < vocab; ++j) soft[r * vocab + j] /= z;
    total += weights[r] * (std::log(z) + mx - row[targets[r]]);
  }
  return make_result<S>("cross_entropy", {1}, {total}, {logits},
                        [targets, weights, soft = std::move(soft), rows, vocab](Node<S>& self) {
                          auto& g = self.parents[0]->ensure_grad();
                          const S up = self.grad[0];
                          for (std::size_t r = 0; r < rows; ++r) {
                            if (weights[r] == S(0)) continue;
                            const S w = up * weights[r];
                            for (std::size_t j = 0; j < vocab; ++j) {
                              g[r * vocab + j] += w * soft[r * vocab + j];
                            }
                            g[r * vocab + targets[r]] -= w;
                          }
                        });
}

#define MASKSCRIBE_INSTANTIATE_OPS(S)                                                      \
  template Tensor<S> matmul(const Tensor<S>&, const Tensor<S>&);                           \
  template Tensor<S> linear(const Tensor<S>&, const Tensor<S>&, const Tensor<S>&);         \
  template Tensor<S> add(const Tensor<S>&, const Tensor<S>&);                              \
  template Tensor<S> mul(const Tensor<S>&, const Tensor<S>&);                              \
  template Tensor<S> scale(const Tensor<S>&, S);                                           \
  template Tensor<S> gelu(const Tensor<S>&);                                               \
  template Tensor<S> layer_norm(const Tensor<S>&, const Tensor<S>&, const Tensor<S>&, S);  \
  template Tensor<S> softmax(const Tensor<S>&, int);                                       \
  template Tensor<S> embedding(const Tensor<S>&, const std::vector<int>&);                 \
  template Tensor<S> reshape(const Tensor<S>&, Shape);                                     \
  template Tensor<S> concat_rows(const std::vector<Tensor<S>>&);                           \
  template Tensor<S> gather_rows(const Tensor<S>&, const std::vector<std::size_t>&);       \
  template Tensor<S> sum(const Tensor<S>&);                                                \
  template Tensor<S> dropout(const Tensor<S>&, double, Rng&);                              \
  template Tensor<S> attention(const Tensor<S>&, const Tensor<S>&, const Tensor<S>&,       \
                               std::size_t, const std::vector<AttentionSegment>&);         \
  template Tensor<S> cross_entropy(const Tensor<S>&, const std::vector<int>&,              \
                                   const std::vector<S>&);

MASKSCRIBE_INSTANTIATE_OPS(float)
MASKSCRIBE_INSTANTIATE_OPS(double)

}  // namespace maskscribe::nn
