#include "casim/ops.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "casim/rng.hpp"

namespace casim {

using detail::Node;
using detail::ensure_grad;
using detail::make_node;

namespace {

void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

bool wants_grad(const Tensor& t) { return t.requires_grad(); }

bool masked_out(double z) { return z <= kNegInf / 2; }

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require(a.cols() == b.rows(), "matmul: inner dimensions differ (" +
                                    std::to_string(a.cols()) + " vs " +
                                    std::to_string(b.rows()) + ")");
  const int R = a.rows(), K = a.cols(), C = b.cols();
  Tensor out = make_node(
      R, C, {a, b},
      [R, K, C](Node& self) {
        Node* pa = self.parents[0].node();
        Node* pb = self.parents[1].node();
        if (pa->requires_grad) {
          ensure_grad(*pa);
          for (int i = 0; i < R; ++i)
            for (int j = 0; j < C; ++j) {
              const double g = self.grad[size_t(i) * C + j];
              if (g == 0.0) continue;
              for (int k = 0; k < K; ++k)
                pa->grad[size_t(i) * K + k] += g * pb->vals[size_t(k) * C + j];
            }
        }
        if (pb->requires_grad) {
          ensure_grad(*pb);
          for (int i = 0; i < R; ++i)
            for (int k = 0; k < K; ++k) {
              const double av = pa->vals[size_t(i) * K + k];
              if (av == 0.0) continue;
              for (int j = 0; j < C; ++j)
                pb->grad[size_t(k) * C + j] += av * self.grad[size_t(i) * C + j];
            }
        }
      },
      wants_grad(a) || wants_grad(b));
  auto& o = out.values();
  const auto& av = a.values();
  const auto& bv = b.values();
  for (int i = 0; i < R; ++i)
    for (int k = 0; k < K; ++k) {
      const double aik = av[size_t(i) * K + k];
      if (aik == 0.0) continue;
      for (int j = 0; j < C; ++j) o[size_t(i) * C + j] += aik * bv[size_t(k) * C + j];
    }
  return out;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  require(a.cols() == b.cols(), "matmul_nt: inner dimensions differ (" +
                                    std::to_string(a.cols()) + " vs " +
                                    std::to_string(b.cols()) + ")");
  const int R = a.rows(), K = a.cols(), C = b.rows();
  Tensor out = make_node(
      R, C, {a, b},
      [R, K, C](Node& self) {
        Node* pa = self.parents[0].node();
        Node* pb = self.parents[1].node();
        if (pa->requires_grad) {
          ensure_grad(*pa);
          for (int i = 0; i < R; ++i)
            for (int j = 0; j < C; ++j) {
              const double g = self.grad[size_t(i) * C + j];
              if (g == 0.0) continue;
              for (int k = 0; k < K; ++k)
                pa->grad[size_t(i) * K + k] += g * pb->vals[size_t(j) * K + k];
            }
        }
        if (pb->requires_grad) {
          ensure_grad(*pb);
          for (int j = 0; j < C; ++j)
            for (int i = 0; i < R; ++i) {
              const double g = self.grad[size_t(i) * C + j];
              if (g == 0.0) continue;
              for (int k = 0; k < K; ++k)
                pb->grad[size_t(j) * K + k] += g * pa->vals[size_t(i) * K + k];
            }
        }
      },
      wants_grad(a) || wants_grad(b));
  auto& o = out.values();
  const auto& av = a.values();
  const auto& bv = b.values();
  for (int i = 0; i < R; ++i)
    for (int j = 0; j < C; ++j) {
      double acc = 0.0;
      for (int k = 0; k < K; ++k)
        acc += av[size_t(i) * K + k] * bv[size_t(j) * K + k];
      o[size_t(i) * C + j] = acc;
    }
  return out;
}

namespace {

Tensor binary_same_shape(const char* name, const Tensor& a, const Tensor& b,
                         double bsign) {
  require(a.rows() == b.rows() && a.cols() == b.cols(),
          std::string(name) + ": shape mismatch");
  Tensor out = make_node(
      a.rows(), a.cols(), {a, b},
      [bsign](Node& self) {
        for (int p = 0; p < 2; ++p) {
          Node* n = self.parents[p].node();
          if (!n->requires_grad) continue;
          ensure_grad(*n);
          const double s = p == 0 ? 1.0 : bsign;
          for (size_t i = 0; i < self.grad.size(); ++i) n->grad[i] += s * self.grad[i];
        }
      },
      wants_grad(a) || wants_grad(b));
  auto& o = out.values();
  for (size_t i = 0; i < o.size(); ++i) o[i] = a.values()[i] + bsign * b.values()[i];
  return out;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) { return binary_same_shape("add", a, b, 1.0); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary_same_shape("sub", a, b, -1.0); }

Tensor mul(const Tensor& a, const Tensor& b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "mul: shape mismatch");
  Tensor out = make_node(
      a.rows(), a.cols(), {a, b},
      [](Node& self) {
        Node* pa = self.parents[0].node();
        Node* pb = self.parents[1].node();
        if (pa->requires_grad) {
          ensure_grad(*pa);
          for (size_t i = 0; i < self.grad.size(); ++i)
            pa->grad[i] += self.grad[i] * pb->vals[i];
        }
        if (pb->requires_grad) {
          ensure_grad(*pb);
          for (size_t i = 0; i < self.grad.size(); ++i)
            pb->grad[i] += self.grad[i] * pa->vals[i];
        }
      },
      wants_grad(a) || wants_grad(b));
  auto& o = out.values();
  for (size_t i = 0; i < o.size(); ++i) o[i] = a.values()[i] * b.values()[i];
  return out;
}

Tensor scale(const Tensor& a, double c) {
  Tensor out = make_node(
      a.rows(), a.cols(), {a},
      [c](Node& self) {
        Node* pa = self.parents[0].node();
        ensure_grad(*pa);
        for (size_t i = 0; i < self.grad.size(); ++i) pa->grad[i] += c * self.grad[i];
      },
      wants_grad(a));
  auto& o = out.values();
  for (size_t i = 0; i < o.size(); ++i) o[i] = c * a.values()[i];
  return out;
}

Tensor relu(const Tensor& a) {
  Tensor out = make_node(
      a.rows(), a.cols(), {a},
      [](Node& self) {
        Node* pa = self.parents[0].node();
        ensure_grad(*pa);
        for (size_t i = 0; i < self.grad.size(); ++i)
          if (pa->vals[i] > 0.0) pa->grad[i] += self.grad[i];
      },
      wants_grad(a));
  auto& o = out.values();
  for (size_t i = 0; i < o.size(); ++i) o[i] = a.values()[i] > 0.0 ? a.values()[i] : 0.0;
  return out;
}

Tensor sigmoid(const Tensor& a) {
  Tensor out = make_node(
      a.rows(), a.cols(), {a},
      [](Node& self) {
        Node* pa = self.parents[0].node();
        ensure_grad(*pa);
        for (size_t i = 0; i < self.grad.size(); ++i) {
          const double y = self.vals[i];
          pa->grad[i] += self.grad[i] * y * (1.0 - y);
        }
      },
      wants_grad(a));
  auto& o = out.values();
  for (size_t i = 0; i < o.size(); ++i) {
    const double x = a.values()[i];
    if (x >= 0.0) {
      o[i] = 1.0 / (1.0 + std::exp(-x));
    } else {
      const double e = std::exp(x);
      o[i] = e / (1.0 + e);
    }
  }
  return out;
}

Tensor softmax_rows(const Tensor& a, const Tensor& mask) {
  if (mask.defined())
    require(mask.rows() == a.rows() && mask.cols() == a.cols(),
            "softmax_rows: mask shape mismatch");
  const int R = a.rows(), C = a.cols();
  Tensor out = make_node(
      R, C, {a},
      [R, C](Node& self) {
        Node* pa = self.parents[0].node();
        ensure_grad(*pa);
        for (int r = 0; r < R; ++r) {
          const double* y = &self.vals[size_t(r) * C];
          const double* g = &self.grad[size_t(r) * C];
          double dot = 0.0;
          for (int c = 0; c < C; ++c) dot += g[c] * y[c];
          for (int c = 0; c < C; ++c)
            pa->grad[size_t(r) * C + c] += y[c] * (g[c] - dot);
        }
      },
      wants_grad(a));
  auto& o = out.values();
  for (int r = 0; r < R; ++r) {
    double mx = kNegInf;
    for (int c = 0; c < C; ++c) {
      double z = a.values()[size_t(r) * C + c];
      if (mask.defined()) z += mask.values()[size_t(r) * C + c];
      if (z > mx) mx = z;
    }
    if (masked_out(mx)) continue;  // fully masked row stays all-zero
    double denom = 0.0;
    for (int c = 0; c < C; ++c) {
      double z = a.values()[size_t(r) * C + c];
      if (mask.defined()) z += mask.values()[size_t(r) * C + c];
      const double e = masked_out(z) ? 0.0 : std::exp(z - mx);
      o[size_t(r) * C + c] = e;
      denom += e;
    }
    for (int c = 0; c < C; ++c) o[size_t(r) * C + c] /= denom;
  }
  return out;
}

Tensor layer_norm(const Tensor& a, double eps) {
  const int R = a.rows(), C = a.cols();
  Tensor out = make_node(
      R, C, {a},
      [R, C, eps](Node& self) {
        Node* pa = self.parents[0].node();
        ensure_grad(*pa);
        for (int r = 0; r < R; ++r) {
          const double* x = &pa->vals[size_t(r) * C];
          const double* y = &self.vals[size_t(r) * C];
          const double* g = &self.grad[size_t(r) * C];
          double mean = 0.0;
          for (int c = 0; c < C; ++c) mean += x[c];
          mean /= C;
          double var = 0.0;
          for (int c = 0; c < C; ++c) var += (x[c] - mean) * (x[c] - mean);
          var /= C;
          const double inv_s = 1.0 / std::sqrt(var + eps);
          double gmean = 0.0, gymean = 0.0;
          for (int c = 0; c < C; ++c) {
            gmean += g[c];
            gymean += g[c] * y[c];
          }
          gmean /= C;
          gymean /= C;
          for (int c = 0; c < C; ++c)
            pa->grad[size_t(r) * C + c] += inv_s * (g[c] - gmean - y[c] * gymean);
        }
      },
      wants_grad(a));
  auto& o = out.values();
  for (int r = 0; r < R; ++r) {
    const double* x = &a.values()[size_t(r) * C];
    double mean = 0.0;
    for (int c = 0; c < C; ++c) mean += x[c];
    mean /= C;
    double var = 0.0;
    for (int c = 0; c < C; ++c) var += (x[c] - mean) * (x[c] - mean);
    var /= C;
    const double inv_s = 1.0 / std::sqrt(var + eps);
    for (int c = 0; c < C; ++c) o[size_t(r) * C + c] = (x[c] - mean) * inv_s;
  }
  return out;
}

Tensor dropout(const Tensor& a, double rate, Rng& rng, bool training) {
  require(rate >= 0.0 && rate < 1.0, "dropout: rate must be in [0, 1)");
  if (!training || rate == 0.0) return scale(a, 1.0);
  const double keep = 1.0 - rate;
  auto mask = std::make_shared<std::vector<double>>(a.size());
  for (auto& m : *mask) m = rng.uniform() < rate ? 0.0 : 1.0 / keep;
  Tensor out = make_node(
      a.rows(), a.cols(), {a},
      [mask](Node& self) {
        Node* pa = self.parents[0].node();
        ensure_grad(*pa);
        for (size_t i = 0; i < self.grad.size(); ++i)
          pa->grad[i] += self.grad[i] * (*mask)[i];
      },
      wants_grad(a));
  auto& o = out.values();
  for (size_t i = 0; i < o.size(); ++i) o[i] = a.values()[i] * (*mask)[i];
  return out;
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
  require(a.rows() == b.rows(), "concat_cols: row counts differ");
  const int R = a.rows(), Ca = a.cols(), Cb = b.cols(), C = Ca + Cb;
  Tensor out = make_node(
      R, C, {a, b},
      [R, Ca, Cb, C](Node& self) {
        Node* pa = self.parents[0].node();
        Node* pb = self.parents[1].node();
        if (pa->requires_grad) {
          ensure_grad(*pa);
          for (int r = 0; r < R; ++r)
            for (int c = 0; c < Ca; ++c)
              pa->grad[size_t(r) * Ca + c] += self.grad[size_t(r) * C + c];
        }
        if (pb->requires_grad) {
          ensure_grad(*pb);
          for (int r = 0; r < R; ++r)
            for (int c = 0; c < Cb; ++c)
              pb->grad[size_t(r) * Cb + c] += self.grad[size_t(r) * C + Ca + c];
        }
      },
      wants_grad(a) || wants_grad(b));
  auto& o = out.values();
  for (int r = 0; r < R; ++r) {
    for (int c = 0; c < Ca; ++c) o[size_t(r) * C + c] = a.values()[size_t(r) * Ca + c];
    for (int c = 0; c < Cb; ++c) o[size_t(r) * C + Ca + c] = b.values()[size_t(r) * Cb + c];
  }
  return out;
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
  require(!parts.empty(), "concat_rows: empty input");
  const int C = parts[0].cols();
  int R = 0;
  bool grad = false;
  for (const auto& p : parts) {
    require(p.cols() == C, "concat_rows: column counts differ");
    R += p.rows();
    grad = grad || p.requires_grad();
  }
  std::vector<int> offsets(parts.size());
  int off = 0;
  for (size_t i = 0; i < parts.size(); ++i) {
    offsets[i] = off;
    off += parts[i].rows();
  }
  Tensor out = make_node(
      R, C, parts,
      [offsets, C](Node& self) {
        for (size_t i = 0; i < self.parents.size(); ++i) {
          Node* p = self.parents[i].node();
          if (!p->requires_grad) continue;
          ensure_grad(*p);
          const size_t base = size_t(offsets[i]) * C;
          for (size_t j = 0; j < p->vals.size(); ++j) p->grad[j] += self.grad[base + j];
        }
      },
      grad);
  auto& o = out.values();
  for (size_t i = 0; i < parts.size(); ++i) {
    const auto& v = parts[i].values();
    std::copy(v.begin(), v.end(), o.begin() + size_t(offsets[i]) * C);
  }
  return out;
}

Tensor slice_rows(const Tensor& a, int row0, int count) {
  require(row0 >= 0 && count > 0 && row0 + count <= a.rows(),
          "slice_rows: range out of bounds");
  const int C = a.cols();
  Tensor out = make_node(
      count, C, {a},
      [row0, count, C](Node& self) {
        Node* pa = self.parents[0].node();
        ensure_grad(*pa);
        for (int r = 0; r < count; ++r)
          for (int c = 0; c < C; ++c)
            pa->grad[size_t(row0 + r) * C + c] += self.grad[size_t(r) * C + c];
      },
      wants_grad(a));
  auto& o = out.values();
  std::copy(a.values().begin() + size_t(row0) * C,
            a.values().begin() + size_t(row0 + count) * C, o.begin());
  return out;
}

Tensor slice_cols(const Tensor& a, int col0, int count) {
  require(col0 >= 0 && count > 0 && col0 + count <= a.cols(),
          "slice_cols: range out of bounds");
  const int R = a.rows(), C = a.cols();
  Tensor out = make_node(
      R, count, {a},
      [col0, count, C, R](Node& self) {
        Node* pa = self.parents[0].node();
        ensure_grad(*pa);
        for (int r = 0; r < R; ++r)
          for (int c = 0; c < count; ++c)
            pa->grad[size_t(r) * C + col0 + c] += self.grad[size_t(r) * count + c];
      },
      wants_grad(a));
  auto& o = out.values();
  for (int r = 0; r < R; ++r)
    for (int c = 0; c < count; ++c)
      o[size_t(r) * count + c] = a.values()[size_t(r) * C + col0 + c];
  return out;
}

Tensor mean_rows(const Tensor& a) {
  const int R = a.rows(), C = a.cols();
  Tensor out = make_node(
      1, C, {a},
      [R, C](Node& self) {
        Node* pa = self.parents[0].node();
        ensure_grad(*pa);
        for (int r = 0; r < R; ++r)
          for (int c = 0; c < C; ++c)
            pa->grad[size_t(r) * C + c] += self.grad[c] / R;
      },
      wants_grad(a));
  auto& o = out.values();
  for (int r = 0; r < R; ++r)
    for (int c = 0; c < C; ++c) o[c] += a.values()[size_t(r) * C + c];
  for (int c = 0; c < C; ++c) o[c] /= R;
  return out;
}

Tensor sum(const Tensor& a) {
  Tensor out = make_node(
      1, 1, {a},
      [](Node& self) {
        Node* pa = self.parents[0].node();
        ensure_grad(*pa);
        for (size_t i = 0; i < pa->grad.size(); ++i) pa->grad[i] += self.grad[0];
      },
      wants_grad(a));
  double acc = 0.0;
  for (double v : a.values()) acc += v;
  out.values()[0] = acc;
  return out;
}

Tensor gather_rows(const Tensor& table, const std::vector<int>& indices) {
  const int C = table.cols();
  for (int idx : indices)
    require(idx == -1 || (idx >= 0 && idx < table.rows()),
            "gather_rows: index out of range");
  const int R = static_cast<int>(indices.size());
  require(R > 0, "gather_rows: empty index list");
  Tensor out = make_node(
      R, C, {table},
      [indices, C](Node& self) {
        Node* pt = self.parents[0].node();
        ensure_grad(*pt);
        for (size_t r = 0; r < indices.size(); ++r) {
          if (indices[r] < 0) continue;
          for (int c = 0; c < C; ++c)
            pt->grad[size_t(indices[r]) * C + c] += self.grad[r * C + c];
        }
      },
      wants_grad(table));
  auto& o = out.values();
  for (size_t r = 0; r < indices.size(); ++r) {
    if (indices[r] < 0) continue;  // padding row stays zero
    std::copy(table.values().begin() + size_t(indices[r]) * C,
              table.values().begin() + size_t(indices[r] + 1) * C,
              o.begin() + r * C);
  }
  return out;
}

Tensor scale_rows(const Tensor& a, const Tensor& col) {
  require(col.rows() == a.rows() && col.cols() == 1,
          "scale_rows: expected an Rx1 column");
  const int R = a.rows(), C = a.cols();
  Tensor out = make_node(
      R, C, {a, col},
      [R, C](Node& self) {
        Node* pa = self.parents[0].node();
        Node* pc = self.parents[1].node();
        if (pa->requires_grad) {
          ensure_grad(*pa);
          for (int r = 0; r < R; ++r)
            for (int c = 0; c < C; ++c)
              pa->grad[size_t(r) * C + c] += self.grad[size_t(r) * C + c] * pc->vals[r];
        }
        if (pc->requires_grad) {
          ensure_grad(*pc);
          for (int r = 0; r < R; ++r) {
            double acc = 0.0;
            for (int c = 0; c < C; ++c)
              acc += self.grad[size_t(r) * C + c] * pa->vals[size_t(r) * C + c];
            pc->grad[r] += acc;
          }
        }
      },
      wants_grad(a) || wants_grad(col));
  auto& o = out.values();
  for (int r = 0; r < R; ++r)
    for (int c = 0; c < C; ++c)
      o[size_t(r) * C + c] = a.values()[size_t(r) * C + c] * col.values()[r];
  return out;
}

Tensor add_rowvec(const Tensor& a, const Tensor& row) {
  require(row.rows() == 1 && row.cols() == a.cols(),
          "add_rowvec: expected a 1xC row");
  const int R = a.rows(), C = a.cols();
  Tensor out = make_node(
      R, C, {a, row},
      [R, C](Node& self) {
        Node* pa = self.parents[0].node();
        Node* pr = self.parents[1].node();
        if (pa->requires_grad) {
          ensure_grad(*pa);
          for (size_t i = 0; i < self.grad.size(); ++i) pa->grad[i] += self.grad[i];
        }
        if (pr->requires_grad) {
          ensure_grad(*pr);
          for (int r = 0; r < R; ++r)
            for (int c = 0; c < C; ++c) pr->grad[c] += self.grad[size_t(r) * C + c];
        }
      },
      wants_grad(a) || wants_grad(row));
  auto& o = out.values();
  for (int r = 0; r < R; ++r)
    for (int c = 0; c < C; ++c)
      o[size_t(r) * C + c] = a.values()[size_t(r) * C + c] + row.values()[c];
  return out;
}

Tensor cross_entropy(const Tensor& logits, const std::vector<int>& targets,
                     int ignore_index) {
  const int R = logits.rows(), C = logits.cols();
  require(static_cast<int>(targets.size()) == R,
          "cross_entropy: one target per row required");
  int valid = 0;
  for (int t : targets) {
    if (t == ignore_index) continue;
    require(t >= 0 && t < C, "cross_entropy: target out of range");
    ++valid;
  }
  Tensor out = make_node(
      1, 1, {logits},
      [targets, ignore_index, R, C, valid](Node& self) {
        if (valid == 0) return;
        Node* pl = self.parents[0].node();
        ensure_grad(*pl);
        const double g = self.grad[0] / valid;
        for (int r = 0; r < R; ++r) {
          if (targets[r] == ignore_index) continue;
          const double* z = &pl->vals[size_t(r) * C];
          double mx = kNegInf;
          for (int c = 0; c < C; ++c)
            if (z[c] > mx) mx = z[c];
          double denom = 0.0;
          for (int c = 0; c < C; ++c)
            denom += masked_out(z[c]) ? 0.0 : std::exp(z[c] - mx);
          for (int c = 0; c < C; ++c) {
            const double p = masked_out(z[c]) ? 0.0 : std::exp(z[c] - mx) / denom;
            pl->grad[size_t(r) * C + c] += g * (p - (c == targets[r] ? 1.0 : 0.0));
          }
        }
      },
      wants_grad(logits));
  if (valid == 0) return out;
  double loss = 0.0;
  for (int r = 0; r < R; ++r) {
    if (targets[r] == ignore_index) continue;
    const double* z = &logits.values()[size_t(r) * C];
    require(!masked_out(z[targets[r]]), "cross_entropy: target row is masked");
    double mx = kNegInf;
    for (int c = 0; c < C; ++c)
      if (z[c] > mx) mx = z[c];
    double denom = 0.0;
    for (int c = 0; c < C; ++c)
      denom += masked_out(z[c]) ? 0.0 : std::exp(z[c] - mx);
    loss += std::log(denom) + mx - z[targets[r]];
  }
  out.values()[0] = loss / valid;
  return out;
}

}  // namespace casim
