#pragma once

#include <vector>

#include "casim/tensor.hpp"

namespace casim {

class Rng;

// Differentiable op suite. Every op validates shapes up front and registers
// a backward closure when any input requires gradients. Accumulation is
// row-major throughout so repeated runs are bit-identical.

Tensor matmul(const Tensor& a, const Tensor& b);
/// a * b^T without materializing the transpose.
Tensor matmul_nt(const Tensor& a, const Tensor& b);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);

Tensor relu(const Tensor& a);
Tensor sigmoid(const Tensor& a);

/// Row-wise softmax with an optional additive mask (entries 0 or kNegInf).
/// A fully masked row yields all zeros rather than NaN; entries at or below
/// kNegInf/2 are treated as masked.
Tensor softmax_rows(const Tensor& a, const Tensor& mask = Tensor());

/// Per-row normalization to mean 0 / unit variance (no learnable affine).
Tensor layer_norm(const Tensor& a, double eps = 1e-5);

/// Inverted dropout; identity when training is false or rate is 0.
Tensor dropout(const Tensor& a, double rate, Rng& rng, bool training);

Tensor concat_cols(const Tensor& a, const Tensor& b);
Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor slice_rows(const Tensor& a, int row0, int count);
Tensor slice_cols(const Tensor& a, int col0, int count);
/// Column-wise mean over rows, yielding a 1 x C row.
Tensor mean_rows(const Tensor& a);
Tensor sum(const Tensor& a);

/// Row lookup: out[i] = table[indices[i]]. Index -1 is the padding sentinel
/// and yields a zero row that contributes no gradient.
Tensor gather_rows(const Tensor& table, const std::vector<int>& indices);

/// out[r][c] = a[r][c] * col[r][0]; gradients flow to both inputs.
Tensor scale_rows(const Tensor& a, const Tensor& col);

/// Broadcast-add a 1 x C row vector to every row.
Tensor add_rowvec(const Tensor& a, const Tensor& row);

/// Mean over non-ignored rows of -log softmax(logits)[target]. Rows whose
/// target equals ignore_index are skipped; if every row is ignored the loss
/// is zero with zero gradient.
Tensor cross_entropy(const Tensor& logits, const std::vector<int>& targets,
                     int ignore_index = -1);

}  // namespace casim
