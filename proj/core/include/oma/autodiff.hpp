#pragma once

#include <cstddef>
#include <functional>
#include <utility>
#include <vector>

#include "oma/tensor.hpp"

namespace oma {

/// Fixed-coefficient sparse matrix in CSR form. Used for the structural
/// (non-learnable) aggregations: neighbor means, normalized adjacency,
/// graph readout. Coefficients are constants on the tape.
struct SparseMat {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<std::size_t> row_ptr;  // rows+1
    std::vector<std::size_t> col;
    std::vector<double> val;

    struct Triplet {
        std::size_t row, col;
        double value;
    };
    static SparseMat from_triplets(std::size_t rows, std::size_t cols,
                                   std::vector<Triplet> triplets);

    /// out = S * x
    Tensor multiply(const Tensor& x) const;
    /// accum += S^T * g
    void add_transpose_multiply(const Tensor& g, Tensor& accum) const;
};

/// Reverse-mode autodiff tape over Tensor values. Nodes are append-only, so
/// creation order is a topological order and the backward sweep is a single
/// reverse pass. Values hold 64-bit floats throughout.
///
/// Reduction order inside every op depends only on the rows involved, never
/// on the total row count, so a graph evaluated alone or inside a batch
/// produces bitwise-identical rows.
class Tape {
public:
    int leaf(Tensor value);

    const Tensor& value(int id) const { return nodes_[check(id)].value; }
    const Tensor& grad(int id) const { return nodes_[check(id)].grad; }
    int size() const { return static_cast<int>(nodes_.size()); }
    double scalar(int id) const;

    /// Seeds d(loss)/d(loss) = 1 and sweeps the tape in reverse. Gradients of
    /// nodes the loss does not depend on stay zero.
    void backward(int loss_id);

    // ---- differentiable ops ----
    int matmul(int a, int b);
    int add(int a, int b);
    int sub(int a, int b);
    int mul(int a, int b);
    int add_rowvec(int m, int v);           // m: n x d, v: 1 x d broadcast over rows
    int mul_colvec(int m, int c);           // m: n x d scaled per row by c: n x 1
    int add_scalar(int a, double s);
    int scale(int a, double s);
    int add_const(int a, const Tensor& c);
    int mul_const(int a, const Tensor& c);
    int relu(int a);
    int leaky_relu(int a, double slope);
    int softplus(int a);
    int sigmoid(int a);
    int square(int a);
    int sparse_matmul(const SparseMat& s, int x);
    int gather_rows(int x, std::vector<std::size_t> idx);
    int scatter_sum_rows(int x, std::vector<std::size_t> idx, std::size_t out_rows);
    /// Softmax of a column vector within segments; seg[i] names the segment of
    /// entry i. Every segment present must be non-empty.
    int segment_softmax(int scores, std::vector<std::size_t> seg, std::size_t n_segments);
    int row_sum(int a);                     // n x d -> n x 1
    int sum(int a);                         // -> 1 x 1

private:
    struct Node {
        Tensor value;
        Tensor grad;
        std::function<void(Tape&, const Tensor&)> back;  // accumulates into parents
    };

    int check(int id) const;
    int push(Tensor value, std::function<void(Tape&, const Tensor&)> back);
    void accumulate(int id, const Tensor& g);

    std::vector<Node> nodes_;

    friend struct TapeTestAccess;
};

}  // namespace oma
