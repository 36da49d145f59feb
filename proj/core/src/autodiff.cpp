#include "oma/autodiff.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>

#include "oma/errors.hpp"

namespace oma {

namespace {

#ifndef NDEBUG
void debug_check_finite(const Tensor& t) { assert(t.all_finite() && "non-finite value on tape"); }
#else
void debug_check_finite(const Tensor&) {}
#endif

double stable_softplus(double x) {
    if (x > 30.0) return x;
    if (x < -30.0) return std::exp(x);
    return std::log1p(std::exp(x));
}

double stable_sigmoid(double x) {
    if (x >= 0.0) {
        const double e = std::exp(-x);
        return 1.0 / (1.0 + e);
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

}  // namespace

SparseMat SparseMat::from_triplets(std::size_t rows, std::size_t cols,
                                   std::vector<Triplet> triplets) {
    for (const Triplet& t : triplets) {
        if (t.row >= rows || t.col >= cols) throw ShapeMismatch("sparse triplet out of range");
    }
    std::stable_sort(triplets.begin(), triplets.end(), [](const Triplet& a, const Triplet& b) {
        return a.row != b.row ? a.row < b.row : a.col < b.col;
    });
    SparseMat s;
    s.rows = rows;
    s.cols = cols;
    s.row_ptr.assign(rows + 1, 0);
    std::size_t i = 0;
    for (std::size_t r = 0; r < rows; ++r) {
        while (i < triplets.size() && triplets[i].row == r) {
            double v = triplets[i].value;
            const std::size_t c = triplets[i].col;
            ++i;
            while (i < triplets.size() && triplets[i].row == r && triplets[i].col == c) {
                v += triplets[i].value;  // duplicates sum
                ++i;
            }
            s.col.push_back(c);
            s.val.push_back(v);
        }
        s.row_ptr[r + 1] = s.col.size();
    }
    return s;
}

Tensor SparseMat::multiply(const Tensor& x) const {
    if (x.rows() != cols) throw ShapeMismatch("sparse matmul shape");
    Tensor out(rows, x.cols());
    for (std::size_t r = 0; r < rows; ++r) {
        double* orow = out.data() + r * out.cols();
        for (std::size_t i = row_ptr[r]; i < row_ptr[r + 1]; ++i) {
            const double v = val[i];
            const double* xrow = x.data() + col[i] * x.cols();
            for (std::size_t j = 0; j < x.cols(); ++j) orow[j] += v * xrow[j];
        }
    }
    return out;
}

void SparseMat::add_transpose_multiply(const Tensor& g, Tensor& accum) const {
    if (g.rows() != rows || accum.rows() != cols || accum.cols() != g.cols()) {
        throw ShapeMismatch("sparse transpose-multiply shape");
    }
    for (std::size_t r = 0; r < rows; ++r) {
        const double* grow = g.data() + r * g.cols();
        for (std::size_t i = row_ptr[r]; i < row_ptr[r + 1]; ++i) {
            const double v = val[i];
            double* arow = accum.data() + col[i] * accum.cols();
            for (std::size_t j = 0; j < g.cols(); ++j) arow[j] += v * grow[j];
        }
    }
}

int Tape::check(int id) const {
    if (id < 0 || id >= static_cast<int>(nodes_.size())) throw Error("invalid tape node id");
    return id;
}

int Tape::push(Tensor value, std::function<void(Tape&, const Tensor&)> back) {
    debug_check_finite(value);
    nodes_.push_back(Node{std::move(value), Tensor{}, std::move(back)});
    return static_cast<int>(nodes_.size()) - 1;
}

void Tape::accumulate(int id, const Tensor& g) {
    Node& n = nodes_[check(id)];
    if (n.grad.empty()) n.grad = Tensor::zeros(n.value.rows(), n.value.cols());
    if (!n.grad.same_shape(g)) throw ShapeMismatch("gradient shape mismatch");
    double* dst = n.grad.data();
    const double* src = g.data();
    for (std::size_t i = 0; i < g.size(); ++i) dst[i] += src[i];
}

double Tape::scalar(int id) const {
    const Tensor& v = value(id);
    if (v.rows() != 1 || v.cols() != 1) throw NotScalarLoss("node is not a 1x1 scalar");
    return v(0, 0);
}

int Tape::leaf(Tensor value) { return push(std::move(value), nullptr); }

void Tape::backward(int loss_id) {
    check(loss_id);
    const Tensor& loss = nodes_[loss_id].value;
    if (loss.rows() != 1 || loss.cols() != 1) {
        throw NotScalarLoss("backward requires a 1x1 scalar loss node");
    }
    for (auto& n : nodes_) {
        n.grad = Tensor::zeros(n.value.rows(), n.value.cols());
    }
    nodes_[loss_id].grad(0, 0) = 1.0;
    for (int i = loss_id; i >= 0; --i) {
        Node& n = nodes_[i];
        if (n.back && n.grad.max_abs() != 0.0) n.back(*this, n.grad);
    }
}

int Tape::matmul(int a, int b) {
    const Tensor& A = value(a);
    const Tensor& B = value(b);
    if (A.cols() != B.rows()) throw ShapeMismatch("matmul inner dimensions differ");
    Tensor C(A.rows(), B.cols());
    // ikj loops: accumulation order per output row is independent of A.rows().
    for (std::size_t i = 0; i < A.rows(); ++i) {
        double* crow = C.data() + i * C.cols();
        const double* arow = A.data() + i * A.cols();
        for (std::size_t k = 0; k < A.cols(); ++k) {
            const double av = arow[k];
            const double* brow = B.data() + k * B.cols();
            for (std::size_t j = 0; j < C.cols(); ++j) crow[j] += av * brow[j];
        }
    }
    return push(std::move(C), [a, b](Tape& t, const Tensor& g) {
        const Tensor& A = t.value(a);
        const Tensor& B = t.value(b);
        Tensor da(A.rows(), A.cols());
        for (std::size_t i = 0; i < A.rows(); ++i) {
            double* darow = da.data() + i * da.cols();
            const double* grow = g.data() + i * g.cols();
            for (std::size_t k = 0; k < B.rows(); ++k) {
                const double* brow = B.data() + k * B.cols();
                double acc = 0.0;
                for (std::size_t j = 0; j < g.cols(); ++j) acc += grow[j] * brow[j];
                darow[k] = acc;
            }
        }
        Tensor db(B.rows(), B.cols());
        for (std::size_t i = 0; i < A.rows(); ++i) {
            const double* arow = A.data() + i * A.cols();
            const double* grow = g.data() + i * g.cols();
            for (std::size_t k = 0; k < B.rows(); ++k) {
                double* dbrow = db.data() + k * db.cols();
                const double av = arow[k];
                for (std::size_t j = 0; j < g.cols(); ++j) dbrow[j] += av * grow[j];
            }
        }
        t.accumulate(a, da);
        t.accumulate(b, db);
    });
}

int Tape::add(int a, int b) {
    const Tensor& A = value(a);
    const Tensor& B = value(b);
    if (!A.same_shape(B)) throw ShapeMismatch("add shapes differ");
    Tensor C = A;
    for (std::size_t i = 0; i < C.size(); ++i) C.buffer()[i] += B.buffer()[i];
    return push(std::move(C), [a, b](Tape& t, const Tensor& g) {
        t.accumulate(a, g);
        t.accumulate(b, g);
    });
}

int Tape::sub(int a, int b) {
    const Tensor& A = value(a);
    const Tensor& B = value(b);
    if (!A.same_shape(B)) throw ShapeMismatch("sub shapes differ");
    Tensor C = A;
    for (std::size_t i = 0; i < C.size(); ++i) C.buffer()[i] -= B.buffer()[i];
    return push(std::move(C), [a, b](Tape& t, const Tensor& g) {
        t.accumulate(a, g);
        Tensor neg = g;
        for (auto& x : neg.buffer()) x = -x;
        t.accumulate(b, neg);
    });
}

int Tape::mul(int a, int b) {
    const Tensor& A = value(a);
    const Tensor& B = value(b);
    if (!A.same_shape(B)) throw ShapeMismatch("mul shapes differ");
    Tensor C = A;
    for (std::size_t i = 0; i < C.size(); ++i) C.buffer()[i] *= B.buffer()[i];
    return push(std::move(C), [a, b](Tape& t, const Tensor& g) {
        const Tensor& A = t.value(a);
        const Tensor& B = t.value(b);
        Tensor da = g;
        Tensor db = g;
        for (std::size_t i = 0; i < g.size(); ++i) {
            da.buffer()[i] *= B.buffer()[i];
            db.buffer()[i] *= A.buffer()[i];
        }
        t.accumulate(a, da);
        t.accumulate(b, db);
    });
}

int Tape::add_rowvec(int m, int v) {
    const Tensor& M = value(m);
    const Tensor& V = value(v);
    if (V.rows() != 1 || V.cols() != M.cols()) throw ShapeMismatch("row vector width mismatch");
    Tensor C = M;
    for (std::size_t i = 0; i < M.rows(); ++i) {
        double* crow = C.data() + i * C.cols();
        for (std::size_t j = 0; j < M.cols(); ++j) crow[j] += V(0, j);
    }
    return push(std::move(C), [m, v](Tape& t, const Tensor& g) {
        t.accumulate(m, g);
        Tensor dv(1, g.cols());
        for (std::size_t i = 0; i < g.rows(); ++i) {
            const double* grow = g.data() + i * g.cols();
            for (std::size_t j = 0; j < g.cols(); ++j) dv(0, j) += grow[j];
        }
        t.accumulate(v, dv);
    });
}

int Tape::mul_colvec(int m, int c) {
    const Tensor& M = value(m);
    const Tensor& C = value(c);
    if (C.cols() != 1 || C.rows() != M.rows()) throw ShapeMismatch("column vector height mismatch");
    Tensor out = M;
    for (std::size_t i = 0; i < M.rows(); ++i) {
        double* orow = out.data() + i * out.cols();
        for (std::size_t j = 0; j < M.cols(); ++j) orow[j] *= C(i, 0);
    }
    return push(std::move(out), [m, c](Tape& t, const Tensor& g) {
        const Tensor& M = t.value(m);
        const Tensor& C = t.value(c);
        Tensor dm = g;
        Tensor dc(C.rows(), 1);
        for (std::size_t i = 0; i < g.rows(); ++i) {
            double* dmrow = dm.data() + i * dm.cols();
            const double* grow = g.data() + i * g.cols();
            const double* mrow = M.data() + i * M.cols();
            double acc = 0.0;
            for (std::size_t j = 0; j < g.cols(); ++j) {
                acc += grow[j] * mrow[j];
                dmrow[j] *= C(i, 0);
            }
            dc(i, 0) = acc;
        }
        t.accumulate(m, dm);
        t.accumulate(c, dc);
    });
}

int Tape::add_scalar(int a, double s) {
    Tensor C = value(a);
    for (auto& x : C.buffer()) x += s;
    return push(std::move(C), [a](Tape& t, const Tensor& g) { t.accumulate(a, g); });
}

int Tape::scale(int a, double s) {
    Tensor C = value(a);
    for (auto& x : C.buffer()) x *= s;
    return push(std::move(C), [a, s](Tape& t, const Tensor& g) {
        Tensor da = g;
        for (auto& x : da.buffer()) x *= s;
        t.accumulate(a, da);
    });
}

int Tape::add_const(int a, const Tensor& c) {
    const Tensor& A = value(a);
    if (!A.same_shape(c)) throw ShapeMismatch("add_const shapes differ");
    Tensor C = A;
    for (std::size_t i = 0; i < C.size(); ++i) C.buffer()[i] += c.buffer()[i];
    return push(std::move(C), [a](Tape& t, const Tensor& g) { t.accumulate(a, g); });
}

int Tape::mul_const(int a, const Tensor& c) {
    const Tensor& A = value(a);
    if (!A.same_shape(c)) throw ShapeMismatch("mul_const shapes differ");
    Tensor C = A;
    for (std::size_t i = 0; i < C.size(); ++i) C.buffer()[i] *= c.buffer()[i];
    return push(std::move(C), [a, c](Tape& t, const Tensor& g) {
        Tensor da = g;
        for (std::size_t i = 0; i < g.size(); ++i) da.buffer()[i] *= c.buffer()[i];
        t.accumulate(a, da);
    });
}

int Tape::relu(int a) {
    Tensor C = value(a);
    for (auto& x : C.buffer()) x = x > 0.0 ? x : 0.0;
    return push(std::move(C), [a](Tape& t, const Tensor& g) {
        const Tensor& A = t.value(a);
        Tensor da = g;
        for (std::size_t i = 0; i < g.size(); ++i) {
            if (A.buffer()[i] <= 0.0) da.buffer()[i] = 0.0;
        }
        t.accumulate(a, da);
    });
}

int Tape::leaky_relu(int a, double slope) {
    Tensor C = value(a);
    for (auto& x : C.buffer()) x = x > 0.0 ? x : slope * x;
    return push(std::move(C), [a, slope](Tape& t, const Tensor& g) {
        const Tensor& A = t.value(a);
        Tensor da = g;
        for (std::size_t i = 0; i < g.size(); ++i) {
            if (A.buffer()[i] <= 0.0) da.buffer()[i] *= slope;
        }
        t.accumulate(a, da);
    });
}

int Tape::softplus(int a) {
    Tensor C = value(a);
    for (auto& x : C.buffer()) x = stable_softplus(x);
    return push(std::move(C), [a](Tape& t, const Tensor& g) {
        const Tensor& A = t.value(a);
        Tensor da = g;
        for (std::size_t i = 0; i < g.size(); ++i) da.buffer()[i] *= stable_sigmoid(A.buffer()[i]);
        t.accumulate(a, da);
    });
}

int Tape::sigmoid(int a) {
    Tensor C = value(a);
    for (auto& x : C.buffer()) x = stable_sigmoid(x);
    const int out = push(std::move(C), nullptr);
    nodes_[out].back = [a, out](Tape& t, const Tensor& g) {
        const Tensor& Y = t.value(out);
        Tensor da = g;
        for (std::size_t i = 0; i < g.size(); ++i) {
            const double y = Y.buffer()[i];
            da.buffer()[i] *= y * (1.0 - y);
        }
        t.accumulate(a, da);
    };
    return out;
}

int Tape::square(int a) {
    Tensor C = value(a);
    for (auto& x : C.buffer()) x *= x;
    return push(std::move(C), [a](Tape& t, const Tensor& g) {
        const Tensor& A = t.value(a);
        Tensor da = g;
        for (std::size_t i = 0; i < g.size(); ++i) da.buffer()[i] *= 2.0 * A.buffer()[i];
        t.accumulate(a, da);
    });
}

int Tape::sparse_matmul(const SparseMat& s, int x) {
    Tensor C = s.multiply(value(x));
    return push(std::move(C), [s, x](Tape& t, const Tensor& g) {
        const Tensor& X = t.value(x);
        Tensor dx = Tensor::zeros(X.rows(), X.cols());
        s.add_transpose_multiply(g, dx);
        t.accumulate(x, dx);
    });
}

int Tape::gather_rows(int x, std::vector<std::size_t> idx) {
    const Tensor& X = value(x);
    Tensor C(idx.size(), X.cols());
    for (std::size_t e = 0; e < idx.size(); ++e) {
        if (idx[e] >= X.rows()) throw ShapeMismatch("gather index out of range");
        const double* src = X.data() + idx[e] * X.cols();
        double* dst = C.data() + e * C.cols();
        for (std::size_t j = 0; j < X.cols(); ++j) dst[j] = src[j];
    }
    return push(std::move(C), [x, idx = std::move(idx)](Tape& t, const Tensor& g) {
        const Tensor& X = t.value(x);
        Tensor dx = Tensor::zeros(X.rows(), X.cols());
        for (std::size_t e = 0; e < idx.size(); ++e) {
            double* dst = dx.data() + idx[e] * dx.cols();
            const double* src = g.data() + e * g.cols();
            for (std::size_t j = 0; j < g.cols(); ++j) dst[j] += src[j];
        }
        t.accumulate(x, dx);
    });
}

int Tape::scatter_sum_rows(int x, std::vector<std::size_t> idx, std::size_t out_rows) {
    const Tensor& X = value(x);
    if (idx.size() != X.rows()) throw ShapeMismatch("scatter index count mismatch");
    Tensor C(out_rows, X.cols());
    for (std::size_t e = 0; e < idx.size(); ++e) {
        if (idx[e] >= out_rows) throw ShapeMismatch("scatter index out of range");
        double* dst = C.data() + idx[e] * C.cols();
        const double* src = X.data() + e * X.cols();
        for (std::size_t j = 0; j < X.cols(); ++j) dst[j] += src[j];
    }
    return push(std::move(C), [x, idx = std::move(idx)](Tape& t, const Tensor& g) {
        const Tensor& X = t.value(x);
        Tensor dx(X.rows(), X.cols());
        for (std::size_t e = 0; e < idx.size(); ++e) {
            double* dst = dx.data() + e * dx.cols();
            const double* src = g.data() + idx[e] * g.cols();
            for (std::size_t j = 0; j < g.cols(); ++j) dst[j] = src[j];
        }
        t.accumulate(x, dx);
    });
}

int Tape::segment_softmax(int scores, std::vector<std::size_t> seg, std::size_t n_segments) {
    const Tensor& S = value(scores);
    if (S.cols() != 1 || seg.size() != S.rows()) throw ShapeMismatch("segment softmax shape");
    std::vector<double> seg_max(n_segments, -1e300);
    for (std::size_t e = 0; e < seg.size(); ++e) {
        if (seg[e] >= n_segments) throw ShapeMismatch("segment id out of range");
        seg_max[seg[e]] = std::max(seg_max[seg[e]], S(e, 0));
    }
    Tensor C(S.rows(), 1);
    std::vector<double> seg_sum(n_segments, 0.0);
    for (std::size_t e = 0; e < seg.size(); ++e) {
        C(e, 0) = std::exp(S(e, 0) - seg_max[seg[e]]);
        seg_sum[seg[e]] += C(e, 0);
    }
    for (std::size_t e = 0; e < seg.size(); ++e) C(e, 0) /= seg_sum[seg[e]];
    const int out = push(std::move(C), nullptr);
    nodes_[out].back = [scores, out, seg = std::move(seg), n_segments](Tape& t, const Tensor& g) {
        const Tensor& Y = t.value(out);
        std::vector<double> seg_dot(n_segments, 0.0);
        for (std::size_t e = 0; e < seg.size(); ++e) seg_dot[seg[e]] += g(e, 0) * Y(e, 0);
        Tensor ds(Y.rows(), 1);
        for (std::size_t e = 0; e < seg.size(); ++e) {
            ds(e, 0) = Y(e, 0) * (g(e, 0) - seg_dot[seg[e]]);
        }
        t.accumulate(scores, ds);
    };
    return out;
}

int Tape::row_sum(int a) {
    const Tensor& A = value(a);
    Tensor C(A.rows(), 1);
    for (std::size_t i = 0; i < A.rows(); ++i) {
        const double* arow = A.data() + i * A.cols();
        double acc = 0.0;
        for (std::size_t j = 0; j < A.cols(); ++j) acc += arow[j];
        C(i, 0) = acc;
    }
    return push(std::move(C), [a](Tape& t, const Tensor& g) {
        const Tensor& A = t.value(a);
        Tensor da(A.rows(), A.cols());
        for (std::size_t i = 0; i < A.rows(); ++i) {
            double* darow = da.data() + i * da.cols();
            for (std::size_t j = 0; j < A.cols(); ++j) darow[j] = g(i, 0);
        }
        t.accumulate(a, da);
    });
}

int Tape::sum(int a) {
    const Tensor& A = value(a);
    double acc = 0.0;
    for (double x : A.buffer()) acc += x;
    Tensor C(1, 1);
    C(0, 0) = acc;
    return push(std::move(C), [a](Tape& t, const Tensor& g) {
        const Tensor& A = t.value(a);
        Tensor da(A.rows(), A.cols(), g(0, 0));
        t.accumulate(a, da);
    });
}

}  // namespace oma
