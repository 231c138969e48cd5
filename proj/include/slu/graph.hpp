#pragma once

#include <cmath>
#include <functional>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include "slu/tensor.hpp"

namespace slu {

// Deterministic RNG with explicit transforms so sequences do not depend on
// the standard library's distribution implementations.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    double uniform(double lo, double hi) {
        double u = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
        return lo + (hi - lo) * u;
    }

    // Box-Muller, one draw per call.
    double normal(double mean, double stddev) {
        double u1 = 0.0;
        while (u1 <= 0.0) u1 = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
        double u2 = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
        double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
        return mean + stddev * z;
    }

    std::uint64_t next() { return engine_(); }

    // Fisher-Yates, stable across standard libraries.
    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(engine_() % i);
            std::swap(items[i - 1], items[j]);
        }
    }

  private:
    std::mt19937_64 engine_;
};

// Handle to a node in a Graph.
struct Var {
    int id = -1;
    bool valid() const { return id >= 0; }
};

// Dynamic computation graph with reverse-mode gradients. Nodes are appended
// in topological order, so backpropagation is a reverse sweep over the node
// list. One Graph per forward pass; parameters are viewed, not copied.
//
// With recording disabled the graph only computes values (inference mode).
template <typename S>
class Graph {
  public:
    explicit Graph(bool recording = true) : recording_(recording) {}
    Graph(const Graph&) = delete;
    Graph& operator=(const Graph&) = delete;

    bool recording() const { return recording_; }

    // ---- leaves ----

    Var input(Shape shape, std::span<const S> data) {
        if (static_cast<std::int64_t>(data.size()) != numel(shape))
            throw ShapeError("input data does not match shape " + shape_str(shape));
        Node n(std::move(shape));
        n.val_store.assign(data.begin(), data.end());
        return push(std::move(n), false);
    }

    Var zeros(Shape shape) {
        Node n(std::move(shape));
        n.val_store.assign(static_cast<std::size_t>(numel(n.shape)), S(0));
        return push(std::move(n), false);
    }

    Var scalar(S x) { return input(Shape{}, std::span<const S>(&x, 1)); }

    // Parameter leaf: values are viewed in place, gradients accumulate in a
    // graph-owned buffer read back via grad().
    Var leaf(const Parameter<S>& p) {
        Node n(p.value.shape);
        n.external_val = p.value.data.data();
        return push(std::move(n), p.requires_grad);
    }

    // ---- elementwise and linear algebra ----

    Var add(Var a, Var b) {
        check_same_shape(a, b, "add");
        Node n(shape(a));
        binary_loop(n, a, b, [](S x, S y) { return x + y; });
        Var out = push_with_inputs(std::move(n), {a, b});
        if (should_record(out)) {
            set_backward(out, [a, b, out](Graph& g) {
                g.axpy(a, S(1), g.grad_span(out));
                g.axpy(b, S(1), g.grad_span(out));
            });
        }
        return out;
    }

    Var sub(Var a, Var b) {
        check_same_shape(a, b, "sub");
        Node n(shape(a));
        binary_loop(n, a, b, [](S x, S y) { return x - y; });
        Var out = push_with_inputs(std::move(n), {a, b});
        if (should_record(out)) {
            set_backward(out, [a, b, out](Graph& g) {
                g.axpy(a, S(1), g.grad_span(out));
                g.axpy(b, S(-1), g.grad_span(out));
            });
        }
        return out;
    }

    Var mul(Var a, Var b) {  // hadamard
        check_same_shape(a, b, "mul");
        Node n(shape(a));
        binary_loop(n, a, b, [](S x, S y) { return x * y; });
        Var out = push_with_inputs(std::move(n), {a, b});
        if (should_record(out)) {
            set_backward(out, [a, b, out](Graph& g) {
                auto go = g.grad_span(out);
                auto va = g.value(a);
                auto vb = g.value(b);
                auto ga = g.grad_span(a);
                auto gb = g.grad_span(b);
                for (std::size_t i = 0; i < go.size(); ++i) {
                    ga[i] += go[i] * vb[i];
                    gb[i] += go[i] * va[i];
                }
            });
        }
        return out;
    }

    Var scale(Var x, S c) {
        Node n(shape(x));
        unary_loop(n, x, [c](S v) { return c * v; });
        Var out = push_with_inputs(std::move(n), {x});
        if (should_record(out)) {
            set_backward(out, [x, c, out](Graph& g) { g.axpy(x, c, g.grad_span(out)); });
        }
        return out;
    }

    // y = s * x where s is a scalar node.
    Var scale_by(Var x, Var s) {
        check_scalar(s, "scale_by");
        S sv = value(s)[0];
        Node n(shape(x));
        unary_loop(n, x, [sv](S v) { return sv * v; });
        Var out = push_with_inputs(std::move(n), {x, s});
        if (should_record(out)) {
            set_backward(out, [x, s, sv, out](Graph& g) {
                auto go = g.grad_span(out);
                auto vx = g.value(x);
                auto gx = g.grad_span(x);
                S ds = 0;
                for (std::size_t i = 0; i < go.size(); ++i) {
                    gx[i] += sv * go[i];
                    ds += go[i] * vx[i];
                }
                g.grad_span(s)[0] += ds;
            });
        }
        return out;
    }

    Var sigmoid(Var x) {
        Node n(shape(x));
        unary_loop(n, x, [](S v) { return stable_sigmoid(v); });
        Var out = push_with_inputs(std::move(n), {x});
        if (should_record(out)) {
            set_backward(out, [x, out](Graph& g) {
                auto go = g.grad_span(out);
                auto y = g.value(out);
                auto gx = g.grad_span(x);
                for (std::size_t i = 0; i < go.size(); ++i) gx[i] += go[i] * y[i] * (S(1) - y[i]);
            });
        }
        return out;
    }

    Var tanh_(Var x) {
        Node n(shape(x));
        unary_loop(n, x, [](S v) { return std::tanh(v); });
        Var out = push_with_inputs(std::move(n), {x});
        if (should_record(out)) {
            set_backward(out, [x, out](Graph& g) {
                auto go = g.grad_span(out);
                auto y = g.value(out);
                auto gx = g.grad_span(x);
                for (std::size_t i = 0; i < go.size(); ++i) gx[i] += go[i] * (S(1) - y[i] * y[i]);
            });
        }
        return out;
    }

    // Inverted dropout; scales kept activations by 1/(1-rate).
    Var dropout(Var x, double rate, Rng& rng) {
        if (rate <= 0.0) return x;
        if (rate >= 1.0) throw ContractError("dropout rate must be < 1");
        auto vx = value(x);
        std::vector<S> mask(vx.size());
        S keep_scale = static_cast<S>(1.0 / (1.0 - rate));
        for (auto& m : mask) m = rng.uniform(0.0, 1.0) < rate ? S(0) : keep_scale;
        Node n(shape(x));
        n.val_store.resize(vx.size());
        for (std::size_t i = 0; i < vx.size(); ++i) n.val_store[i] = vx[i] * mask[i];
        Var out = push_with_inputs(std::move(n), {x});
        if (should_record(out)) {
            set_backward(out, [x, out, mask = std::move(mask)](Graph& g) {
                auto go = g.grad_span(out);
                auto gx = g.grad_span(x);
                for (std::size_t i = 0; i < go.size(); ++i) gx[i] += go[i] * mask[i];
            });
        }
        return out;
    }

    // General matrix product with transpose flags: op(A) * op(B).
    Var matmul(Var a, Var b, bool trans_a = false, bool trans_b = false) {
        check_rank(a, 2, "matmul");
        check_rank(b, 2, "matmul");
        int m = trans_a ? shape(a)[1] : shape(a)[0];
        int k = trans_a ? shape(a)[0] : shape(a)[1];
        int kb = trans_b ? shape(b)[1] : shape(b)[0];
        int ncols = trans_b ? shape(b)[0] : shape(b)[1];
        if (k != kb)
            throw ShapeError("matmul: inner dimensions differ, " + shape_str(shape(a)) +
                             (trans_a ? "^T" : "") + " * " + shape_str(shape(b)) +
                             (trans_b ? "^T" : ""));
        Node n(Shape{m, ncols});
        n.val_store.assign(static_cast<std::size_t>(m) * ncols, S(0));
        gemm_acc(n.val_store.data(), value(a).data(), shape(a), trans_a, value(b).data(), shape(b),
                 trans_b);
        Var out = push_with_inputs(std::move(n), {a, b});
        if (should_record(out)) {
            set_backward(out, [a, b, trans_a, trans_b, out](Graph& g) {
                const S* gout = g.grad_span(out).data();
                Shape gshape = g.shape(out);
                // dA += (ta ? op(B) dC^T : dC op(B)^T), folded into flags.
                if (!trans_a)
                    g.gemm_acc(g.grad_span(a).data(), gout, gshape, false, g.value(b).data(),
                               g.shape(b), !trans_b);
                else
                    g.gemm_acc(g.grad_span(a).data(), g.value(b).data(), g.shape(b), trans_b, gout,
                               gshape, true);
                if (!trans_b)
                    g.gemm_acc(g.grad_span(b).data(), g.value(a).data(), g.shape(a), !trans_a, gout,
                               gshape, false);
                else
                    g.gemm_acc(g.grad_span(b).data(), gout, gshape, true, g.value(a).data(),
                               g.shape(a), trans_a);
            });
        }
        return out;
    }

    // y = W x for rank-2 W and rank-1 x.
    Var matvec(Var w, Var x) {
        check_rank(w, 2, "matvec");
        check_rank(x, 1, "matvec");
        int r = shape(w)[0], c = shape(w)[1];
        if (c != shape(x)[0])
            throw ShapeError("matvec: " + shape_str(shape(w)) + " * " + shape_str(shape(x)));
        Node n(Shape{r});
        n.val_store.assign(static_cast<std::size_t>(r), S(0));
        const S* wv = value(w).data();
        const S* xv = value(x).data();
        for (int i = 0; i < r; ++i) {
            S acc = 0;
            const S* row = wv + static_cast<std::size_t>(i) * c;
            for (int j = 0; j < c; ++j) acc += row[j] * xv[j];
            n.val_store[static_cast<std::size_t>(i)] = acc;
        }
        Var out = push_with_inputs(std::move(n), {w, x});
        if (should_record(out)) {
            set_backward(out, [w, x, r, c, out](Graph& g) {
                auto go = g.grad_span(out);
                const S* wv = g.value(w).data();
                const S* xv = g.value(x).data();
                S* gw = g.grad_span(w).data();
                S* gx = g.grad_span(x).data();
                for (int i = 0; i < r; ++i) {
                    S gi = go[static_cast<std::size_t>(i)];
                    if (gi == S(0)) continue;
                    S* gw_row = gw + static_cast<std::size_t>(i) * c;
                    const S* w_row = wv + static_cast<std::size_t>(i) * c;
                    for (int j = 0; j < c; ++j) {
                        gw_row[j] += gi * xv[j];
                        gx[j] += gi * w_row[j];
                    }
                }
            });
        }
        return out;
    }

    // Adds a row vector to every row of a matrix.
    Var add_rows(Var m, Var v) {
        check_rank(m, 2, "add_rows");
        check_rank(v, 1, "add_rows");
        int r = shape(m)[0], c = shape(m)[1];
        if (c != shape(v)[0])
            throw ShapeError("add_rows: " + shape_str(shape(m)) + " + " + shape_str(shape(v)));
        Node n(shape(m));
        n.val_store.resize(static_cast<std::size_t>(r) * c);
        const S* mv = value(m).data();
        const S* vv = value(v).data();
        for (int i = 0; i < r; ++i)
            for (int j = 0; j < c; ++j)
                n.val_store[static_cast<std::size_t>(i) * c + j] =
                    mv[static_cast<std::size_t>(i) * c + j] + vv[j];
        Var out = push_with_inputs(std::move(n), {m, v});
        if (should_record(out)) {
            set_backward(out, [m, v, r, c, out](Graph& g) {
                auto go = g.grad_span(out);
                g.axpy(m, S(1), go);
                S* gv = g.grad_span(v).data();
                for (int i = 0; i < r; ++i)
                    for (int j = 0; j < c; ++j) gv[j] += go[static_cast<std::size_t>(i) * c + j];
            });
        }
        return out;
    }

    // ---- shuffling values around ----

    Var concat(std::span<const Var> parts) {
        if (parts.empty()) throw ContractError("concat: no inputs");
        int total = 0;
        for (Var p : parts) {
            check_rank(p, 1, "concat");
            total += shape(p)[0];
        }
        Node n(Shape{total});
        n.val_store.reserve(static_cast<std::size_t>(total));
        for (Var p : parts) {
            auto v = value(p);
            n.val_store.insert(n.val_store.end(), v.begin(), v.end());
        }
        std::vector<Var> in(parts.begin(), parts.end());
        Var out = push_with_inputs(std::move(n), in);
        if (should_record(out)) {
            set_backward(out, [in, out](Graph& g) {
                auto go = g.grad_span(out);
                std::size_t off = 0;
                for (Var p : in) {
                    auto gp = g.grad_span(p);
                    for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += go[off + i];
                    off += gp.size();
                }
            });
        }
        return out;
    }

    Var concat(std::initializer_list<Var> parts) {
        return concat(std::span<const Var>(parts.begin(), parts.size()));
    }

    Var slice(Var x, int offset, int len) {
        check_rank(x, 1, "slice");
        if (offset < 0 || len <= 0 || offset + len > shape(x)[0])
            throw ShapeError("slice [" + std::to_string(offset) + ", " +
                             std::to_string(offset + len) + ") out of " + shape_str(shape(x)));
        Node n(Shape{len});
        auto v = value(x);
        n.val_store.assign(v.begin() + offset, v.begin() + offset + len);
        Var out = push_with_inputs(std::move(n), {x});
        if (should_record(out)) {
            set_backward(out, [x, offset, len, out](Graph& g) {
                auto go = g.grad_span(out);
                auto gx = g.grad_span(x);
                for (int i = 0; i < len; ++i) gx[static_cast<std::size_t>(offset + i)] += go[static_cast<std::size_t>(i)];
            });
        }
        return out;
    }

    Var stack_rows(std::span<const Var> rows) {
        if (rows.empty()) throw ContractError("stack_rows: no inputs");
        check_rank(rows[0], 1, "stack_rows");
        int d = shape(rows[0])[0];
        Node n(Shape{static_cast<int>(rows.size()), d});
        n.val_store.reserve(rows.size() * static_cast<std::size_t>(d));
        for (Var r : rows) {
            check_rank(r, 1, "stack_rows");
            if (shape(r)[0] != d) throw ShapeError("stack_rows: rows of unequal size");
            auto v = value(r);
            n.val_store.insert(n.val_store.end(), v.begin(), v.end());
        }
        std::vector<Var> in(rows.begin(), rows.end());
        Var out = push_with_inputs(std::move(n), in);
        if (should_record(out)) {
            set_backward(out, [in, d, out](Graph& g) {
                auto go = g.grad_span(out);
                for (std::size_t t = 0; t < in.size(); ++t) {
                    auto gr = g.grad_span(in[t]);
                    for (int j = 0; j < d; ++j) gr[static_cast<std::size_t>(j)] += go[t * d + j];
                }
            });
        }
        return out;
    }

    Var row(Var m, int r) {
        check_rank(m, 2, "row");
        int rows_n = shape(m)[0], c = shape(m)[1];
        if (r < 0 || r >= rows_n)
            throw ShapeError("row " + std::to_string(r) + " out of " + shape_str(shape(m)));
        Node n(Shape{c});
        auto v = value(m);
        n.val_store.assign(v.begin() + static_cast<std::size_t>(r) * c,
                           v.begin() + static_cast<std::size_t>(r + 1) * c);
        Var out = push_with_inputs(std::move(n), {m});
        if (should_record(out)) {
            set_backward(out, [m, r, c, out](Graph& g) {
                auto go = g.grad_span(out);
                auto gm = g.grad_span(m);
                for (int j = 0; j < c; ++j) gm[static_cast<std::size_t>(r) * c + j] += go[static_cast<std::size_t>(j)];
            });
        }
        return out;
    }

    Var col_slice(Var m, int offset, int len) {
        check_rank(m, 2, "col_slice");
        int r = shape(m)[0], c = shape(m)[1];
        if (offset < 0 || len <= 0 || offset + len > c)
            throw ShapeError("col_slice [" + std::to_string(offset) + ", " +
                             std::to_string(offset + len) + ") out of " + shape_str(shape(m)));
        Node n(Shape{r, len});
        n.val_store.resize(static_cast<std::size_t>(r) * len);
        const S* mv = value(m).data();
        for (int i = 0; i < r; ++i)
            for (int j = 0; j < len; ++j)
                n.val_store[static_cast<std::size_t>(i) * len + j] =
                    mv[static_cast<std::size_t>(i) * c + offset + j];
        Var out = push_with_inputs(std::move(n), {m});
        if (should_record(out)) {
            set_backward(out, [m, offset, len, r, c, out](Graph& g) {
                auto go = g.grad_span(out);
                S* gm = g.grad_span(m).data();
                for (int i = 0; i < r; ++i)
                    for (int j = 0; j < len; ++j)
                        gm[static_cast<std::size_t>(i) * c + offset + j] +=
                            go[static_cast<std::size_t>(i) * len + j];
            });
        }
        return out;
    }

    Var concat_cols(std::span<const Var> parts) {
        if (parts.empty()) throw ContractError("concat_cols: no inputs");
        check_rank(parts[0], 2, "concat_cols");
        int r = shape(parts[0])[0];
        int total = 0;
        for (Var p : parts) {
            check_rank(p, 2, "concat_cols");
            if (shape(p)[0] != r) throw ShapeError("concat_cols: row counts differ");
            total += shape(p)[1];
        }
        Node n(Shape{r, total});
        n.val_store.resize(static_cast<std::size_t>(r) * total);
        int off = 0;
        for (Var p : parts) {
            int c = shape(p)[1];
            const S* pv = value(p).data();
            for (int i = 0; i < r; ++i)
                for (int j = 0; j < c; ++j)
                    n.val_store[static_cast<std::size_t>(i) * total + off + j] =
                        pv[static_cast<std::size_t>(i) * c + j];
            off += c;
        }
        std::vector<Var> in(parts.begin(), parts.end());
        Var out = push_with_inputs(std::move(n), in);
        if (should_record(out)) {
            set_backward(out, [in, r, total, out](Graph& g) {
                auto go = g.grad_span(out);
                int off = 0;
                for (Var p : in) {
                    int c = g.shape(p)[1];
                    S* gp = g.grad_span(p).data();
                    for (int i = 0; i < r; ++i)
                        for (int j = 0; j < c; ++j)
                            gp[static_cast<std::size_t>(i) * c + j] +=
                                go[static_cast<std::size_t>(i) * total + off + j];
                    off += c;
                }
            });
        }
        return out;
    }

    Var concat_cols(std::initializer_list<Var> parts) {
        return concat_cols(std::span<const Var>(parts.begin(), parts.size()));
    }

    // Embedding lookup: selects rows of a (V x d) table.
    Var rows(Var table, std::span<const int> ids) {
        check_rank(table, 2, "rows");
        if (ids.empty()) throw ContractError("rows: empty id sequence");
        int v = shape(table)[0], d = shape(table)[1];
        for (int id : ids)
            if (id < 0 || id >= v)
                throw ShapeError("rows: id " + std::to_string(id) + " out of table " +
                                 shape_str(shape(table)));
        Node n(Shape{static_cast<int>(ids.size()), d});
        n.val_store.resize(ids.size() * static_cast<std::size_t>(d));
        const S* tv = value(table).data();
        for (std::size_t t = 0; t < ids.size(); ++t)
            for (int j = 0; j < d; ++j)
                n.val_store[t * d + j] = tv[static_cast<std::size_t>(ids[t]) * d + j];
        std::vector<int> ids_copy(ids.begin(), ids.end());
        Var out = push_with_inputs(std::move(n), {table});
        if (should_record(out)) {
            set_backward(out, [table, d, ids_copy = std::move(ids_copy), out](Graph& g) {
                auto go = g.grad_span(out);
                S* gt = g.grad_span(table).data();
                for (std::size_t t = 0; t < ids_copy.size(); ++t)
                    for (int j = 0; j < d; ++j)
                        gt[static_cast<std::size_t>(ids_copy[t]) * d + j] += go[t * d + j];
            });
        }
        return out;
    }

    // ---- reductions and probability ops ----

    Var dot(Var a, Var b) {
        check_rank(a, 1, "dot");
        check_same_shape(a, b, "dot");
        S acc = 0;
        auto va = value(a);
        auto vb = value(b);
        for (std::size_t i = 0; i < va.size(); ++i) acc += va[i] * vb[i];
        Node n{Shape{}};
        n.val_store.assign(1, acc);
        Var out = push_with_inputs(std::move(n), {a, b});
        if (should_record(out)) {
            set_backward(out, [a, b, out](Graph& g) {
                S go = g.grad_span(out)[0];
                auto va = g.value(a);
                auto vb = g.value(b);
                auto ga = g.grad_span(a);
                auto gb = g.grad_span(b);
                for (std::size_t i = 0; i < va.size(); ++i) {
                    ga[i] += go * vb[i];
                    gb[i] += go * va[i];
                }
            });
        }
        return out;
    }

    // u^T W v -> scalar.
    Var bilinear(Var u, Var w, Var v) {
        check_rank(u, 1, "bilinear");
        check_rank(w, 2, "bilinear");
        check_rank(v, 1, "bilinear");
        int r = shape(w)[0], c = shape(w)[1];
        if (shape(u)[0] != r || shape(v)[0] != c)
            throw ShapeError("bilinear: " + shape_str(shape(u)) + "^T " + shape_str(shape(w)) +
                             " " + shape_str(shape(v)));
        const S* uv = value(u).data();
        const S* wv = value(w).data();
        const S* vv = value(v).data();
        S acc = 0;
        for (int i = 0; i < r; ++i) {
            S rowdot = 0;
            const S* wrow = wv + static_cast<std::size_t>(i) * c;
            for (int j = 0; j < c; ++j) rowdot += wrow[j] * vv[j];
            acc += uv[static_cast<std::size_t>(i)] * rowdot;
        }
        Node n{Shape{}};
        n.val_store.assign(1, acc);
        Var out = push_with_inputs(std::move(n), {u, w, v});
        if (should_record(out)) {
            set_backward(out, [u, w, v, r, c, out](Graph& g) {
                S go = g.grad_span(out)[0];
                const S* uv = g.value(u).data();
                const S* wv = g.value(w).data();
                const S* vv = g.value(v).data();
                S* gu = g.grad_span(u).data();
                S* gw = g.grad_span(w).data();
                S* gv = g.grad_span(v).data();
                for (int i = 0; i < r; ++i) {
                    const S* wrow = wv + static_cast<std::size_t>(i) * c;
                    S* gwrow = gw + static_cast<std::size_t>(i) * c;
                    S ui = uv[static_cast<std::size_t>(i)];
                    S rowdot = 0;
                    for (int j = 0; j < c; ++j) {
                        rowdot += wrow[j] * vv[j];
                        gwrow[j] += go * ui * vv[j];
                        gv[j] += go * ui * wrow[j];
                    }
                    gu[static_cast<std::size_t>(i)] += go * rowdot;
                }
            });
        }
        return out;
    }

    // s_j = sum_t w_t * M[t][j].
    Var weighted_row_sum(Var m, Var w) {
        check_rank(m, 2, "weighted_row_sum");
        check_rank(w, 1, "weighted_row_sum");
        int r = shape(m)[0], c = shape(m)[1];
        if (shape(w)[0] != r)
            throw ShapeError("weighted_row_sum: " + shape_str(shape(m)) + " with weights " +
                             shape_str(shape(w)));
        Node n(Shape{c});
        n.val_store.assign(static_cast<std::size_t>(c), S(0));
        const S* mv = value(m).data();
        const S* wv = value(w).data();
        for (int t = 0; t < r; ++t) {
            S wt = wv[static_cast<std::size_t>(t)];
            const S* mrow = mv + static_cast<std::size_t>(t) * c;
            for (int j = 0; j < c; ++j) n.val_store[static_cast<std::size_t>(j)] += wt * mrow[j];
        }
        Var out = push_with_inputs(std::move(n), {m, w});
        if (should_record(out)) {
            set_backward(out, [m, w, r, c, out](Graph& g) {
                auto go = g.grad_span(out);
                const S* mv = g.value(m).data();
                const S* wv = g.value(w).data();
                S* gm = g.grad_span(m).data();
                S* gw = g.grad_span(w).data();
                for (int t = 0; t < r; ++t) {
                    S wt = wv[static_cast<std::size_t>(t)];
                    const S* mrow = mv + static_cast<std::size_t>(t) * c;
                    S* gmrow = gm + static_cast<std::size_t>(t) * c;
                    S acc = 0;
                    for (int j = 0; j < c; ++j) {
                        gmrow[j] += wt * go[static_cast<std::size_t>(j)];
                        acc += mrow[j] * go[static_cast<std::size_t>(j)];
                    }
                    gw[static_cast<std::size_t>(t)] += acc;
                }
            });
        }
        return out;
    }

    Var mean_rows(Var m) {
        check_rank(m, 2, "mean_rows");
        int r = shape(m)[0], c = shape(m)[1];
        Node n(Shape{c});
        n.val_store.assign(static_cast<std::size_t>(c), S(0));
        const S* mv = value(m).data();
        for (int t = 0; t < r; ++t)
            for (int j = 0; j < c; ++j)
                n.val_store[static_cast<std::size_t>(j)] += mv[static_cast<std::size_t>(t) * c + j];
        S inv = S(1) / static_cast<S>(r);
        for (auto& x : n.val_store) x *= inv;
        Var out = push_with_inputs(std::move(n), {m});
        if (should_record(out)) {
            set_backward(out, [m, r, c, inv, out](Graph& g) {
                auto go = g.grad_span(out);
                S* gm = g.grad_span(m).data();
                for (int t = 0; t < r; ++t)
                    for (int j = 0; j < c; ++j)
                        gm[static_cast<std::size_t>(t) * c + j] += inv * go[static_cast<std::size_t>(j)];
            });
        }
        return out;
    }

    // Row-wise stable softmax of a matrix (rank 1 treated as one row).
    Var softmax_rows(Var m) {
        bool vec = rank(m) == 1;
        int r = vec ? 1 : shape(m)[0];
        int c = vec ? shape(m)[0] : shape(m)[1];
        Node n(shape(m));
        n.val_store.resize(static_cast<std::size_t>(r) * c);
        const S* mv = value(m).data();
        for (int i = 0; i < r; ++i)
            softmax_row(mv + static_cast<std::size_t>(i) * c,
                        n.val_store.data() + static_cast<std::size_t>(i) * c, c);
        Var out = push_with_inputs(std::move(n), {m});
        if (should_record(out)) {
            set_backward(out, [m, r, c, out](Graph& g) {
                auto go = g.grad_span(out);
                auto y = g.value(out);
                S* gm = g.grad_span(m).data();
                for (int i = 0; i < r; ++i) {
                    const S* yrow = y.data() + static_cast<std::size_t>(i) * c;
                    const S* grow = go.data() + static_cast<std::size_t>(i) * c;
                    S dotgy = 0;
                    for (int j = 0; j < c; ++j) dotgy += grow[j] * yrow[j];
                    S* gmrow = gm + static_cast<std::size_t>(i) * c;
                    for (int j = 0; j < c; ++j) gmrow[j] += yrow[j] * (grow[j] - dotgy);
                }
            });
        }
        return out;
    }

    // Stable softmax + negative log likelihood. Returns the scalar loss node
    // and the (detached) probability vector.
    std::pair<Var, std::vector<S>> softmax_cross_entropy(Var logits, int gold) {
        check_rank(logits, 1, "softmax_cross_entropy");
        int c = shape(logits)[0];
        if (gold < 0 || gold >= c)
            throw ContractError("softmax_cross_entropy: gold index " + std::to_string(gold) +
                                " out of range [0, " + std::to_string(c) + ")");
        std::vector<S> probs(static_cast<std::size_t>(c));
        const S* lv = value(logits).data();
        S maxv = lv[0];
        for (int j = 1; j < c; ++j) maxv = std::max(maxv, lv[j]);
        S sum = 0;
        for (int j = 0; j < c; ++j) {
            probs[static_cast<std::size_t>(j)] = std::exp(lv[j] - maxv);
            sum += probs[static_cast<std::size_t>(j)];
        }
        for (auto& p : probs) p /= sum;
        // loss = -(logit[gold] - max - log(sum)) keeps full precision.
        S loss = -(lv[gold] - maxv - std::log(sum));
        Node n{Shape{}};
        n.val_store.assign(1, loss);
        Var out = push_with_inputs(std::move(n), {logits});
        if (should_record(out)) {
            set_backward(out, [logits, gold, probs, out](Graph& g) {
                S go = g.grad_span(out)[0];
                auto gl = g.grad_span(logits);
                for (std::size_t j = 0; j < probs.size(); ++j) {
                    S indicator = static_cast<int>(j) == gold ? S(1) : S(0);
                    gl[j] += go * (probs[j] - indicator);
                }
            });
        }
        return {out, std::move(probs)};
    }

    Var add_scalars(std::span<const Var> xs) {
        if (xs.empty()) throw ContractError("add_scalars: no inputs");
        S acc = 0;
        for (Var x : xs) {
            check_scalar(x, "add_scalars");
            acc += value(x)[0];
        }
        Node n{Shape{}};
        n.val_store.assign(1, acc);
        std::vector<Var> in(xs.begin(), xs.end());
        Var out = push_with_inputs(std::move(n), in);
        if (should_record(out)) {
            set_backward(out, [in, out](Graph& g) {
                S go = g.grad_span(out)[0];
                for (Var x : in) g.grad_span(x)[0] += go;
            });
        }
        return out;
    }

    // ---- access & backward ----

    const Shape& shape(Var v) const { return node(v).shape; }
    int rank(Var v) const { return static_cast<int>(node(v).shape.size()); }

    std::span<const S> value(Var v) const {
        const Node& n = node(v);
        return {n.val(), n.count()};
    }

    std::span<const S> grad(Var v) const {
        const Node& n = node(v);
        if (n.grad_store.empty()) throw ContractError("no gradient recorded for this node");
        return {n.grad_store.data(), n.grad_store.size()};
    }

    bool requires_grad(Var v) const { return node(v).needs_grad; }

    void backward(Var loss) {
        if (!recording_) throw ContractError("backward() on a non-recording graph");
        check_scalar(loss, "backward");
        node_mut(loss).grad_store[0] = S(1);
        for (int i = loss.id; i >= 0; --i) {
            Node& n = nodes_[static_cast<std::size_t>(i)];
            if (n.needs_grad && n.backward) n.backward(*this);
        }
    }

    std::size_t node_count() const { return nodes_.size(); }

  private:
    struct Node {
        explicit Node(Shape s) : shape(std::move(s)) {}
        Shape shape;
        std::vector<S> val_store;
        const S* external_val = nullptr;  // parameter leaves view their data
        std::vector<S> grad_store;
        bool needs_grad = false;
        std::function<void(Graph&)> backward;

        const S* val() const { return external_val ? external_val : val_store.data(); }
        std::size_t count() const {
            return external_val ? static_cast<std::size_t>(numel(shape)) : val_store.size();
        }
    };

    const Node& node(Var v) const {
        if (!v.valid() || v.id >= static_cast<int>(nodes_.size()))
            throw ContractError("invalid graph node handle");
        return nodes_[static_cast<std::size_t>(v.id)];
    }
    Node& node_mut(Var v) { return const_cast<Node&>(node(v)); }

    std::span<S> grad_span(Var v) {
        Node& n = node_mut(v);
        return {n.grad_store.data(), n.grad_store.size()};
    }

    Var push(Node&& n, bool needs) {
        n.needs_grad = needs && recording_;
        if (recording_) n.grad_store.assign(static_cast<std::size_t>(numel(n.shape)), S(0));
        nodes_.push_back(std::move(n));
        return Var{static_cast<int>(nodes_.size()) - 1};
    }

    Var push_with_inputs(Node&& n, std::span<const Var> inputs) {
        bool req = false;
        for (Var in : inputs) req = req || node(in).needs_grad;
        return push(std::move(n), req);
    }
    Var push_with_inputs(Node&& n, std::initializer_list<Var> inputs) {
        return push_with_inputs(std::move(n), std::span<const Var>(inputs.begin(), inputs.size()));
    }

    bool should_record(Var out) { return recording_ && node(out).needs_grad; }

    void set_backward(Var v, std::function<void(Graph&)> fn) {
        node_mut(v).backward = std::move(fn);
    }

    void check_rank(Var v, int r, const char* op) const {
        if (rank(v) != r)
            throw ShapeError(std::string(op) + ": expected rank " + std::to_string(r) + ", got " +
                             shape_str(shape(v)));
    }
    void check_scalar(Var v, const char* op) const {
        if (rank(v) != 0)
            throw ShapeError(std::string(op) + ": expected a scalar, got " + shape_str(shape(v)));
    }
    void check_same_shape(Var a, Var b, const char* op) const {
        if (shape(a) != shape(b))
            throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(shape(a)) + " vs " +
                             shape_str(shape(b)));
    }

    template <typename F>
    void unary_loop(Node& n, Var x, F f) {
        auto v = value(x);
        n.val_store.resize(v.size());
        for (std::size_t i = 0; i < v.size(); ++i) n.val_store[i] = f(v[i]);
    }
    template <typename F>
    void binary_loop(Node& n, Var a, Var b, F f) {
        auto va = value(a);
        auto vb = value(b);
        n.val_store.resize(va.size());
        for (std::size_t i = 0; i < va.size(); ++i) n.val_store[i] = f(va[i], vb[i]);
    }

    // dst += op(A) * op(B), all row-major.
    void gemm_acc(S* dst, const S* a, const Shape& ashape, bool ta, const S* b, const Shape& bshape,
                  bool tb) {
        int m = ta ? ashape[1] : ashape[0];
        int k = ta ? ashape[0] : ashape[1];
        int ncols = tb ? bshape[0] : bshape[1];
        int lda = ashape[1];
        int ldb = bshape[1];
        for (int i = 0; i < m; ++i) {
            S* drow = dst + static_cast<std::size_t>(i) * ncols;
            for (int p = 0; p < k; ++p) {
                S av = ta ? a[static_cast<std::size_t>(p) * lda + i]
                          : a[static_cast<std::size_t>(i) * lda + p];
                if (av == S(0)) continue;
                if (!tb) {
                    const S* brow = b + static_cast<std::size_t>(p) * ldb;
                    for (int j = 0; j < ncols; ++j) drow[j] += av * brow[j];
                } else {
                    for (int j = 0; j < ncols; ++j)
                        drow[j] += av * b[static_cast<std::size_t>(j) * ldb + p];
                }
            }
        }
    }

    void axpy(Var x, S alpha, std::span<const S> g) {
        auto gx = grad_span(x);
        for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += alpha * g[i];
    }

    static S stable_sigmoid(S x) {
        if (x >= S(0)) return S(1) / (S(1) + std::exp(-x));
        S e = std::exp(x);
        return e / (S(1) + e);
    }

    static void softmax_row(const S* in, S* out, int c) {
        S maxv = in[0];
        for (int j = 1; j < c; ++j) maxv = std::max(maxv, in[j]);
        S sum = 0;
        for (int j = 0; j < c; ++j) {
            out[j] = std::exp(in[j] - maxv);
            sum += out[j];
        }
        for (int j = 0; j < c; ++j) out[j] /= sum;
    }

    std::vector<Node> nodes_;
    bool recording_;
};

// Binds parameters of a store into a graph, one leaf per parameter, memoized.
// After backward(), accumulate_into() moves the collected gradients out.
template <typename S>
class ParamBinder {
  public:
    explicit ParamBinder(Graph<S>& g) : graph_(&g) {}

    Var operator()(const Parameter<S>& p) {
        auto it = bound_.find(&p);
        if (it != bound_.end()) return it->second;
        Var v = graph_->leaf(p);
        bound_.emplace(&p, v);
        return v;
    }
    Var operator()(const Parameter<S>* p) { return (*this)(*p); }

    void accumulate_into(GradMap<S>& grads) const {
        for (const auto& [param, var] : bound_) {
            if (!param->requires_grad) continue;
            grads.accumulate(param->name, graph_->grad(var));
        }
    }

  private:
    Graph<S>* graph_;
    std::unordered_map<const Parameter<S>*, Var> bound_;
};

// ---- neural primitives ----

// Gate packing order in the 4H rows of W_ih / W_hh / b: input, forget,
// candidate, output.
struct LstmWeightVars {
    Var W_ih, W_hh, b;
};

struct LstmStateVars {
    Var h, c;
};

template <typename S>
LstmStateVars lstm_cell_step(Graph<S>& g, Var x, LstmStateVars state, const LstmWeightVars& w) {
    int four_h = g.shape(w.b)[0];
    if (four_h % 4 != 0) throw ShapeError("lstm_cell_step: bias size must be 4*hidden");
    int h = four_h / 4;
    if (g.shape(state.h)[0] != h || g.shape(state.c)[0] != h)
        throw ShapeError("lstm_cell_step: state size does not match weights");
    Var gates = g.add(g.add(g.matvec(w.W_ih, x), g.matvec(w.W_hh, state.h)), w.b);
    Var i = g.sigmoid(g.slice(gates, 0, h));
    Var f = g.sigmoid(g.slice(gates, h, h));
    Var cand = g.tanh_(g.slice(gates, 2 * h, h));
    Var o = g.sigmoid(g.slice(gates, 3 * h, h));
    Var c_next = g.add(g.mul(f, state.c), g.mul(i, cand));
    Var h_next = g.mul(o, g.tanh_(c_next));
    return {h_next, c_next};
}

// Scaled dot-product self-attention with learned projections and optional
// multiple heads over column slices of the projected matrices.
template <typename S>
Var self_attention(Graph<S>& g, Var e, Var wq, Var wk, Var wv, int heads = 1) {
    if (g.shape(e)[0] < 1) throw ShapeError("self_attention: empty sequence");
    int d_attn = g.shape(wq)[1];
    if (heads < 1 || d_attn % heads != 0)
        throw ShapeError("self_attention: attention dim " + std::to_string(d_attn) +
                         " not divisible by " + std::to_string(heads) + " heads");
    Var q = g.matmul(e, wq);
    Var k = g.matmul(e, wk);
    Var v = g.matmul(e, wv);
    int dh = d_attn / heads;
    S inv_sqrt = static_cast<S>(1.0 / std::sqrt(static_cast<double>(dh)));
    std::vector<Var> outs;
    outs.reserve(static_cast<std::size_t>(heads));
    for (int hd = 0; hd < heads; ++hd) {
        Var qh = heads == 1 ? q : g.col_slice(q, hd * dh, dh);
        Var kh = heads == 1 ? k : g.col_slice(k, hd * dh, dh);
        Var vh = heads == 1 ? v : g.col_slice(v, hd * dh, dh);
        Var scores = g.scale(g.matmul(qh, kh, false, true), inv_sqrt);
        Var attn = g.softmax_rows(scores);
        outs.push_back(g.matmul(attn, vh));
    }
    return heads == 1 ? outs[0] : g.concat_cols(std::span<const Var>(outs.data(), outs.size()));
}

}  // namespace slu
