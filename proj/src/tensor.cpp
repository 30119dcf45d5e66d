#include "bcatsi/tensor.hpp"

#include <cmath>
#include <utility>

namespace bcatsi {

Mat::Mat(int r, int c, double value)
    : rows(r), cols(c), data(static_cast<std::size_t>(r) * static_cast<std::size_t>(c), value) {
    if (r < 0 || c < 0) throw ShapeError("Mat: negative dimension " + shape_str(r, c));
}

Mat Mat::eye(int n) {
    Mat m(n, n);
    for (int i = 0; i < n; ++i) m.at(i, i) = 1.0;
    return m;
}

Mat Mat::row_vector(std::vector<double> v) {
    Mat m;
    m.rows = 1;
    m.cols = static_cast<int>(v.size());
    m.data = std::move(v);
    return m;
}

Mat Mat::col_vector(std::vector<double> v) {
    Mat m;
    m.rows = static_cast<int>(v.size());
    m.cols = 1;
    m.data = std::move(v);
    return m;
}

Mat Mat::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    const int r = static_cast<int>(rows.size());
    const int c = r > 0 ? static_cast<int>(rows.begin()->size()) : 0;
    Mat m(r, c);
    int i = 0;
    for (const auto& rr : rows) {
        if (static_cast<int>(rr.size()) != c) {
            throw ShapeError("Mat::from_rows: ragged initializer");
        }
        int j = 0;
        for (double v : rr) m.at(i, j++) = v;
        ++i;
    }
    return m;
}

void Mat::fill(double v) {
    for (auto& x : data) x = v;
}

std::string shape_str(int rows, int cols) {
    return std::to_string(rows) + "x" + std::to_string(cols);
}

double sigmoid_stable(double x) {
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double softplus_stable(double x) {
    // log(1 + exp(x)) = max(x, 0) + log1p(exp(-|x|))
    return (x > 0.0 ? x : 0.0) + std::log1p(std::exp(-std::fabs(x)));
}

const Mat& Tensor::value() const {
    return tape->node(id).val;
}

double Tensor::scalar_value() const {
    if (rows != 1 || cols != 1) {
        throw ContractError("scalar_value: tensor is " + shape_str(rows, cols) + ", want 1x1");
    }
    return value().at(0, 0);
}

Parameter::Parameter(std::string n, int r, int c)
    : name(std::move(n)), value(r, c), grad(r, c) {}

// ---- tape -------------------------------------------------------------

Tensor Tape::push(Node n) {
    const int id = static_cast<int>(nodes_.size());
    Tensor t{this, id, n.val.rows, n.val.cols};
    nodes_.push_back(std::move(n));
    return t;
}

Tensor Tape::constant(Mat m) {
    Node n;
    n.op = Op::Constant;
    n.val = std::move(m);
    n.needs_grad = false;
    return push(std::move(n));
}

Tensor Tape::scalar(double v) {
    return constant(Mat(1, 1, v));
}

Tensor Tape::leaf(Parameter& p) {
    Node n;
    n.op = Op::Leaf;
    n.val = p.value;
    n.param = &p;
    n.needs_grad = true;
    return push(std::move(n));
}

const Mat& Tape::value(const Tensor& t) const {
    return node(t.id).val;
}

const Mat& Tape::grad(const Tensor& t) {
    ensure_grad(t.id);
    return node(t.id).grad;
}

void Tape::ensure_grad(int id) {
    Node& n = node(id);
    if (n.grad.size() == 0) {
        n.grad = Mat(n.val.rows, n.val.cols);
    }
}

namespace {

void check_same_shape(const char* what, const Tensor& a, const Tensor& b) {
    if (a.rows != b.rows || a.cols != b.cols) {
        throw ShapeError(std::string(what) + ": shape mismatch (" + shape_str(a.rows, a.cols) +
                         " vs " + shape_str(b.rows, b.cols) + ")");
    }
}

void check_same_tape(const char* what, const Tensor& a, const Tensor& b) {
    if (a.tape != b.tape) {
        throw ContractError(std::string(what) + ": operands live on different tapes");
    }
}

Tensor binary_elementwise(Op op, const char* what, Tensor a, Tensor b) {
    check_same_tape(what, a, b);
    check_same_shape(what, a, b);
    Tape& tape = *a.tape;
    const Mat& av = tape.node(a.id).val;
    const Mat& bv = tape.node(b.id).val;
    Node n;
    n.op = op;
    n.a = a.id;
    n.b = b.id;
    n.val = Mat(a.rows, a.cols);
    const int sz = n.val.size();
    switch (op) {
        case Op::Add:
            for (int i = 0; i < sz; ++i) n.val.data[i] = av.data[i] + bv.data[i];
            break;
        case Op::Sub:
            for (int i = 0; i < sz; ++i) n.val.data[i] = av.data[i] - bv.data[i];
            break;
        case Op::Mul:
            for (int i = 0; i < sz; ++i) n.val.data[i] = av.data[i] * bv.data[i];
            break;
        case Op::Div:
            for (int i = 0; i < sz; ++i) n.val.data[i] = av.data[i] / bv.data[i];
            break;
        case Op::Max:
            for (int i = 0; i < sz; ++i) {
                n.val.data[i] = av.data[i] >= bv.data[i] ? av.data[i] : bv.data[i];
            }
            break;
        default:
            throw ContractError("binary_elementwise: bad op");
    }
    n.needs_grad = tape.node(a.id).needs_grad || tape.node(b.id).needs_grad;
    return tape.push(std::move(n));
}

Tensor unary_elementwise(Op op, Tensor a) {
    Tape& tape = *a.tape;
    const Mat& av = tape.node(a.id).val;
    Node n;
    n.op = op;
    n.a = a.id;
    n.val = Mat(a.rows, a.cols);
    const int sz = n.val.size();
    switch (op) {
        case Op::Sigmoid:
            for (int i = 0; i < sz; ++i) n.val.data[i] = sigmoid_stable(av.data[i]);
            break;
        case Op::Tanh:
            for (int i = 0; i < sz; ++i) n.val.data[i] = std::tanh(av.data[i]);
            break;
        case Op::Relu:
            for (int i = 0; i < sz; ++i) n.val.data[i] = av.data[i] > 0.0 ? av.data[i] : 0.0;
            break;
        case Op::Softplus:
            for (int i = 0; i < sz; ++i) n.val.data[i] = softplus_stable(av.data[i]);
            break;
        case Op::Exp:
            for (int i = 0; i < sz; ++i) n.val.data[i] = std::exp(av.data[i]);
            break;
        case Op::Log:
            for (int i = 0; i < sz; ++i) n.val.data[i] = std::log(av.data[i]);
            break;
        default:
            throw ContractError("unary_elementwise: bad op");
    }
    n.needs_grad = tape.node(a.id).needs_grad;
    return tape.push(std::move(n));
}

} // namespace

Tensor add(Tensor a, Tensor b) { return binary_elementwise(Op::Add, "add", a, b); }
Tensor sub(Tensor a, Tensor b) { return binary_elementwise(Op::Sub, "sub", a, b); }
Tensor mul(Tensor a, Tensor b) { return binary_elementwise(Op::Mul, "mul", a, b); }
Tensor div(Tensor a, Tensor b) { return binary_elementwise(Op::Div, "div", a, b); }
Tensor emax(Tensor a, Tensor b) { return binary_elementwise(Op::Max, "emax", a, b); }

Tensor sigmoid(Tensor a) { return unary_elementwise(Op::Sigmoid, a); }
Tensor tanh(Tensor a) { return unary_elementwise(Op::Tanh, a); }
Tensor relu(Tensor a) { return unary_elementwise(Op::Relu, a); }
Tensor softplus(Tensor a) { return unary_elementwise(Op::Softplus, a); }
Tensor exp(Tensor a) { return unary_elementwise(Op::Exp, a); }
Tensor log(Tensor a) { return unary_elementwise(Op::Log, a); }

Tensor affine(Tensor a, double k, double c) {
    Tape& tape = *a.tape;
    const Mat& av = tape.node(a.id).val;
    Node n;
    n.op = Op::Affine;
    n.a = a.id;
    n.k = k;
    n.c = c;
    n.val = Mat(a.rows, a.cols);
    for (int i = 0; i < n.val.size(); ++i) n.val.data[i] = k * av.data[i] + c;
    n.needs_grad = tape.node(a.id).needs_grad;
    return tape.push(std::move(n));
}

Tensor neg(Tensor a) { return affine(a, -1.0, 0.0); }
Tensor one_minus(Tensor a) { return affine(a, -1.0, 1.0); }
Tensor scale(Tensor a, double k) { return affine(a, k, 0.0); }

Tensor matmul(Tensor a, Tensor b) {
    check_same_tape("matmul", a, b);
    if (a.cols != b.rows) {
        throw ShapeError("matmul: inner dimension mismatch (" + shape_str(a.rows, a.cols) +
                         " vs " + shape_str(b.rows, b.cols) + ")");
    }
    Tape& tape = *a.tape;
    const Mat& av = tape.node(a.id).val;
    const Mat& bv = tape.node(b.id).val;
    Node n;
    n.op = Op::MatMul;
    n.a = a.id;
    n.b = b.id;
    n.val = Mat(a.rows, b.cols);
    for (int i = 0; i < a.rows; ++i) {
        for (int k = 0; k < a.cols; ++k) {
            const double s = av.at(i, k);
            for (int j = 0; j < b.cols; ++j) {
                n.val.at(i, j) += s * bv.at(k, j);
            }
        }
    }
    n.needs_grad = tape.node(a.id).needs_grad || tape.node(b.id).needs_grad;
    return tape.push(std::move(n));
}

Tensor concat(Tensor a, Tensor b, Axis axis) {
    check_same_tape("concat", a, b);
    Tape& tape = *a.tape;
    const Mat& av = tape.node(a.id).val;
    const Mat& bv = tape.node(b.id).val;
    Node n;
    n.a = a.id;
    n.b = b.id;
    if (axis == Axis::Rows) {
        if (a.cols != b.cols) {
            throw ShapeError("concat(rows): column mismatch (" + shape_str(a.rows, a.cols) +
                             " vs " + shape_str(b.rows, b.cols) + ")");
        }
        n.op = Op::ConcatRows;
        n.val = Mat(a.rows + b.rows, a.cols);
        for (int i = 0; i < av.size(); ++i) n.val.data[i] = av.data[i];
        for (int i = 0; i < bv.size(); ++i) n.val.data[av.size() + i] = bv.data[i];
    } else {
        if (a.rows != b.rows) {
            throw ShapeError("concat(cols): row mismatch (" + shape_str(a.rows, a.cols) +
                             " vs " + shape_str(b.rows, b.cols) + ")");
        }
        n.op = Op::ConcatCols;
        n.val = Mat(a.rows, a.cols + b.cols);
        for (int i = 0; i < a.rows; ++i) {
            for (int j = 0; j < a.cols; ++j) n.val.at(i, j) = av.at(i, j);
            for (int j = 0; j < b.cols; ++j) n.val.at(i, a.cols + j) = bv.at(i, j);
        }
    }
    n.needs_grad = tape.node(a.id).needs_grad || tape.node(b.id).needs_grad;
    return tape.push(std::move(n));
}

Tensor slice_rows(Tensor a, int r0, int nrows) {
    if (r0 < 0 || nrows < 1 || r0 + nrows > a.rows) {
        throw ShapeError("slice_rows: range [" + std::to_string(r0) + ", " +
                         std::to_string(r0 + nrows) + ") out of " + shape_str(a.rows, a.cols));
    }
    Tape& tape = *a.tape;
    const Mat& av = tape.node(a.id).val;
    Node n;
    n.op = Op::SliceRows;
    n.a = a.id;
    n.aux = r0;
    n.val = Mat(nrows, a.cols);
    for (int i = 0; i < nrows; ++i) {
        for (int j = 0; j < a.cols; ++j) n.val.at(i, j) = av.at(r0 + i, j);
    }
    n.needs_grad = tape.node(a.id).needs_grad;
    return tape.push(std::move(n));
}

Tensor slice_cols(Tensor a, int c0, int ncols) {
    if (c0 < 0 || ncols < 1 || c0 + ncols > a.cols) {
        throw ShapeError("slice_cols: range [" + std::to_string(c0) + ", " +
                         std::to_string(c0 + ncols) + ") out of " + shape_str(a.rows, a.cols));
    }
    Tape& tape = *a.tape;
    const Mat& av = tape.node(a.id).val;
    Node n;
    n.op = Op::SliceCols;
    n.a = a.id;
    n.aux = c0;
    n.val = Mat(a.rows, ncols);
    for (int i = 0; i < a.rows; ++i) {
        for (int j = 0; j < ncols; ++j) n.val.at(i, j) = av.at(i, c0 + j);
    }
    n.needs_grad = tape.node(a.id).needs_grad;
    return tape.push(std::move(n));
}

Tensor row(Tensor a, int r) { return slice_rows(a, r, 1); }

Tensor stack_rows(Tape& tape, const std::vector<Tensor>& rows) {
    if (rows.empty()) throw ContractError("stack_rows: no rows");
    const int cols = rows.front().cols;
    int total = 0;
    bool needs = false;
    for (const Tensor& t : rows) {
        if (t.tape != &tape) throw ContractError("stack_rows: operand on a different tape");
        if (t.cols != cols) {
            throw ShapeError("stack_rows: column mismatch (" + shape_str(t.rows, t.cols) +
                             " vs 1x" + std::to_string(cols) + ")");
        }
        total += t.rows;
        needs = needs || tape.node(t.id).needs_grad;
    }
    Node n;
    n.op = Op::StackRows;
    n.val = Mat(total, cols);
    n.many.reserve(rows.size());
    int r = 0;
    for (const Tensor& t : rows) {
        const Mat& tv = tape.node(t.id).val;
        for (int i = 0; i < t.rows; ++i) {
            for (int j = 0; j < cols; ++j) n.val.at(r + i, j) = tv.at(i, j);
        }
        r += t.rows;
        n.many.push_back(t.id);
    }
    n.needs_grad = needs;
    return tape.push(std::move(n));
}

Tensor add_rowvec(Tensor m, Tensor r) {
    check_same_tape("add_rowvec", m, r);
    if (r.rows != 1 || r.cols != m.cols) {
        throw ShapeError("add_rowvec: want 1x" + std::to_string(m.cols) + " row, got " +
                         shape_str(r.rows, r.cols));
    }
    Tape& tape = *m.tape;
    const Mat& mv = tape.node(m.id).val;
    const Mat& rv = tape.node(r.id).val;
    Node n;
    n.op = Op::AddRowVec;
    n.a = m.id;
    n.b = r.id;
    n.val = Mat(m.rows, m.cols);
    for (int i = 0; i < m.rows; ++i) {
        for (int j = 0; j < m.cols; ++j) n.val.at(i, j) = mv.at(i, j) + rv.at(0, j);
    }
    n.needs_grad = tape.node(m.id).needs_grad || tape.node(r.id).needs_grad;
    return tape.push(std::move(n));
}

Tensor sum(Tensor a) {
    Tape& tape = *a.tape;
    const Mat& av = tape.node(a.id).val;
    double s = 0.0;
    for (double v : av.data) s += v;
    Node n;
    n.op = Op::Sum;
    n.a = a.id;
    n.val = Mat(1, 1, s);
    n.needs_grad = tape.node(a.id).needs_grad;
    return tape.push(std::move(n));
}

// ---- backward ----------------------------------------------------------

void Tape::backward(const Tensor& root) {
    if (root.tape != this) throw ContractError("backward: root lives on a different tape");
    if (root.rows != 1 || root.cols != 1) {
        throw ContractError("backward: root must be a 1x1 scalar, got " +
                            shape_str(root.rows, root.cols));
    }
    // Fresh pass: node gradients are recomputed, parameter gradients accumulate.
    for (Node& n : nodes_) {
        if (n.grad.size() != 0) n.grad.fill(0.0);
    }
    ensure_grad(root.id);
    node(root.id).grad.at(0, 0) = 1.0;

    for (int id = root.id; id >= 0; --id) {
        Node& n = node(id);
        if (!n.needs_grad || n.grad.size() == 0) continue;
        const Mat& g = n.grad;

        auto parent_grad = [this](int pid) -> Mat* {
            if (pid < 0) return nullptr;
            Node& p = node(pid);
            if (!p.needs_grad) return nullptr;
            ensure_grad(pid);
            return &p.grad;
        };

        Mat* ga = parent_grad(n.a);
        Mat* gb = parent_grad(n.b);
        const Mat* va = n.a >= 0 ? &node(n.a).val : nullptr;
        const Mat* vb = n.b >= 0 ? &node(n.b).val : nullptr;

        switch (n.op) {
            case Op::Constant:
                break;
            case Op::Leaf:
                if (!n.param->grad.same_shape(n.val)) {
                    n.param->grad = Mat(n.val.rows, n.val.cols);
                }
                for (std::size_t i = 0; i < n.val.data.size(); ++i) {
                    n.param->grad.data[i] += g.data[i];
                }
                break;
            case Op::Add:
                if (ga) for (int i = 0; i < g.size(); ++i) ga->data[i] += g.data[i];
                if (gb) for (int i = 0; i < g.size(); ++i) gb->data[i] += g.data[i];
                break;
            case Op::Sub:
                if (ga) for (int i = 0; i < g.size(); ++i) ga->data[i] += g.data[i];
                if (gb) for (int i = 0; i < g.size(); ++i) gb->data[i] -= g.data[i];
                break;
            case Op::Mul:
                if (ga) for (int i = 0; i < g.size(); ++i) ga->data[i] += g.data[i] * vb->data[i];
                if (gb) for (int i = 0; i < g.size(); ++i) gb->data[i] += g.data[i] * va->data[i];
                break;
            case Op::Div:
                if (ga) for (int i = 0; i < g.size(); ++i) ga->data[i] += g.data[i] / vb->data[i];
                if (gb) {
                    for (int i = 0; i < g.size(); ++i) {
                        gb->data[i] -= g.data[i] * va->data[i] / (vb->data[i] * vb->data[i]);
                    }
                }
                break;
            case Op::Max:
                for (int i = 0; i < g.size(); ++i) {
                    if (va->data[i] >= vb->data[i]) {
                        if (ga) ga->data[i] += g.data[i];
                    } else if (gb) {
                        gb->data[i] += g.data[i];
                    }
                }
                break;
            case Op::Sigmoid:
                if (ga) {
                    for (int i = 0; i < g.size(); ++i) {
                        const double y = n.val.data[i];
                        ga->data[i] += g.data[i] * y * (1.0 - y);
                    }
                }
                break;
            case Op::Tanh:
                if (ga) {
                    for (int i = 0; i < g.size(); ++i) {
                        const double y = n.val.data[i];
                        ga->data[i] += g.data[i] * (1.0 - y * y);
                    }
                }
                break;
            case Op::Relu:
                if (ga) {
                    for (int i = 0; i < g.size(); ++i) {
                        if (va->data[i] > 0.0) ga->data[i] += g.data[i];
                    }
                }
                break;
            case Op::Softplus:
                if (ga) {
                    for (int i = 0; i < g.size(); ++i) {
                        ga->data[i] += g.data[i] * sigmoid_stable(va->data[i]);
                    }
                }
                break;
            case Op::Exp:
                if (ga) {
                    for (int i = 0; i < g.size(); ++i) ga->data[i] += g.data[i] * n.val.data[i];
                }
                break;
            case Op::Log:
                if (ga) {
                    for (int i = 0; i < g.size(); ++i) ga->data[i] += g.data[i] / va->data[i];
                }
                break;
            case Op::Affine:
                if (ga) {
                    for (int i = 0; i < g.size(); ++i) ga->data[i] += n.k * g.data[i];
                }
                break;
            case Op::MatMul: {
                const int m = va->rows, kk = va->cols, nn = vb->cols;
                if (ga) {
                    // dA = G * B^T
                    for (int i = 0; i < m; ++i) {
                        for (int k2 = 0; k2 < kk; ++k2) {
                            double s = 0.0;
                            for (int j = 0; j < nn; ++j) s += g.at(i, j) * vb->at(k2, j);
                            ga->at(i, k2) += s;
                        }
                    }
                }
                if (gb) {
                    // dB = A^T * G
                    for (int i = 0; i < m; ++i) {
                        for (int k2 = 0; k2 < kk; ++k2) {
                            const double s = va->at(i, k2);
                            if (s == 0.0) continue;
                            for (int j = 0; j < nn; ++j) gb->at(k2, j) += s * g.at(i, j);
                        }
                    }
                }
                break;
            }
            case Op::ConcatRows: {
                const int asz = va->size();
                if (ga) for (int i = 0; i < asz; ++i) ga->data[i] += g.data[i];
                if (gb) for (int i = 0; i < vb->size(); ++i) gb->data[i] += g.data[asz + i];
                break;
            }
            case Op::ConcatCols: {
                const int ac = va->cols, bc = vb->cols;
                for (int i = 0; i < va->rows; ++i) {
                    if (ga) for (int j = 0; j < ac; ++j) ga->at(i, j) += g.at(i, j);
                    if (gb) for (int j = 0; j < bc; ++j) gb->at(i, j) += g.at(i, ac + j);
                }
                break;
            }
            case Op::SliceRows:
                if (ga) {
                    for (int i = 0; i < n.val.rows; ++i) {
                        for (int j = 0; j < n.val.cols; ++j) ga->at(n.aux + i, j) += g.at(i, j);
                    }
                }
                break;
            case Op::SliceCols:
                if (ga) {
                    for (int i = 0; i < n.val.rows; ++i) {
                        for (int j = 0; j < n.val.cols; ++j) ga->at(i, n.aux + j) += g.at(i, j);
                    }
                }
                break;
            case Op::StackRows: {
                int r = 0;
                for (int pid : n.many) {
                    Node& p = node(pid);
                    if (p.needs_grad) {
                        ensure_grad(pid);
                        for (int i = 0; i < p.val.rows; ++i) {
                            for (int j = 0; j < p.val.cols; ++j) {
                                p.grad.at(i, j) += g.at(r + i, j);
                            }
                        }
                    }
                    r += p.val.rows;
                }
                break;
            }
            case Op::AddRowVec:
                if (ga) for (int i = 0; i < g.size(); ++i) ga->data[i] += g.data[i];
                if (gb) {
                    for (int i = 0; i < n.val.rows; ++i) {
                        for (int j = 0; j < n.val.cols; ++j) gb->at(0, j) += g.at(i, j);
                    }
                }
                break;
            case Op::Sum:
                if (ga) {
                    const double gs = g.at(0, 0);
                    for (int i = 0; i < ga->size(); ++i) ga->data[i] += gs;
                }
                break;
        }
    }
}

} // namespace bcatsi
