#pragma once

#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

#include "bcatsi/errors.hpp"

namespace bcatsi {

// Dense row-major matrix of doubles. Vectors are 1xN or Nx1 matrices.
struct Mat {
    int rows = 0;
    int cols = 0;
    std::vector<double> data;

    Mat() = default;
    Mat(int r, int c, double value = 0.0);

    static Mat eye(int n);
    static Mat row_vector(std::vector<double> v);
    static Mat col_vector(std::vector<double> v);
    static Mat from_rows(std::initializer_list<std::initializer_list<double>> rows);

    double& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
    double at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }
    int size() const { return rows * cols; }
    bool same_shape(const Mat& o) const { return rows == o.rows && cols == o.cols; }
    void fill(double v);
};

std::string shape_str(int rows, int cols);

// Stable scalar helpers shared by forward and backward rules.
double sigmoid_stable(double x);
double softplus_stable(double x);

class Tape;

// Handle to a node on a tape. Cheap to copy; valid as long as the tape lives.
struct Tensor {
    Tape* tape = nullptr;
    int id = -1;
    int rows = 0;
    int cols = 0;

    const Mat& value() const;
    double scalar_value() const; // 1x1 tensors only
};

// Persistent trainable tensor living outside any tape. Gradients accumulate
// across backward calls until zero_grad().
struct Parameter {
    std::string name;
    Mat value;
    Mat grad;

    Parameter() = default;
    Parameter(std::string n, int r, int c);
    void zero_grad() { grad.fill(0.0); }
};

enum class Axis { Rows, Cols };

enum class Op : std::uint8_t {
    Constant,
    Leaf,
    Add,
    Sub,
    Mul,
    Div,
    Max,
    Sigmoid,
    Tanh,
    Relu,
    Softplus,
    Exp,
    Log,
    Affine,
    MatMul,
    ConcatRows,
    ConcatCols,
    SliceRows,
    SliceCols,
    StackRows,
    AddRowVec,
    Sum,
};

struct Node {
    Op op = Op::Constant;
    int a = -1;
    int b = -1;
    int aux = 0;            // slice offset
    double k = 1.0;         // affine scale
    double c = 0.0;         // affine shift
    std::vector<int> many;  // StackRows parents
    Mat val;
    Mat grad;               // allocated lazily during backward
    Parameter* param = nullptr;
    bool needs_grad = false;
};

// Records operations in construction order, which is already topological:
// a reverse walk therefore visits every node after all of its consumers.
// Single-threaded by design; replay is bitwise deterministic.
class Tape {
public:
    Tensor constant(Mat m);
    Tensor scalar(double v);
    Tensor leaf(Parameter& p);

    // Root must be a 1x1 scalar. Each call recomputes node gradients from
    // scratch and adds leaf gradients into their Parameters, so repeated
    // calls accumulate at the parameter level.
    void backward(const Tensor& root);

    const Mat& value(const Tensor& t) const;
    const Mat& grad(const Tensor& t);
    std::size_t node_count() const { return nodes_.size(); }

    Node& node(int id) { return nodes_[static_cast<std::size_t>(id)]; }
    const Node& node(int id) const { return nodes_[static_cast<std::size_t>(id)]; }
    Tensor push(Node n);

private:
    void ensure_grad(int id);
    std::vector<Node> nodes_;
};

// ---- differentiable operations ---------------------------------------

Tensor add(Tensor a, Tensor b);
Tensor sub(Tensor a, Tensor b);
Tensor mul(Tensor a, Tensor b);
Tensor div(Tensor a, Tensor b);
Tensor emax(Tensor a, Tensor b);

Tensor sigmoid(Tensor a);
Tensor tanh(Tensor a);
Tensor relu(Tensor a); // max(0, x); subgradient 0 at exactly 0
Tensor softplus(Tensor a);
Tensor exp(Tensor a);
Tensor log(Tensor a);

Tensor affine(Tensor a, double k, double c); // elementwise k*x + c
Tensor neg(Tensor a);
Tensor one_minus(Tensor a);
Tensor scale(Tensor a, double k);

Tensor matmul(Tensor a, Tensor b);
Tensor concat(Tensor a, Tensor b, Axis axis);
Tensor slice_rows(Tensor a, int r0, int n);
Tensor slice_cols(Tensor a, int c0, int n);
Tensor row(Tensor a, int r);
Tensor stack_rows(Tape& tape, const std::vector<Tensor>& rows);
Tensor add_rowvec(Tensor m, Tensor r); // broadcast 1xN row over MxN matrix
Tensor sum(Tensor a);

} // namespace bcatsi
