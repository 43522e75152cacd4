#pragma once

// Reverse-mode automatic differentiation over dense vectors.
//
// A Graph owns its nodes; Expr is a lightweight handle into it. Build the
// graph once, then for every evaluation: bind() the inputs, forward() the
// root, backward() the (scalar) root and read gradient() of each input.
// Node ids are assigned in creation order, which is also a topological
// order because parents must exist before their children.
//
// Vector-scalar broadcasting is supported on the elementwise binary ops.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mpo/common.hpp"

namespace mpo::tape {

enum class Op : std::uint8_t {
    Input,
    Constant,
    Add,
    Sub,
    Mul,
    Div,
    Neg,
    Exp,
    Log,
    Abs,
    Relu,
    Sigmoid,
    Sum,
    Mean,
    Std,
    Max,
    MatVec,
    Percentile,
    RoundSigmoid,
    Sparsemax,
};

std::string_view op_name(Op op);

class Graph;

class Expr {
public:
    Expr() = default;

    Graph& graph() const { return *graph_; }
    std::size_t id() const { return id_; }
    bool valid() const { return graph_ != nullptr; }

    /// Number of elements this node produces.
    std::size_t size() const;

private:
    friend class Graph;
    Expr(Graph* g, std::size_t id) : graph_(g), id_(id) {}

    Graph* graph_ = nullptr;
    std::size_t id_ = 0;
};

class Graph {
public:
    Graph() = default;
    Graph(const Graph&) = delete;
    Graph& operator=(const Graph&) = delete;

    Expr input(std::size_t size, std::string label = {});
    Expr constant(Vector values);
    Expr constant(double value);

    Expr unary(Op op, Expr x);
    Expr binary(Op op, Expr a, Expr b);
    Expr matvec(std::shared_ptr<const Matrix> m, Expr x);
    /// Linear-interpolated percentile, percent in [0, 100].
    Expr percentile(Expr x, double percent);
    /// round(sigmoid(x) * 10^decimals) / 10^decimals with a sigmoid-derivative surrogate gradient.
    Expr round_sigmoid(Expr x, int decimals);
    Expr sparsemax(Expr x);

    void set_label(Expr e, std::string label);
    const std::string& label(Expr e) const;

    void bind(Expr input, std::span<const double> values);

    /// Evaluates every ancestor of root (in id order) and returns root's value.
    const Vector& forward(Expr root);
    /// Accumulates d(root)/d(node) into every ancestor. root must be scalar.
    void backward(Expr root);

    const Vector& value(Expr e) const;
    /// Adjoint of e from the last backward(); zeros when e did not reach the root.
    const Vector& gradient(Expr e) const;

    std::size_t size(Expr e) const;
    std::size_t node_count() const { return nodes_.size(); }

private:
    static constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

    struct Node {
        Op op = Op::Input;
        std::size_t a = kNone;
        std::size_t b = kNone;
        std::size_t size = 0;
        double param = 0.0;
        int iparam = 0;
        std::shared_ptr<const Matrix> matrix;
        std::string label;
        Vector value;
        Vector adjoint;
        bool bound = false;
        std::uint64_t generation = 0;  // bind generation the cached value belongs to
        std::vector<std::size_t> order;  // percentile: indices of the bracketing samples
    };

    Expr push(Node node);
    const Node& node_of(Expr e) const;
    std::vector<char> ancestors(std::size_t root) const;
    void evaluate(std::size_t id);
    void propagate(std::size_t id);
    std::string describe(std::size_t id) const;

    std::vector<Node> nodes_;
    std::uint64_t generation_ = 1;
    std::size_t last_forward_root_ = kNone;
};

// Graph-building helpers. Mixed Expr/double forms wrap the double in a constant node.

Expr operator+(Expr a, Expr b);
Expr operator-(Expr a, Expr b);
Expr operator*(Expr a, Expr b);
Expr operator/(Expr a, Expr b);
Expr operator-(Expr a);
Expr operator+(Expr a, double b);
Expr operator+(double a, Expr b);
Expr operator-(Expr a, double b);
Expr operator-(double a, Expr b);
Expr operator*(Expr a, double b);
Expr operator*(double a, Expr b);
Expr operator/(Expr a, double b);

Expr exp(Expr x);
Expr log(Expr x);
Expr abs(Expr x);
Expr relu(Expr x);
Expr sigmoid(Expr x);
Expr sum(Expr x);
Expr mean(Expr x);
Expr stddev(Expr x);
Expr max(Expr x);
Expr matvec(std::shared_ptr<const Matrix> m, Expr x);
Expr percentile(Expr x, double percent);
Expr round_sigmoid(Expr x, int decimals = 0);
Expr sparsemax(Expr x);

/// Central differences (f(x + h e_i) - f(x - h e_i)) / 2h for every coordinate.
Vector finite_difference(const std::function<double(const Vector&)>& f, const Vector& at, double step);

}  // namespace mpo::tape
