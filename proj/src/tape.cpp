#include "mpo/tape.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mpo/projection.hpp"

namespace mpo::tape {

std::string_view op_name(Op op) {
    switch (op) {
        case Op::Input: return "input";
        case Op::Constant: return "constant";
        case Op::Add: return "add";
        case Op::Sub: return "sub";
        case Op::Mul: return "mul";
        case Op::Div: return "div";
        case Op::Neg: return "neg";
        case Op::Exp: return "exp";
        case Op::Log: return "log";
        case Op::Abs: return "abs";
        case Op::Relu: return "relu";
        case Op::Sigmoid: return "sigmoid";
        case Op::Sum: return "sum";
        case Op::Mean: return "mean";
        case Op::Std: return "std";
        case Op::Max: return "max";
        case Op::MatVec: return "matvec";
        case Op::Percentile: return "percentile";
        case Op::RoundSigmoid: return "round-sigmoid";
        case Op::Sparsemax: return "sparsemax";
    }
    return "unknown";
}

std::size_t Expr::size() const { return graph_->size(*this); }

Expr Graph::push(Node node) {
    nodes_.push_back(std::move(node));
    return Expr(this, nodes_.size() - 1);
}

const Graph::Node& Graph::node_of(Expr e) const {
    if (e.graph_ != this || e.id_ >= nodes_.size()) throw UsageError("expression does not belong to this graph");
    return nodes_[e.id_];
}

Expr Graph::input(std::size_t size, std::string label) {
    if (size == 0) throw InputError("input must have at least one element");
    Node n;
    n.op = Op::Input;
    n.size = size;
    n.label = std::move(label);
    n.value.assign(size, 0.0);
    return push(std::move(n));
}

Expr Graph::constant(Vector values) {
    if (values.empty()) throw InputError("constant must have at least one element");
    Node n;
    n.op = Op::Constant;
    n.size = values.size();
    n.value = std::move(values);
    n.bound = true;
    return push(std::move(n));
}

Expr Graph::constant(double value) { return constant(Vector{value}); }

Expr Graph::unary(Op op, Expr x) {
    const Node& px = node_of(x);
    Node n;
    n.op = op;
    n.a = x.id_;
    switch (op) {
        case Op::Neg:
        case Op::Exp:
        case Op::Log:
        case Op::Abs:
        case Op::Relu:
        case Op::Sigmoid:
        case Op::Sparsemax:
            n.size = px.size;
            break;
        case Op::Sum:
        case Op::Mean:
        case Op::Std:
        case Op::Max:
            n.size = 1;
            break;
        default:
            throw UsageError("not a unary op: " + std::string(op_name(op)));
    }
    return push(std::move(n));
}

Expr Graph::binary(Op op, Expr a, Expr b) {
    const std::size_t sa = node_of(a).size;
    const std::size_t sb = node_of(b).size;
    if (op != Op::Add && op != Op::Sub && op != Op::Mul && op != Op::Div)
        throw UsageError("not a binary op: " + std::string(op_name(op)));
    if (sa != sb && sa != 1 && sb != 1)
        throw InputError("shape mismatch in " + std::string(op_name(op)) + ": " + std::to_string(sa) + " vs " +
                         std::to_string(sb));
    Node n;
    n.op = op;
    n.a = a.id_;
    n.b = b.id_;
    n.size = std::max(sa, sb);
    return push(std::move(n));
}

Expr Graph::matvec(std::shared_ptr<const Matrix> m, Expr x) {
    if (!m) throw InputError("matvec: null matrix");
    if (m->cols != node_of(x).size)
        throw InputError("matvec: matrix has " + std::to_string(m->cols) + " columns but vector has " +
                         std::to_string(node_of(x).size) + " elements");
    Node n;
    n.op = Op::MatVec;
    n.a = x.id_;
    n.size = m->rows;
    n.matrix = std::move(m);
    return push(std::move(n));
}

Expr Graph::percentile(Expr x, double percent) {
    if (!(percent >= 0.0 && percent <= 100.0)) throw InputError("percentile must lie in [0, 100]");
    Node n;
    n.op = Op::Percentile;
    n.a = x.id_;
    n.size = 1;
    n.param = percent;
    (void)node_of(x);
    return push(std::move(n));
}

Expr Graph::round_sigmoid(Expr x, int decimals) {
    if (decimals < 0) throw InputError("round_sigmoid: decimals must be >= 0");
    Node n;
    n.op = Op::RoundSigmoid;
    n.a = x.id_;
    n.size = node_of(x).size;
    n.iparam = decimals;
    return push(std::move(n));
}

Expr Graph::sparsemax(Expr x) { return unary(Op::Sparsemax, x); }

void Graph::set_label(Expr e, std::string label) {
    (void)node_of(e);
    nodes_[e.id_].label = std::move(label);
}

const std::string& Graph::label(Expr e) const { return node_of(e).label; }

void Graph::bind(Expr e, std::span<const double> values) {
    const Node& n = node_of(e);
    if (n.op != Op::Input) throw UsageError("bind: node #" + std::to_string(e.id_) + " is not an input");
    if (values.size() != n.size)
        throw InputError("bind: expected " + std::to_string(n.size) + " values, got " + std::to_string(values.size()));
    for (double v : values)
        if (!std::isfinite(v)) throw InputError("bind: non-finite value for " + describe(e.id_));
    Node& m = nodes_[e.id_];
    m.value.assign(values.begin(), values.end());
    m.bound = true;
    ++generation_;
    last_forward_root_ = kNone;
}

const Vector& Graph::value(Expr e) const { return node_of(e).value; }
const Vector& Graph::gradient(Expr e) const { return node_of(e).adjoint; }
std::size_t Graph::size(Expr e) const { return node_of(e).size; }

std::string Graph::describe(std::size_t id) const {
    std::string s = "node #" + std::to_string(id) + " (" + std::string(op_name(nodes_[id].op));
    if (!nodes_[id].label.empty()) s += " '" + nodes_[id].label + "'";
    return s + ")";
}

std::vector<char> Graph::ancestors(std::size_t root) const {
    std::vector<char> mark(root + 1, 0);
    mark[root] = 1;
    for (std::size_t i = root + 1; i-- > 0;) {
        if (!mark[i]) continue;
        const Node& n = nodes_[i];
        if (n.a != kNone) mark[n.a] = 1;
        if (n.b != kNone) mark[n.b] = 1;
    }
    return mark;
}

const Vector& Graph::forward(Expr root) {
    (void)node_of(root);
    const auto mark = ancestors(root.id_);
    for (std::size_t i = 0; i <= root.id_; ++i) {
        if (!mark[i]) continue;
        Node& n = nodes_[i];
        if (n.op == Op::Input && !n.bound) throw UsageError("forward: unbound " + describe(i));
        if (n.generation == generation_) continue;
        evaluate(i);
        for (double v : n.value)
            if (!std::isfinite(v)) throw EvaluationError("non-finite value produced by " + describe(i));
        n.generation = generation_;
    }
    last_forward_root_ = root.id_;
    return nodes_[root.id_].value;
}

namespace {

inline double at(const Vector& v, std::size_t i) { return v.size() == 1 ? v[0] : v[i]; }

}  // namespace

void Graph::evaluate(std::size_t id) {
    Node& n = nodes_[id];
    auto& out = n.value;
    switch (n.op) {
        case Op::Input:
        case Op::Constant:
            return;
        case Op::Add:
        case Op::Sub:
        case Op::Mul:
        case Op::Div: {
            const Vector& x = nodes_[n.a].value;
            const Vector& y = nodes_[n.b].value;
            out.resize(n.size);
            for (std::size_t i = 0; i < n.size; ++i) {
                const double u = at(x, i), v = at(y, i);
                switch (n.op) {
                    case Op::Add: out[i] = u + v; break;
                    case Op::Sub: out[i] = u - v; break;
                    case Op::Mul: out[i] = u * v; break;
                    default: out[i] = u / v; break;
                }
            }
            return;
        }
        case Op::Neg:
        case Op::Exp:
        case Op::Log:
        case Op::Abs:
        case Op::Relu:
        case Op::Sigmoid: {
            const Vector& x = nodes_[n.a].value;
            out.resize(n.size);
            for (std::size_t i = 0; i < n.size; ++i) {
                const double u = x[i];
                switch (n.op) {
                    case Op::Neg: out[i] = -u; break;
                    case Op::Exp: out[i] = std::exp(u); break;
                    case Op::Log:
                        if (u <= 0.0) throw EvaluationError("log of nonpositive value in " + describe(id));
                        out[i] = std::log(u);
                        break;
                    case Op::Abs: out[i] = std::abs(u); break;
                    case Op::Relu: out[i] = u > 0.0 ? u : 0.0; break;
                    default: out[i] = projection::sigmoid(u); break;
                }
            }
            return;
        }
        case Op::Sum:
        case Op::Mean: {
            const Vector& x = nodes_[n.a].value;
            double s = 0.0;
            for (double u : x) s += u;
            out.assign(1, n.op == Op::Sum ? s : s / static_cast<double>(x.size()));
            return;
        }
        case Op::Std: {
            const Vector& x = nodes_[n.a].value;
            const double T = static_cast<double>(x.size());
            double m = 0.0;
            for (double u : x) m += u;
            m /= T;
            double ss = 0.0;
            for (double u : x) ss += (u - m) * (u - m);
            // A constant series has exactly zero spread even when the rounded mean is off by an ulp.
            const bool flat = std::all_of(x.begin(), x.end(), [&](double u) { return u == x.front(); });
            out.assign(1, flat ? 0.0 : std::sqrt(ss / T));
            return;
        }
        case Op::Max: {
            const Vector& x = nodes_[n.a].value;
            std::size_t best = 0;
            for (std::size_t i = 1; i < x.size(); ++i)
                if (x[i] > x[best]) best = i;
            n.order.assign(1, best);
            out.assign(1, x[best]);
            return;
        }
        case Op::MatVec: {
            const Vector& x = nodes_[n.a].value;
            const Matrix& m = *n.matrix;
            out.assign(m.rows, 0.0);
            for (std::size_t r = 0; r < m.rows; ++r) {
                double s = 0.0;
                const double* row = m.data.data() + r * m.cols;
                for (std::size_t c = 0; c < m.cols; ++c) s += row[c] * x[c];
                out[r] = s;
            }
            return;
        }
        case Op::Percentile: {
            const Vector& x = nodes_[n.a].value;
            std::vector<std::size_t> idx(x.size());
            std::iota(idx.begin(), idx.end(), std::size_t{0});
            std::stable_sort(idx.begin(), idx.end(), [&](std::size_t l, std::size_t r) { return x[l] < x[r]; });
            const double rank = n.param / 100.0 * static_cast<double>(x.size() - 1);
            const auto lo = static_cast<std::size_t>(std::floor(rank));
            const std::size_t hi = std::min(lo + 1, x.size() - 1);
            const double frac = rank - static_cast<double>(lo);
            n.order = {idx[lo], idx[hi]};
            out.assign(1, x[idx[lo]] + frac * (x[idx[hi]] - x[idx[lo]]));
            return;
        }
        case Op::RoundSigmoid: {
            const Vector& x = nodes_[n.a].value;
            out.resize(n.size);
            for (std::size_t i = 0; i < n.size; ++i) out[i] = projection::round_sigmoid_value(x[i], n.iparam);
            return;
        }
        case Op::Sparsemax:
            out = projection::sparsemax(nodes_[n.a].value);
            return;
    }
}

void Graph::backward(Expr root) {
    const Node& r = node_of(root);
    if (last_forward_root_ == kNone || r.generation != generation_)
        throw UsageError("backward called before forward on the current bindings");
    if (r.size != 1) throw UsageError("backward requires a scalar root, got size " + std::to_string(r.size));

    const auto mark = ancestors(root.id_);
    for (std::size_t i = 0; i < nodes_.size(); ++i) nodes_[i].adjoint.assign(nodes_[i].size, 0.0);
    for (std::size_t i = 0; i <= root.id_; ++i)
        if (mark[i] && nodes_[i].generation != generation_)
            throw UsageError("backward: " + describe(i) + " was not evaluated by the last forward");

    nodes_[root.id_].adjoint[0] = 1.0;
    for (std::size_t i = root.id_ + 1; i-- > 0;)
        if (mark[i]) propagate(i);

    for (std::size_t i = 0; i <= root.id_; ++i) {
        if (!mark[i] || nodes_[i].op != Op::Input) continue;
        for (double g : nodes_[i].adjoint)
            if (!std::isfinite(g)) throw EvaluationError("non-finite gradient reached " + describe(i));
    }
}

void Graph::propagate(std::size_t id) {
    Node& n = nodes_[id];
    const Vector& g = n.adjoint;
    switch (n.op) {
        case Op::Input:
        case Op::Constant:
            return;
        case Op::Add:
        case Op::Sub:
        case Op::Mul:
        case Op::Div: {
            Node& A = nodes_[n.a];
            Node& B = nodes_[n.b];
            const bool ba = A.size == 1 && n.size > 1;
            const bool bb = B.size == 1 && n.size > 1;
            for (std::size_t i = 0; i < n.size; ++i) {
                const double u = at(A.value, i), v = at(B.value, i);
                double da = 0.0, db = 0.0;
                switch (n.op) {
                    case Op::Add: da = g[i]; db = g[i]; break;
                    case Op::Sub: da = g[i]; db = -g[i]; break;
                    case Op::Mul: da = g[i] * v; db = g[i] * u; break;
                    default: da = g[i] / v; db = -g[i] * u / (v * v); break;
                }
                A.adjoint[ba ? 0 : i] += da;
                B.adjoint[bb ? 0 : i] += db;
            }
            return;
        }
        case Op::Neg:
        case Op::Exp:
        case Op::Log:
        case Op::Abs:
        case Op::Relu:
        case Op::Sigmoid: {
            Node& A = nodes_[n.a];
            for (std::size_t i = 0; i < n.size; ++i) {
                const double u = A.value[i];
                double d = 0.0;
                switch (n.op) {
                    case Op::Neg: d = -1.0; break;
                    case Op::Exp: d = n.value[i]; break;
                    case Op::Log: d = 1.0 / u; break;
                    case Op::Abs: d = u > 0.0 ? 1.0 : (u < 0.0 ? -1.0 : 0.0); break;
                    case Op::Relu: d = u > 0.0 ? 1.0 : 0.0; break;
                    default: d = n.value[i] * (1.0 - n.value[i]); break;
                }
                A.adjoint[i] += g[i] * d;
            }
            return;
        }
        case Op::Sum: {
            Node& A = nodes_[n.a];
            for (double& a : A.adjoint) a += g[0];
            return;
        }
        case Op::Mean: {
            Node& A = nodes_[n.a];
            const double s = g[0] / static_cast<double>(A.size);
            for (double& a : A.adjoint) a += s;
            return;
        }
        case Op::Std: {
            Node& A = nodes_[n.a];
            const double sd = n.value[0];
            if (sd == 0.0) return;
            const double T = static_cast<double>(A.size);
            double m = 0.0;
            for (double u : A.value) m += u;
            m /= T;
            for (std::size_t i = 0; i < A.size; ++i) A.adjoint[i] += g[0] * (A.value[i] - m) / (T * sd);
            return;
        }
        case Op::Max:
            nodes_[n.a].adjoint[n.order[0]] += g[0];
            return;
        case Op::MatVec: {
            Node& A = nodes_[n.a];
            const Matrix& m = *n.matrix;
            for (std::size_t r = 0; r < m.rows; ++r) {
                const double gr = g[r];
                if (gr == 0.0) continue;
                const double* row = m.data.data() + r * m.cols;
                for (std::size_t c = 0; c < m.cols; ++c) A.adjoint[c] += gr * row[c];
            }
            return;
        }
        case Op::Percentile: {
            Node& A = nodes_[n.a];
            const double rank = n.param / 100.0 * static_cast<double>(A.size - 1);
            const double frac = rank - std::floor(rank);
            A.adjoint[n.order[0]] += g[0] * (1.0 - frac);
            A.adjoint[n.order[1]] += g[0] * frac;
            return;
        }
        case Op::RoundSigmoid: {
            Node& A = nodes_[n.a];
            for (std::size_t i = 0; i < n.size; ++i) A.adjoint[i] += g[i] * projection::round_sigmoid_surrogate(A.value[i]);
            return;
        }
        case Op::Sparsemax: {
            Node& A = nodes_[n.a];
            // Support read from the cached output; equivalent to recomputing from the input.
            double s = 0.0;
            std::size_t k = 0;
            for (std::size_t i = 0; i < n.size; ++i)
                if (n.value[i] > 0.0) {
                    s += g[i];
                    ++k;
                }
            const double avg = s / static_cast<double>(k);
            for (std::size_t i = 0; i < n.size; ++i)
                if (n.value[i] > 0.0) A.adjoint[i] += g[i] - avg;
            return;
        }
    }
}

Expr operator+(Expr a, Expr b) { return a.graph().binary(Op::Add, a, b); }
Expr operator-(Expr a, Expr b) { return a.graph().binary(Op::Sub, a, b); }
Expr operator*(Expr a, Expr b) { return a.graph().binary(Op::Mul, a, b); }
Expr operator/(Expr a, Expr b) { return a.graph().binary(Op::Div, a, b); }
Expr operator-(Expr a) { return a.graph().unary(Op::Neg, a); }
Expr operator+(Expr a, double b) { return a + a.graph().constant(b); }
Expr operator+(double a, Expr b) { return b.graph().constant(a) + b; }
Expr operator-(Expr a, double b) { return a - a.graph().constant(b); }
Expr operator-(double a, Expr b) { return b.graph().constant(a) - b; }
Expr operator*(Expr a, double b) { return a * a.graph().constant(b); }
Expr operator*(double a, Expr b) { return b.graph().constant(a) * b; }
Expr operator/(Expr a, double b) { return a / a.graph().constant(b); }

Expr exp(Expr x) { return x.graph().unary(Op::Exp, x); }
Expr log(Expr x) { return x.graph().unary(Op::Log, x); }
Expr abs(Expr x) { return x.graph().unary(Op::Abs, x); }
Expr relu(Expr x) { return x.graph().unary(Op::Relu, x); }
Expr sigmoid(Expr x) { return x.graph().unary(Op::Sigmoid, x); }
Expr sum(Expr x) { return x.graph().unary(Op::Sum, x); }
Expr mean(Expr x) { return x.graph().unary(Op::Mean, x); }
Expr stddev(Expr x) { return x.graph().unary(Op::Std, x); }
Expr max(Expr x) { return x.graph().unary(Op::Max, x); }
Expr matvec(std::shared_ptr<const Matrix> m, Expr x) { return x.graph().matvec(std::move(m), x); }
Expr percentile(Expr x, double percent) { return x.graph().percentile(x, percent); }
Expr round_sigmoid(Expr x, int decimals) { return x.graph().round_sigmoid(x, decimals); }
Expr sparsemax(Expr x) { return x.graph().sparsemax(x); }

Vector finite_difference(const std::function<double(const Vector&)>& f, const Vector& at, double step) {
    if (!(step > 0.0)) throw InputError("finite_difference: step must be positive");
    Vector grad(at.size());
    Vector x = at;
    for (std::size_t i = 0; i < at.size(); ++i) {
        x[i] = at[i] + step;
        const double up = f(x);
        x[i] = at[i] - step;
        const double down = f(x);
        x[i] = at[i];
        grad[i] = (up - down) / (2.0 * step);
    }
    return grad;
}

}  // namespace mpo::tape
