#include "midgen/autodiff.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>
#include <string>

namespace midgen {

namespace {

void require(bool ok, const std::string& msg) {
    if (!ok) throw std::invalid_argument(msg);
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

const char* op_name(Op op) {
    switch (op) {
        case Op::leaf: return "leaf";
        case Op::matmul: return "matmul";
        case Op::add: return "add";
        case Op::mul: return "mul";
        case Op::sub: return "sub";
        case Op::scale: return "scale";
        case Op::concat: return "concat";
        case Op::silu: return "silu";
        case Op::tanh: return "tanh";
        case Op::sum: return "sum";
        case Op::mean: return "mean";
        case Op::sq_norm: return "sq_norm";
        case Op::dot: return "dot";
    }
    return "?";
}

const Node& Tape::node(int id) const {
    if (id < 0 || size_t(id) >= nodes_.size())
        throw std::out_of_range("tape: node id " + std::to_string(id) + " out of range");
    return nodes_[size_t(id)];
}

double* Tape::alloc(int64_t n) {
    size_t need = used_ + size_t(n);
    if (need > val_arena_.size()) val_arena_.resize(need < 1024 ? 1024 : need * 2);
    double* p = val_arena_.data() + used_;
    used_ = need;
    return p;
}

double* Tape::value_ptr(const Node& n) {
    return n.ext ? const_cast<double*>(n.ext) : val_arena_.data() + n.off;
}

const double* Tape::value_ptr(const Node& n) const {
    return n.ext ? n.ext : val_arena_.data() + n.off;
}

int Tape::leaf(const Tensor& t) { return leaf(t.shape, t.view()); }

int Tape::leaf(Shape s, std::span<const double> data) {
    require(int64_t(data.size()) == s.numel(),
            "leaf: " + std::to_string(data.size()) + " values for shape " + s.str());
    Node n;
    n.op = Op::leaf;
    n.shape = s;
    n.off = used_;
    double* dst = alloc(s.numel());
    std::memcpy(dst, data.data(), data.size() * sizeof(double));
    nodes_.push_back(n);
    has_grad_ = false;
    return int(nodes_.size()) - 1;
}

int Tape::leaf_external(Shape s, const double* data) {
    Node n;
    n.op = Op::leaf;
    n.shape = s;
    n.off = used_;
    n.ext = data;
    alloc(s.numel());  // reserve matching gradient space
    nodes_.push_back(n);
    has_grad_ = false;
    return int(nodes_.size()) - 1;
}

void Tape::check_finite(const Node& n, Op op) const {
    const double* v = value_ptr(n);
    for (int64_t i = 0; i < n.shape.numel(); ++i)
        if (!std::isfinite(v[i]))
            throw std::runtime_error(std::string("non-finite value produced by ") + op_name(op));
}

int Tape::apply(Op op, int a, int b, double attr) {
    const Node& na = node(a);
    Shape sa = na.shape;
    Node out;
    out.op = op;
    out.a = a;
    out.b = b;
    out.attr = attr;

    auto binary_same_shape = [&](const char* name) -> const Node& {
        const Node& nb = node(b);
        require(nb.shape == sa, std::string(name) + ": shape mismatch " + sa.str() + " vs " +
                                    nb.shape.str());
        return nb;
    };

    switch (op) {
        case Op::leaf:
            throw std::invalid_argument("apply: use leaf() to create leaves");

        case Op::matmul: {
            const Node& nb = node(b);
            Shape sb = nb.shape;
            require(sa.ndim == 2, "matmul: left operand must be rank 2, got " + sa.str());
            require(sb.ndim == 1 || sb.ndim == 2,
                    "matmul: right operand must be rank 1 or 2, got " + sb.str());
            require(sb.d[0] == sa.d[1], "matmul: inner dims differ, " + sa.str() + " x " + sb.str());
            int64_t m = sa.d[0], k = sa.d[1];
            out.shape = (sb.ndim == 1) ? Shape::vec(m) : Shape::mat(m, sb.d[1]);
            out.off = used_;
            double* y = alloc(out.shape.numel());
            const double* A = value_ptr(na);
            const double* B = value_ptr(nb);
            if (sb.ndim == 1) {
                for (int64_t i = 0; i < m; ++i) {
                    double acc = 0.0;
                    const double* ai = A + i * k;
                    for (int64_t j = 0; j < k; ++j) acc += ai[j] * B[j];
                    y[i] = acc;
                }
            } else {
                int64_t n = sb.d[1];
                for (int64_t i = 0; i < m; ++i)
                    for (int64_t j = 0; j < n; ++j) {
                        double acc = 0.0;
                        for (int64_t l = 0; l < k; ++l) acc += A[i * k + l] * B[l * n + j];
                        y[i * n + j] = acc;
                    }
            }
            break;
        }

        case Op::add:
        case Op::sub:
        case Op::mul: {
            const Node& nb = binary_same_shape(op_name(op));
            out.shape = sa;
            out.off = used_;
            double* y = alloc(sa.numel());
            const double* x1 = value_ptr(na);
            const double* x2 = value_ptr(nb);
            int64_t n = sa.numel();
            if (op == Op::add)
                for (int64_t i = 0; i < n; ++i) y[i] = x1[i] + x2[i];
            else if (op == Op::sub)
                for (int64_t i = 0; i < n; ++i) y[i] = x1[i] - x2[i];
            else
                for (int64_t i = 0; i < n; ++i) y[i] = x1[i] * x2[i];
            break;
        }

        case Op::scale: {
            out.shape = sa;
            out.off = used_;
            double* y = alloc(sa.numel());
            const double* x = value_ptr(na);
            for (int64_t i = 0; i < sa.numel(); ++i) y[i] = attr * x[i];
            break;
        }

        case Op::concat: {
            const Node& nb = node(b);
            require(sa.ndim == 1 && nb.shape.ndim == 1,
                    "concat: both operands must be rank 1, got " + sa.str() + " and " +
                        nb.shape.str());
            out.shape = Shape::vec(sa.d[0] + nb.shape.d[0]);
            out.off = used_;
            double* y = alloc(out.shape.numel());
            std::memcpy(y, value_ptr(na), size_t(sa.d[0]) * sizeof(double));
            std::memcpy(y + sa.d[0], value_ptr(nb), size_t(nb.shape.d[0]) * sizeof(double));
            break;
        }

        case Op::silu: {
            out.shape = sa;
            out.off = used_;
            double* y = alloc(sa.numel());
            const double* x = value_ptr(na);
            for (int64_t i = 0; i < sa.numel(); ++i) y[i] = x[i] * sigmoid(x[i]);
            break;
        }

        case Op::tanh: {
            out.shape = sa;
            out.off = used_;
            double* y = alloc(sa.numel());
            const double* x = value_ptr(na);
            for (int64_t i = 0; i < sa.numel(); ++i) y[i] = std::tanh(x[i]);
            break;
        }

        case Op::sum:
        case Op::mean:
        case Op::sq_norm: {
            out.shape = Shape::scalar();
            out.off = used_;
            double* y = alloc(1);
            const double* x = value_ptr(na);
            int64_t n = sa.numel();
            double acc = 0.0;
            if (op == Op::sq_norm)
                for (int64_t i = 0; i < n; ++i) acc += x[i] * x[i];
            else
                for (int64_t i = 0; i < n; ++i) acc += x[i];
            y[0] = (op == Op::mean) ? acc / double(n) : acc;
            break;
        }

        case Op::dot: {
            const Node& nb = binary_same_shape("dot");
            out.shape = Shape::scalar();
            out.off = used_;
            double* y = alloc(1);
            const double* x1 = value_ptr(na);
            const double* x2 = value_ptr(nb);
            double acc = 0.0;
            for (int64_t i = 0; i < sa.numel(); ++i) acc += x1[i] * x2[i];
            y[0] = acc;
            break;
        }
    }

    check_finite(out, op);
    nodes_.push_back(out);
    has_grad_ = false;
    return int(nodes_.size()) - 1;
}

std::span<const double> Tape::value(int id) const {
    const Node& n = node(id);
    return {value_ptr(n), size_t(n.shape.numel())};
}

Tensor Tape::value_tensor(int id) const {
    const Node& n = node(id);
    auto v = value(id);
    return Tensor{n.shape, std::vector<double>(v.begin(), v.end())};
}

void Tape::backward(int loss_id) {
    const Node& loss = node(loss_id);
    require(loss.shape.ndim == 0, "backward: loss must be rank 0, got " + loss.shape.str());
    grad_arena_.assign(used_, 0.0);
    grad_arena_[loss.off] = 1.0;

    // Inputs always precede their consumers, so one reverse sweep from the loss
    // visits each node exactly once with its output gradient complete.
    for (int i = loss_id; i >= 0; --i) {
        const Node& n = nodes_[size_t(i)];
        if (n.op == Op::leaf) continue;
        const double* gy = grad_arena_.data() + n.off;
        const Node& na = nodes_[size_t(n.a)];
        double* ga = grad_arena_.data() + na.off;
        const double* va = value_ptr(na);

        switch (n.op) {
            case Op::leaf:
                break;

            case Op::matmul: {
                const Node& nb = nodes_[size_t(n.b)];
                double* gb = grad_arena_.data() + nb.off;
                const double* vb = value_ptr(nb);
                int64_t m = na.shape.d[0], k = na.shape.d[1];
                if (nb.shape.ndim == 1) {
                    for (int64_t i2 = 0; i2 < m; ++i2) {
                        double g = gy[i2];
                        const double* arow = va + i2 * k;
                        double* garow = ga + i2 * k;
                        for (int64_t j = 0; j < k; ++j) {
                            garow[j] += g * vb[j];
                            gb[j] += g * arow[j];
                        }
                    }
                } else {
                    int64_t nn = nb.shape.d[1];
                    for (int64_t i2 = 0; i2 < m; ++i2)
                        for (int64_t l = 0; l < k; ++l) {
                            double a_il = va[i2 * k + l];
                            double* gb_row = gb + l * nn;
                            const double* gy_row = gy + i2 * nn;
                            double acc = 0.0;
                            for (int64_t j = 0; j < nn; ++j) {
                                acc += gy_row[j] * vb[l * nn + j];
                                gb_row[j] += gy_row[j] * a_il;
                            }
                            ga[i2 * k + l] += acc;
                        }
                }
                break;
            }

            case Op::add: {
                const Node& nb = nodes_[size_t(n.b)];
                double* gb = grad_arena_.data() + nb.off;
                for (int64_t j = 0; j < n.shape.numel(); ++j) {
                    ga[j] += gy[j];
                    gb[j] += gy[j];
                }
                break;
            }

            case Op::sub: {
                const Node& nb = nodes_[size_t(n.b)];
                double* gb = grad_arena_.data() + nb.off;
                for (int64_t j = 0; j < n.shape.numel(); ++j) {
                    ga[j] += gy[j];
                    gb[j] -= gy[j];
                }
                break;
            }

            case Op::mul: {
                const Node& nb = nodes_[size_t(n.b)];
                double* gb = grad_arena_.data() + nb.off;
                const double* vb = value_ptr(nb);
                for (int64_t j = 0; j < n.shape.numel(); ++j) {
                    ga[j] += gy[j] * vb[j];
                    gb[j] += gy[j] * va[j];
                }
                break;
            }

            case Op::scale:
                for (int64_t j = 0; j < n.shape.numel(); ++j) ga[j] += n.attr * gy[j];
                break;

            case Op::concat: {
                const Node& nb = nodes_[size_t(n.b)];
                double* gb = grad_arena_.data() + nb.off;
                int64_t la = na.shape.d[0];
                for (int64_t j = 0; j < la; ++j) ga[j] += gy[j];
                for (int64_t j = 0; j < nb.shape.d[0]; ++j) gb[j] += gy[la + j];
                break;
            }

            case Op::silu:
                for (int64_t j = 0; j < n.shape.numel(); ++j) {
                    double s = sigmoid(va[j]);
                    ga[j] += gy[j] * s * (1.0 + va[j] * (1.0 - s));
                }
                break;

            case Op::tanh:
                for (int64_t j = 0; j < n.shape.numel(); ++j) {
                    double th = std::tanh(va[j]);
                    ga[j] += gy[j] * (1.0 - th * th);
                }
                break;

            case Op::sum:
                for (int64_t j = 0; j < na.shape.numel(); ++j) ga[j] += gy[0];
                break;

            case Op::mean: {
                double g = gy[0] / double(na.shape.numel());
                for (int64_t j = 0; j < na.shape.numel(); ++j) ga[j] += g;
                break;
            }

            case Op::sq_norm:
                for (int64_t j = 0; j < na.shape.numel(); ++j) ga[j] += 2.0 * gy[0] * va[j];
                break;

            case Op::dot: {
                const Node& nb = nodes_[size_t(n.b)];
                double* gb = grad_arena_.data() + nb.off;
                const double* vb = value_ptr(nb);
                for (int64_t j = 0; j < na.shape.numel(); ++j) {
                    ga[j] += gy[0] * vb[j];
                    gb[j] += gy[0] * va[j];
                }
                break;
            }
        }
    }
    has_grad_ = true;
}

std::span<const double> Tape::grad(int id) const {
    if (!has_grad_) throw std::logic_error("grad: call backward first");
    const Node& n = node(id);
    return {grad_arena_.data() + n.off, size_t(n.shape.numel())};
}

bool Tape::reaches(int node_id, int leaf_id) const {
    node(leaf_id);
    std::vector<int> stack{node_id};
    std::vector<bool> seen(nodes_.size(), false);
    while (!stack.empty()) {
        int id = stack.back();
        stack.pop_back();
        if (id < 0 || seen[size_t(id)]) continue;
        seen[size_t(id)] = true;
        if (id == leaf_id) return true;
        const Node& n = nodes_[size_t(id)];
        stack.push_back(n.a);
        stack.push_back(n.b);
    }
    return false;
}

void Tape::reset() {
    nodes_.clear();
    used_ = 0;
    has_grad_ = false;
}

double grad_check(const std::function<int(Tape&, int)>& build, const Tensor& point, double h) {
    Tape tape;
    int x = tape.leaf(point);
    int loss_id = build(tape, x);
    tape.backward(loss_id);
    std::vector<double> analytic(tape.grad(x).begin(), tape.grad(x).end());

    Tensor p = point;
    double worst = 0.0;
    for (size_t i = 0; i < p.data.size(); ++i) {
        double keep = p.data[i];
        p.data[i] = keep + h;
        tape.reset();
        double up = tape.value(build(tape, tape.leaf(p)))[0];
        p.data[i] = keep - h;
        tape.reset();
        double dn = tape.value(build(tape, tape.leaf(p)))[0];
        p.data[i] = keep;
        double central = (up - dn) / (2.0 * h);
        double rel = std::fabs(analytic[i] - central) /
                     (std::fabs(analytic[i]) + std::fabs(central) + 1e-12);
        if (rel > worst) worst = rel;
    }
    return worst;
}

}  // namespace midgen
