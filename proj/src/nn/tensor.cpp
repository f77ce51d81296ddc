#include "pairvc/nn/tensor.hpp"

#include <cmath>

#include "pairvc/common.hpp"

namespace pairvc::nn {

Var Graph::input(Mat v) { return Var(alloc(std::move(v), false)); }

Var Graph::leaf(Mat v) { return Var(alloc(std::move(v), true)); }

Var Graph::param(Param& p) {
    Node* n = alloc(p.value, true);
    Param* pp = &p;
    n->backprop = [pp](Node& self) {
        if (pp->grad.size() == 0) pp->zero_grad();
        pp->grad += self.grad;
    };
    return Var(n);
}

Node* Graph::alloc(Mat value, bool needs_grad) {
    nodes_.emplace_back();
    Node& n = nodes_.back();
    n.value = std::move(value);
    n.needs_grad = needs_grad;
    n.owner = this;
    return &n;
}

void Graph::backward(const Var& loss) {
    require(loss.valid() && loss.node()->value.size() == 1, "backward wants a 1x1 loss");
    loss.node()->grad = Mat::Ones(1, 1);
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
        if (it->grad.size() != 0 && it->backprop) it->backprop(*it);
    }
}

namespace {

Graph* owner(Var a) { return a.node()->owner; }

void same_shape(const Var& a, const Var& b, const char* op) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        fail(std::string(op) + ": shape mismatch " + std::to_string(a.rows()) + "x" +
             std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
             std::to_string(b.cols()));
}

// Unary elementwise: dfn(out_value, in_value) is the local derivative.
template <class F, class D>
Var unary(Var a, F&& fwd, D&& dfn) {
    Node* n = owner(a)->alloc(fwd(a.value()), a.needs_grad());
    if (n->needs_grad) {
        Node* an = a.node();
        D d = dfn;
        n->backprop = [an, d](Node& self) {
            gref(an).array() += self.grad.array() * d(self.value, an->value).array();
        };
    }
    return Var(n);
}

}  // namespace

Var add(Var a, Var b) {
    same_shape(a, b, "add");
    Node* n = owner(a)->alloc(a.value() + b.value(), a.needs_grad() || b.needs_grad());
    if (n->needs_grad) {
        Node *an = a.node(), *bn = b.node();
        n->backprop = [an, bn](Node& self) {
            if (an->needs_grad) gref(an) += self.grad;
            if (bn->needs_grad) gref(bn) += self.grad;
        };
    }
    return Var(n);
}

Var sub(Var a, Var b) {
    same_shape(a, b, "sub");
    Node* n = owner(a)->alloc(a.value() - b.value(), a.needs_grad() || b.needs_grad());
    if (n->needs_grad) {
        Node *an = a.node(), *bn = b.node();
        n->backprop = [an, bn](Node& self) {
            if (an->needs_grad) gref(an) += self.grad;
            if (bn->needs_grad) gref(bn) -= self.grad;
        };
    }
    return Var(n);
}

Var mul(Var a, Var b) {
    same_shape(a, b, "mul");
    Node* n = owner(a)->alloc(a.value().cwiseProduct(b.value()), a.needs_grad() || b.needs_grad());
    if (n->needs_grad) {
        Node *an = a.node(), *bn = b.node();
        n->backprop = [an, bn](Node& self) {
            if (an->needs_grad) gref(an).array() += self.grad.array() * bn->value.array();
            if (bn->needs_grad) gref(bn).array() += self.grad.array() * an->value.array();
        };
    }
    return Var(n);
}

Var matmul(Var a, Var b) {
    if (a.cols() != b.rows()) fail("matmul: inner dimension mismatch");
    Node* n = owner(a)->alloc(a.value() * b.value(), a.needs_grad() || b.needs_grad());
    if (n->needs_grad) {
        Node *an = a.node(), *bn = b.node();
        n->backprop = [an, bn](Node& self) {
            if (an->needs_grad) gref(an).noalias() += self.grad * bn->value.transpose();
            if (bn->needs_grad) gref(bn).noalias() += an->value.transpose() * self.grad;
        };
    }
    return Var(n);
}

Var neg(Var a) { return scale(a, -1.0); }

Var scale(Var a, double s) {
    return unary(
        a, [s](const Mat& x) { return Mat(s * x); },
        [s](const Mat&, const Mat& x) { return Mat(Mat::Constant(x.rows(), x.cols(), s)); });
}

Var add_scalar(Var a, double s) {
    return unary(
        a, [s](const Mat& x) { return Mat(x.array() + s); },
        [](const Mat&, const Mat& x) { return Mat(Mat::Ones(x.rows(), x.cols())); });
}

Var tanh_v(Var a) {
    return unary(
        a, [](const Mat& x) { return Mat(x.array().tanh()); },
        [](const Mat& y, const Mat&) { return Mat(1.0 - y.array().square()); });
}

Var sigmoid_v(Var a) {
    return unary(
        a, [](const Mat& x) { return Mat((1.0 / (1.0 + (-x.array()).exp()))); },
        [](const Mat& y, const Mat&) { return Mat(y.array() * (1.0 - y.array())); });
}

Var exp_v(Var a) {
    return unary(
        a, [](const Mat& x) { return Mat(x.array().exp()); },
        [](const Mat& y, const Mat&) { return y; });
}

Var log_v(Var a) {
    if ((a.value().array() <= 0.0).any()) fail("log of non-positive value");
    return unary(
        a, [](const Mat& x) { return Mat(x.array().log()); },
        [](const Mat&, const Mat& x) { return Mat(x.array().inverse()); });
}

Var softplus_v(Var a) {
    // log(1+exp(x)) with the usual large-x stabilization.
    return unary(
        a,
        [](const Mat& x) {
            return Mat(x.array().max(0.0) + (1.0 + (-x.array().abs()).exp()).log());
        },
        [](const Mat&, const Mat& x) { return Mat(1.0 / (1.0 + (-x.array()).exp())); });
}

Var leaky_relu(Var a, double slope) {
    return unary(
        a, [slope](const Mat& x) { return Mat((x.array() >= 0.0).select(x, slope * x)); },
        [slope](const Mat&, const Mat& x) {
            return Mat((x.array() >= 0.0)
                           .select(Mat::Ones(x.rows(), x.cols()),
                                   Mat::Constant(x.rows(), x.cols(), slope)));
        });
}

Var abs_v(Var a) {
    return unary(
        a, [](const Mat& x) { return Mat(x.array().abs()); },
        [](const Mat&, const Mat& x) { return Mat(x.array().sign()); });
}

Var square(Var a) {
    return unary(
        a, [](const Mat& x) { return Mat(x.array().square()); },
        [](const Mat&, const Mat& x) { return Mat(2.0 * x.array()); });
}

Var pow_scalar(Var a, double p) {
    if (p != std::floor(p) && (a.value().array() <= 0.0).any())
        fail("pow_scalar with non-integer exponent needs positive base");
    return unary(
        a, [p](const Mat& x) { return Mat(x.array().pow(p)); },
        [p](const Mat&, const Mat& x) { return Mat(p * x.array().pow(p - 1.0)); });
}

Var sum(Var a) {
    Node* n = owner(a)->alloc(Mat::Constant(1, 1, a.value().sum()), a.needs_grad());
    if (n->needs_grad) {
        Node* an = a.node();
        n->backprop = [an](Node& self) {
            gref(an).array() += self.grad(0, 0);
        };
    }
    return Var(n);
}

Var mean(Var a) {
    double inv = 1.0 / double(a.value().size());
    return scale(sum(a), inv);
}

Var mean_rows(Var a) {
    double inv = 1.0 / double(a.rows());
    Node* n = owner(a)->alloc(Mat(a.value().colwise().mean()), a.needs_grad());
    if (n->needs_grad) {
        Node* an = a.node();
        n->backprop = [an, inv](Node& self) {
            gref(an) += (inv * self.grad).replicate(an->value.rows(), 1);
        };
    }
    return Var(n);
}

Var broadcast_rows(Var a, long t) {
    if (a.rows() != 1) fail("broadcast_rows wants a row vector");
    Node* n = owner(a)->alloc(Mat(a.value().replicate(t, 1)), a.needs_grad());
    if (n->needs_grad) {
        Node* an = a.node();
        n->backprop = [an](Node& self) {
            gref(an) += self.grad.colwise().sum();
        };
    }
    return Var(n);
}

Var add_rowvec(Var a, Var b) {
    if (b.rows() != 1 || b.cols() != a.cols()) fail("add_rowvec: bias shape mismatch");
    Node* n = owner(a)->alloc(Mat(a.value().rowwise() + b.value().row(0)),
                              a.needs_grad() || b.needs_grad());
    if (n->needs_grad) {
        Node *an = a.node(), *bn = b.node();
        n->backprop = [an, bn](Node& self) {
            if (an->needs_grad) gref(an) += self.grad;
            if (bn->needs_grad) gref(bn) += self.grad.colwise().sum();
        };
    }
    return Var(n);
}

Var mul_scalar_var(Var a, Var s) {
    if (s.value().size() != 1) fail("mul_scalar_var wants a 1x1 scalar");
    Node* n = owner(a)->alloc(Mat(a.value() * s.value()(0, 0)), a.needs_grad() || s.needs_grad());
    if (n->needs_grad) {
        Node *an = a.node(), *sn = s.node();
        n->backprop = [an, sn](Node& self) {
            if (an->needs_grad) gref(an) += self.grad * sn->value(0, 0);
            if (sn->needs_grad)
                gref(sn)(0, 0) += (self.grad.array() * an->value.array()).sum();
        };
    }
    return Var(n);
}

Var concat_cols(Var a, Var b) {
    if (a.rows() != b.rows()) fail("concat_cols: row mismatch");
    Mat v(a.rows(), a.cols() + b.cols());
    v << a.value(), b.value();
    Node* n = owner(a)->alloc(std::move(v), a.needs_grad() || b.needs_grad());
    if (n->needs_grad) {
        Node *an = a.node(), *bn = b.node();
        long ac = a.cols();
        n->backprop = [an, bn, ac](Node& self) {
            if (an->needs_grad) gref(an) += self.grad.leftCols(ac);
            if (bn->needs_grad) gref(bn) += self.grad.rightCols(self.grad.cols() - ac);
        };
    }
    return Var(n);
}

Var slice_cols(Var a, long start, long ncols) {
    if (start < 0 || start + ncols > a.cols()) fail("slice_cols out of range");
    Node* n = owner(a)->alloc(Mat(a.value().middleCols(start, ncols)), a.needs_grad());
    if (n->needs_grad) {
        Node* an = a.node();
        n->backprop = [an, start, ncols](Node& self) {
            gref(an).middleCols(start, ncols) += self.grad;
        };
    }
    return Var(n);
}

Var slice_rows(Var a, long start, long nrows) {
    if (start < 0 || start + nrows > a.rows()) fail("slice_rows out of range");
    Node* n = owner(a)->alloc(Mat(a.value().middleRows(start, nrows)), a.needs_grad());
    if (n->needs_grad) {
        Node* an = a.node();
        n->backprop = [an, start, nrows](Node& self) {
            gref(an).middleRows(start, nrows) += self.grad;
        };
    }
    return Var(n);
}

Var shift_rows(Var a, long k) {
    long t = a.rows();
    Mat v = Mat::Zero(t, a.cols());
    if (k >= 0)
        v.bottomRows(std::max(0L, t - k)) = a.value().topRows(std::max(0L, t - k));
    else
        v.topRows(std::max(0L, t + k)) = a.value().bottomRows(std::max(0L, t + k));
    Node* n = owner(a)->alloc(std::move(v), a.needs_grad());
    if (n->needs_grad) {
        Node* an = a.node();
        n->backprop = [an, k, t](Node& self) {
            if (k >= 0)
                gref(an).topRows(std::max(0L, t - k)) += self.grad.bottomRows(std::max(0L, t - k));
            else
                gref(an).bottomRows(std::max(0L, t + k)) += self.grad.topRows(std::max(0L, t + k));
        };
    }
    return Var(n);
}

Var im2col_rows(Var a, int kernel, int stride, int pad) {
    long t = a.rows(), c = a.cols();
    long t_out = (t + 2L * pad - kernel) / stride + 1;
    if (t_out < 1) fail("im2col_rows: output would be empty");
    Mat v = Mat::Zero(t_out, (long)kernel * c);
    for (long o = 0; o < t_out; ++o) {
        long base = o * stride - pad;
        for (int j = 0; j < kernel; ++j) {
            long src = base + j;
            if (src >= 0 && src < t) v.block(o, (long)j * c, 1, c) = a.value().row(src);
        }
    }
    Node* n = owner(a)->alloc(std::move(v), a.needs_grad());
    if (n->needs_grad) {
        Node* an = a.node();
        n->backprop = [an, kernel, stride, pad, t, c, t_out](Node& self) {
            Mat& g = gref(an);
            for (long o = 0; o < t_out; ++o) {
                long base = o * stride - pad;
                for (int j = 0; j < kernel; ++j) {
                    long src = base + j;
                    if (src >= 0 && src < t) g.row(src) += self.grad.block(o, (long)j * c, 1, c);
                }
            }
        };
    }
    return Var(n);
}

Var avg_pool_rows(Var a, int k) {
    long t_out = a.rows() / k;
    if (t_out < 1) fail("avg_pool_rows: input shorter than pool size");
    Mat v(t_out, a.cols());
    for (long o = 0; o < t_out; ++o) v.row(o) = a.value().middleRows(o * k, k).colwise().mean();
    Node* n = owner(a)->alloc(std::move(v), a.needs_grad());
    if (n->needs_grad) {
        Node* an = a.node();
        double inv = 1.0 / k;
        n->backprop = [an, k, inv, t_out](Node& self) {
            Mat& g = gref(an);
            for (long o = 0; o < t_out; ++o)
                g.middleRows(o * (long)k, k) += (inv * self.grad.row(o)).replicate(k, 1);
        };
    }
    return Var(n);
}

GradCheckResult grad_check(const std::function<double(bool)>& eval, std::vector<Param*> params,
                           int n_coords, double h, double rel_tol, unsigned seed) {
    for (auto* p : params) p->zero_grad();
    eval(true);
    std::vector<Mat> analytic;
    analytic.reserve(params.size());
    for (auto* p : params) analytic.push_back(p->grad);

    // Uniform sampling over the concatenated coordinate space.
    size_t total = 0;
    for (auto* p : params) total += size_t(p->value.size());
    require(total > 0, "grad_check: no coordinates");
    Rng rng(seed);

    GradCheckResult res;
    for (int i = 0; i < n_coords; ++i) {
        size_t flat = size_t(uniform_int(rng, 0, int64_t(total) - 1));
        size_t pi = 0;
        while (flat >= size_t(params[pi]->value.size())) {
            flat -= size_t(params[pi]->value.size());
            ++pi;
        }
        double* x = params[pi]->value.data() + flat;
        double saved = *x;
        double step = h * std::max(1.0, std::abs(saved));
        *x = saved + step;
        double fp = eval(false);
        *x = saved - step;
        double fm = eval(false);
        *x = saved;
        double num = (fp - fm) / (2.0 * step);
        double ana = analytic[pi].size() ? analytic[pi].data()[flat] : 0.0;
        double err = std::abs(num - ana);
        double rel = err / std::max({std::abs(num), std::abs(ana), 1e-10});
        res.checked++;
        if (err <= 1e-10 || rel <= rel_tol) res.passed++;
        res.worst_rel = std::max(res.worst_rel, rel);
    }
    return res;
}

}  // namespace pairvc::nn
