#pragma once

#include <Eigen/Dense>
#include <deque>
#include <functional>
#include <string>
#include <vector>

namespace pairvc::nn {

using Mat = Eigen::MatrixXd;

class Graph;

// Trainable tensor. Lives in a ParamStore across steps; graphs only borrow
// it. Adam moments sit next to the value so checkpoints capture them.
struct Param {
    std::string name;
    Mat value;
    Mat grad;
    Mat m, v;  // Adam first/second moments, sized on first optimizer step
    bool trainable = true;

    void zero_grad() { grad = Mat::Zero(value.rows(), value.cols()); }
};

struct Node {
    Mat value;
    Mat grad;  // empty until a consumer pushes gradient into it
    bool needs_grad = false;
    Graph* owner = nullptr;
    std::function<void(Node&)> backprop;
};

// Accumulation target; allocates zeros on first touch.
inline Mat& gref(Node* n) {
    if (n->grad.size() == 0) n->grad = Mat::Zero(n->value.rows(), n->value.cols());
    return n->grad;
}

class Var {
  public:
    Var() = default;
    explicit Var(Node* n) : node_(n) {}
    bool valid() const { return node_ != nullptr; }
    const Mat& value() const { return node_->value; }
    long rows() const { return node_->value.rows(); }
    long cols() const { return node_->value.cols(); }
    Node* node() const { return node_; }
    bool needs_grad() const { return node_->needs_grad; }

  private:
    Node* node_ = nullptr;
};

// Tape. Creation order is a valid topological order, so backward is a single
// reverse sweep. One Graph per loss evaluation; parameters outlive it.
class Graph {
  public:
    Var input(Mat v);               // constant
    Var leaf(Mat v);                // grad-tracked non-parameter leaf
    Var param(Param& p);            // leaf whose gradient lands in p.grad
    Node* alloc(Mat value, bool needs_grad);
    void backward(const Var& loss);  // loss must be 1x1
    size_t size() const { return nodes_.size(); }

  private:
    std::deque<Node> nodes_;
};

// Elementwise and structural ops. All take value semantics on shapes; shape
// mismatches throw.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var matmul(Var a, Var b);
Var neg(Var a);
Var scale(Var a, double s);
Var add_scalar(Var a, double s);
Var tanh_v(Var a);
Var sigmoid_v(Var a);
Var exp_v(Var a);
Var log_v(Var a);        // domain: strictly positive
Var softplus_v(Var a);
Var leaky_relu(Var a, double slope);
Var abs_v(Var a);
Var square(Var a);
Var pow_scalar(Var a, double p);  // domain: positive for non-integer p
Var sum(Var a);                    // -> 1x1
Var mean(Var a);                   // -> 1x1
Var mean_rows(Var a);              // TxC -> 1xC
Var broadcast_rows(Var a, long t); // 1xC -> TxC
Var add_rowvec(Var a, Var b);      // TxC + 1xC
Var mul_scalar_var(Var a, Var s);  // s is 1x1
Var concat_cols(Var a, Var b);
Var slice_cols(Var a, long start, long n);
Var slice_rows(Var a, long start, long n);
Var shift_rows(Var a, long k);                       // zero fill, out[t] = in[t-k]
Var im2col_rows(Var a, int kernel, int stride, int pad);  // -> T_out x kernel*C
Var avg_pool_rows(Var a, int k);

// Finite-difference gradient probe used by tests: f builds a fresh graph from
// the parameter set each call.
struct GradCheckResult {
    int checked = 0;
    int passed = 0;
    double worst_rel = 0.0;
};
GradCheckResult grad_check(const std::function<double(bool)>& eval_and_maybe_backward,
                           std::vector<Param*> params, int n_coords, double h, double rel_tol,
                           unsigned seed);

}  // namespace pairvc::nn
