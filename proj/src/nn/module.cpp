#include "pairvc/nn/module.hpp"

#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>

namespace pairvc::nn {

Param& ParamStore::add(const std::string& name, Mat init) {
    require(!index_.count(name), "duplicate parameter name: " + name);
    params_.emplace_back();
    Param& p = params_.back();
    p.name = name;
    p.value = std::move(init);
    index_[name] = params_.size() - 1;
    return p;
}

Param& ParamStore::get(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) fail("unknown parameter: " + name);
    return params_[it->second];
}

const Param& ParamStore::get(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) fail("unknown parameter: " + name);
    return params_[it->second];
}

bool ParamStore::has(const std::string& name) const { return index_.count(name) != 0; }

std::vector<Param*> ParamStore::with_prefix(const std::string& prefix) {
    std::vector<Param*> out;
    for (auto& p : params_)
        if (p.name.rfind(prefix, 0) == 0) out.push_back(&p);
    return out;
}

uint64_t ParamStore::value_hash(const std::string& prefix) const {
    uint64_t h = 14695981039346656037ull;
    for (const auto& p : params_) {
        if (p.name.rfind(prefix, 0) != 0) continue;
        h = fnv1a(p.name, h);
        h = fnv1a(p.value.data(), sizeof(double) * size_t(p.value.size()), h);
    }
    return h;
}

void ParamStore::set_trainable(const std::string& prefix, bool trainable) {
    bool any = false;
    for (auto& p : params_) {
        if (p.name.rfind(prefix, 0) == 0) {
            p.trainable = trainable;
            any = true;
        }
    }
    require(any, "no parameters under prefix: " + prefix);
}

Mat init_uniform(Rng& rng, long rows, long cols, double scale) {
    Mat m(rows, cols);
    for (long j = 0; j < cols; ++j)
        for (long i = 0; i < rows; ++i) m(i, j) = uniform(rng, -scale, scale);
    return m;
}

Mat init_linear(Rng& rng, long in, long out) {
    return init_uniform(rng, in, out, 1.0 / std::sqrt(double(in)));
}

void Linear::build(ParamStore& ps, Rng& rng, const std::string& name, long in, long out,
                   bool zero_init) {
    w = &ps.add(name + ".w", zero_init ? Mat(Mat::Zero(in, out)) : init_linear(rng, in, out));
    b = &ps.add(name + ".b", Mat::Zero(1, out));
}

Var Linear::apply(Graph& g, Var x, bool frozen) const {
    Var wv = frozen ? g.input(w->value) : g.param(*w);
    Var bv = frozen ? g.input(b->value) : g.param(*b);
    return add_rowvec(matmul(x, wv), bv);
}

void Conv1d::build(ParamStore& ps, Rng& rng, const std::string& name, long in_, long out_,
                   int kernel_, bool zero_init) {
    require(kernel_ % 2 == 1, "Conv1d kernel must be odd");
    kernel = kernel_;
    in = in_;
    out = out_;
    double scale = 1.0 / std::sqrt(double(in * kernel));
    w = &ps.add(name + ".w", zero_init ? Mat(Mat::Zero((long)kernel * in, out))
                                       : init_uniform(rng, (long)kernel * in, out, scale));
    b = &ps.add(name + ".b", Mat::Zero(1, out));
}

Var Conv1d::apply(Graph& g, Var x, bool frozen) const {
    require(x.cols() == in, "Conv1d: channel mismatch");
    Var wv = frozen ? g.input(w->value) : g.param(*w);
    Var bv = frozen ? g.input(b->value) : g.param(*b);
    int center = kernel / 2;
    Var acc;
    for (int j = 0; j < kernel; ++j) {
        Var wj = slice_rows(wv, (long)j * in, in);
        Var term = matmul(shift_rows(x, center - j), wj);
        acc = acc.valid() ? add(acc, term) : term;
    }
    return add_rowvec(acc, bv);
}

void StridedConv::build(ParamStore& ps, Rng& rng, const std::string& name, long in, long out,
                        int kernel_, int stride_, int pad_) {
    kernel = kernel_;
    stride = stride_;
    pad = pad_;
    double scale = 1.0 / std::sqrt(double(in * kernel));
    w = &ps.add(name + ".w", init_uniform(rng, (long)kernel * in, out, scale));
    b = &ps.add(name + ".b", Mat::Zero(1, out));
}

Var StridedConv::apply(Graph& g, Var x, bool frozen) const {
    Var cols = im2col_rows(x, kernel, stride, pad);
    Var wv = frozen ? g.input(w->value) : g.param(*w);
    Var bv = frozen ? g.input(b->value) : g.param(*b);
    return add_rowvec(matmul(cols, wv), bv);
}

void CouplingFlow::build(ParamStore& ps, Rng& rng, const std::string& name, long dim,
                         long cond_dim, long hidden, int n_layers, bool zero_init_coeffs) {
    require(dim % 2 == 0, "flow dim must be even");
    dim_ = dim;
    half_ = dim / 2;
    layers_.resize(size_t(n_layers));
    for (int i = 0; i < n_layers; ++i) {
        auto& l = layers_[size_t(i)];
        std::string base = name + ".l" + std::to_string(i);
        l.net.build(ps, rng, base + ".net", half_ + cond_dim, hidden, 3);
        l.to_scale.build(ps, rng, base + ".scale", hidden, half_, zero_init_coeffs);
        l.to_shift.build(ps, rng, base + ".shift", hidden, half_, zero_init_coeffs);
        l.flip = (i % 2) == 1;
    }
}

std::pair<Var, Var> CouplingFlow::coeffs(Graph& g, const Layer& l, Var half, Var cond_row) const {
    Var h = concat_cols(half, broadcast_rows(cond_row, half.rows()));
    h = tanh_v(l.net.apply(g, h));
    // tanh keeps log-scales bounded, so exp(s) stays well conditioned
    Var s = tanh_v(l.to_scale.apply(g, h));
    Var t = l.to_shift.apply(g, h);
    return {s, t};
}

Var CouplingFlow::forward(Graph& g, Var z, Var cond_row) const {
    require(z.cols() == dim_, "flow: channel mismatch");
    for (const auto& l : layers_) {
        Var a = slice_cols(z, l.flip ? half_ : 0, half_);
        Var b = slice_cols(z, l.flip ? 0 : half_, half_);
        auto [s, t] = coeffs(g, l, a, cond_row);
        Var b2 = add(mul(b, exp_v(s)), t);
        z = l.flip ? concat_cols(b2, a) : concat_cols(a, b2);
    }
    return z;
}

Var CouplingFlow::inverse(Graph& g, Var z, Var cond_row) const {
    require(z.cols() == dim_, "flow: channel mismatch");
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) {
        const auto& l = *it;
        Var a = slice_cols(z, l.flip ? half_ : 0, half_);
        Var b2 = slice_cols(z, l.flip ? 0 : half_, half_);
        auto [s, t] = coeffs(g, l, a, cond_row);
        Var b = mul(sub(b2, t), exp_v(neg(s)));
        z = l.flip ? concat_cols(b, a) : concat_cols(a, b);
    }
    return z;
}

GaussianSeq CouplingFlow::forward_gaussian(Graph& g, GaussianSeq q, Var cond_row) const {
    require(q.mu.cols() == dim_, "flow: channel mismatch");
    Var mu = q.mu, sigma = q.sigma;
    for (const auto& l : layers_) {
        long a0 = l.flip ? half_ : 0, b0 = l.flip ? 0 : half_;
        Var mu_a = slice_cols(mu, a0, half_);
        Var mu_b = slice_cols(mu, b0, half_);
        Var sg_a = slice_cols(sigma, a0, half_);
        Var sg_b = slice_cols(sigma, b0, half_);
        auto [s, t] = coeffs(g, l, mu_a, cond_row);
        Var es = exp_v(s);
        Var mu_b2 = add(mul(mu_b, es), t);
        Var sg_b2 = mul(sg_b, es);
        mu = l.flip ? concat_cols(mu_b2, mu_a) : concat_cols(mu_a, mu_b2);
        sigma = l.flip ? concat_cols(sg_b2, sg_a) : concat_cols(sg_a, sg_b2);
    }
    return {mu, sigma};
}

Adam::Adam(std::vector<Param*> params, AdamConfig cfg)
    : params_(std::move(params)), cfg_(cfg), lr_cur_(cfg.lr) {}

void Adam::zero_grad() {
    for (auto* p : params_) p->zero_grad();
}

double Adam::grad_norm() const {
    double acc = 0.0;
    for (auto* p : params_)
        if (p->grad.size()) acc += p->grad.squaredNorm();
    return std::sqrt(acc);
}

void Adam::step() {
    ++t_;
    double bc1 = 1.0 - std::pow(cfg_.beta1, double(t_));
    double bc2 = 1.0 - std::pow(cfg_.beta2, double(t_));
    for (auto* p : params_) {
        if (!p->trainable || p->grad.size() == 0) continue;
        if (p->m.size() == 0) {
            p->m = Mat::Zero(p->value.rows(), p->value.cols());
            p->v = Mat::Zero(p->value.rows(), p->value.cols());
        }
        p->m = cfg_.beta1 * p->m + (1.0 - cfg_.beta1) * p->grad;
        p->v = cfg_.beta2 * p->v + (1.0 - cfg_.beta2) * p->grad.cwiseProduct(p->grad);
        Mat mhat = p->m / bc1;
        Mat vhat = p->v / bc2;
        p->value.array() -= lr_cur_ * mhat.array() / (vhat.array().sqrt() + cfg_.eps);
    }
    lr_cur_ *= cfg_.lr_decay;
}

void Adam::save_state(std::ostream& os) const {
    write_i64(os, t_);
    write_f64(os, lr_cur_);
    write_u64(os, params_.size());
    for (const auto* p : params_) {
        write_string(os, p->name);
        write_mat(os, p->m);
        write_mat(os, p->v);
    }
}

void Adam::load_state(std::istream& is) {
    t_ = read_i64(is);
    lr_cur_ = read_f64(is);
    uint64_t n = read_u64(is);
    require(n == params_.size(), "optimizer state param count mismatch");
    for (auto* p : params_) {
        std::string name = read_string(is);
        require(name == p->name, "optimizer state order mismatch at " + name);
        p->m = read_mat(is);
        p->v = read_mat(is);
    }
}

void write_u64(std::ostream& os, uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = (unsigned char)(v >> (8 * i));
    os.write(reinterpret_cast<char*>(b), 8);
}

uint64_t read_u64(std::istream& is) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    if (!is) fail("unexpected end of binary stream");
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= uint64_t(b[i]) << (8 * i);
    return v;
}

void write_i64(std::ostream& os, int64_t v) { write_u64(os, uint64_t(v)); }
int64_t read_i64(std::istream& is) { return int64_t(read_u64(is)); }

void write_f64(std::ostream& os, double v) {
    uint64_t u;
    static_assert(sizeof u == sizeof v);
    memcpy(&u, &v, 8);
    write_u64(os, u);
}

double read_f64(std::istream& is) {
    uint64_t u = read_u64(is);
    double v;
    memcpy(&v, &u, 8);
    return v;
}

void write_string(std::ostream& os, const std::string& s) {
    write_u64(os, s.size());
    os.write(s.data(), std::streamsize(s.size()));
}

std::string read_string(std::istream& is) {
    uint64_t n = read_u64(is);
    require(n < (1ull << 32), "implausible string length in stream");
    std::string s(size_t(n), '\0');
    is.read(s.data(), std::streamsize(n));
    if (!is) fail("unexpected end of binary stream");
    return s;
}

void write_mat(std::ostream& os, const Mat& m) {
    write_u64(os, uint64_t(m.rows()));
    write_u64(os, uint64_t(m.cols()));
    os.write(reinterpret_cast<const char*>(m.data()), std::streamsize(sizeof(double) * m.size()));
}

Mat read_mat(std::istream& is) {
    uint64_t r = read_u64(is), c = read_u64(is);
    require(r < (1ull << 24) && c < (1ull << 24), "implausible matrix shape in stream");
    long rr = long(r), cc = long(c);
    Mat m(rr, cc);
    is.read(reinterpret_cast<char*>(m.data()), std::streamsize(sizeof(double) * m.size()));
    if (!is) fail("unexpected end of binary stream");
    return m;
}

}  // namespace pairvc::nn
