#pragma once

#include <deque>
#include <iosfwd>
#include <map>

#include "pairvc/common.hpp"
#include "pairvc/nn/tensor.hpp"

namespace pairvc::nn {

// Owns every parameter of a model, in registration order. Names are
// dot-separated paths; prefix queries drive freezing and hashing.
class ParamStore {
  public:
    Param& add(const std::string& name, Mat init);
    Param& get(const std::string& name);
    const Param& get(const std::string& name) const;
    bool has(const std::string& name) const;
    std::vector<Param*> with_prefix(const std::string& prefix);
    std::deque<Param>& all() { return params_; }
    const std::deque<Param>& all() const { return params_; }
    size_t count() const { return params_.size(); }

    // FNV-1a over the raw value bytes of every param under prefix, in
    // registration order. Detects any drift in supposedly frozen weights.
    uint64_t value_hash(const std::string& prefix = "") const;

    void set_trainable(const std::string& prefix, bool trainable);

  private:
    std::deque<Param> params_;
    std::map<std::string, size_t> index_;
};

// Initializers. Every draw goes through the caller's rng so model builds are
// reproducible from (seed, architecture) alone.
Mat init_uniform(Rng& rng, long rows, long cols, double scale);
Mat init_linear(Rng& rng, long in, long out);  // U(+-1/sqrt(in))

struct Linear {
    Param* w = nullptr;
    Param* b = nullptr;
    void build(ParamStore& ps, Rng& rng, const std::string& name, long in, long out,
               bool zero_init = false);
    // frozen = true feeds the weights in as constants, so the subgraph is
    // excluded from backward (used for the discriminator's real pass).
    Var apply(Graph& g, Var x, bool frozen = false) const;  // (T x in) -> (T x out)
};

// 1-D convolution over frames, odd kernel, zero "same" padding, built from
// shifted matmuls. Weight layout: (kernel*in x out).
struct Conv1d {
    Param* w = nullptr;
    Param* b = nullptr;
    int kernel = 1;
    long in = 0, out = 0;
    void build(ParamStore& ps, Rng& rng, const std::string& name, long in, long out, int kernel,
               bool zero_init = false);
    Var apply(Graph& g, Var x, bool frozen = false) const;
};

// Strided convolution via im2col; used on waveforms where "same" padding and
// odd kernels are not wanted.
struct StridedConv {
    Param* w = nullptr;
    Param* b = nullptr;
    int kernel = 1, stride = 1, pad = 0;
    void build(ParamStore& ps, Rng& rng, const std::string& name, long in, long out, int kernel,
               int stride, int pad);
    Var apply(Graph& g, Var x, bool frozen = false) const;
};

struct GaussianSeq {
    Var mu;
    Var sigma;  // strictly positive
};

// Speaker-conditioned affine coupling stack. Layers alternate which half of
// the channels is transformed. Scale/shift nets are zero-initialized, so the
// flow is the identity map at construction.
class CouplingFlow {
  public:
    // zero_init_coeffs = true gives the identity map at construction (the
    // trained model's contract); false draws small random coefficients (the
    // synthetic generator's mode, so speakers differ from the start).
    void build(ParamStore& ps, Rng& rng, const std::string& name, long dim, long cond_dim,
               long hidden, int n_layers, bool zero_init_coeffs = true);
    // data -> prior direction
    Var forward(Graph& g, Var z, Var cond_row) const;
    // prior -> data direction; exact algebraic inverse of forward
    Var inverse(Graph& g, Var z, Var cond_row) const;
    // Pushes a diagonal Gaussian through the same affine maps, with the
    // coupling coefficients evaluated at the running mean. Keeps the KL
    // against a Gaussian prior in closed form.
    GaussianSeq forward_gaussian(Graph& g, GaussianSeq q, Var cond_row) const;

    long dim() const { return dim_; }

  private:
    struct Layer {
        Conv1d net;
        Linear to_scale, to_shift;
        bool flip;  // which half is transformed
    };
    // scale/shift for one layer given the untouched half + condition
    std::pair<Var, Var> coeffs(Graph& g, const Layer& l, Var half, Var cond_row) const;
    std::vector<Layer> layers_;
    long dim_ = 0, half_ = 0;
};

struct AdamConfig {
    double lr = 2e-4;
    double beta1 = 0.8;
    double beta2 = 0.99;
    double eps = 1e-9;
    double lr_decay = 0.999875;  // per step
};

class Adam {
  public:
    Adam(std::vector<Param*> params, AdamConfig cfg);
    void zero_grad();
    void step();
    double grad_norm() const;  // L2 over current grads
    double lr() const { return lr_cur_; }
    int64_t steps_done() const { return t_; }

    void save_state(std::ostream& os) const;    // t, lr, moments
    void load_state(std::istream& is);

  private:
    std::vector<Param*> params_;
    AdamConfig cfg_;
    double lr_cur_;
    int64_t t_ = 0;
};

// Little-endian binary primitives shared by checkpoints and caches.
void write_u64(std::ostream& os, uint64_t v);
uint64_t read_u64(std::istream& is);
void write_i64(std::ostream& os, int64_t v);
int64_t read_i64(std::istream& is);
void write_f64(std::ostream& os, double v);
double read_f64(std::istream& is);
void write_string(std::ostream& os, const std::string& s);
std::string read_string(std::istream& is);
void write_mat(std::ostream& os, const Mat& m);
Mat read_mat(std::istream& is);

}  // namespace pairvc::nn
