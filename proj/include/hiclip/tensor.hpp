#ifndef HICLIP_TENSOR_HPP
#define HICLIP_TENSOR_HPP

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace hiclip {

// ---------------------------------------------------------------------------
// Errors

struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Raised when an op's input shapes do not satisfy its shape rule.
struct ShapeError : Error {
    ShapeError(const std::string& tag, const std::string& expected, const std::string& got)
        : Error("shape mismatch in '" + tag + "': expected " + expected + ", got " + got) {}
};

// Raised when an op produces a NaN or Inf.
struct NonFiniteError : Error {
    explicit NonFiniteError(const std::string& tag)
        : Error("non-finite output in '" + tag + "'") {}
};

// ---------------------------------------------------------------------------
// Tensor: dense row-major f64 storage. All ops in this library work on
// rank-2 tensors; scalars are [1x1].

class Tensor {
public:
    Tensor() = default;
    Tensor(int rows, int cols) : rows_(rows), cols_(cols), data_(check_dims(rows, cols), 0.0) {}
    Tensor(int rows, int cols, std::vector<double> data);

    static Tensor zeros(int rows, int cols) { return Tensor(rows, cols); }
    static Tensor full(int rows, int cols, double v);
    static Tensor ones(int rows, int cols) { return full(rows, cols, 1.0); }
    static Tensor identity(int n);
    static Tensor scalar(double v) { return full(1, 1, v); }
    static Tensor row(std::vector<double> v);
    static Tensor column(std::vector<double> v);

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& at(int i, int j) { return data_[static_cast<std::size_t>(i) * cols_ + j]; }
    double at(int i, int j) const { return data_[static_cast<std::size_t>(i) * cols_ + j]; }
    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }
    double item() const;

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    const std::vector<double>& vec() const { return data_; }

    bool same_shape(const Tensor& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }
    std::string shape_str() const;
    bool all_finite() const;

    double max_abs() const;

private:
    static std::size_t check_dims(int rows, int cols);
    int rows_ = 0;
    int cols_ = 0;
    std::vector<double> data_;
};

// ---------------------------------------------------------------------------
// Autodiff graph. Nodes form a tape rebuilt on every forward pass; backward
// runs closures in reverse creation order. Tensors held by nodes are treated
// as immutable once created.

struct Node;
using Value = std::shared_ptr<Node>;

struct Node {
    const char* tag = "leaf";
    std::vector<Value> parents;
    Tensor output;
    Tensor grad;              // allocated lazily, same shape as output
    bool requires_grad = false;
    bool has_grad = false;
    std::function<void(Node&)> backward_fn;

    void accumulate(const Tensor& g);
};

// Leaf without gradient (inputs, fixed matrices).
Value constant(Tensor t, const char* tag = "const");
// Leaf with gradient (trainable parameter).
Value leaf_param(Tensor t);

// While alive, newly created nodes do not require gradients and record no
// backward closures. Used for evaluation-only forward passes.
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;
private:
    bool prev_;
};
bool grad_enabled();

// Core node factory: validates finiteness of `out` and wires the backward
// closure. All ops below and any custom op elsewhere go through this.
Value make_node(const char* tag, Tensor out, std::vector<Value> parents,
                std::function<void(Node&)> backward_fn);

// ---------------------------------------------------------------------------
// Primitives

Value matmul(const Value& a, const Value& b);
Value transpose(const Value& a);
Value add(const Value& a, const Value& b);
Value sub(const Value& a, const Value& b);
Value mul(const Value& a, const Value& b);
Value divide(const Value& a, const Value& b);
Value add_bias(const Value& a, const Value& bias);   // bias [1 x n] broadcast over rows
Value add_scalar(const Value& a, double c);
Value scale(const Value& a, double c);
Value exp(const Value& a);
Value log(const Value& a);
Value sqrt(const Value& a);
Value gelu(const Value& a);
Value row_softmax(const Value& a);
// Softmax per row over entries where mask != 0; masked-out outputs are 0.
// Every row needs at least one active entry. `mask` is a fixed attribute,
// not a graph input.
Value masked_row_softmax(const Value& a, Tensor mask);
Value layer_norm(const Value& x, const Value& gamma, const Value& beta, double eps = 1e-5);
Value sum_all(const Value& a);   // -> [1x1]
Value mean_all(const Value& a);  // -> [1x1]
Value row_sum(const Value& a);   // [m x n] -> [m x 1]
Value slice(const Value& a, int dim, int start, int len);
Value concat(const std::vector<Value>& parts, int dim);
Value reshape(const Value& a, int rows, int cols);
// out[r] = a[indices[r]]; indices are a fixed attribute. Gradient scatters
// (and accumulates over duplicate indices) back into `a`.
Value gather_rows(const Value& a, std::vector<int> indices);
Value scale_by(const Value& a, const Value& s);  // s is [1x1]
Value stop_gradient(const Value& a);

// ---------------------------------------------------------------------------
// Parameter store

class ParamStore {
public:
    Value add(const std::string& name, Tensor init);
    const Value& at(const std::string& name) const;
    bool contains(const std::string& name) const { return entries_.count(name) > 0; }
    const std::map<std::string, Value>& entries() const { return entries_; }
    std::map<std::string, Tensor> snapshot() const;
    void load(const std::map<std::string, Tensor>& tensors);  // shapes must match

private:
    std::map<std::string, Value> entries_;
};

// Reverse-mode sweep from a scalar loss. Returns one gradient per store
// entry; parameters unreachable from the loss get zeros. When
// `release_memory` is set, interior node outputs and grads are freed as soon
// as their backward has run.
std::map<std::string, Tensor> backward(const Value& loss, const ParamStore& params,
                                       bool release_memory = false);

// Iteratively clears parent links so deep graphs are torn down without
// recursive shared_ptr destruction.
void detach_graph(const Value& root);

// ---------------------------------------------------------------------------
// Gradient verification

struct FiniteDiffEntry {
    std::string name;
    double max_rel_err = 0.0;
    std::size_t worst_coord = 0;
    std::size_t coords_checked = 0;
};

struct FiniteDiffReport {
    std::vector<FiniteDiffEntry> entries;
    double max_rel_err = 0.0;
    double tol = 0.0;
    std::uint64_t seed = 0;
    bool pass = false;
    std::string summary() const;
};

// Central-difference check of d f / d theta for every entry of `params`.
// When a tensor has more than `max_coords_per_tensor` elements, a seeded
// random subsample (at least 64 coordinates) is probed instead; pass 0 to
// probe every coordinate. Relative error per coordinate is
// |g_ad - g_fd| / max(1e-8, |g_ad| + |g_fd|).
FiniteDiffReport finite_diff_check(const std::function<Value(ParamStore&)>& f,
                                   ParamStore& params, double h, double tol,
                                   std::size_t max_coords_per_tensor = 0,
                                   std::uint64_t seed = 0);

// ---------------------------------------------------------------------------
// Deterministic RNG (fixed algorithm, fixed mapping to doubles) so seeds
// reproduce bit-identical streams everywhere.

class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}
    std::uint64_t next_u64() { return gen_(); }
    double uniform();                       // [0, 1)
    double uniform(double lo, double hi);   // [lo, hi)
    double normal();                        // standard normal, Box-Muller
    int uniform_int(int lo, int hi);        // inclusive range
    Tensor normal_tensor(int rows, int cols, double stddev);
    Tensor uniform_tensor(int rows, int cols, double lo, double hi);

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(uniform_int(0, static_cast<int>(i - 1)));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937_64 gen_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace hiclip

#endif  // HICLIP_TENSOR_HPP
