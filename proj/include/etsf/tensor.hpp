#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace etsf {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {
struct Node;
}

/**
 * Dense row-major array of doubles taking part in reverse-mode
 * differentiation.
 *
 * A Tensor is a shared handle: copying it aliases the same storage, the way
 * framework tensors behave. Results of differentiable operations remember
 * their inputs only when at least one input requires a gradient, so pure
 * inference builds no graph.
 */
class Tensor {
public:
    // Receives the gradient of the result and accumulates into the inputs.
    using BackwardFn = std::function<void(std::span<const double> grad_out)>;

    Tensor();

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double value, bool requires_grad = false);
    static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);

    // Builds the output of a primitive. `parents` are the differentiable
    // inputs; `backward` is recorded only if one of them requires a gradient.
    static Tensor make_result(Shape shape, std::vector<double> values,
                              std::initializer_list<Tensor> parents, BackwardFn backward);
    static Tensor make_result(Shape shape, std::vector<double> values,
                              const std::vector<Tensor>& parents, BackwardFn backward);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const;
    std::size_t rank() const { return shape().size(); }
    std::size_t dim(std::size_t axis) const;
    std::size_t numel() const;

    std::span<const double> data() const;
    // Writes bypass the graph; only use on leaves or freshly built values.
    std::span<double> mutable_data();
    std::vector<double> to_vector() const;
    double item() const;
    double operator[](std::size_t i) const { return data()[i]; }

    bool requires_grad() const;
    void set_requires_grad(bool flag);

    bool has_grad() const;
    std::span<const double> grad() const;
    void zero_grad();
    void accumulate_grad(std::span<const double> g) const;

    // Seeds d(self)/d(self) = 1 (self must hold one element) and propagates.
    void backward() const;

    // Independent copy of the values without history.
    Tensor detach() const;

    const detail::Node* node() const { return node_.get(); }

private:
    explicit Tensor(std::shared_ptr<detail::Node> node);
    std::shared_ptr<detail::Node> node_;
    friend class Graph;
};

// Disables graph recording on this thread for the guard's lifetime.
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

    static bool active();

private:
    bool previous_;
};

/**
 * Nodes reachable from a root that require gradients, in topological order
 * (inputs before consumers). Backward traverses this list in reverse and
 * visits each node exactly once.
 */
class Graph {
public:
    static Graph trace(const Tensor& root);

    std::size_t size() const { return order_.size(); }
    const std::vector<detail::Node*>& order() const { return order_; }

    // Runs adjoint accumulation with the root gradient seeded to `seed`.
    void backward(std::span<const double> seed) const;

private:
    Tensor root_;
    std::vector<detail::Node*> order_;
};

}  // namespace etsf
