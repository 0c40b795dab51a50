#include "etsf/tensor.hpp"

#include "etsf/error.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>
#include <unordered_set>
#include <utility>

namespace etsf {

namespace detail {

struct Node {
    Shape shape;
    std::vector<double> data;
    std::vector<double> grad;  // empty until first accumulation
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    Tensor::BackwardFn backward;
};

}  // namespace detail

std::size_t shape_numel(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ", ";
        os << shape[i];
    }
    os << ']';
    return os.str();
}

namespace {
thread_local bool no_grad_active = false;
}

NoGradGuard::NoGradGuard() : previous_(no_grad_active) { no_grad_active = true; }
NoGradGuard::~NoGradGuard() { no_grad_active = previous_; }
bool NoGradGuard::active() { return no_grad_active; }

Tensor::Tensor() = default;

Tensor::Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
    const std::size_t n = shape_numel(shape);
    return from(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
    if (shape_numel(shape) != values.size()) {
        throw DimensionError("tensor of shape " + shape_str(shape) + " cannot hold " +
                             std::to_string(values.size()) + " values");
    }
    auto node = std::make_shared<detail::Node>();
    node->shape = std::move(shape);
    node->data = std::move(values);
    node->requires_grad = requires_grad;
    return Tensor(std::move(node));
}

Tensor Tensor::scalar(double value, bool requires_grad) { return from({1}, {value}, requires_grad); }

Tensor Tensor::make_result(Shape shape, std::vector<double> values, std::initializer_list<Tensor> parents,
                           BackwardFn backward) {
    return make_result(std::move(shape), std::move(values), std::vector<Tensor>(parents), std::move(backward));
}

Tensor Tensor::make_result(Shape shape, std::vector<double> values, const std::vector<Tensor>& parents,
                           BackwardFn backward) {
    Tensor out = from(std::move(shape), std::move(values));
    const bool any = !no_grad_active && std::any_of(parents.begin(), parents.end(),
                                 [](const Tensor& p) { return p.defined() && p.requires_grad(); });
    if (any) {
        out.node_->requires_grad = true;
        for (const auto& p : parents) {
            if (p.defined() && p.requires_grad()) out.node_->parents.push_back(p.node_);
        }
        out.node_->backward = std::move(backward);
    }
    return out;
}

const Shape& Tensor::shape() const { return node_->shape; }

std::size_t Tensor::dim(std::size_t axis) const {
    if (axis >= node_->shape.size()) {
        throw DimensionError("axis " + std::to_string(axis) + " out of range for shape " + shape_str(shape()));
    }
    return node_->shape[axis];
}

std::size_t Tensor::numel() const { return node_->data.size(); }

std::span<const double> Tensor::data() const { return node_->data; }
std::span<double> Tensor::mutable_data() { return node_->data; }
std::vector<double> Tensor::to_vector() const { return node_->data; }

double Tensor::item() const {
    if (numel() != 1) throw DimensionError("item() on tensor of shape " + shape_str(shape()));
    return node_->data[0];
}

bool Tensor::requires_grad() const { return node_->requires_grad; }
void Tensor::set_requires_grad(bool flag) { node_->requires_grad = flag; }

bool Tensor::has_grad() const { return !node_->grad.empty(); }
std::span<const double> Tensor::grad() const { return node_->grad; }
void Tensor::zero_grad() { node_->grad.clear(); }

void Tensor::accumulate_grad(std::span<const double> g) const {
    if (!node_->requires_grad) return;
    if (g.size() != node_->data.size()) {
        throw DimensionError("gradient of size " + std::to_string(g.size()) + " for tensor of shape " +
                             shape_str(shape()));
    }
    if (node_->grad.empty()) {
        node_->grad.assign(g.begin(), g.end());
        return;
    }
    for (std::size_t i = 0; i < g.size(); ++i) node_->grad[i] += g[i];
}

void Tensor::backward() const {
    if (numel() != 1) throw DimensionError("backward() needs a single-element root, got " + shape_str(shape()));
    const double one = 1.0;
    Graph::trace(*this).backward(std::span<const double>(&one, 1));
}

Tensor Tensor::detach() const { return from(shape(), node_->data); }

Graph Graph::trace(const Tensor& root) {
    Graph g;
    g.root_ = root;
    if (!root.defined() || !root.requires_grad()) return g;
    // Iterative post-order DFS; `order_` ends up inputs-first.
    std::unordered_set<const detail::Node*> seen;
    std::vector<std::pair<detail::Node*, std::size_t>> stack;
    stack.emplace_back(root.node_.get(), 0);
    seen.insert(root.node_.get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            detail::Node* parent = node->parents[next++].get();
            if (seen.insert(parent).second) stack.emplace_back(parent, 0);
        } else {
            g.order_.push_back(node);
            stack.pop_back();
        }
    }
    return g;
}

void Graph::backward(std::span<const double> seed) const {
    if (order_.empty()) return;
    root_.accumulate_grad(seed);
    for (auto it = order_.rbegin(); it != order_.rend(); ++it) {
        detail::Node* node = *it;
        if (!node->backward || node->grad.empty()) continue;
        node->backward(node->grad);
    }
}

}  // namespace etsf
