// SPDX-License-Identifier: Apache-2.0
#include "stylepoint/tensor/tensor.hpp"
#include "stylepoint/tensor/tape.hpp"

#include <sstream>

namespace stylepoint {

std::int64_t shape_numel(const Shape &shape) {
    std::int64_t n = 1;
    for (auto e : shape) {
        if (e < 0) {
            throw ShapeError("negative extent in shape " + shape_str(shape));
        }
        n *= e;
    }
    return n;
}

std::string shape_str(const Shape &shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        os << (i ? ", " : "") << shape[i];
    }
    os << ']';
    return os.str();
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0f, requires_grad); }

Tensor Tensor::full(Shape shape, float value, bool requires_grad) {
    auto impl = std::make_shared<TensorImpl>();
    impl->data.assign(static_cast<std::size_t>(shape_numel(shape)), value);
    impl->shape = std::move(shape);
    impl->requires_grad = requires_grad;
    return Tensor(std::move(impl));
}

Tensor Tensor::from(Shape shape, std::vector<float> values, bool requires_grad) {
    if (shape_numel(shape) != static_cast<std::int64_t>(values.size())) {
        throw ShapeError("shape " + shape_str(shape) + " does not match " + std::to_string(values.size()) +
                         " values");
    }
    auto impl = std::make_shared<TensorImpl>();
    impl->shape = std::move(shape);
    impl->data = std::move(values);
    impl->requires_grad = requires_grad;
    return Tensor(std::move(impl));
}

Tensor Tensor::scalar(float value, bool requires_grad) { return from({}, {value}, requires_grad); }

TensorImpl &Tensor::impl() const {
    if (!impl_) {
        throw std::logic_error("access to undefined tensor");
    }
    return *impl_;
}

std::int64_t Tensor::size(std::int64_t axis) const {
    const auto d = dim();
    if (axis < 0) {
        axis += d;
    }
    if (axis < 0 || axis >= d) {
        throw ShapeError("axis " + std::to_string(axis) + " out of range for shape " + shape_str(shape()));
    }
    return shape()[static_cast<std::size_t>(axis)];
}

float Tensor::item() const {
    if (numel() != 1) {
        throw ShapeError("item() on tensor of shape " + shape_str(shape()));
    }
    return impl().data[0];
}

std::span<float> Tensor::mutable_grad() {
    auto &im = impl();
    if (im.grad.empty()) {
        im.grad.assign(im.data.size(), 0.0f);
    }
    return im.grad;
}

Tensor Tensor::clone() const { return from(shape(), impl().data, false); }

Tensor Tensor::detach() const { return from(shape(), impl().data, false); }

} // namespace stylepoint
