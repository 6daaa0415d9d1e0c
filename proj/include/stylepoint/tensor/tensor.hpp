// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace stylepoint {

using Shape = std::vector<std::int64_t>;

std::int64_t shape_numel(const Shape &shape);
std::string shape_str(const Shape &shape);

/// Raised when op inputs have incompatible extents. The message names both shapes.
class ShapeError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

struct TensorImpl {
    Shape shape;
    std::vector<float> data;
    std::vector<float> grad; // empty until a backward pass reaches this tensor
    bool requires_grad = false;
};

/// Dense row-major float32 tensor with shared ownership of its storage.
///
/// Copies are shallow: two Tensor handles made by copy refer to the same
/// buffer and gradient. Use clone() for a deep copy.
class Tensor {
  public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, float value, bool requires_grad = false);
    static Tensor from(Shape shape, std::vector<float> values, bool requires_grad = false);
    static Tensor scalar(float value, bool requires_grad = false);

    bool defined() const { return impl_ != nullptr; }
    const Shape &shape() const { return impl().shape; }
    std::int64_t dim() const { return static_cast<std::int64_t>(shape().size()); }
    std::int64_t size(std::int64_t axis) const;
    std::int64_t numel() const { return static_cast<std::int64_t>(impl().data.size()); }

    std::span<float> data() { return impl().data; }
    std::span<const float> data() const { return impl().data; }
    float item() const;
    std::vector<float> to_vector() const { return impl().data; }

    bool requires_grad() const { return defined() && impl().requires_grad; }
    void set_requires_grad(bool value) { impl().requires_grad = value; }

    bool has_grad() const { return defined() && !impl().grad.empty(); }
    std::span<const float> grad() const { return impl().grad; }
    /// Gradient buffer, allocated as zeros on first access.
    std::span<float> mutable_grad();
    void zero_grad() { impl().grad.clear(); }

    /// Deep copy of the values; the copy is a fresh leaf.
    Tensor clone() const;
    /// Handle to the same values without gradient tracking.
    Tensor detach() const;

    const std::shared_ptr<TensorImpl> &impl_ptr() const { return impl_; }
    bool same_storage(const Tensor &other) const { return impl_ == other.impl_; }

  private:
    explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}
    TensorImpl &impl() const;

    std::shared_ptr<TensorImpl> impl_;
};

} // namespace stylepoint
