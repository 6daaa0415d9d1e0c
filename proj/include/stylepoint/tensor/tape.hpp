// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "stylepoint/tensor/tensor.hpp"

#include <functional>
#include <span>
#include <vector>

namespace stylepoint {

/// Backward rule of one recorded op: receives d(loss)/d(output) and
/// accumulates into the gradients of the op's inputs.
using BackwardFn = std::function<void(std::span<const float> grad_output)>;

/// Ordered record of differentiable ops.
///
/// Ops append nodes while a TapeScope is active on the calling thread and at
/// least one input requires a gradient. Recording order is a topological
/// order, so backward() walks the nodes in reverse exactly once.
class Tape {
  public:
    Tape() = default;
    Tape(const Tape &) = delete;
    Tape &operator=(const Tape &) = delete;

    void record(Tensor output, BackwardFn backward);

    /// Seeds d(loss)/d(loss) = 1 and runs every node's backward rule in
    /// reverse recording order. Gradients accumulate into existing buffers.
    void backward(const Tensor &loss);

    std::size_t size() const { return nodes_.size(); }
    void clear() { nodes_.clear(); }

  private:
    struct Node {
        std::shared_ptr<TensorImpl> output;
        BackwardFn backward;
    };
    std::vector<Node> nodes_;
};

/// Makes a tape the active recording target for the current thread.
class TapeScope {
  public:
    explicit TapeScope(Tape &tape);
    ~TapeScope();
    TapeScope(const TapeScope &) = delete;
    TapeScope &operator=(const TapeScope &) = delete;

  private:
    Tape *previous_;
};

Tape *active_tape();

/// True when an op over these inputs must be recorded.
bool should_record(std::initializer_list<const Tensor *> inputs);

/// Accumulates `values` into the gradient of `target` if it tracks one.
void accumulate_grad(const Tensor &target, std::span<const float> values);

} // namespace stylepoint
