// SPDX-License-Identifier: Apache-2.0
#include "stylepoint/tensor/tape.hpp"

namespace stylepoint {

namespace {
thread_local Tape *g_active_tape = nullptr;
}

void Tape::record(Tensor output, BackwardFn backward) {
    nodes_.push_back(Node{output.impl_ptr(), std::move(backward)});
}

void Tape::backward(const Tensor &loss) {
    if (!loss.defined() || loss.numel() != 1) {
        throw ShapeError("backward() needs a scalar loss, got shape " +
                         (loss.defined() ? shape_str(loss.shape()) : std::string("<undefined>")));
    }
    if (nodes_.empty()) {
        throw std::logic_error("backward() on an empty tape");
    }
    auto &seed = loss.impl_ptr()->grad;
    if (seed.empty()) {
        seed.assign(1, 0.0f);
    }
    seed[0] += 1.0f;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
        if (it->output->grad.empty()) {
            continue; // not on a path to the loss
        }
        it->backward(it->output->grad);
    }
}

TapeScope::TapeScope(Tape &tape) : previous_(g_active_tape) { g_active_tape = &tape; }

TapeScope::~TapeScope() { g_active_tape = previous_; }

Tape *active_tape() { return g_active_tape; }

bool should_record(std::initializer_list<const Tensor *> inputs) {
    if (g_active_tape == nullptr) {
        return false;
    }
    for (const Tensor *t : inputs) {
        if (t != nullptr && t->requires_grad()) {
            return true;
        }
    }
    return false;
}

void accumulate_grad(const Tensor &target, std::span<const float> values) {
    if (!target.requires_grad()) {
        return;
    }
    auto &g = target.impl_ptr()->grad;
    if (g.empty()) {
        g.assign(values.begin(), values.end());
        return;
    }
    for (std::size_t i = 0; i < g.size(); ++i) {
        g[i] += values[i];
    }
}

} // namespace stylepoint
