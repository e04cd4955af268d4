// Bounded, trial-aware replay memory.
#pragma once

#include "acerac/types.hpp"

#include <algorithm>
#include <cstddef>
#include <optional>
#include <random>
#include <vector>

namespace acerac {

/// One registered interaction step ⟨s_t, A_t, a_t, r_t, s_{t+1}⟩ with trial bookkeeping.
struct Transition {
    Vector s;
    Vector actor_output; ///< A(s_t; θ) at collection time
    Vector action;       ///< executed (clamped) action
    double reward = 0.0;
    Vector s_next;
    bool terminal = false; ///< s_next is absorbing, its value is 0
    long long trial_id = 0;
    long long step_in_trial = 0;
};

/**
 * @brief Contiguous run of transitions i..i+n-1 from a single trial.
 *
 * `prev` points at transition i-1 whenever i is not the first step of its trial.
 * Pointers stay valid until the next push into the owning memory.
 */
struct Segment {
    std::vector<const Transition*> steps;
    const Transition* prev = nullptr;

    [[nodiscard]] int horizon() const { return static_cast<int>(steps.size()); }
    [[nodiscard]] bool is_trial_start() const { return prev == nullptr; }
    [[nodiscard]] const Transition& first() const { return *steps.front(); }
    /// s_{i+n} for 1 <= n <= horizon
    [[nodiscard]] const Vector& bootstrap_state(int n) const { return steps.at(n - 1)->s_next; }
    [[nodiscard]] bool bootstrap_terminal(int n) const { return steps.at(n - 1)->terminal; }
};

class ReplayMemory {
  public:
    ReplayMemory(std::size_t capacity, int state_dim, int action_dim)
        : capacity_(capacity), state_dim_(state_dim), action_dim_(action_dim) {
        detail::require(capacity >= 1, "ReplayMemory: capacity must be >= 1");
        detail::require(state_dim >= 1 && action_dim >= 1, "ReplayMemory: dimensions must be >= 1");
        data_.reserve(std::min<std::size_t>(capacity, 1u << 16));
    }

    void push(Transition t) {
        detail::require_size(t.s.size(), state_dim_, "Transition state");
        detail::require_size(t.s_next.size(), state_dim_, "Transition next state");
        detail::require_size(t.action.size(), action_dim_, "Transition action");
        detail::require_size(t.actor_output.size(), action_dim_, "Transition actor output");
        detail::require(t.step_in_trial >= 0, "Transition: step_in_trial must be >= 0");
        if (size_ > 0) {
            const Transition& last = at(size_ - 1);
            if (last.trial_id == t.trial_id) {
                detail::require(t.step_in_trial == last.step_in_trial + 1 && !last.terminal,
                                "Transition: steps within a trial must be consecutive");
            }
        }
        if (data_.size() < capacity_) {
            data_.push_back(std::move(t));
        } else {
            data_[head_] = std::move(t);
            head_ = (head_ + 1) % capacity_;
        }
        size_ = data_.size();
        first_eligible_.reset();
    }

    [[nodiscard]] std::size_t size() const { return size_; }
    [[nodiscard]] std::size_t capacity() const { return capacity_; }
    [[nodiscard]] bool empty() const { return size_ == 0; }

    /// Transition at logical position k (0 = oldest).
    [[nodiscard]] const Transition& at(std::size_t k) const {
        if (k >= size_) {
            throw std::out_of_range("ReplayMemory::at");
        }
        return data_[(head_ + k) % data_.size()];
    }

    /// Leading transitions whose trial start has been evicted are not replayable.
    [[nodiscard]] std::size_t first_eligible() const {
        if (!first_eligible_) {
            std::size_t k = 0;
            if (size_ > 0 && at(0).step_in_trial > 0) {
                const long long orphan_trial = at(0).trial_id;
                while (k < size_ && at(k).trial_id == orphan_trial) {
                    ++k;
                }
            }
            first_eligible_ = k;
        }
        return *first_eligible_;
    }

    [[nodiscard]] std::size_t eligible_count() const { return size_ - first_eligible(); }

    [[nodiscard]] bool is_eligible(std::size_t k) const { return k < size_ && k >= first_eligible(); }

    template <typename Rng>
    [[nodiscard]] std::size_t sample_index(Rng& rng) const {
        if (eligible_count() == 0) {
            throw NotReadyError("ReplayMemory: no replayable transitions");
        }
        std::uniform_int_distribution<std::size_t> pick(first_eligible(), size_ - 1);
        return pick(rng);
    }

    [[nodiscard]] Segment extract_segment(std::size_t i, int tau) const {
        detail::require(tau >= 1, "extract_segment: tau must be >= 1");
        if (!is_eligible(i)) {
            throw std::invalid_argument("extract_segment: index is not eligible");
        }
        Segment seg;
        const Transition& start = at(i);
        if (start.step_in_trial > 0) {
            seg.prev = &at(i - 1);
        }
        seg.steps.push_back(&start);
        for (std::size_t k = i + 1; k < size_ && seg.horizon() < tau; ++k) {
            const Transition& next = at(k);
            if (next.trial_id != start.trial_id) {
                break;
            }
            seg.steps.push_back(&next);
        }
        return seg;
    }

  private:
    std::size_t capacity_;
    int state_dim_;
    int action_dim_;
    std::vector<Transition> data_;
    std::size_t head_ = 0;
    std::size_t size_ = 0;
    mutable std::optional<std::size_t> first_eligible_;
};

} // namespace acerac
