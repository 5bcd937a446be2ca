#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

#include "mbcd/rng.hpp"

namespace mbcd {

// One environment transition.
struct Transition {
    Vec s;
    Vec a;
    double r = 0.0;
    Vec s_next;
    bool terminal = false;
};

// Fixed-capacity ring buffer with uniform sampling over current contents.
class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
        if (capacity == 0) throw std::invalid_argument("ReplayBuffer: capacity must be positive");
    }

    void push(Transition t) {
        if (data_.size() < capacity_) {
            data_.push_back(std::move(t));
        } else {
            data_[insertions_ % capacity_] = std::move(t);
        }
        ++insertions_;
    }

    const Transition& sample(Rng& rng) const {
        if (data_.empty()) throw std::out_of_range("ReplayBuffer: sample from empty buffer");
        return data_[rng.index(data_.size())];
    }

    const Transition& at(std::size_t i) const { return data_.at(i); }

    std::size_t size() const { return data_.size(); }
    std::size_t capacity() const { return capacity_; }
    std::size_t insertions() const { return insertions_; }
    bool empty() const { return data_.empty(); }

    void clear() {
        data_.clear();
        insertions_ = 0;
    }

private:
    std::size_t capacity_;
    std::size_t insertions_ = 0;
    std::vector<Transition> data_;
};

}  // namespace mbcd
