#pragma once

#include <numeric>
#include <optional>
#include <vector>

#include "textcnn/common.hpp"

namespace textcnn::train {

struct Batch {
    std::size_t epoch = 0;
    std::size_t index_in_epoch = 0;
    std::vector<std::size_t> indices;  // into the training set
};

/// Epoch-wise shuffled minibatches. Each epoch's order depends only on
/// (seed, epoch); the short final batch of an epoch is kept.
class BatchIterator {
public:
    BatchIterator(std::size_t n, std::size_t batch_size, std::size_t epochs, std::uint64_t seed)
        : n_(n), batch_size_(batch_size), epochs_(epochs), seed_(seed) {
        if (n == 0) {
            throw InvalidArgument("batch_iterator: empty training set");
        }
        if (batch_size == 0) {
            throw InvalidArgument("batch_iterator: batch_size must be >= 1");
        }
    }

    std::size_t batches_per_epoch() const { return (n_ + batch_size_ - 1) / batch_size_; }
    std::size_t total_batches() const { return epochs_ * batches_per_epoch(); }

    std::optional<Batch> next() {
        if (epoch_ >= epochs_) {
            return std::nullopt;
        }
        if (cursor_ == 0) {
            order_.resize(n_);
            std::iota(order_.begin(), order_.end(), std::size_t{0});
            Rng rng(derive_seed(seed_, 0xba7c0000ULL + epoch_));
            rng.shuffle(order_);
        }
        Batch b;
        b.epoch = epoch_;
        b.index_in_epoch = cursor_ / batch_size_;
        const std::size_t end = std::min(n_, cursor_ + batch_size_);
        b.indices.assign(order_.begin() + static_cast<std::ptrdiff_t>(cursor_),
                         order_.begin() + static_cast<std::ptrdiff_t>(end));
        cursor_ = end;
        if (cursor_ == n_) {
            cursor_ = 0;
            ++epoch_;
        }
        return b;
    }

private:
    std::size_t n_;
    std::size_t batch_size_;
    std::size_t epochs_;
    std::uint64_t seed_;
    std::size_t epoch_ = 0;
    std::size_t cursor_ = 0;
    std::vector<std::size_t> order_;
};

}  // namespace textcnn::train
