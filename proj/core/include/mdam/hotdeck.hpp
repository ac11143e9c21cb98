#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mdam/completed.hpp"
#include "mdam/random.hpp"

namespace mdam {

/// Respondent rows grouped by the cross-classification of key variables.
///
/// Cells are numbered in mixed radix over the key variables' level indices,
/// first key varying slowest. Every cell exists even when empty.
class DonorPoolIndex {
public:
    DonorPoolIndex() = default;

    std::size_t pool_count() const { return pools_.size(); }
    const std::vector<std::size_t>& keys() const { return keys_; }
    const std::vector<std::size_t>& pool(std::size_t cell) const { return pools_[cell]; }

    /// Cell of a tuple of level indices (one per key variable).
    std::size_t cell_of(std::span<const int> levels) const;
    /// Cell of row `row` of `data` from its current key values.
    std::size_t cell_of_row(const CompletedDataset& data, std::size_t row) const;
    std::vector<int> levels_of(std::size_t cell) const;

    /// The cell that donation falls back to when `cell` is empty: the
    /// nonempty cell at smallest Hamming distance, ties to the larger pool and
    /// then the lower cell number. Returns `cell` itself when nonempty.
    std::size_t resolve(std::size_t cell) const;

    friend DonorPoolIndex build_pools(const CompletedDataset& completed,
                                      const std::vector<std::string>& key_vars);

private:
    std::vector<std::size_t> keys_;
    std::vector<int> radix_;
    std::vector<std::vector<std::size_t>> pools_;
};

/// Partitions the unit respondents of `completed` by their key values.
DonorPoolIndex build_pools(const CompletedDataset& completed, const std::vector<std::string>& key_vars);

/// Uniform donor from the recipient's pool, or from the fallback pool when
/// that one is empty. Throws when every pool is empty.
std::size_t donate(const DonorPoolIndex& index, std::size_t cell, Rng& rng);

/// Copies one donor row's values of every non-key variable into each unit
/// nonrespondent of `data`; key variables must already be filled.
void hot_deck_fill(CompletedDataset& data, const DonorPoolIndex& index, Rng& rng);

}  // namespace mdam
