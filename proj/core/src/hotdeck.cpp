#include "mdam/hotdeck.hpp"

#include <cmath>
#include <limits>

namespace mdam {

std::size_t DonorPoolIndex::cell_of(std::span<const int> levels) const {
    if (levels.size() != keys_.size()) throw Error("hot deck: key tuple has the wrong length");
    std::size_t cell = 0;
    for (std::size_t k = 0; k < keys_.size(); ++k) {
        if (levels[k] < 0 || levels[k] >= radix_[k]) throw Error("hot deck: key level out of range");
        cell = cell * static_cast<std::size_t>(radix_[k]) + static_cast<std::size_t>(levels[k]);
    }
    return cell;
}

std::size_t DonorPoolIndex::cell_of_row(const CompletedDataset& data, std::size_t row) const {
    std::vector<int> levels(keys_.size());
    for (std::size_t k = 0; k < keys_.size(); ++k) {
        const double v = data.value(keys_[k], row);
        if (std::isnan(v)) throw Error("hot deck: key '" + data.schema()[keys_[k]].name + "' is unfilled");
        levels[k] = data.schema()[keys_[k]].level_index(v);
    }
    return cell_of(levels);
}

std::vector<int> DonorPoolIndex::levels_of(std::size_t cell) const {
    std::vector<int> levels(keys_.size());
    for (std::size_t k = keys_.size(); k-- > 0;) {
        levels[k] = static_cast<int>(cell % static_cast<std::size_t>(radix_[k]));
        cell /= static_cast<std::size_t>(radix_[k]);
    }
    return levels;
}

std::size_t DonorPoolIndex::resolve(std::size_t cell) const {
    if (cell >= pools_.size()) throw Error("hot deck: cell out of range");
    if (!pools_[cell].empty()) return cell;
    const auto target = levels_of(cell);
    std::size_t best = pools_.size();
    std::size_t best_distance = std::numeric_limits<std::size_t>::max();
    for (std::size_t c = 0; c < pools_.size(); ++c) {
        if (pools_[c].empty()) continue;
        const auto levels = levels_of(c);
        std::size_t distance = 0;
        for (std::size_t k = 0; k < levels.size(); ++k) distance += levels[k] != target[k];
        if (distance < best_distance ||
            (distance == best_distance && pools_[c].size() > pools_[best].size())) {
            best = c;
            best_distance = distance;
        }
    }
    if (best == pools_.size()) throw Error("hot deck: every donor pool is empty");
    return best;
}

DonorPoolIndex build_pools(const CompletedDataset& completed, const std::vector<std::string>& key_vars) {
    DonorPoolIndex index;
    const Schema& schema = completed.schema();
    std::size_t cells = 1;
    for (const auto& name : key_vars) {
        const std::size_t j = schema.index_of(name);
        if (!schema[j].is_categorical())
            throw Error("hot deck: key variable '" + name + "' is continuous");
        index.keys_.push_back(j);
        index.radix_.push_back(schema[j].level_count());
        cells *= static_cast<std::size_t>(schema[j].level_count());
    }
    index.pools_.resize(cells);
    for (std::size_t i = 0; i < completed.rows(); ++i)
        if (!completed.unit_nonrespondent(i)) index.pools_[index.cell_of_row(completed, i)].push_back(i);
    return index;
}

std::size_t donate(const DonorPoolIndex& index, std::size_t cell, Rng& rng) {
    const auto& pool = index.pool(index.resolve(cell));
    return pool[uniform_index(rng, pool.size())];
}

void hot_deck_fill(CompletedDataset& data, const DonorPoolIndex& index, Rng& rng) {
    std::vector<bool> is_key(data.cols(), false);
    for (std::size_t k : index.keys()) is_key[k] = true;
    for (std::size_t i : data.nonrespondent_rows()) {
        const std::size_t donor = donate(index, index.cell_of_row(data, i), rng);
        for (std::size_t j = 0; j < data.cols(); ++j)
            if (!is_key[j]) data.impute(j, i, data.value(j, donor));
    }
}

}  // namespace mdam
