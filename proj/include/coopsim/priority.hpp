#pragma once

#include <algorithm>
#include <utility>
#include <vector>

namespace coopsim {

/// Ordered pairs <prioritized, yielding> of CAV ids, kept sorted and unique
/// so that sets compare and deduplicate canonically.
struct PrioritySet {
    std::vector<std::pair<int, int>> pairs;

    bool contains(int hi, int lo) const {
        return std::binary_search(pairs.begin(), pairs.end(), std::make_pair(hi, lo));
    }
    bool involves(int hi, int lo) const { return contains(hi, lo) || contains(lo, hi); }

    void add(int hi, int lo) {
        auto p = std::make_pair(hi, lo);
        auto it = std::lower_bound(pairs.begin(), pairs.end(), p);
        if (it == pairs.end() || *it != p) pairs.insert(it, p);
    }

    void remove(int hi, int lo) {
        auto p = std::make_pair(hi, lo);
        auto it = std::lower_bound(pairs.begin(), pairs.end(), p);
        if (it != pairs.end() && *it == p) pairs.erase(it);
    }

    bool empty() const { return pairs.empty(); }
    std::size_t size() const { return pairs.size(); }

    bool operator==(const PrioritySet& o) const { return pairs == o.pairs; }
};

}  // namespace coopsim
