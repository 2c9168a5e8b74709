#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "fpeval/errors.hpp"

namespace fpeval {

/// Averaging schemes for comparing two attribute sets on one instance.
/// The binary views treat every attribute slot as a two-class prediction.
enum class F1Mode {
    micro,
    macro,
    binary_micro,
    binary_macro,
};

F1Mode parse_f1_mode(std::string_view name);
std::string to_string(F1Mode mode);

/// Per-instance attribute set over a fixed universe, kept as strictly
/// increasing ids. Equivalent to a multi-hot vector of the universe length.
class AttributeVector {
public:
    AttributeVector() = default;
    explicit AttributeVector(std::vector<int32_t> ids);

    const std::vector<int32_t>& ids() const { return ids_; }
    bool empty() const { return ids_.empty(); }
    size_t size() const { return ids_.size(); }
    bool contains(int32_t id) const;

    bool operator==(const AttributeVector& other) const = default;

private:
    std::vector<int32_t> ids_; // sorted, unique
};

struct ConfusionCounts {
    int64_t tp = 0;
    int64_t fp = 0;
    int64_t fn = 0;
    int64_t tn = 0;
};

/// Multi-hot confusion counts over a universe of `universe` attribute slots.
/// Throws if any id falls outside [0, universe).
ConfusionCounts confusion_counts(const AttributeVector& gt, const AttributeVector& pred,
                                 int universe);

/// F1 for the given averaging mode, computed from confusion counts.
double f1_from_counts(const ConfusionCounts& c, int universe, F1Mode mode);

/// Per-instance attribute F1 between a ground-truth set and a predicted set.
double attribute_f1(const AttributeVector& gt, const AttributeVector& pred, int universe,
                    F1Mode mode);

} // namespace fpeval
