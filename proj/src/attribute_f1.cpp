#include "fpeval/attribute_f1.hpp"

#include <algorithm>

namespace fpeval {

F1Mode parse_f1_mode(std::string_view name) {
    if (name == "micro") return F1Mode::micro;
    if (name == "macro") return F1Mode::macro;
    if (name == "binary-micro") return F1Mode::binary_micro;
    if (name == "binary-macro") return F1Mode::binary_macro;
    throw ContractError("unknown f1 mode: " + std::string(name));
}

std::string to_string(F1Mode mode) {
    switch (mode) {
        case F1Mode::micro: return "micro";
        case F1Mode::macro: return "macro";
        case F1Mode::binary_micro: return "binary-micro";
        case F1Mode::binary_macro: return "binary-macro";
    }
    throw ContractError("invalid f1 mode value");
}

AttributeVector::AttributeVector(std::vector<int32_t> ids) : ids_(std::move(ids)) {
    std::sort(ids_.begin(), ids_.end());
    ids_.erase(std::unique(ids_.begin(), ids_.end()), ids_.end());
}

bool AttributeVector::contains(int32_t id) const {
    return std::binary_search(ids_.begin(), ids_.end(), id);
}

ConfusionCounts confusion_counts(const AttributeVector& gt, const AttributeVector& pred,
                                 int universe) {
    if (universe <= 0) throw ContractError("attribute universe must be positive");
    const auto check = [universe](const AttributeVector& v) {
        for (int32_t id : v.ids()) {
            if (id < 0 || id >= universe) {
                throw ContractError("attribute id " + std::to_string(id) +
                                    " outside universe of size " + std::to_string(universe));
            }
        }
    };
    check(gt);
    check(pred);

    int64_t tp = 0;
    const auto& g = gt.ids();
    const auto& p = pred.ids();
    size_t i = 0, j = 0;
    while (i < g.size() && j < p.size()) {
        if (g[i] == p[j]) {
            ++tp;
            ++i;
            ++j;
        } else if (g[i] < p[j]) {
            ++i;
        } else {
            ++j;
        }
    }
    ConfusionCounts c;
    c.tp = tp;
    c.fp = static_cast<int64_t>(p.size()) - tp;
    c.fn = static_cast<int64_t>(g.size()) - tp;
    c.tn = universe - c.tp - c.fp - c.fn;
    return c;
}

double f1_from_counts(const ConfusionCounts& c, int universe, F1Mode mode) {
    // F1 with 1 as the positive class; empty-vs-empty counts as perfect
    // agreement (0/0 -> 1).
    const auto f1_pos = [&]() -> double {
        const int64_t denom = 2 * c.tp + c.fp + c.fn;
        if (denom == 0) return 1.0;
        return 2.0 * static_cast<double>(c.tp) / static_cast<double>(denom);
    };
    // F1 with 0 as the positive class: tp0=tn, fp0=fn, fn0=fp.
    const auto f1_neg = [&]() -> double {
        const int64_t denom = 2 * c.tn + c.fn + c.fp;
        if (denom == 0) return 1.0;
        return 2.0 * static_cast<double>(c.tn) / static_cast<double>(denom);
    };

    switch (mode) {
        case F1Mode::micro:
            return f1_pos();
        case F1Mode::macro:
            // Per-attribute-class F1 on a single instance is 1 for an agreeing
            // set bit and 0 otherwise (zero-support classes score 0), so the
            // unweighted mean over the universe reduces to tp / universe.
            return static_cast<double>(c.tp) / static_cast<double>(universe);
        case F1Mode::binary_micro:
            // Pooling the two classes makes precision == recall == accuracy.
            return static_cast<double>(c.tp + c.tn) / static_cast<double>(universe);
        case F1Mode::binary_macro:
            return (f1_pos() + f1_neg()) / 2.0;
    }
    throw ContractError("invalid f1 mode value");
}

double attribute_f1(const AttributeVector& gt, const AttributeVector& pred, int universe,
                    F1Mode mode) {
    return f1_from_counts(confusion_counts(gt, pred, universe), universe, mode);
}

} // namespace fpeval
