#pragma once

#include <algorithm>
#include <cstddef>
#include <vector>

#include "attrcrit/errors.hpp"

namespace attrcrit {

/// Monotone-free boolean formula over indexed atomic conditions, evaluable on
/// any truth assignment.
class BoolStatement {
public:
    static BoolStatement atom(std::size_t index) {
        BoolStatement s;
        s.kind_ = Kind::atom;
        s.atom_ = index;
        return s;
    }
    static BoolStatement conj(BoolStatement a, BoolStatement b) {
        return combine(Kind::conj, std::move(a), std::move(b));
    }
    static BoolStatement disj(BoolStatement a, BoolStatement b) {
        return combine(Kind::disj, std::move(a), std::move(b));
    }
    static BoolStatement neg(BoolStatement a) {
        BoolStatement s;
        s.kind_ = Kind::neg;
        s.children_.push_back(std::move(a));
        return s;
    }

    bool evaluate(const std::vector<bool>& assignment) const {
        switch (kind_) {
            case Kind::atom:
                if (atom_ >= assignment.size()) {
                    throw RangeError("statement references atom beyond the assignment");
                }
                return assignment[atom_];
            case Kind::conj:
                return children_[0].evaluate(assignment) && children_[1].evaluate(assignment);
            case Kind::disj:
                return children_[0].evaluate(assignment) || children_[1].evaluate(assignment);
            case Kind::neg:
                return !children_[0].evaluate(assignment);
        }
        throw Error("unreachable statement kind");
    }

    std::size_t maxAtomIndex() const {
        if (kind_ == Kind::atom) return atom_;
        std::size_t best = 0;
        for (const BoolStatement& c : children_) best = std::max(best, c.maxAtomIndex());
        return best;
    }

private:
    enum class Kind { atom, conj, disj, neg };

    static BoolStatement combine(Kind k, BoolStatement a, BoolStatement b) {
        BoolStatement s;
        s.kind_ = k;
        s.children_.reserve(2);
        s.children_.push_back(std::move(a));
        s.children_.push_back(std::move(b));
        return s;
    }

    Kind kind_ = Kind::atom;
    std::size_t atom_ = 0;
    std::vector<BoolStatement> children_;
};

namespace detail {

inline void checkOrdering(const BoolStatement& s, const std::vector<std::size_t>& ordering) {
    std::vector<std::size_t> sorted = ordering;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        if (sorted[i] != i) throw RangeError("ordering is not a permutation of 0..n-1");
    }
    if (s.maxAtomIndex() >= ordering.size()) {
        throw RangeError("ordering does not cover the statement's atoms");
    }
}

} // namespace detail

/// Smallest number of leading atoms whose removal (made false, rest true)
/// falsifies the statement. Smaller is a better necessity ordering.
inline std::size_t logicalNecessityIndex(const BoolStatement& s,
                                         const std::vector<std::size_t>& ordering) {
    detail::checkOrdering(s, ordering);
    std::vector<bool> assignment(ordering.size(), true);
    if (!s.evaluate(assignment)) {
        throw UndefinedError("statement is false with every condition true");
    }
    for (std::size_t i = 1; i <= ordering.size(); ++i) {
        assignment[ordering[i - 1]] = false;
        if (!s.evaluate(assignment)) return i;
    }
    throw UndefinedError("no prefix removal falsifies the statement");
}

/// Smallest prefix of atoms that satisfies the statement on its own
/// (everything outside the prefix false). Smaller is a better sufficiency
/// ordering.
inline std::size_t logicalSufficiencyIndex(const BoolStatement& s,
                                           const std::vector<std::size_t>& ordering) {
    detail::checkOrdering(s, ordering);
    std::vector<bool> assignment(ordering.size(), false);
    if (s.evaluate(assignment)) return 0;
    for (std::size_t i = 1; i <= ordering.size(); ++i) {
        assignment[ordering[i - 1]] = true;
        if (s.evaluate(assignment)) return i;
    }
    throw UndefinedError("no prefix satisfies the statement");
}

} // namespace attrcrit
