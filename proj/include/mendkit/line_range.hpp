#pragma once

#include <cstddef>
#include <ostream>

namespace mendkit {

// 1-based inclusive start; length 0 denotes an insertion point before `start`.
struct LineRange {
    std::size_t start = 1;
    std::size_t length = 0;

    // Last covered line. Only meaningful for length > 0.
    std::size_t last() const { return start + length - 1; }
    bool empty() const { return length == 0; }

    // Range must fit a file of `line_count` lines; insertion points may sit
    // one past the last line.
    bool within(std::size_t line_count) const {
        if (start < 1) return false;
        if (length == 0) return start <= line_count + 1;
        return last() <= line_count;
    }

    bool contains(const LineRange& other) const {
        if (other.length == 0) {
            // An insertion point is inside when it falls between two covered lines
            // or at either boundary of the covered block.
            return length > 0 ? (other.start >= start && other.start <= last() + 1)
                              : other.start == start;
        }
        return length > 0 && other.start >= start && other.last() <= last();
    }

    bool overlaps(const LineRange& other) const {
        if (length == 0 || other.length == 0) {
            // Two insertion points at the same spot, or an insertion inside a
            // replaced block, cannot be applied independently.
            const LineRange& ins = length == 0 ? *this : other;
            const LineRange& blk = length == 0 ? other : *this;
            if (blk.length == 0) return ins.start == blk.start;
            return ins.start > blk.start && ins.start <= blk.last();
        }
        return start <= other.last() && other.start <= last();
    }

    friend bool operator==(const LineRange&, const LineRange&) = default;
};

inline std::ostream& operator<<(std::ostream& os, const LineRange& r) {
    return os << r.start << "+" << r.length;
}

}  // namespace mendkit
