#pragma once

/// \file time_mesh.hpp
/// \brief Partitions of a time horizon that are refined by bisection only.
///
/// Every interval remembers where it came from: the initial interval it
/// descends from, its dyadic level m and its offset k, so that the interval
/// is [t_i + k 2^-m (t_{i+1}-t_i), t_i + (k+1) 2^-m (t_{i+1}-t_i)].
/// Breakpoints are stored as doubles for evaluation; the integer tags are
/// the exact record of reachability.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace cpgts {

struct IntervalTag {
  std::size_t ancestor = 0;  // index into the initial mesh
  unsigned level = 0;        // number of bisections since the initial mesh
  std::uint64_t offset = 0;  // 0 <= offset < 2^level

  friend bool operator==(const IntervalTag&, const IntervalTag&) = default;
};

class TimeMesh {
 public:
  static constexpr unsigned max_level = 62;

  /// n equal intervals on [t0, t_end].
  static TimeMesh make_initial(double t0, double t_end, std::size_t n) {
    if (n == 0) throw std::invalid_argument("TimeMesh: interval count must be >= 1");
    if (!(t0 < t_end)) throw std::invalid_argument("TimeMesh: need t0 < t_end");
    std::vector<double> bp(n + 1);
    const double len = t_end - t0;
    for (std::size_t i = 0; i <= n; ++i)
      bp[i] = t0 + len * static_cast<double>(i) / static_cast<double>(n);
    bp.front() = t0;
    bp.back() = t_end;
    return from_breakpoints(std::move(bp));
  }

  /// Arbitrary strictly increasing breakpoints, treated as an initial mesh.
  static TimeMesh from_breakpoints(std::vector<double> bp) {
    if (bp.size() < 2) throw std::invalid_argument("TimeMesh: need at least two breakpoints");
    for (std::size_t i = 0; i + 1 < bp.size(); ++i)
      if (!(bp[i] < bp[i + 1]))
        throw std::invalid_argument("TimeMesh: breakpoints must be strictly increasing");
    TimeMesh m;
    m.initial_ = bp;
    m.tags_.resize(bp.size() - 1);
    for (std::size_t i = 0; i < m.tags_.size(); ++i) m.tags_[i] = IntervalTag{i, 0, 0};
    m.breakpoints_ = std::move(bp);
    return m;
  }

  std::size_t size() const { return tags_.size(); }
  double t0() const { return breakpoints_.front(); }
  double t_end() const { return breakpoints_.back(); }
  double left(std::size_t i) const { return breakpoints_[i]; }
  double right(std::size_t i) const { return breakpoints_[i + 1]; }
  double length(std::size_t i) const { return breakpoints_[i + 1] - breakpoints_[i]; }
  const std::vector<double>& breakpoints() const { return breakpoints_; }
  const std::vector<double>& initial_breakpoints() const { return initial_; }
  const IntervalTag& tag(std::size_t i) const { return tags_[i]; }

  double max_step() const {
    double h = 0.0;
    for (std::size_t i = 0; i < size(); ++i) h = std::max(h, length(i));
    return h;
  }
  double min_step() const {
    double h = length(0);
    for (std::size_t i = 1; i < size(); ++i) h = std::min(h, length(i));
    return h;
  }
  std::size_t argmin_step() const {
    std::size_t best = 0;
    for (std::size_t i = 1; i < size(); ++i)
      if (length(i) < length(best)) best = i;
    return best;
  }

  /// Interval containing t. Breakpoints belong to the interval on their
  /// right, except t_end which belongs to the last interval.
  std::size_t locate(double t) const {
    if (t <= breakpoints_.front()) return 0;
    if (t >= breakpoints_.back()) return size() - 1;
    auto it = std::upper_bound(breakpoints_.begin(), breakpoints_.end(), t);
    return static_cast<std::size_t>(it - breakpoints_.begin()) - 1;
  }

  /// Bisects every marked interval. Marks may be unsorted; duplicates count once.
  TimeMesh bisect(std::span<const std::size_t> marked) const {
    std::vector<char> flag(size(), 0);
    for (std::size_t i : marked) {
      if (i >= size()) throw std::out_of_range("TimeMesh::bisect: interval index " + std::to_string(i) + " out of range");
      flag[i] = 1;
    }
    TimeMesh out;
    out.initial_ = initial_;
    out.breakpoints_.reserve(breakpoints_.size() + marked.size());
    out.tags_.reserve(tags_.size() + marked.size());
    out.breakpoints_.push_back(breakpoints_.front());
    for (std::size_t i = 0; i < size(); ++i) {
      const IntervalTag& tg = tags_[i];
      if (flag[i]) {
        if (tg.level >= max_level) throw std::overflow_error("TimeMesh::bisect: dyadic level limit reached");
        out.breakpoints_.push_back(0.5 * (breakpoints_[i] + breakpoints_[i + 1]));
        out.tags_.push_back({tg.ancestor, tg.level + 1, 2 * tg.offset});
        out.tags_.push_back({tg.ancestor, tg.level + 1, 2 * tg.offset + 1});
      } else {
        out.tags_.push_back(tg);
      }
      out.breakpoints_.push_back(breakpoints_[i + 1]);
    }
    return out;
  }

  TimeMesh bisect(std::initializer_list<std::size_t> marked) const {
    return bisect(std::span<const std::size_t>(marked.begin(), marked.size()));
  }

  TimeMesh bisect_all() const {
    std::vector<std::size_t> all(size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    return bisect(all);
  }

  TimeMesh refine_uniformly(unsigned levels) const {
    TimeMesh m = *this;
    for (unsigned l = 0; l < levels; ++l) m = m.bisect_all();
    return m;
  }

  /// Checks that the tags tile every initial interval and that each stored
  /// breakpoint equals the dyadic point its tag describes (to rounding).
  bool provenance_consistent() const {
    if (tags_.empty() || breakpoints_.size() != tags_.size() + 1) return false;
    std::size_t anc = 0;
    std::uint64_t pos_num = 0;  // position inside the ancestor, in units of 2^-max_level
    for (std::size_t i = 0; i < size(); ++i) {
      const IntervalTag& tg = tags_[i];
      if (tg.level > max_level || tg.offset >= (std::uint64_t{1} << tg.level)) return false;
      const std::uint64_t scale = std::uint64_t{1} << (max_level - tg.level);
      if (tg.ancestor != anc || tg.offset * scale != pos_num) return false;
      const double a = initial_[anc], b = initial_[anc + 1];
      const double expect = a + (b - a) * std::ldexp(static_cast<double>(tg.offset), -static_cast<int>(tg.level));
      if (std::abs(expect - breakpoints_[i]) > (tg.level + 8) * std::numeric_limits<double>::epsilon() * std::max(std::abs(a), std::abs(b)) + 1e-300)
        return false;
      pos_num += scale;
      if (pos_num == (std::uint64_t{1} << max_level)) {
        ++anc;
        pos_num = 0;
      }
    }
    return anc == initial_.size() - 1 && pos_num == 0;
  }

 private:
  TimeMesh() = default;

  std::vector<double> breakpoints_;
  std::vector<IntervalTag> tags_;
  std::vector<double> initial_;
};

/// True iff every breakpoint of coarse is a breakpoint of fine and the
/// endpoints agree. Breakpoints are compared exactly: bisection computes each
/// midpoint from the same parent endpoints in every mesh of a family.
inline bool is_refinement_of(const TimeMesh& fine, const TimeMesh& coarse) {
  if (fine.t0() != coarse.t0() || fine.t_end() != coarse.t_end()) return false;
  const auto& f = fine.breakpoints();
  const auto& c = coarse.breakpoints();
  if (f.size() < c.size()) return false;
  std::size_t j = 0;
  for (double t : c) {
    while (j < f.size() && f[j] < t) ++j;
    if (j == f.size() || f[j] != t) return false;
  }
  return true;
}

inline nlohmann::json to_json(const TimeMesh& mesh) { return nlohmann::json(mesh.breakpoints()); }

inline TimeMesh mesh_from_json(const nlohmann::json& j) {
  return TimeMesh::from_breakpoints(j.get<std::vector<double>>());
}

}  // namespace cpgts
