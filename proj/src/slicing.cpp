#include "cmax/slicing.hpp"

#include <algorithm>

#include "cmax/errors.hpp"

namespace cmax {
namespace {

EventSlice make_slice(const std::vector<Event> &src, std::size_t lo,
                      std::size_t hi, TrefPolicy tref, double mid_hint) {
  EventSlice s;
  s.events.assign(src.begin() + lo, src.begin() + hi);
  if (tref == TrefPolicy::first_event)
    s.t_ref = s.events.front().t;
  else
    s.t_ref = mid_hint;
  return s;
}

} // namespace

std::vector<EventSlice> slice_by_count(const EventSlice &slice,
                                       std::size_t count, std::size_t stride,
                                       TrefPolicy tref) {
  if (count == 0) throw InvalidParameterError("window count must be > 0");
  if (stride == 0) throw InvalidParameterError("stride must be > 0");
  std::vector<EventSlice> out;
  const std::size_t n = slice.size();
  for (std::size_t off = 0; off < n; off += stride) {
    const std::size_t m = std::min(count, n - off);
    if (m < count && 2 * m < count) break; // dropped partial tail
    const double mid =
        0.5 * (slice.events[off].t + slice.events[off + m - 1].t);
    out.push_back(make_slice(slice.events, off, off + m, tref, mid));
    if (m < count) break;
  }
  return out;
}

std::vector<EventSlice> slice_by_duration(const EventSlice &slice, double dt,
                                          double stride, TrefPolicy tref) {
  if (!(dt > 0.0)) throw InvalidParameterError("window duration must be > 0");
  if (!(stride > 0.0)) throw InvalidParameterError("stride must be > 0");
  std::vector<EventSlice> out;
  if (slice.empty()) return out;
  const double t0 = slice.t_first(), t_end = slice.t_last();
  const auto &ev = slice.events;
  auto at_time = [&](double t) {
    return std::lower_bound(ev.begin(), ev.end(), t,
                            [](const Event &e, double tt) { return e.t < tt; });
  };
  for (std::size_t k = 0;; ++k) {
    const double ws = t0 + static_cast<double>(k) * stride;
    if (ws > t_end) break;
    const double we = ws + dt;
    if (we > t_end && (t_end - ws) < 0.5 * dt) break; // short tail window
    const auto lo = at_time(ws), hi = at_time(we);
    if (lo == hi) continue; // empty window
    out.push_back(make_slice(ev, static_cast<std::size_t>(lo - ev.begin()),
                             static_cast<std::size_t>(hi - ev.begin()), tref,
                             ws + 0.5 * dt));
  }
  return out;
}

} // namespace cmax
