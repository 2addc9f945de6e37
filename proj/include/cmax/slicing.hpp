#pragma once

#include <vector>

#include "cmax/types.hpp"

namespace cmax {

enum class TrefPolicy {
  first_event,     // t_ref = time of the first event in the slice
  window_midpoint, // t_ref = temporal midpoint of the window
};

// Sliding count windows at offsets 0, stride, 2*stride, ... A trailing
// partial window is emitted only when it holds >= 50% of `count` events.
std::vector<EventSlice> slice_by_count(const EventSlice &slice,
                                       std::size_t count, std::size_t stride,
                                       TrefPolicy tref = TrefPolicy::first_event);

// Fixed-duration windows [t0 + k*stride, t0 + k*stride + dt). Empty windows
// are dropped; a trailing window is emitted only when it covers >= 50% of dt.
std::vector<EventSlice> slice_by_duration(const EventSlice &slice, double dt,
                                          double stride,
                                          TrefPolicy tref = TrefPolicy::first_event);

} // namespace cmax
