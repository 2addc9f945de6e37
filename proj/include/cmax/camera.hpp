#pragma once

#include "cmax/types.hpp"

namespace cmax {

// Forward plumb-bob distortion on calibrated (normalized) coordinates.
Eigen::Vector2d distort_calibrated(const Eigen::Vector2d &xc,
                                   const CameraIntrinsics &K);

// Pixel -> calibrated coordinates. Distortion is removed with a fixed-point
// iteration (<= 10 steps, tolerance 1e-8 px).
Eigen::Vector2d pixel_to_calibrated(const Eigen::Vector2d &px,
                                    const CameraIntrinsics &K);

// Calibrated -> pixel coordinates (applies distortion, then K).
Eigen::Vector2d calibrated_to_pixel(const Eigen::Vector2d &xc,
                                    const CameraIntrinsics &K);

// Moves every event to its undistorted pixel position, i.e. where an ideal
// distortion-free camera with the same K would have seen it. Warps expect
// their input in this space.
EventSlice undistort_events(const EventSlice &slice,
                            const CameraIntrinsics &K);

// K with the distortion zeroed; the image of undistort_events is metric
// under this model.
CameraIntrinsics undistorted_model(const CameraIntrinsics &K);

} // namespace cmax
