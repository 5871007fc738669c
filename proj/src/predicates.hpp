#pragma once

// Orientation and in-circle tests with a floating-point filter and an exact
// rational fallback for the ambiguous cases.

#include "tubeox/geometry.hpp"

namespace tubeox::detail {

/// > 0 if (a, b, c) is counterclockwise, < 0 if clockwise, 0 if collinear.
int orient2d(Vec2 a, Vec2 b, Vec2 c);

/// > 0 if d lies strictly inside the circle through counterclockwise (a, b, c).
int incircle(Vec2 a, Vec2 b, Vec2 c, Vec2 d);

}  // namespace tubeox::detail
