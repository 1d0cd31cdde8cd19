#pragma once

// Umbrella header for the sonar single-object tracking toolkit.

#include "sonotrack/bbox.hpp"
#include "sonotrack/dataset.hpp"
#include "sonotrack/eval.hpp"
#include "sonotrack/fem.hpp"
#include "sonotrack/image.hpp"
#include "sonotrack/image_io.hpp"
#include "sonotrack/kalman.hpp"
#include "sonotrack/model.hpp"
#include "sonotrack/mtfm.hpp"
#include "sonotrack/otcm.hpp"
#include "sonotrack/rng.hpp"
#include "sonotrack/tensor.hpp"
#include "sonotrack/tracker.hpp"
