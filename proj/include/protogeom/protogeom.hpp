#pragma once

// Umbrella header for the prototype-geometry laboratory.

#include "protogeom/errors.hpp"
#include "protogeom/numeric.hpp"
#include "protogeom/geometry.hpp"
#include "protogeom/data.hpp"
#include "protogeom/loss.hpp"
#include "protogeom/analysis.hpp"
#include "protogeom/io.hpp"
#include "protogeom/config.hpp"
#include "protogeom/optim.hpp"
