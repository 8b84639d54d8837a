#pragma once

#include "refocus/backends.hpp"
#include "refocus/codec.hpp"
#include "refocus/config.hpp"
#include "refocus/engine.hpp"
#include "refocus/error.hpp"
#include "refocus/geometry.hpp"
#include "refocus/image.hpp"
#include "refocus/layout_io.hpp"
#include "refocus/manifest.hpp"
#include "refocus/scoring.hpp"
#include "refocus/seeding.hpp"
#include "refocus/sim.hpp"
