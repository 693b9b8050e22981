#pragma once

#include "cohomology.hpp"
#include "counter_rng.hpp"
#include "intlinalg.hpp"
#include "io.hpp"
#include "model.hpp"
#include "parallel.hpp"
#include "popa.hpp"
#include "presentation.hpp"
#include "sofic.hpp"
#include "svg.hpp"
#include "walk.hpp"
