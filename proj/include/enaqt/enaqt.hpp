#pragma once

#include "enaqt/bounds.hpp"
#include "enaqt/error.hpp"
#include "enaqt/gf.hpp"
#include "enaqt/lattice.hpp"
#include "enaqt/mcwf.hpp"
#include "enaqt/oned.hpp"
#include "enaqt/rng.hpp"
#include "enaqt/spectral.hpp"
#include "enaqt/superop.hpp"
