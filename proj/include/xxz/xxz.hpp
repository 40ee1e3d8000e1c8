#ifndef XXZ_XXZ_HPP
#define XXZ_XXZ_HPP

#include "error.hpp"
#include "types.hpp"
#include "numerics.hpp"
#include "qlax.hpp"
#include "oracle.hpp"
#include "ness.hpp"
#include "fcs.hpp"
#include "parallel.hpp"

#endif
