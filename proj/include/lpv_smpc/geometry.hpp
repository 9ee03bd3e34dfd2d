#ifndef LPV_SMPC_GEOMETRY_HPP
#define LPV_SMPC_GEOMETRY_HPP

#include "lpv_smpc/geometry/invariant.hpp"
#include "lpv_smpc/geometry/polytope.hpp"

#endif  // LPV_SMPC_GEOMETRY_HPP
