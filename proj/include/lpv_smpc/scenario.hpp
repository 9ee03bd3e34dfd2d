#ifndef LPV_SMPC_SCENARIO_HPP
#define LPV_SMPC_SCENARIO_HPP

#include "lpv_smpc/scenario/kmeans.hpp"
#include "lpv_smpc/scenario/moments.hpp"
#include "lpv_smpc/scenario/sampling.hpp"
#include "lpv_smpc/scenario/tree.hpp"

#endif  // LPV_SMPC_SCENARIO_HPP
