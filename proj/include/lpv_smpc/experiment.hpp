#ifndef LPV_SMPC_EXPERIMENT_HPP
#define LPV_SMPC_EXPERIMENT_HPP

#include "lpv_smpc/experiment/config.hpp"
#include "lpv_smpc/experiment/pipeline.hpp"
#include "lpv_smpc/experiment/stages.hpp"

#endif  // LPV_SMPC_EXPERIMENT_HPP
