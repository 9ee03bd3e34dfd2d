#ifndef LPV_SMPC_LPV_HPP
#define LPV_SMPC_LPV_HPP

#include "lpv_smpc/lpv/benchmarks.hpp"
#include "lpv_smpc/lpv/data.hpp"
#include "lpv_smpc/lpv/metrics.hpp"
#include "lpv_smpc/lpv/simulate.hpp"
#include "lpv_smpc/lpv/system.hpp"

#endif  // LPV_SMPC_LPV_HPP
