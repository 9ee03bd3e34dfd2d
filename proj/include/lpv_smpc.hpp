#ifndef LPV_SMPC_HPP
#define LPV_SMPC_HPP

#include "lpv_smpc/bnn.hpp"
#include "lpv_smpc/common.hpp"
#include "lpv_smpc/experiment.hpp"
#include "lpv_smpc/geometry.hpp"
#include "lpv_smpc/lpv.hpp"
#include "lpv_smpc/mpc.hpp"
#include "lpv_smpc/opt.hpp"
#include "lpv_smpc/rng.hpp"
#include "lpv_smpc/scenario.hpp"
#include "lpv_smpc/terminal.hpp"

#endif  // LPV_SMPC_HPP
