#ifndef LPV_SMPC_OPT_HPP
#define LPV_SMPC_OPT_HPP

#include "lpv_smpc/opt/dump.hpp"
#include "lpv_smpc/opt/problems.hpp"
#include "lpv_smpc/opt/qp_ipm.hpp"
#include "lpv_smpc/opt/sdp.hpp"
#include "lpv_smpc/opt/simplex.hpp"

#endif  // LPV_SMPC_OPT_HPP
