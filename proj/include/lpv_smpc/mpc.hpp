#ifndef LPV_SMPC_MPC_HPP
#define LPV_SMPC_MPC_HPP

#include "lpv_smpc/mpc/closed_loop.hpp"
#include "lpv_smpc/mpc/program.hpp"

#endif  // LPV_SMPC_MPC_HPP
