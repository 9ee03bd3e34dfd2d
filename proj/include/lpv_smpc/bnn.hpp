#ifndef LPV_SMPC_BNN_HPP
#define LPV_SMPC_BNN_HPP

#include "lpv_smpc/bnn/calibrate.hpp"
#include "lpv_smpc/bnn/model.hpp"
#include "lpv_smpc/bnn/network.hpp"
#include "lpv_smpc/bnn/train.hpp"

#endif  // LPV_SMPC_BNN_HPP
