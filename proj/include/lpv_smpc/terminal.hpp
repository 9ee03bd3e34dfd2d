#ifndef LPV_SMPC_TERMINAL_HPP
#define LPV_SMPC_TERMINAL_HPP

#include "lpv_smpc/terminal/affine.hpp"
#include "lpv_smpc/terminal/lmi.hpp"
#include "lpv_smpc/terminal/synth.hpp"
#include "lpv_smpc/terminal/transform.hpp"

#endif  // LPV_SMPC_TERMINAL_HPP
