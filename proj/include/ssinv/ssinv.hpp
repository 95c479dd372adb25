#ifndef SSINV_SSINV_HPP
#define SSINV_SSINV_HPP

#include "ssinv/error.hpp"
#include "ssinv/levy_model.hpp"
#include "ssinv/scale_kernel.hpp"
#include "ssinv/cost_model.hpp"
#include "ssinv/fluctuation.hpp"
#include "ssinv/policy_solver.hpp"
#include "ssinv/mc_simulator.hpp"
#include "ssinv/config.hpp"

#endif  // SSINV_SSINV_HPP
