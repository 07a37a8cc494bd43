#pragma once

#include "ipf/errors.hpp"
#include "ipf/linalg.hpp"
#include "ipf/roots.hpp"
#include "ipf/sde_engine.hpp"
#include "ipf/ensemble_io.hpp"
#include "ipf/entropy_functional.hpp"
#include "ipf/macro_model.hpp"
#include "ipf/invariants.hpp"
#include "ipf/info_network.hpp"
#include "ipf/dual_strategy.hpp"
