#pragma once

#include "vrjp/errors.hpp"
#include "vrjp/random.hpp"
#include "vrjp/quadrature.hpp"
#include "vrjp/special_math.hpp"
#include "vrjp/stats.hpp"
#include "vrjp/phase_diagram.hpp"
#include "vrjp/gw_tree.hpp"
#include "vrjp/tree_potential.hpp"
#include "vrjp/tree_green.hpp"
#include "vrjp/network.hpp"
#include "vrjp/lattice.hpp"
#include "vrjp/experiments.hpp"
#include "vrjp/verify.hpp"
