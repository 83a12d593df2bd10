#pragma once

#include "profilelab/errors.hpp"
#include "profilelab/random.hpp"
#include "profilelab/rational.hpp"
#include "profilelab/weight_model.hpp"
#include "profilelab/tree_sim.hpp"
#include "profilelab/special.hpp"
#include "profilelab/martingale.hpp"
#include "profilelab/spectral.hpp"
#include "profilelab/normalize.hpp"
#include "profilelab/stats.hpp"
#include "profilelab/parallel.hpp"
#include "profilelab/fixedpoint.hpp"
#include "profilelab/oracle.hpp"
#include "profilelab/harness.hpp"
