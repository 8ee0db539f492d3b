#pragma once

#include "hsiscale/candidates.hpp"
#include "hsiscale/correction.hpp"
#include "hsiscale/cube.hpp"
#include "hsiscale/error.hpp"
#include "hsiscale/grf.hpp"
#include "hsiscale/hyperplane.hpp"
#include "hsiscale/io.hpp"
#include "hsiscale/metrics.hpp"
#include "hsiscale/parallel.hpp"
#include "hsiscale/pso.hpp"
#include "hsiscale/random.hpp"
#include "hsiscale/sphere_descent.hpp"
#include "hsiscale/subspace.hpp"
#include "hsiscale/synth.hpp"
#include "hsiscale/unmix.hpp"
