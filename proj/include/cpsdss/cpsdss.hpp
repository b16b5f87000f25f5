#pragma once

// Umbrella header for the decision-support engine.

#include "cpsdss/cvss.hpp"
#include "cpsdss/epss.hpp"
#include "cpsdss/errors.hpp"
#include "cpsdss/factor.hpp"
#include "cpsdss/front_io.hpp"
#include "cpsdss/impact.hpp"
#include "cpsdss/inference.hpp"
#include "cpsdss/model.hpp"
#include "cpsdss/model_io.hpp"
#include "cpsdss/optimiser.hpp"
#include "cpsdss/pareto.hpp"
#include "cpsdss/ranking.hpp"
#include "cpsdss/scoring.hpp"
#include "cpsdss/stability.hpp"
