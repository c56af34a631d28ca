#pragma once

// Minibatch optimal transport: kernels, estimators, lifted plans, diagnostics,
// particle flows, and color transfer. Header-only.

#include "mbot/common.hpp"
#include "mbot/rng.hpp"
#include "mbot/parallel.hpp"
#include "mbot/cost.hpp"
#include "mbot/exact_ot.hpp"
#include "mbot/entropic.hpp"
#include "mbot/gromov.hpp"
#include "mbot/wasserstein1d.hpp"
#include "mbot/minibatch.hpp"
#include "mbot/analytic1d.hpp"
#include "mbot/synthetic.hpp"
#include "mbot/diagnostics.hpp"
#include "mbot/gradflow.hpp"
#include "mbot/io.hpp"
#include "mbot/color_transfer.hpp"
