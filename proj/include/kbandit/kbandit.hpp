#pragma once

#include "kbandit/baselines.hpp"
#include "kbandit/config.hpp"
#include "kbandit/diagnostics.hpp"
#include "kbandit/environments.hpp"
#include "kbandit/errors.hpp"
#include "kbandit/estimator.hpp"
#include "kbandit/experiment.hpp"
#include "kbandit/features.hpp"
#include "kbandit/harness.hpp"
#include "kbandit/io.hpp"
#include "kbandit/kernels.hpp"
#include "kbandit/policy.hpp"
#include "kbandit/rng.hpp"
