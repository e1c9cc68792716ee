#pragma once

// Umbrella header for the likelihood-free importance weighting toolkit.

#include <lfiw/classifier.hpp>
#include <lfiw/discrete.hpp>
#include <lfiw/estimators.hpp>
#include <lfiw/io.hpp>
#include <lfiw/manifest.hpp>
#include <lfiw/mbope.hpp>
#include <lfiw/metrics.hpp>
#include <lfiw/random.hpp>
#include <lfiw/resample.hpp>
#include <lfiw/synthetic.hpp>
#include <lfiw/types.hpp>
#include <lfiw/weights.hpp>
