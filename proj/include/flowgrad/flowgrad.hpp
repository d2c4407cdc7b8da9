#pragma once

// Umbrella header.

#include "flowgrad/boxes.hpp"
#include "flowgrad/core.hpp"
#include "flowgrad/errors.hpp"
#include "flowgrad/flow.hpp"
#include "flowgrad/fusion.hpp"
#include "flowgrad/io.hpp"
#include "flowgrad/metrics.hpp"
#include "flowgrad/pipeline.hpp"
#include "flowgrad/synth.hpp"
