#pragma once

// Umbrella header: smooth confusion-matrix surrogate losses for multilabel
// classification, the metrics they are evaluated with, and the experiment
// harness around them.

#include "smoothf1/checkpoint.hpp"
#include "smoothf1/config.hpp"
#include "smoothf1/data.hpp"
#include "smoothf1/experiments.hpp"
#include "smoothf1/losses.hpp"
#include "smoothf1/math.hpp"
#include "smoothf1/matrix.hpp"
#include "smoothf1/metrics.hpp"
#include "smoothf1/model.hpp"
#include "smoothf1/rng.hpp"
