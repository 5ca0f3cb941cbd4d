#pragma once

#include "geolvq/core.hpp"
#include "geolvq/csv.hpp"
#include "geolvq/dissim.hpp"
#include "geolvq/train.hpp"
#include "geolvq/imbalance.hpp"
#include "geolvq/manifold.hpp"
#include "geolvq/cluster.hpp"
#include "geolvq/analysis.hpp"
#include "geolvq/averaging.hpp"
#include "geolvq/synth.hpp"
#include "geolvq/serialize.hpp"
#include "geolvq/experiment.hpp"
