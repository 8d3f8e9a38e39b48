// Umbrella header: pulls in the whole library.
#pragma once

#include "lastmile/config.hpp"
#include "lastmile/core.hpp"
#include "lastmile/csv.hpp"
#include "lastmile/eval.hpp"
#include "lastmile/forest.hpp"
#include "lastmile/ingest.hpp"
#include "lastmile/pipeline.hpp"
#include "lastmile/resample.hpp"
#include "lastmile/rng.hpp"
#include "lastmile/rules.hpp"
#include "lastmile/synth.hpp"
