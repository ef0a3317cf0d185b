#pragma once

#include "twosided/error.hpp"
#include "twosided/rng.hpp"
#include "twosided/market.hpp"
#include "twosided/agents.hpp"
#include "twosided/schedule.hpp"
#include "twosided/engine.hpp"
#include "twosided/protocols.hpp"
#include "twosided/analysis.hpp"
#include "twosided/io.hpp"
#include "twosided/experiment.hpp"
