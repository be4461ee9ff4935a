#pragma once

#include "cedn/coincidence.hpp"
#include "cedn/doqkd.hpp"
#include "cedn/errors.hpp"
#include "cedn/loss_budget.hpp"
#include "cedn/pair_source.hpp"
#include "cedn/phase_control.hpp"
#include "cedn/random.hpp"
#include "cedn/timetag.hpp"
#include "cedn/topology.hpp"
