#pragma once

#include "starpath/numcore.hpp"
#include "starpath/rng.hpp"
#include "starpath/schedule.hpp"
#include "starpath/problems.hpp"
#include "starpath/dataio.hpp"
#include "starpath/model.hpp"
#include "starpath/sgdrun.hpp"
#include "starpath/trace_io.hpp"
#include "starpath/analyzer.hpp"
#include "starpath/config.hpp"
#include "starpath/report.hpp"
#include "starpath/svg.hpp"
#include "starpath/commands.hpp"
