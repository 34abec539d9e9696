#pragma once

#include "common.hpp"
#include "config.hpp"
#include "csv.hpp"
#include "fleet.hpp"
#include "forecast.hpp"
#include "ga.hpp"
#include "harness.hpp"
#include "plan.hpp"
#include "powerflow.hpp"
#include "report.hpp"
#include "scheduler.hpp"
#include "tariff.hpp"
