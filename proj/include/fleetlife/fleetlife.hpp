#pragma once

// Umbrella header for the fleetlife survival-analysis toolkit.

#include "fleetlife/config.hpp"
#include "fleetlife/cox.hpp"
#include "fleetlife/dataset.hpp"
#include "fleetlife/dates.hpp"
#include "fleetlife/errors.hpp"
#include "fleetlife/forecast.hpp"
#include "fleetlife/gb_cox.hpp"
#include "fleetlife/harness.hpp"
#include "fleetlife/isotonic.hpp"
#include "fleetlife/kaplan_meier.hpp"
#include "fleetlife/metrics.hpp"
#include "fleetlife/model.hpp"
#include "fleetlife/rng.hpp"
#include "fleetlife/rsf.hpp"
#include "fleetlife/synth.hpp"
#include "fleetlife/trees.hpp"
#include "fleetlife/types.hpp"
#include "fleetlife/weibull_aft.hpp"
