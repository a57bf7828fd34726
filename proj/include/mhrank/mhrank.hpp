#pragma once

#include "mhrank/common.hpp"
#include "mhrank/config.hpp"
#include "mhrank/density.hpp"
#include "mhrank/ensemble.hpp"
#include "mhrank/estimator.hpp"
#include "mhrank/io.hpp"
#include "mhrank/kernel.hpp"
#include "mhrank/oracle.hpp"
#include "mhrank/sampler.hpp"
#include "mhrank/snapshots.hpp"
#include "mhrank/tournament.hpp"
