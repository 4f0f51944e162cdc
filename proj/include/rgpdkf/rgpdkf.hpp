#pragma once

#include "rgpdkf/error.hpp"
#include "rgpdkf/kernel.hpp"
#include "rgpdkf/rgp.hpp"
#include "rgpdkf/fusion.hpp"
#include "rgpdkf/baseline.hpp"
#include "rgpdkf/sim.hpp"
#include "rgpdkf/metrics.hpp"
