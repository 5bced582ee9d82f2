#pragma once

#include "fsh/data_model.hpp"
#include "fsh/decomposition.hpp"
#include "fsh/error.hpp"
#include "fsh/probe.hpp"
#include "fsh/rda.hpp"
#include "fsh/report.hpp"
#include "fsh/rng.hpp"
#include "fsh/spread.hpp"
#include "fsh/stats.hpp"
#include "fsh/synthetic.hpp"
