#pragma once

#include "mimpact/error.hpp"
#include "mimpact/marketdata.hpp"
#include "mimpact/linmodels.hpp"
#include "mimpact/irf.hpp"
#include "mimpact/mtim_continuous.hpp"
#include "mimpact/mtim_discrete.hpp"
#include "mimpact/diffusivity.hpp"
