#pragma once

/// Umbrella header for the quantile forecast combination library.

#include "qcomb/combine.hpp"
#include "qcomb/core.hpp"
#include "qcomb/distributions.hpp"
#include "qcomb/errors.hpp"
#include "qcomb/io.hpp"
#include "qcomb/loss.hpp"
#include "qcomb/lp.hpp"
#include "qcomb/rearrange.hpp"
#include "qcomb/synthetic.hpp"
