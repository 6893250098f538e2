#pragma once

#include "tpc/attribution.hpp"
#include "tpc/bench.hpp"
#include "tpc/cascade.hpp"
#include "tpc/costmodel.hpp"
#include "tpc/dataset.hpp"
#include "tpc/error.hpp"
#include "tpc/io.hpp"
#include "tpc/matrix.hpp"
#include "tpc/metrics.hpp"
#include "tpc/model.hpp"
#include "tpc/optim.hpp"
#include "tpc/poly.hpp"
#include "tpc/report.hpp"
#include "tpc/synthetic.hpp"
#include "tpc/training.hpp"
