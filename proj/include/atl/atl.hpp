#pragma once

#include "atl/attacks.hpp"
#include "atl/bound_checks.hpp"
#include "atl/capacity.hpp"
#include "atl/dataset.hpp"
#include "atl/error.hpp"
#include "atl/experiment.hpp"
#include "atl/linalg.hpp"
#include "atl/metrics.hpp"
#include "atl/model_io.hpp"
#include "atl/nn.hpp"
#include "atl/report.hpp"
#include "atl/rng.hpp"
#include "atl/specreg.hpp"
#include "atl/trainer.hpp"
