#pragma once

#include "calopf/binary_io.hpp"
#include "calopf/calibration.hpp"
#include "calopf/case_io.hpp"
#include "calopf/dataset.hpp"
#include "calopf/dcopf.hpp"
#include "calopf/errors.hpp"
#include "calopf/experiment.hpp"
#include "calopf/grid_model.hpp"
#include "calopf/matpower.hpp"
#include "calopf/mlp.hpp"
#include "calopf/network_json.hpp"
#include "calopf/pipeline.hpp"
#include "calopf/qp.hpp"
#include "calopf/report.hpp"
#include "calopf/scaling.hpp"
