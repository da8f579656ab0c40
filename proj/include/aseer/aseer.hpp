#pragma once

#include "aseer/agdn.hpp"
#include "aseer/autodiff.hpp"
#include "aseer/baselines.hpp"
#include "aseer/checkpoint.hpp"
#include "aseer/data_model.hpp"
#include "aseer/forecast.hpp"
#include "aseer/io.hpp"
#include "aseer/losses.hpp"
#include "aseer/metrics.hpp"
#include "aseer/model.hpp"
#include "aseer/nn.hpp"
#include "aseer/parameters.hpp"
#include "aseer/pipeline.hpp"
#include "aseer/sapn.hpp"
#include "aseer/synthgen.hpp"
#include "aseer/time_encoding.hpp"
#include "aseer/training.hpp"
#include "aseer/ttcn.hpp"
