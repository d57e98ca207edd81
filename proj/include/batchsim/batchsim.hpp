#pragma once

#include "batchsim/cost_model.hpp"
#include "batchsim/deadline.hpp"
#include "batchsim/dp_time.hpp"
#include "batchsim/model.hpp"
#include "batchsim/multi_dnn.hpp"
#include "batchsim/network.hpp"
#include "batchsim/offload.hpp"
#include "batchsim/profile_io.hpp"
#include "batchsim/reference.hpp"
#include "batchsim/report.hpp"
#include "batchsim/rng.hpp"
#include "batchsim/schedule.hpp"
#include "batchsim/simulator.hpp"
#include "batchsim/workload.hpp"
