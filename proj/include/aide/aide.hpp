#pragma once

#include "aide/affordance_space.hpp"
#include "aide/catalog.hpp"
#include "aide/config.hpp"
#include "aide/ers.hpp"
#include "aide/errors.hpp"
#include "aide/exploration.hpp"
#include "aide/geometry.hpp"
#include "aide/harness.hpp"
#include "aide/kmeans.hpp"
#include "aide/media.hpp"
#include "aide/mock_perception.hpp"
#include "aide/motion.hpp"
#include "aide/noise.hpp"
#include "aide/perception.hpp"
#include "aide/planner.hpp"
#include "aide/remote_perception.hpp"
#include "aide/scenarios.hpp"
#include "aide/simulator.hpp"
