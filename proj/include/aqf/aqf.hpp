#pragma once

#include "aqf/core.hpp"
#include "aqf/ingest.hpp"
#include "aqf/scaler.hpp"
#include "aqf/eda.hpp"
#include "aqf/dataset.hpp"
#include "aqf/linalg.hpp"
#include "aqf/tree.hpp"
#include "aqf/models.hpp"
#include "aqf/metrics.hpp"
#include "aqf/explain.hpp"
#include "aqf/forecast.hpp"
#include "aqf/config.hpp"
#include "aqf/pipeline.hpp"
