#pragma once

#include "adlsense/assist_policy.hpp"
#include "adlsense/error.hpp"
#include "adlsense/eval/dataset.hpp"
#include "adlsense/eval/metrics.hpp"
#include "adlsense/eval/report.hpp"
#include "adlsense/eval/stats.hpp"
#include "adlsense/features.hpp"
#include "adlsense/fusion.hpp"
#include "adlsense/motion_gate.hpp"
#include "adlsense/pipeline.hpp"
#include "adlsense/session_io.hpp"
#include "adlsense/skeleton.hpp"
#include "adlsense/state_estimator.hpp"
#include "adlsense/synthetic_session.hpp"
