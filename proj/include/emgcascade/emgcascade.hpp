#pragma once

#include "emgcascade/calibration.hpp"
#include "emgcascade/cascade.hpp"
#include "emgcascade/contamination.hpp"
#include "emgcascade/dataset_io.hpp"
#include "emgcascade/ecoc.hpp"
#include "emgcascade/experiment.hpp"
#include "emgcascade/features.hpp"
#include "emgcascade/matrix.hpp"
#include "emgcascade/metrics.hpp"
#include "emgcascade/naive_bayes.hpp"
#include "emgcascade/occ.hpp"
#include "emgcascade/ocsvm.hpp"
#include "emgcascade/random.hpp"
#include "emgcascade/report.hpp"
#include "emgcascade/signal_model.hpp"
#include "emgcascade/statistics.hpp"
#include "emgcascade/synthetic.hpp"
#include "emgcascade/wavelet.hpp"
