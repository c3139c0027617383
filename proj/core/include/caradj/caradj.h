#ifndef CARADJ_CARADJ_H_
#define CARADJ_CARADJ_H_

#include "caradj/csv.h"
#include "caradj/data_model.h"
#include "caradj/error.h"
#include "caradj/estimators.h"
#include "caradj/forest.h"
#include "caradj/glm.h"
#include "caradj/linalg.h"
#include "caradj/pipeline.h"
#include "caradj/randomization.h"
#include "caradj/report.h"
#include "caradj/rng.h"
#include "caradj/simulation.h"
#include "caradj/variance.h"
#include "caradj/working_models.h"

#endif  // CARADJ_CARADJ_H_
