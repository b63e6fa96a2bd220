#pragma once

#include "ricelab/cit.hpp"
#include "ricelab/config.hpp"
#include "ricelab/csv.hpp"
#include "ricelab/error.hpp"
#include "ricelab/experiments.hpp"
#include "ricelab/finite_oracle.hpp"
#include "ricelab/model.hpp"
#include "ricelab/objectives.hpp"
#include "ricelab/oracle_suite.hpp"
#include "ricelab/parallel.hpp"
#include "ricelab/rng.hpp"
#include "ricelab/scm_toy.hpp"
#include "ricelab/spurious.hpp"
