#pragma once

#include "lfilter/adiabatic.hpp"
#include "lfilter/circuit.hpp"
#include "lfilter/eigs.hpp"
#include "lfilter/experiment.hpp"
#include "lfilter/expm.hpp"
#include "lfilter/filter.hpp"
#include "lfilter/observables.hpp"
#include "lfilter/pauli.hpp"
#include "lfilter/schedule.hpp"
#include "lfilter/solve.hpp"
#include "lfilter/sparse_operator.hpp"
#include "lfilter/state.hpp"
#include "lfilter/tfi.hpp"
