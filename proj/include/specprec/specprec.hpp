#pragma once

#include "specprec/core.hpp"
#include "specprec/deflation.hpp"
#include "specprec/harness.hpp"
#include "specprec/operator.hpp"
#include "specprec/oracle.hpp"
#include "specprec/precond.hpp"
#include "specprec/solvers.hpp"
#include "specprec/spectra.hpp"
#include "specprec/tridiagonal.hpp"
#include "specprec/verify.hpp"
