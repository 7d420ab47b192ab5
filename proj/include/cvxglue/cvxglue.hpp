#pragma once

#include "cvxglue/types.hpp"
#include "cvxglue/rng.hpp"
#include "cvxglue/theta.hpp"
#include "cvxglue/quadrature.hpp"
#include "cvxglue/domain.hpp"
#include "cvxglue/oracle.hpp"
#include "cvxglue/expr.hpp"
#include "cvxglue/smoothmax.hpp"
#include "cvxglue/expr_json.hpp"
#include "cvxglue/regularize.hpp"
#include "cvxglue/glue.hpp"
#include "cvxglue/corners.hpp"
#include "cvxglue/verify.hpp"
#include "cvxglue/bodies.hpp"
#include "cvxglue/spec_io.hpp"
