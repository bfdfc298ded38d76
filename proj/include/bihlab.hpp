#pragma once

#include "bihlab/error.hpp"
#include "bihlab/rational.hpp"
#include "bihlab/tensor_algebra.hpp"
#include "bihlab/symbol.hpp"
#include "bihlab/domain_grid.hpp"
#include "bihlab/diff_ops.hpp"
#include "bihlab/modular.hpp"
#include "bihlab/complex_builder.hpp"
#include "bihlab/linalg.hpp"
#include "bihlab/hodge_lab.hpp"
#include "bihlab/oracle.hpp"
#include "bihlab/weak_bc.hpp"
#include "bihlab/identity_suite.hpp"
#include "bihlab/io.hpp"
#include "bihlab/cli.hpp"
