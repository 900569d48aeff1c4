#ifndef VEP_VEP_HPP
#define VEP_VEP_HPP

#include "vep/cli.hpp"
#include "vep/diagnostics.hpp"
#include "vep/expr.hpp"
#include "vep/geometry/normals.hpp"
#include "vep/merit.hpp"
#include "vep/problem.hpp"
#include "vep/report.hpp"
#include "vep/solver.hpp"
#include "vep/subdiff.hpp"

#endif  // VEP_VEP_HPP
