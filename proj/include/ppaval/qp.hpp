#pragma once

#include "ppaval/qp/brute_force.hpp"
#include "ppaval/qp/ipm.hpp"
#include "ppaval/qp/kkt.hpp"
#include "ppaval/qp/problem.hpp"
#include "ppaval/qp/solution.hpp"
