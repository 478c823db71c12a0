#pragma once

#include "combinatorics.hpp"
#include "commands.hpp"
#include "error.hpp"
#include "fock.hpp"
#include "hamiltonian.hpp"
#include "instance.hpp"
#include "io.hpp"
#include "parallel.hpp"
#include "pipeline.hpp"
#include "recovery.hpp"
#include "rng.hpp"
#include "spectral.hpp"
#include "sym_tensor.hpp"
