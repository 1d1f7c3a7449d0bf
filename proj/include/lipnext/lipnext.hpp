#pragma once

#include "certify.hpp"
#include "checkpoint.hpp"
#include "config.hpp"
#include "dataset.hpp"
#include "layers.hpp"
#include "loss.hpp"
#include "matrix.hpp"
#include "matrix_exp.hpp"
#include "model.hpp"
#include "optim.hpp"
#include "oracles.hpp"
#include "orthogonal.hpp"
#include "rng.hpp"
#include "svd.hpp"
#include "tensor.hpp"
#include "trainer.hpp"
