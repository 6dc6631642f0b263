#pragma once

#include "atomsim/cameras.hpp"
#include "atomsim/config.hpp"
#include "atomsim/errors.hpp"
#include "atomsim/experiment.hpp"
#include "atomsim/fft.hpp"
#include "atomsim/field.hpp"
#include "atomsim/fitting.hpp"
#include "atomsim/histogram.hpp"
#include "atomsim/io.hpp"
#include "atomsim/optics.hpp"
#include "atomsim/random.hpp"
#include "atomsim/sampling.hpp"
#include "atomsim/simplex.hpp"
#include "atomsim/simulator.hpp"
#include "atomsim/zernike.hpp"

namespace atomsim {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace atomsim
