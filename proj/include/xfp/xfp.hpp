#pragma once

#include "xfp/autoselect.hpp"
#include "xfp/container.hpp"
#include "xfp/half.hpp"
#include "xfp/hprocess.hpp"
#include "xfp/lloyd.hpp"
#include "xfp/outlier.hpp"
#include "xfp/packing.hpp"
#include "xfp/philox.hpp"
#include "xfp/policy.hpp"
#include "xfp/synth.hpp"
#include "xfp/tensor.hpp"
#include "xfp/tensor_io.hpp"
#include "xfp/v2a.hpp"
