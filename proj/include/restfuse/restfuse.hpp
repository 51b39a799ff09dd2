#pragma once

#include "restfuse/checkpoint.hpp"
#include "restfuse/connectivity.hpp"
#include "restfuse/eegnet.hpp"
#include "restfuse/epochs.hpp"
#include "restfuse/experiment.hpp"
#include "restfuse/error.hpp"
#include "restfuse/fft.hpp"
#include "restfuse/filter.hpp"
#include "restfuse/layers.hpp"
#include "restfuse/manifest.hpp"
#include "restfuse/optim.hpp"
#include "restfuse/recording.hpp"
#include "restfuse/rng.hpp"
#include "restfuse/splits.hpp"
#include "restfuse/synth.hpp"
#include "restfuse/tensor.hpp"
#include "restfuse/training.hpp"
#include "restfuse/version.hpp"
#include "restfuse/wavelet.hpp"
