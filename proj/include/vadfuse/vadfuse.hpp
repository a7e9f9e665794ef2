#pragma once

#include "vadfuse/audio.hpp"
#include "vadfuse/config.hpp"
#include "vadfuse/dnn.hpp"
#include "vadfuse/error.hpp"
#include "vadfuse/experiment.hpp"
#include "vadfuse/features.hpp"
#include "vadfuse/fusion.hpp"
#include "vadfuse/gmm.hpp"
#include "vadfuse/harness.hpp"
#include "vadfuse/pipeline.hpp"
#include "vadfuse/segmenter.hpp"
#include "vadfuse/synth.hpp"
