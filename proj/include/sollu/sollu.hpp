#pragma once

#include "audio.hpp"
#include "beatmark.hpp"
#include "bol.hpp"
#include "error.hpp"
#include "features.hpp"
#include "fft.hpp"
#include "filters.hpp"
#include "gmm.hpp"
#include "io.hpp"
#include "pipeline.hpp"
#include "segmenter.hpp"
#include "signatures.hpp"
#include "strings.hpp"
#include "synth.hpp"
#include "tempo.hpp"
