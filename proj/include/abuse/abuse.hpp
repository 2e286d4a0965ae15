#pragma once

// Umbrella header.

#include "abuse/config.hpp"
#include "abuse/corpus.hpp"
#include "abuse/diagnostics.hpp"
#include "abuse/embeddings.hpp"
#include "abuse/ensemble.hpp"
#include "abuse/error.hpp"
#include "abuse/features.hpp"
#include "abuse/folds.hpp"
#include "abuse/format.hpp"
#include "abuse/gbdt.hpp"
#include "abuse/metrics.hpp"
#include "abuse/oof.hpp"
#include "abuse/parallel.hpp"
#include "abuse/pca.hpp"
#include "abuse/preprocess.hpp"
#include "abuse/pseudo.hpp"
#include "abuse/random.hpp"
#include "abuse/runner.hpp"
#include "abuse/stacking.hpp"
#include "abuse/synth.hpp"
#include "abuse/thresholds.hpp"
#include "abuse/transliteration.hpp"
#include "abuse/unicode.hpp"
