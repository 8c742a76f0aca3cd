#pragma once

#include "entail/checkpoint.hpp"
#include "entail/config.hpp"
#include "entail/contrastive.hpp"
#include "entail/efl.hpp"
#include "entail/encoder.hpp"
#include "entail/error.hpp"
#include "entail/eval.hpp"
#include "entail/manifest.hpp"
#include "entail/meta_task.hpp"
#include "entail/optimizer.hpp"
#include "entail/pipeline.hpp"
#include "entail/predictor.hpp"
#include "entail/sampler.hpp"
#include "entail/synthetic.hpp"
#include "entail/text.hpp"
#include "entail/training.hpp"
