// Licensed under the terms of the Apache 2.0 license. See LICENSE in the project root.
#pragma once

#include "dpr/analysis.hpp"
#include "dpr/binary_io.hpp"
#include "dpr/bm25.hpp"
#include "dpr/checkpoint.hpp"
#include "dpr/config.hpp"
#include "dpr/dense_index.hpp"
#include "dpr/encoder.hpp"
#include "dpr/error.hpp"
#include "dpr/eval.hpp"
#include "dpr/experiments.hpp"
#include "dpr/io.hpp"
#include "dpr/optimizer.hpp"
#include "dpr/pair_store.hpp"
#include "dpr/pretrain_tasks.hpp"
#include "dpr/random.hpp"
#include "dpr/retrieval.hpp"
#include "dpr/synthetic.hpp"
#include "dpr/text.hpp"
#include "dpr/trainer.hpp"
#include "dpr/types.hpp"
