#pragma once

#include "ino/numerics/tensor.hpp"
#include "ino/numerics/ops.hpp"
#include "ino/numerics/resize.hpp"
#include "ino/numerics/rng.hpp"
#include "ino/numerics/grad_check.hpp"
#include "ino/numerics/record.hpp"
#include "ino/encoder/vit.hpp"
#include "ino/views/image.hpp"
#include "ino/views/video_store.hpp"
#include "ino/views/clip.hpp"
#include "ino/views/crops.hpp"
#include "ino/views/masking.hpp"
#include "ino/objectives/teacher.hpp"
#include "ino/objectives/losses.hpp"
#include "ino/objectives/ino_objective.hpp"
#include "ino/optimizer/schedule.hpp"
#include "ino/optimizer/adamw.hpp"
#include "ino/propagation/propagate.hpp"
#include "ino/metrics/mask_raster.hpp"
#include "ino/metrics/jf.hpp"
#include "ino/harness/config.hpp"
#include "ino/harness/synthetic.hpp"
#include "ino/harness/checkpoint.hpp"
#include "ino/harness/trainer.hpp"
#include "ino/harness/evaluate.hpp"
#include "ino/harness/grad_micro.hpp"
