#pragma once

#include "unitygraph/autodiff.hpp"
#include "unitygraph/checkpoint.hpp"
#include "unitygraph/config.hpp"
#include "unitygraph/error.hpp"
#include "unitygraph/hypergraph.hpp"
#include "unitygraph/interactive_decoder.hpp"
#include "unitygraph/layers.hpp"
#include "unitygraph/matrix.hpp"
#include "unitygraph/message_passing.hpp"
#include "unitygraph/model.hpp"
#include "unitygraph/motion.hpp"
#include "unitygraph/objectives_metrics.hpp"
#include "unitygraph/optimizer.hpp"
#include "unitygraph/plots.hpp"
#include "unitygraph/pose_encoder.hpp"
#include "unitygraph/scene_io.hpp"
#include "unitygraph/synthetic.hpp"
#include "unitygraph/training.hpp"
