#pragma once

// umbrella header: the full training/ablation stack
#include "vpnext/ablation.hpp"
#include "vpnext/backbone.hpp"
#include "vpnext/checkpoint.hpp"
#include "vpnext/config.hpp"
#include "vpnext/conv.hpp"
#include "vpnext/cost.hpp"
#include "vpnext/deformable.hpp"
#include "vpnext/gradcheck.hpp"
#include "vpnext/metrics.hpp"
#include "vpnext/model.hpp"
#include "vpnext/netpbm.hpp"
#include "vpnext/ops.hpp"
#include "vpnext/optim.hpp"
#include "vpnext/params.hpp"
#include "vpnext/rng.hpp"
#include "vpnext/sampling.hpp"
#include "vpnext/seg.hpp"
#include "vpnext/synth.hpp"
#include "vpnext/tape.hpp"
#include "vpnext/tensor.hpp"
#include "vpnext/threading.hpp"
#include "vpnext/trainer.hpp"
#include "vpnext/vcr.hpp"
#include "vpnext/vitup.hpp"
