#pragma once

#include "icepose/config.hpp"
#include "icepose/dataset.hpp"
#include "icepose/train.hpp"
#include "icepose/vit.hpp"

namespace icepose {

// Mapping between the flat `key = value` config file and the typed configs.
// Every key is optional; absent keys keep the documented defaults. The model
// section starts from `model.preset` (desk or paper) before field overrides.

FanGeometry fan_from(const KeyValues& kv);
PhantomRanges phantom_ranges_from(const KeyValues& kv);
DatasetConfig dataset_config_from(const KeyValues& kv);
ViTConfig vit_config_from(const KeyValues& kv);
TrainConfig train_config_from(const KeyValues& kv);

}  // namespace icepose
