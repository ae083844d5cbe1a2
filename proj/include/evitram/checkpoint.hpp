#pragma once

#include <string>

#include "evitram/autoencoder.hpp"
#include "evitram/evitram.hpp"

namespace evitram {

enum class CheckpointKind { autoencoder, evitram };

// Binary container: magic "EVTC", format version, kind tag, model config,
// standardization stats, and every parameter matrix with a shape header.
// Doubles are stored as raw little-endian IEEE-754 bytes, so
// write -> read -> write is byte-stable.
void save_checkpoint(const std::string& path, const DenoisingAutoencoder& model);
void save_checkpoint(const std::string& path, const EviTramModel& model);

CheckpointKind checkpoint_kind(const std::string& path);

DenoisingAutoencoder load_autoencoder(const std::string& path);

// Loads base + heads + lambda. Frozen evidence targets are training-time
// data and are not stored; the returned model has an empty zv list.
EviTramModel load_evitram(const std::string& path);

}  // namespace evitram
