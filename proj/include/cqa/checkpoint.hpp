#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "cqa/model.hpp"
#include "cqa/text.hpp"

namespace cqa {

// Checkpoint file layout, all integers little-endian:
//
//   magic      8 bytes  "CQACKPT1"
//   header_len u64
//   header     header_len bytes of JSON: format version, model kind, pair
//              task, ModelConfig fields and the vocabulary in id order
//   count      u32      number of tensors
//   tensor     repeated `count` times:
//                name_len u32, name bytes,
//                dtype u8 (1 = float32, 2 = float64),
//                ndim u8, dims u64 x ndim,
//                values, row-major
//   checksum   u64      FNV-1a of every preceding byte
//
// Tensors appear in the model's parameter order. Equal parameters produce
// equal bytes.
inline constexpr std::string_view kCheckpointMagic = "CQACKPT1";
inline constexpr int kCheckpointVersion = 1;

struct CheckpointTensor {
  std::string name;
  std::uint8_t dtype = 1;
  nn::Shape shape;
  std::vector<double> values;
};

struct Checkpoint {
  ModelSpec spec;
  std::vector<std::string> vocabulary;  // includes <pad> and <unk>
  std::vector<CheckpointTensor> tensors;

  Vocabulary vocab() const;
};

template <typename T>
std::string snapshot(const Scorer<T>& model, const Vocabulary& vocab);

// Throws DataError on a truncated or corrupt buffer.
Checkpoint parse_checkpoint(std::string_view bytes);

// Copies checkpoint values into an existing model. Throws DimensionError when
// the model specs or any tensor shape disagree.
template <typename T>
void load_parameters(Scorer<T>& model, const Checkpoint& checkpoint);

template <typename T>
std::unique_ptr<Scorer<T>> restore(const Checkpoint& checkpoint);

Checkpoint read_checkpoint(const std::filesystem::path& path);
void write_checkpoint(const std::filesystem::path& path, std::string_view bytes);

}  // namespace cqa
