#include "cqa/checkpoint.hpp"

#include <bit>
#include <cstring>

#include <nlohmann/json.hpp>

#include "cqa/error.hpp"
#include "cqa/io.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint encoding assumes a little-endian host");

namespace cqa {

using json = nlohmann::json;

namespace {

template <typename U>
void put(std::string& out, U v) {
  char buf[sizeof(U)];
  std::memcpy(buf, &v, sizeof(U));
  out.append(buf, sizeof(U));
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  template <typename U>
  U get() {
    need(sizeof(U));
    U v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(U));
    pos_ += sizeof(U);
    return v;
  }

  std::string_view take(std::size_t n) {
    need(n);
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  std::size_t position() const { return pos_; }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw DataError("checkpoint is truncated");
  }

  std::string_view bytes_;
  std::size_t pos_ = 0;
};

template <typename T>
constexpr std::uint8_t dtype_code() {
  return sizeof(T) == 4 ? 1 : 2;
}

json header_json(const ModelSpec& spec, const Vocabulary& vocab) {
  const auto& c = spec.config;
  json h = {
      {"version", kCheckpointVersion},
      {"kind", spec.kind == ModelKind::mtl ? "mtl" : "pair"},
      {"task", spec.task ? json(std::string(1, task_letter(*spec.task))) : json(nullptr)},
      {"vocab_size", c.vocab_size},
      {"word_dim", c.word_dim},
      {"feat_dim", c.feat_dim},
      {"feature_maps", c.feature_maps},
      {"conv_width", c.conv_width},
      {"max_len", c.max_len},
      {"vocabulary", vocab.tokens()},
  };
  return h;
}

}  // namespace

Vocabulary Checkpoint::vocab() const {
  if (vocabulary.size() < 2) throw DataError("checkpoint vocabulary is missing reserved entries");
  return Vocabulary::from_tokens(std::span<const std::string>(vocabulary).subspan(2));
}

template <typename T>
std::string snapshot(const Scorer<T>& model, const Vocabulary& vocab) {
  const ModelSpec spec = model.spec();
  if (vocab.size() != spec.config.vocab_size)
    throw DimensionError("vocabulary size " + std::to_string(vocab.size()) +
                         " does not match model vocab_size " +
                         std::to_string(spec.config.vocab_size));
  std::string out(kCheckpointMagic);
  const std::string header = header_json(spec, vocab).dump();
  put<std::uint64_t>(out, header.size());
  out += header;

  const auto values = model.values();
  put<std::uint32_t>(out, static_cast<std::uint32_t>(values.size()));
  for (const auto& [name, tensor] : values) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    put<std::uint8_t>(out, dtype_code<T>());
    put<std::uint8_t>(out, static_cast<std::uint8_t>(tensor->rank()));
    for (std::size_t d : tensor->shape()) put<std::uint64_t>(out, d);
    out.append(reinterpret_cast<const char*>(tensor->data()), tensor->size() * sizeof(T));
  }
  put<std::uint64_t>(out, fnv1a64(out));
  return out;
}

Checkpoint parse_checkpoint(std::string_view bytes) {
  if (bytes.size() < kCheckpointMagic.size() + 8 + 8 || bytes.substr(0, 8) != kCheckpointMagic)
    throw DataError("not a checkpoint (bad magic)");
  const auto body = bytes.substr(0, bytes.size() - 8);
  std::uint64_t stored = 0;
  std::memcpy(&stored, bytes.data() + body.size(), 8);
  if (stored != fnv1a64(body)) throw DataError("checkpoint checksum mismatch (corrupt file)");

  Reader in(body);
  in.take(kCheckpointMagic.size());
  const auto header_len = in.get<std::uint64_t>();
  Checkpoint ck;
  try {
    const json h = json::parse(in.take(header_len));
    if (h.at("version").get<int>() != kCheckpointVersion)
      throw DataError("unsupported checkpoint version");
    const auto kind = h.at("kind").get<std::string>();
    if (kind == "mtl") {
      ck.spec.kind = ModelKind::mtl;
    } else if (kind == "pair") {
      ck.spec.kind = ModelKind::pair;
      ck.spec.task = parse_task(h.at("task").get<std::string>());
    } else {
      throw DataError("unknown model kind '" + kind + "'");
    }
    auto& c = ck.spec.config;
    c.vocab_size = h.at("vocab_size").get<std::size_t>();
    c.word_dim = h.at("word_dim").get<std::size_t>();
    c.feat_dim = h.at("feat_dim").get<std::size_t>();
    c.feature_maps = h.at("feature_maps").get<std::size_t>();
    c.conv_width = h.at("conv_width").get<std::size_t>();
    c.max_len = h.at("max_len").get<std::size_t>();
    ck.vocabulary = h.at("vocabulary").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw DataError(std::string("bad checkpoint header: ") + e.what());
  } catch (const ConfigError& e) {
    throw DataError(std::string("bad checkpoint header: ") + e.what());
  }
  if (ck.vocabulary.size() != ck.spec.config.vocab_size)
    throw DataError("checkpoint vocabulary length disagrees with vocab_size");

  const auto count = in.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < count; ++i) {
    CheckpointTensor t;
    t.name = std::string(in.take(in.get<std::uint32_t>()));
    t.dtype = in.get<std::uint8_t>();
    if (t.dtype != 1 && t.dtype != 2) throw DataError("bad dtype for tensor " + t.name);
    const auto ndim = in.get<std::uint8_t>();
    for (std::uint8_t d = 0; d < ndim; ++d) t.shape.push_back(in.get<std::uint64_t>());
    const std::size_t n = nn::shape_size(t.shape);
    t.values.resize(n);
    for (std::size_t k = 0; k < n; ++k)
      t.values[k] = t.dtype == 1 ? static_cast<double>(in.get<float>()) : in.get<double>();
    ck.tensors.push_back(std::move(t));
  }
  if (in.position() != body.size()) throw DataError("trailing bytes in checkpoint");
  return ck;
}

template <typename T>
void load_parameters(Scorer<T>& model, const Checkpoint& checkpoint) {
  const ModelSpec spec = model.spec();
  if (!(spec == checkpoint.spec)) {
    const auto& a = spec.config;
    const auto& b = checkpoint.spec.config;
    throw DimensionError(
        "checkpoint does not fit the model: model (vocab " + std::to_string(a.vocab_size) +
        ", word_dim " + std::to_string(a.word_dim) + ", feat_dim " + std::to_string(a.feat_dim) +
        ", m " + std::to_string(a.feature_maps) + ", width " + std::to_string(a.conv_width) +
        ") vs checkpoint (vocab " + std::to_string(b.vocab_size) + ", word_dim " +
        std::to_string(b.word_dim) + ", feat_dim " + std::to_string(b.feat_dim) + ", m " +
        std::to_string(b.feature_maps) + ", width " + std::to_string(b.conv_width) +
        ") or different model kind");
  }
  auto params = model.parameters();
  if (params.size() != checkpoint.tensors.size())
    throw DimensionError("checkpoint has " + std::to_string(checkpoint.tensors.size()) +
                         " tensors, model has " + std::to_string(params.size()));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& src = checkpoint.tensors[i];
    auto& dst = params[i].param->value;
    if (src.name != params[i].name || src.shape != dst.shape())
      throw DimensionError("checkpoint tensor " + src.name + nn::shape_string(src.shape) +
                           " does not match model tensor " + params[i].name +
                           nn::shape_string(dst.shape()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& src = checkpoint.tensors[i];
    auto& dst = params[i].param->value;
    for (std::size_t k = 0; k < src.values.size(); ++k) dst[k] = static_cast<T>(src.values[k]);
  }
}

template <typename T>
std::unique_ptr<Scorer<T>> restore(const Checkpoint& checkpoint) {
  auto model = make_model<T>(checkpoint.spec);
  load_parameters(*model, checkpoint);
  return model;
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  try {
    return parse_checkpoint(read_file(path));
  } catch (const DimensionError&) {
    throw;
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void write_checkpoint(const std::filesystem::path& path, std::string_view bytes) {
  write_file_atomic(path, bytes);
}

template std::string snapshot(const Scorer<float>&, const Vocabulary&);
template std::string snapshot(const Scorer<double>&, const Vocabulary&);
template void load_parameters(Scorer<float>&, const Checkpoint&);
template void load_parameters(Scorer<double>&, const Checkpoint&);
template std::unique_ptr<Scorer<float>> restore<float>(const Checkpoint&);
template std::unique_ptr<Scorer<double>> restore<double>(const Checkpoint&);

}  // namespace cqa
