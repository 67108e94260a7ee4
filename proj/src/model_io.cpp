#include <bit>
#include <cstring>

#include "redct/common.hpp"
#include "redct/model.hpp"

namespace redct::trainer {

namespace {

constexpr std::string_view kMagic = "REDCTMDL";

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  std::string_view take(std::size_t n) {
    if (pos_ + n > bytes_.size()) throw ModelFormatError("model file is truncated");
    auto out = bytes_.substr(pos_, n);
    pos_ += n;
    return out;
  }
  std::uint32_t u32() {
    const auto b = take(4);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(b[static_cast<std::size_t>(i)]);
    return v;
  }
  std::uint64_t u64() {
    const auto b = take(8);
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(b[static_cast<std::size_t>(i)]);
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string serialize_model(const LinearModel& model) {
  nlohmann::ordered_json header;
  header["format_version"] = kModelFormatVersion;
  header["task_id"] = model.task_id;
  header["schema_hash"] = model.schema_hash;
  header["class_names"] = model.class_names;
  header["num_classes"] = model.num_classes();
  header["dim"] = model.dim();
  header["featurizer"] = model.featurizer.to_json();
  const auto header_text = header.dump();

  std::string out;
  out.reserve(32 + header_text.size() + 8 * (model.weights.size() + model.bias.size()));
  out += kMagic;
  put_u32(out, kModelFormatVersion);
  put_u32(out, static_cast<std::uint32_t>(header_text.size()));
  out += header_text;
  for (double w : model.weights) put_f64(out, w);
  for (double b : model.bias) put_f64(out, b);
  put_u64(out, fnv1a64(out));
  return out;
}

LinearModel deserialize_model(std::string_view bytes) {
  if (bytes.size() < kMagic.size() + 16 || bytes.substr(0, kMagic.size()) != kMagic) {
    // Either not a model file or cut short before the header.
    if (bytes.size() >= kMagic.size() && bytes.substr(0, kMagic.size()) != kMagic) {
      throw ModelFormatError("not a model file (bad magic)");
    }
    throw ModelFormatError("model file is truncated");
  }
  const auto body = bytes.substr(0, bytes.size() - 8);
  Reader tail(bytes.substr(bytes.size() - 8));
  if (tail.u64() != fnv1a64(body)) {
    throw ModelFormatError("model file checksum mismatch (truncated or corrupted)");
  }

  Reader r(body);
  r.take(kMagic.size());
  const auto version = r.u32();
  if (version != kModelFormatVersion) {
    throw ModelFormatError("unsupported model format version " + std::to_string(version) +
                           " (this build reads version " + std::to_string(kModelFormatVersion) + ")");
  }
  const auto header_len = r.u32();
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(r.take(header_len));
  } catch (const nlohmann::json::exception& e) {
    throw ModelFormatError(std::string("model header is not valid JSON: ") + e.what());
  }

  LinearModel m;
  try {
    m.task_id = header.at("task_id").get<std::string>();
    m.schema_hash = header.at("schema_hash").get<std::string>();
    m.class_names = header.at("class_names").get<std::vector<std::string>>();
    m.featurizer = FeaturizerConfig::from_json(header.at("featurizer"));
    const auto k = header.at("num_classes").get<std::size_t>();
    const auto d = header.at("dim").get<std::size_t>();
    if (k != m.class_names.size() || d != m.featurizer.dim) {
      throw ModelFormatError("model header dimensions are inconsistent");
    }
    if (r.remaining() != 8 * (k * d + k)) throw ModelFormatError("model payload size mismatch");
    m.weights.resize(k * d);
    for (double& w : m.weights) w = r.f64();
    m.bias.resize(k);
    for (double& b : m.bias) b = r.f64();
  } catch (const nlohmann::json::exception& e) {
    throw ModelFormatError(std::string("model header: ") + e.what());
  }
  return m;
}

void export_model(const LinearModel& model, const std::filesystem::path& path) {
  write_file_atomic(path, serialize_model(model));
}

LinearModel import_model(const std::filesystem::path& path, const std::optional<TaskSchema>& expected) {
  auto m = deserialize_model(read_file(path));
  if (expected) check_schema(m, *expected);
  return m;
}

}  // namespace redct::trainer
