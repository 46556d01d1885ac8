// SPDX-License-Identifier: Apache-2.0
#include "nrfe/checkpoint.hpp"

#include "nrfe/error.hpp"

#include <json.hpp>

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace nrfe {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

namespace {

constexpr std::array<char, 8> kMagic = {'N', 'R', 'F', 'E', 'C', 'K', 'P', 'T'};

template <typename T>
void write_pod(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw FormatError("truncated checkpoint");
  return value;
}

}  // namespace

const ad::Matrix* CheckpointData::find(std::string_view name) const {
  for (const auto& [n, m] : tensors) {
    if (n == name) return &m;
  }
  return nullptr;
}

void write_checkpoint(const std::filesystem::path& path, const CheckpointData& data) {
  nlohmann::ordered_json header;
  header["kind"] = data.kind;
  header["meta"] = data.meta_json.empty() ? nlohmann::ordered_json::object()
                                          : nlohmann::ordered_json::parse(data.meta_json);
  auto& list = header["tensors"] = nlohmann::ordered_json::array();
  for (const auto& [name, m] : data.tensors) {
    list.push_back({{"name", name}, {"rows", m.rows()}, {"cols", m.cols()}});
  }
  const std::string text = header.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open checkpoint for writing: " + path.string());
  out.write(kMagic.data(), kMagic.size());
  write_pod<std::uint32_t>(out, kCheckpointVersion);
  write_pod<std::uint64_t>(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& [name, m] : data.tensors) {
    for (ad::Index r = 0; r < m.rows(); ++r) {
      for (ad::Index c = 0; c < m.cols(); ++c) write_pod<double>(out, m(r, c));
    }
  }
  if (!out) throw IoError("failed writing checkpoint: " + path.string());
}

CheckpointData read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path.string());
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) throw FormatError("not an nrfe checkpoint: " + path.string());
  const auto version = read_pod<std::uint32_t>(in);
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  }
  const auto header_len = read_pod<std::uint64_t>(in);
  std::string text(header_len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(header_len));
  if (!in) throw FormatError("truncated checkpoint header");

  nlohmann::ordered_json header;
  try {
    header = nlohmann::ordered_json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint header is not valid JSON: ") + e.what());
  }
  CheckpointData data;
  data.kind = header.value("kind", "");
  data.meta_json = header.contains("meta") ? header["meta"].dump() : "{}";
  for (const auto& t : header.at("tensors")) {
    const auto rows = t.at("rows").get<ad::Index>();
    const auto cols = t.at("cols").get<ad::Index>();
    ad::Matrix m(rows, cols);
    for (ad::Index r = 0; r < rows; ++r) {
      for (ad::Index c = 0; c < cols; ++c) m(r, c) = read_pod<double>(in);
    }
    data.tensors.emplace_back(t.at("name").get<std::string>(), std::move(m));
  }
  return data;
}

std::vector<std::pair<std::string, ad::Matrix>> snapshot(const nn::ParameterList& params) {
  std::vector<std::pair<std::string, ad::Matrix>> out;
  out.reserve(params.size());
  for (const auto& p : params.items()) out.emplace_back(p.name, p.tensor.value());
  return out;
}

void load_parameters(const CheckpointData& data, const nn::ParameterList& params) {
  for (const auto& p : params.items()) {
    const ad::Matrix* m = data.find(p.name);
    if (m == nullptr) throw FormatError("checkpoint lacks tensor " + p.name);
    if (m->rows() != p.tensor.rows() || m->cols() != p.tensor.cols()) {
      throw FormatError("shape mismatch for tensor " + p.name);
    }
    auto target = p.tensor;
    target.mutable_value() = *m;
  }
}

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::uint64_t file_hash(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for hashing: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return fnv1a64(ss.str());
}

std::string hex64(std::uint64_t value) {
  std::ostringstream ss;
  ss << std::hex << std::setw(16) << std::setfill('0') << value;
  return ss.str();
}

}  // namespace nrfe
