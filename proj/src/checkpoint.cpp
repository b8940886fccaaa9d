#include "infgnn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "infgnn/errors.hpp"

namespace infgnn {
namespace {

constexpr char kMagic[8] = {'I', 'N', 'F', 'G', 'N', 'N', 'C', 'K'};

void put_u64(std::ostream& out, std::uint64_t u) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(u >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

std::uint64_t get_u64(const unsigned char* b) {
  std::uint64_t u = 0;
  for (int i = 7; i >= 0; --i) u = (u << 8) | b[i];
  return u;
}

}  // namespace

nlohmann::json to_json(const ModelConfig& c) {
  return {{"features", c.features},   {"input_steps", c.input_steps},
          {"horizon", c.horizon},     {"hidden1", c.hidden1},
          {"hidden2", c.hidden2},     {"conv_width", c.conv_width},
          {"adjacency", to_string(c.adjacency)}};
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.features = j.at("features").get<std::size_t>();
  c.input_steps = j.at("input_steps").get<std::size_t>();
  c.horizon = j.at("horizon").get<std::size_t>();
  c.hidden1 = j.at("hidden1").get<std::size_t>();
  c.hidden2 = j.at("hidden2").get<std::size_t>();
  c.conv_width = j.at("conv_width").get<std::size_t>();
  c.adjacency = adjacency_mode_from_string(j.at("adjacency").get<std::string>());
  return c;
}

void write_checkpoint(const std::filesystem::path& file, const ModelState& state,
                      const nlohmann::json& extra) {
  const ParamLayout L(state.config);
  nlohmann::json header = {
      {"format_version", 1},
      {"config", to_json(state.config)},
      {"parameter_count", L.total},
      {"step", state.step},
      {"payload_doubles", 3 * L.total},
      {"layout",
       {{"gnn1_neighbor", L.gnn1_neighbor}, {"gnn1_self", L.gnn1_self},
        {"conv_kernel", L.conv_kernel},     {"conv_bias", L.conv_bias},
        {"gnn2_neighbor", L.gnn2_neighbor}, {"gnn2_self", L.gnn2_self},
        {"head_weight", L.head_weight},     {"head_bias", L.head_bias}}},
      {"extra", extra}};
  const std::string text = header.dump();
  std::ofstream out(file, std::ios::binary);
  if (!out) throw FormatError("cannot write checkpoint " + file.string());
  out.write(kMagic, 8);
  put_u64(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto* block : {&state.params, &state.moment1, &state.moment2}) {
    for (double v : *block) put_u64(out, std::bit_cast<std::uint64_t>(v));
  }
  if (!out) throw FormatError("failed writing checkpoint " + file.string());
}

LoadedCheckpoint read_checkpoint(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw FormatError("cannot open checkpoint " + file.string());
  const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                         std::istreambuf_iterator<char>());
  const std::string where = file.string() + ": ";
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, 8) != 0) {
    throw FormatError(where + "bad magic at byte offset 0");
  }
  const std::uint64_t header_len = get_u64(bytes.data() + 8);
  if (header_len > bytes.size() - 16) {
    throw FormatError(where + "header overruns the file at byte offset 16 (length " +
                      std::to_string(header_len) + ")");
  }
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.begin() + 16,
                                   bytes.begin() + 16 + static_cast<std::ptrdiff_t>(header_len));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(where + "unreadable header at byte offset 16: " + e.what());
  }

  LoadedCheckpoint out;
  try {
    out.state.config = model_config_from_json(header.at("config"));
    out.state.step = header.at("step").get<std::uint64_t>();
    out.extra = header.value("extra", nlohmann::json::object());
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(where + "incomplete header: " + e.what());
  }
  const std::size_t P = parameter_count(out.state.config);
  if (header.value("parameter_count", std::size_t{0}) != P) {
    throw FormatError(where + "parameter_count disagrees with the model configuration");
  }
  const std::size_t payload_start = 16 + header_len;
  const std::size_t expected_end = payload_start + 3 * P * 8;
  if (bytes.size() != expected_end) {
    throw FormatError(where + "payload length mismatch: data ends at byte offset " +
                      std::to_string(bytes.size()) + ", expected end at byte offset " +
                      std::to_string(expected_end));
  }
  std::size_t at = payload_start;
  for (auto* block : {&out.state.params, &out.state.moment1, &out.state.moment2}) {
    block->resize(P);
    for (double& v : *block) {
      v = std::bit_cast<double>(get_u64(bytes.data() + at));
      at += 8;
    }
  }
  return out;
}

}  // namespace infgnn
