#include "cctc/acoustic_model.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace cctc {

static_assert(std::endian::native == std::endian::little, "checkpoint payloads assume a little-endian host");

std::string to_string(Activation act) { return act == Activation::relu ? "relu" : "tanh"; }

Activation parse_activation(const std::string& name) {
  if (name == "relu") return Activation::relu;
  if (name == "tanh") return Activation::tanh;
  throw Error("unknown activation: " + name);
}

ModelConfig ModelConfig::desk_scale(int input_dim, int alphabet_size, int context_size) {
  ModelConfig config;
  config.input_dim = input_dim;
  config.alphabet_size = alphabet_size;
  config.context_size = context_size;
  config.conv_layers = {{64, 5, 2, 1}, {64, 5, 1, 1}, {64, 5, 1, 1}, {64, 5, 1, 1}, {64, 5, 1, 1}};
  return config;
}

void ModelConfig::validate() const {
  if (input_dim < 1) throw Error("input_dim must be positive");
  if (alphabet_size < 1) throw Error("alphabet_size must be positive");
  if (context_size < 0) throw Error("context_size must be >= 0");
  if (conv_layers.empty()) throw Error("at least one conv layer is required");
  for (const auto& l : conv_layers) {
    if (l.channels < 1 || l.stride < 1 || l.dilation < 1) throw Error("invalid conv layer");
    if (l.kernel < 1 || l.kernel % 2 == 0) throw Error("conv kernel sizes must be odd");
  }
}

int ModelConfig::total_stride() const {
  int s = 1;
  for (const auto& l : conv_layers) s *= l.stride;
  return s;
}

int ModelConfig::receptive_field() const {
  int field = 1;
  int jump = 1;
  for (const auto& l : conv_layers) {
    field += (l.kernel - 1) * l.dilation * jump;
    jump *= l.stride;
  }
  return field;
}

int ModelConfig::output_frames(int input_frames) const {
  int t = input_frames;
  for (const auto& l : conv_layers) t = (t + l.stride - 1) / l.stride;
  return t;
}

std::string ModelConfig::conv_string() const {
  std::ostringstream out;
  for (std::size_t i = 0; i < conv_layers.size(); ++i) {
    const auto& l = conv_layers[i];
    if (i) out << ',';
    out << l.channels << ':' << l.kernel << ':' << l.stride << ':' << l.dilation;
  }
  return out.str();
}

std::vector<ConvSpec> ModelConfig::parse_conv_string(const std::string& text) {
  std::vector<ConvSpec> out;
  std::istringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    ConvSpec spec;
    char c1 = 0, c2 = 0, c3 = 0;
    std::istringstream fields(item);
    if (!(fields >> spec.channels >> c1 >> spec.kernel >> c2 >> spec.stride >> c3 >> spec.dilation) || c1 != ':' ||
        c2 != ':' || c3 != ':') {
      throw Error("malformed conv layer spec: " + item);
    }
    out.push_back(spec);
  }
  if (out.empty()) throw Error("empty conv layer spec");
  return out;
}

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  ckpt.config.validate();
  std::ostringstream header;
  header << "cctc-checkpoint 1\n";
  header << "config input_dim=" << ckpt.config.input_dim << '\n';
  header << "config conv=" << ckpt.config.conv_string() << '\n';
  header << "config activation=" << to_string(ckpt.config.activation) << '\n';
  header << "config context_size=" << ckpt.config.context_size << '\n';
  header << "config alphabet_size=" << ckpt.config.alphabet_size << '\n';
  for (const auto& [key, value] : ckpt.metadata) {
    if (key.find_first_of("=\n") != std::string::npos || value.find('\n') != std::string::npos) {
      throw Error("invalid checkpoint metadata");
    }
    header << "meta " << key << '=' << value << '\n';
  }
  std::ostringstream alphabet;
  ckpt.alphabet.write(alphabet);
  header << "alphabet " << ckpt.alphabet.size() << '\n' << alphabet.str();

  const auto names = ckpt.state.parameter_names();
  const auto params = ckpt.state.parameters();
  header << "tensors " << params.size() << '\n';
  for (std::size_t i = 0; i < params.size(); ++i) {
    header << names[i] << ' ' << params[i]->rows() << ' ' << params[i]->cols() << '\n';
  }
  header << "end\n";

  std::string bytes = header.str();
  for (const auto* p : params) {
    // Column-major order, as Eigen stores it.
    const auto n = static_cast<std::size_t>(p->size()) * sizeof(float);
    bytes.append(reinterpret_cast<const char*>(p->data()), n);
  }
  return bytes;
}

Checkpoint deserialize_checkpoint(const std::string& bytes) {
  std::istringstream in(bytes);
  std::string line;
  auto next_line = [&]() {
    if (!std::getline(in, line)) throw Error("truncated checkpoint header");
    return line;
  };
  if (next_line() != "cctc-checkpoint 1") throw Error("unsupported checkpoint format");

  Checkpoint ckpt;
  std::map<std::string, std::string> config;
  while (true) {
    next_line();
    if (line.rfind("config ", 0) == 0 || line.rfind("meta ", 0) == 0) {
      const bool is_config = line[0] == 'c';
      const auto body = line.substr(is_config ? 7 : 5);
      const auto eq = body.find('=');
      if (eq == std::string::npos) throw Error("malformed checkpoint header line: " + line);
      (is_config ? config : ckpt.metadata)[body.substr(0, eq)] = body.substr(eq + 1);
      continue;
    }
    break;
  }
  try {
    ckpt.config.input_dim = std::stoi(config.at("input_dim"));
    ckpt.config.conv_layers = ModelConfig::parse_conv_string(config.at("conv"));
    ckpt.config.activation = parse_activation(config.at("activation"));
    ckpt.config.context_size = std::stoi(config.at("context_size"));
    ckpt.config.alphabet_size = std::stoi(config.at("alphabet_size"));
  } catch (const std::out_of_range&) {
    throw Error("checkpoint header is missing a config key");
  }
  ckpt.config.validate();

  if (line.rfind("alphabet ", 0) != 0) throw Error("checkpoint header is missing the alphabet");
  const int symbols = std::stoi(line.substr(9));
  std::ostringstream alphabet_text;
  for (int i = 0; i <= symbols; ++i) alphabet_text << next_line() << '\n';
  std::istringstream alphabet_in(alphabet_text.str());
  ckpt.alphabet = Alphabet::read(alphabet_in);
  if (ckpt.alphabet.size() != ckpt.config.alphabet_size) throw Error("checkpoint alphabet size mismatch");

  next_line();
  if (line.rfind("tensors ", 0) != 0) throw Error("checkpoint header is missing the tensor directory");
  const int count = std::stoi(line.substr(8));
  std::vector<std::tuple<std::string, int, int>> directory;
  for (int i = 0; i < count; ++i) {
    std::istringstream fields(next_line());
    std::string name;
    int rows = 0, cols = 0;
    if (!(fields >> name >> rows >> cols)) throw Error("malformed tensor directory entry");
    directory.emplace_back(name, rows, cols);
  }
  if (next_line() != "end") throw Error("checkpoint header is not terminated");

  ckpt.state = init_model<float>(ckpt.config, 0);
  auto params = ckpt.state.parameters();
  const auto names = ckpt.state.parameter_names();
  if (params.size() != directory.size()) throw Error("checkpoint tensor count mismatch");
  auto offset = static_cast<std::size_t>(in.tellg());
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& [name, rows, cols] = directory[i];
    if (name != names[i] || rows != params[i]->rows() || cols != params[i]->cols()) {
      throw Error("checkpoint tensor mismatch: " + name);
    }
    const auto n = static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols) * sizeof(float);
    if (offset + n > bytes.size()) throw Error("truncated checkpoint payload");
    std::memcpy(params[i]->data(), bytes.data() + offset, n);
    offset += n;
  }
  if (offset != bytes.size()) throw Error("trailing bytes in checkpoint");
  return ckpt;
}

void save_checkpoint(const std::string& path, const Checkpoint& checkpoint) {
  const std::string bytes = serialize_checkpoint(checkpoint);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("cannot write " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return deserialize_checkpoint(buf.str());
}

std::uint64_t checkpoint_hash(const Checkpoint& checkpoint) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : serialize_checkpoint(checkpoint)) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace cctc
