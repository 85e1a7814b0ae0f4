#include "moralscope/model.hpp"

#include <json.hpp>

#include <cstring>
#include <fstream>
#include <iterator>

namespace moralscope::model {

namespace {

constexpr char kCheckpointMagic[4] = {'M', 'S', 'C', 'K'};
constexpr std::uint32_t kCheckpointVersion = 1;

template <class T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

void put_string(std::ostream& out, const std::string& s) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

class Cursor {
 public:
  explicit Cursor(const std::vector<char>& b) : bytes_(b) {}
  template <class T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string get_string() {
    const auto n = get<std::uint32_t>();
    need(n);
    std::string s(bytes_.data() + pos_, n);
    pos_ += n;
    return s;
  }
  void get_doubles(double* out, std::size_t n) {
    if (n > (bytes_.size() - pos_) / sizeof(double)) throw std::runtime_error("checkpoint truncated");
    std::memcpy(out, bytes_.data() + pos_, n * sizeof(double));
    pos_ += n * sizeof(double);
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (n > bytes_.size() - pos_) throw std::runtime_error("checkpoint truncated");
  }
  const std::vector<char>& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string config_to_json(const ModelConfig& c) {
  nlohmann::json j{{"lambda", c.lambda},
                   {"embedding_dim", c.embedding_dim},
                   {"global_hidden_per_direction", c.global_hidden_per_direction},
                   {"recurrent_layers", c.recurrent_layers},
                   {"gcn_layers", c.gcn_layers},
                   {"gcn_out_dim", c.gcn_out_dim},
                   {"attention_dim", c.attention_dim},
                   {"dense_units", c.dense_units},
                   {"dropout", c.dropout},
                   {"max_seq_len", c.max_seq_len},
                   {"batch_size", c.batch_size},
                   {"training_steps", c.training_steps},
                   {"epochs", c.epochs},
                   {"seed", c.seed},
                   {"channels", std::string(to_string(c.channels))},
                   {"learning_rate", c.adam.learning_rate},
                   {"adam_epsilon", c.adam.epsilon},
                   {"adam_beta1", c.adam.beta1},
                   {"adam_beta2", c.adam.beta2},
                   {"clip_norm", c.adam.clip_norm}};
  return j.dump();
}

ModelConfig config_from_json(const std::string& json_text) {
  const auto j = nlohmann::json::parse(json_text);
  ModelConfig c;
  c.lambda = j.at("lambda").get<double>();
  c.embedding_dim = j.at("embedding_dim").get<int>();
  c.global_hidden_per_direction = j.at("global_hidden_per_direction").get<int>();
  c.recurrent_layers = j.at("recurrent_layers").get<int>();
  c.gcn_layers = j.at("gcn_layers").get<int>();
  c.gcn_out_dim = j.at("gcn_out_dim").get<int>();
  c.attention_dim = j.at("attention_dim").get<int>();
  c.dense_units = j.at("dense_units").get<std::vector<int>>();
  c.dropout = j.at("dropout").get<double>();
  c.max_seq_len = j.at("max_seq_len").get<int>();
  c.batch_size = j.at("batch_size").get<int>();
  c.training_steps = j.at("training_steps").get<int>();
  c.epochs = j.at("epochs").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.channels = parse_channels(j.at("channels").get<std::string>());
  c.adam.learning_rate = j.at("learning_rate").get<double>();
  c.adam.epsilon = j.at("adam_epsilon").get<double>();
  c.adam.beta1 = j.at("adam_beta1").get<double>();
  c.adam.beta2 = j.at("adam_beta2").get<double>();
  c.adam.clip_norm = j.at("clip_norm").get<double>();
  c.validate();
  return c;
}

void save_checkpoint(const std::filesystem::path& path, const Model& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint '" + path.string() + "'");
  out.write(kCheckpointMagic, 4);
  put<std::uint32_t>(out, kCheckpointVersion);
  put_string(out, config_to_json(model.config()));
  const auto& labels = model.relations().labels();
  put<std::uint32_t>(out, static_cast<std::uint32_t>(labels.size()));
  for (const auto& l : labels) put_string(out, l);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(model.params().size()));
  for (const auto& [name, p] : model.params()) {
    put_string(out, name);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(p.value.rows()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(p.value.cols()));
    out.write(reinterpret_cast<const char*>(p.value.data()), static_cast<std::streamsize>(p.value.size() * sizeof(double)));
  }
  if (!out) throw std::runtime_error("failed writing checkpoint '" + path.string() + "'");
}

Model load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read checkpoint '" + path.string() + "'");
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kCheckpointMagic, 4) != 0) {
    throw std::runtime_error("'" + path.string() + "' is not a checkpoint");
  }
  std::vector<char> body(bytes.begin() + 4, bytes.end());
  Cursor c(body);
  const auto version = c.get<std::uint32_t>();
  if (version != kCheckpointVersion) throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
  const ModelConfig cfg = config_from_json(c.get_string());
  std::vector<std::string> labels(c.get<std::uint32_t>());
  for (auto& l : labels) l = c.get_string();
  Model model(cfg, RelationVocab::from_labels(labels));
  const auto count = c.get<std::uint32_t>();
  if (count != model.params().size()) throw std::runtime_error("checkpoint parameter count does not match its config");
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string name = c.get_string();
    const auto rows = c.get<std::uint32_t>();
    const auto cols = c.get<std::uint32_t>();
    if (!model.params().contains(name)) throw std::runtime_error("checkpoint has unknown parameter '" + name + "'");
    Tensor& v = model.params().value(name);
    if (v.rows() != rows || v.cols() != cols) throw std::runtime_error("checkpoint shape mismatch for '" + name + "'");
    c.get_doubles(v.data(), static_cast<std::size_t>(v.size()));
  }
  if (!c.done()) throw std::runtime_error("trailing bytes in checkpoint");
  return model;
}

}  // namespace moralscope::model
