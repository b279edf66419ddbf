#include "metasre/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "metasre/error.hpp"

namespace metasre {

using nlohmann::json;

std::string checkpoint_to_json(const Checkpoint& c) {
  const ClassifierParams& p = c.params;
  json doc;
  doc["format"] = "metasre-checkpoint";
  doc["version"] = kCheckpointVersion;
  doc["role"] = std::string(to_string(p.role));
  doc["dims"] = {{"vocab_size", p.dims.encoder.vocab_size},
                 {"embed_dim", p.dims.encoder.embed_dim},
                 {"hidden", p.dims.encoder.hidden},
                 {"num_classes", p.dims.num_classes}};
  doc["vocabulary"] = c.vocabulary.regular_tokens();
  doc["label_names"] = c.label_names;
  json tensors = json::array();
  const auto flat = p.flatten();
  for (std::size_t i = 0; i < flat.size(); ++i) {
    tensors.push_back({{"name", kParamNames[i]},
                       {"shape", {flat[i].rows(), flat[i].cols()}},
                       {"values", std::vector<double>(flat[i].values().begin(),
                                                      flat[i].values().end())}});
  }
  doc["tensors"] = std::move(tensors);
  return doc.dump() + "\n";
}

Checkpoint checkpoint_from_json(const std::string& text) {
  try {
    const json doc = json::parse(text);
    if (doc.at("format") != "metasre-checkpoint") {
      fail(ErrorKind::ParseError, "not a checkpoint file");
    }
    if (doc.at("version").get<int>() != kCheckpointVersion) {
      fail(ErrorKind::ParseError, "unsupported checkpoint version");
    }
    NetworkDims dims;
    const json& d = doc.at("dims");
    dims.encoder.vocab_size = d.at("vocab_size").get<std::size_t>();
    dims.encoder.embed_dim = d.at("embed_dim").get<std::size_t>();
    dims.encoder.hidden = d.at("hidden").get<std::size_t>();
    dims.num_classes = d.at("num_classes").get<std::size_t>();
    const Role role = doc.at("role") == "rlgn" ? Role::Generator : Role::Classifier;

    Checkpoint c{zero_params(dims, role),
                 Vocabulary(doc.at("vocabulary").get<std::vector<std::string>>()),
                 doc.at("label_names").get<std::vector<std::string>>()};
    std::vector<Tensor> tensors;
    const json& list = doc.at("tensors");
    if (list.size() != kParamNames.size()) fail(ErrorKind::ParseError, "wrong tensor count");
    for (std::size_t i = 0; i < list.size(); ++i) {
      if (list[i].at("name") != kParamNames[i]) {
        fail(ErrorKind::ParseError, "unexpected tensor " + list[i].at("name").dump());
      }
      const auto shape = list[i].at("shape").get<std::vector<std::size_t>>();
      if (shape.size() != 2) fail(ErrorKind::ParseError, "tensor shape must have two entries");
      tensors.emplace_back(shape[0], shape[1], list[i].at("values").get<std::vector<double>>());
    }
    c.params.assign(std::move(tensors));
    if (c.vocabulary.size() != dims.encoder.vocab_size) {
      fail(ErrorKind::ParseError, "vocabulary size disagrees with dims");
    }
    return c;
  } catch (const json::exception& e) {
    fail(ErrorKind::ParseError, std::string("checkpoint: ") + e.what());
  }
}

void save_checkpoint(const Checkpoint& c, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::IoError, "cannot write " + path);
  out << checkpoint_to_json(c);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::IoError, "cannot read " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return checkpoint_from_json(buffer.str());
}

}  // namespace metasre
