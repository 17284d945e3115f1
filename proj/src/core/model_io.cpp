#include <fstream>
#include <sstream>

#include <json.hpp>

#include "core/error.hpp"
#include "core/svr.hpp"

namespace f2b {

namespace {

constexpr int kModelVersion = 1;

const char* kind_name(KernelKind k) { return k == KernelKind::Linear ? "linear" : "rbf"; }

}  // namespace

std::string model_to_json(const SvrModel& model) {
  nlohmann::ordered_json j;
  j["version"] = kModelVersion;
  j["kernel"] = {{"kind", kind_name(model.kernel.kind)}, {"gamma", model.kernel.gamma}};
  j["params"] = {{"c", model.params.c},
                 {"epsilon", model.params.epsilon},
                 {"tolerance", model.params.tolerance},
                 {"max_passes", model.params.max_passes}};
  j["normalize"] = model.normalize;
  j["bias"] = model.bias;
  j["dim"] = model.dim;
  auto support = nlohmann::ordered_json::array();
  for (const auto& sv : model.support)
    support.push_back({{"id", sv.record_id}, {"coeff", sv.coeff}, {"vec", sv.vec}});
  j["support"] = std::move(support);
  return j.dump(1) + "\n";
}

SvrModel model_from_json(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Format, std::string("model file is not valid JSON: ") + e.what());
  }
  try {
    if (j.at("version").get<int>() != kModelVersion)
      fail(ErrorKind::Format, "unsupported model version " + j.at("version").dump());
    SvrModel m;
    const auto kind = j.at("kernel").at("kind").get<std::string>();
    if (kind == "linear") m.kernel.kind = KernelKind::Linear;
    else if (kind == "rbf") m.kernel.kind = KernelKind::Rbf;
    else fail(ErrorKind::Format, "unknown kernel kind " + kind);
    m.kernel.gamma = j.at("kernel").at("gamma").get<double>();
    const auto& p = j.at("params");
    m.params.c = p.at("c").get<double>();
    m.params.epsilon = p.at("epsilon").get<double>();
    m.params.tolerance = p.at("tolerance").get<double>();
    m.params.max_passes = p.value("max_passes", std::uint64_t{0});
    m.normalize = j.at("normalize").get<bool>();
    m.bias = j.at("bias").get<double>();
    m.dim = j.at("dim").get<std::size_t>();
    for (const auto& s : j.at("support")) {
      SupportVector sv;
      sv.record_id = s.at("id").get<std::string>();
      sv.coeff = s.at("coeff").get<double>();
      sv.vec = s.at("vec").get<std::vector<double>>();
      if (sv.vec.size() != m.dim) fail(ErrorKind::Format, "support vector " + sv.record_id + " has wrong dim");
      m.support.push_back(std::move(sv));
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Format, std::string("malformed model file: ") + e.what());
  }
}

void save_model(const std::filesystem::path& path, const SvrModel& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
  out << model_to_json(model);
  if (!out) fail(ErrorKind::Io, "write failed for " + path.string());
}

SvrModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return model_from_json(buf.str());
}

}  // namespace f2b
