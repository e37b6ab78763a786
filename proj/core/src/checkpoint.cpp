#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "absopf/errors.hpp"
#include "absopf/nn.hpp"

namespace absopf::nn {
namespace {

using nlohmann::json;

constexpr const char* kFormat = "absopf.mlp";
constexpr int kVersion = 1;

json vec_json(const VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

VectorXd json_vec(const json& j, const std::string& field) {
  if (!j.is_array()) throw ParseError(field, 0, "expected an array of numbers");
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const VectorXd>(values.data(), static_cast<long>(values.size()));
}

}  // namespace

std::string to_json(const Mlp& net) {
  json doc;
  doc["format"] = kFormat;
  doc["version"] = kVersion;
  doc["dropout_rate"] = net.dropout_rate;
  doc["layers"] = json::array();
  for (const auto& l : net.layers) {
    std::vector<double> w;
    w.reserve(static_cast<std::size_t>(l.weight.size()));
    for (long r = 0; r < l.weight.rows(); ++r)
      for (long c = 0; c < l.weight.cols(); ++c) w.push_back(l.weight(r, c));
    doc["layers"].push_back({{"rows", l.weight.rows()}, {"cols", l.weight.cols()}, {"weight", w},
                             {"bias", vec_json(l.bias)}});
  }
  doc["x_scale"] = {{"lo", vec_json(net.x_scale.lo)}, {"hi", vec_json(net.x_scale.hi)}};
  doc["y_scale"] = {{"lo", vec_json(net.y_scale.lo)}, {"hi", vec_json(net.y_scale.hi)}};
  return doc.dump() + "\n";
}

Mlp mlp_from_json(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw ParseError("checkpoint", 0, e.what());
  }
  try {
    if (doc.value("format", "") != kFormat) throw ParseError("format", 0, "not an absopf.mlp checkpoint");
    if (doc.value("version", 0) != kVersion)
      throw ParseError("version", 0, "unsupported checkpoint version");
    Mlp net;
    net.dropout_rate = doc.at("dropout_rate").get<double>();
    for (std::size_t i = 0; i < doc.at("layers").size(); ++i) {
      const json& l = doc["layers"][i];
      const std::string path = "layers[" + std::to_string(i) + "]";
      const long rows = l.at("rows").get<long>(), cols = l.at("cols").get<long>();
      const auto w = l.at("weight").get<std::vector<double>>();
      if (static_cast<long>(w.size()) != rows * cols) throw ParseError(path + ".weight", 0, "size mismatch");
      Layer layer{MatrixXd(rows, cols), json_vec(l.at("bias"), path + ".bias")};
      for (long r = 0; r < rows; ++r)
        for (long c = 0; c < cols; ++c) layer.weight(r, c) = w[static_cast<std::size_t>(r * cols + c)];
      net.layers.push_back(std::move(layer));
    }
    net.x_scale = {json_vec(doc.at("x_scale").at("lo"), "x_scale.lo"), json_vec(doc["x_scale"].at("hi"), "x_scale.hi")};
    net.y_scale = {json_vec(doc.at("y_scale").at("lo"), "y_scale.lo"), json_vec(doc["y_scale"].at("hi"), "y_scale.hi")};
    net.validate();
    return net;
  } catch (const json::exception& e) {
    throw ParseError("checkpoint", 0, e.what());
  }
}

void save_mlp(const Mlp& net, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write checkpoint '" + path.string() + "'");
  out << to_json(net);
}

Mlp load_mlp(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open checkpoint '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return mlp_from_json(buf.str());
}

}  // namespace absopf::nn
