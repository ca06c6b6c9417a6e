#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "s5/losses.hpp"

namespace s5 {

using nlohmann::json;

namespace {

AudioBuffer buffer(const json& j) { return AudioBuffer::mono(j.get<std::vector<double>>()); }

std::vector<AudioBuffer> buffers(const json& j) {
  std::vector<AudioBuffer> out;
  for (const auto& b : j) out.push_back(buffer(b));
  return out;
}

json result(const std::string& name, double value) {
  return {{"loss", name}, {"value", value}, {"gradient", nullptr}};
}

json result(const std::string& name, const LossValue& v) {
  return {{"loss", name}, {"value", v.value}, {"gradient", v.gradient}};
}

}  // namespace

std::string evaluate_loss_case(const std::string& case_json) {
  json c;
  try {
    c = json::parse(case_json);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("malformed loss case: ") + e.what());
  }
  try {
    const auto name = c.at("loss").get<std::string>();
    json out;
    if (name == "sa_sdr") {
      out = result(name, sa_sdr_loss(buffers(c.at("refs")), buffers(c.at("ests"))));
    } else if (name == "si_snr") {
      out = result(name, si_snr_loss(buffer(c.at("ref")), buffer(c.at("est"))));
    } else if (name == "uss") {
      out = result(name, uss_loss(c.at("foreground").get<double>(),
                                  c.at("interference").get<double>(),
                                  c.at("noise").get<double>(), c.value("lambda", kUssLambda)));
    } else if (name == "kl_uniform") {
      out = result(name, kl_uniform_loss(c.at("p").get<std::vector<double>>()));
    } else if (name == "arcface") {
      EmbeddingGeometry g{c.at("feature").get<std::vector<double>>(),
                          c.at("centers").get<std::vector<std::vector<double>>>()};
      out = result(name, arcface_loss(g, c.at("label").get<ClassId>(),
                                      c.value("scale", kArcFaceScale),
                                      c.value("margin", kArcFaceMargin)));
    } else if (name == "energy_score") {
      out = result(name, energy_score(c.at("logits").get<std::vector<double>>()));
    } else if (name == "energy_hinge") {
      out = result(name, energy_hinge_loss(c.value("in", std::vector<double>{}),
                                           c.value("out", std::vector<double>{}),
                                           c.value("margin_in", kEnergyMarginIn),
                                           c.value("margin_out", kEnergyMarginOut)));
    } else if (name == "sc_stage") {
      out = result(name, sc_stage_loss(c.at("arcface").get<double>(), c.at("kl").get<double>(),
                                       c.value("energy", 0.0), c.at("stage").get<int>(),
                                       c.value("lambda_e", kEnergyWeight)));
    } else if (name == "masked_snr") {
      out = result(name, masked_snr_loss(buffers(c.at("refs")), buffers(c.at("ests")),
                                         c.at("active").get<std::vector<bool>>()));
    } else {
      throw std::invalid_argument("unknown loss '" + name + "'");
    }
    return out.dump();
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("malformed loss case: ") + e.what());
  }
}

}  // namespace s5
