// SPDX-License-Identifier: Apache-2.0
#include "nrfe/metrics.hpp"

#include "nrfe/error.hpp"

#include <json.hpp>

#include <fstream>

namespace nrfe {

namespace {

double ratio(long long num, long long den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

double harmonic(double p, double r) { return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r); }

}  // namespace

MetricsReport compute_metrics(std::span<const BinaryLabel> predictions,
                              std::span<const BinaryLabel> truths) {
  if (predictions.size() != truths.size()) {
    throw InvalidArgument("compute_metrics: prediction and truth counts differ");
  }
  if (truths.empty()) throw InvalidArgument("compute_metrics: empty input");

  MetricsReport m;
  for (std::size_t i = 0; i < truths.size(); ++i) {
    ++m.confusion[class_index(truths[i])][class_index(predictions[i])];
  }
  const auto& c = m.confusion;
  const long long n = static_cast<long long>(truths.size());
  m.acc = ratio(c[0][0] + c[1][1], n);
  m.p_t = ratio(c[0][0], c[0][0] + c[1][0]);
  m.r_t = ratio(c[0][0], c[0][0] + c[0][1]);
  m.f1_t = harmonic(m.p_t, m.r_t);
  m.p_f = ratio(c[1][1], c[1][1] + c[0][1]);
  m.r_f = ratio(c[1][1], c[1][1] + c[1][0]);
  m.f1_f = harmonic(m.p_f, m.r_f);
  m.mac_f1 = (m.f1_t + m.f1_f) / 2.0;
  return m;
}

std::string metrics_json(const MetricsReport& m) {
  nlohmann::ordered_json j;
  j["acc"] = m.acc;
  j["mac_f1"] = m.mac_f1;
  j["p_t"] = m.p_t;
  j["r_t"] = m.r_t;
  j["f1_t"] = m.f1_t;
  j["p_f"] = m.p_f;
  j["r_f"] = m.r_f;
  j["f1_f"] = m.f1_f;
  j["confusion"] = {{m.confusion[0][0], m.confusion[0][1]},
                    {m.confusion[1][0], m.confusion[1][1]}};
  return j.dump(2) + "\n";
}

MetricsReport parse_metrics_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    MetricsReport m;
    m.acc = j.at("acc").get<double>();
    m.mac_f1 = j.at("mac_f1").get<double>();
    m.p_t = j.at("p_t").get<double>();
    m.r_t = j.at("r_t").get<double>();
    m.f1_t = j.at("f1_t").get<double>();
    m.p_f = j.at("p_f").get<double>();
    m.r_f = j.at("r_f").get<double>();
    m.f1_f = j.at("f1_f").get<double>();
    for (int t = 0; t < 2; ++t) {
      for (int p = 0; p < 2; ++p) m.confusion[t][p] = j.at("confusion").at(t).at(p).get<long long>();
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("metrics JSON: ") + e.what());
  }
}

void write_metrics(const std::filesystem::path& path, const MetricsReport& report) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << metrics_json(report);
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace nrfe
