#pragma once

#include <string>

#include <json.hpp>

#include "cpabf/synthesis.hpp"

namespace cpabf {

/// A result bundle on disk: one directory holding the mesh
/// (vertices.csv, simplices.csv), the certificate data (w_values.csv,
/// gamma.csv, xi.csv, certificate.json), the safe-set boundary
/// (boundary.csv), per-simplex gradients (gradients.csv), the dataset it
/// was synthesized from (dataset.csv + sidecar), the run configuration
/// (config.json), the iteration log (run_log.jsonl) and any refinement
/// insertions (inserted_points.csv).
void write_bundle(const std::string& dir, const SynthesisResult& result,
                  const nlohmann::json& provenance);

struct Bundle {
  std::shared_ptr<const Triangulation> tri;
  Dataset dataset;
  Eigen::VectorXd W;
  Eigen::VectorXd gamma;
  std::vector<int> xi;
  double b = 0.0;
  double epsilon = 0.1;
  bool feasible = false;
  SynthesisConfig config;
  nlohmann::json config_json;

  CpaFunction barrier() const { return CpaFunction(tri, W, epsilon); }
};

/// Throws SchemaError / IoError when the directory is incomplete or
/// inconsistent.
Bundle load_bundle(const std::string& dir);

nlohmann::json config_to_json(const SynthesisConfig& config);
SynthesisConfig config_from_json(const nlohmann::json& j);
nlohmann::json certificate_to_json(const CertificateReport& report);

/// audit.json writer for invariance audits.
void write_audit_json(const std::string& path, const InvarianceAudit& audit);

}  // namespace cpabf
