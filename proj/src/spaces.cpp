#include "semcom/spaces.hpp"

#include <fstream>
#include <sstream>

namespace semcom {

using nlohmann::json;

ConceptSpace::ConceptSpace(std::vector<std::string> concepts, std::vector<std::string> samples,
                           Distribution prior_in, Matrix law)
    : concept_names(std::move(concepts)),
      sample_names(std::move(samples)),
      prior(std::move(prior_in)),
      data_law(std::move(law)) {
  if (static_cast<Index>(concept_names.size()) != prior.size()) {
    throw ValidationError("concept names and prior disagree in size");
  }
  if (data_law.rows() != prior.size()) throw ValidationError("data_law needs one row per concept");
  if (static_cast<Index>(sample_names.size()) != data_law.cols()) {
    throw ValidationError("data_law needs one column per sample symbol");
  }
  for (Index c = 0; c < data_law.rows(); ++c) {
    data_law.row(c) = Distribution(data_law.row(c).transpose()).probs().transpose();
  }
}

HypothesisSpace::HypothesisSpace(std::vector<std::string> names, std::vector<Matrix> loss_in,
                                 double l_max_in)
    : hypothesis_names(std::move(names)), loss(std::move(loss_in)), l_max(l_max_in) {
  if (hypothesis_names.empty()) throw ValidationError("empty hypothesis class");
  if (!(l_max > 0.0)) throw ValidationError("l_max must be positive");
  for (std::size_t c = 0; c < loss.size(); ++c) {
    if (loss[c].rows() != num_hypotheses()) {
      throw ValidationError("loss[" + std::to_string(c) + "] needs one row per hypothesis");
    }
    if ((loss[c].array() < 0.0).any() || (loss[c].array() > l_max).any() || !loss[c].allFinite()) {
      throw ValidationError("loss[" + std::to_string(c) + "] leaves [0, l_max]");
    }
  }
}

Index DatasetSpace::index_of(std::span<const int> t) const {
  if (static_cast<Index>(t.size()) != m) throw ValidationError("dataset tuple has wrong length");
  Index idx = 0;
  for (int z : t) {
    if (z < 0 || z >= num_samples) throw ValidationError("sample symbol out of range");
    idx = idx * num_samples + z;
  }
  return idx;
}

DatasetSpace enumerate_datasets(const ConceptSpace& concepts, Index m, std::uint64_t cap) {
  if (m < 1) throw ValidationError("m must be at least 1");
  const Index z_count = concepts.num_samples();
  std::uint64_t n = 1;
  for (Index j = 0; j < m; ++j) {
    n *= static_cast<std::uint64_t>(z_count);
    if (n > cap) {
      throw EnumerationTooLarge("|Z|^m = " + std::to_string(z_count) + "^" + std::to_string(m) +
                                " exceeds the enumeration cap " + std::to_string(cap));
    }
  }
  const auto count = static_cast<Index>(n);
  const Index c_count = concepts.num_concepts();

  Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> tuples(count, m);
  Matrix conditional(c_count, count);
  for (Index s = 0; s < count; ++s) {
    Index rest = s;
    for (Index j = m - 1; j >= 0; --j) {
      tuples(s, j) = static_cast<int>(rest % z_count);
      rest /= z_count;
    }
    for (Index c = 0; c < c_count; ++c) {
      double p = 1.0;
      for (Index j = 0; j < m; ++j) p *= concepts.data_law(c, tuples(s, j));
      conditional(c, s) = p;
    }
  }

  const Vector joint_marginal = conditional.transpose() * concepts.prior.probs();
  Matrix posterior(count, c_count);
  for (Index s = 0; s < count; ++s) {
    const double ps = joint_marginal(s);
    for (Index c = 0; c < c_count; ++c) {
      // P(c|s) is arbitrary on null datasets; the prior keeps rows valid.
      posterior(s, c) = ps > 0.0 ? concepts.prior[c] * conditional(c, s) / ps : concepts.prior[c];
    }
  }
  return DatasetSpace{m, z_count, std::move(tuples), std::move(conditional),
                      Distribution(joint_marginal), std::move(posterior)};
}

ProblemInstance::ProblemInstance(ConceptSpace concepts, HypothesisSpace hypotheses, Index m,
                                 std::uint64_t cap)
    : concepts_(std::move(concepts)),
      hypotheses_(std::move(hypotheses)),
      datasets_(enumerate_datasets(concepts_, m, cap)) {
  if (static_cast<Index>(hypotheses_.loss.size()) != concepts_.num_concepts()) {
    throw ValidationError("loss tensor needs one slice per concept");
  }
  for (const Matrix& slice : hypotheses_.loss) {
    if (slice.cols() != concepts_.num_samples()) {
      throw ValidationError("loss tensor needs one column per sample symbol");
    }
  }
}

Matrix ProblemInstance::concept_dataset_joint() const {
  return concepts_.prior.probs().asDiagonal() * datasets_.conditional;
}

// ---------------------------------------------------------------------------
// JSON

namespace {

double number_at(const json& doc, const std::string& ptr) {
  const json& v = doc.at(json::json_pointer(ptr));
  if (!v.is_number()) throw ValidationError("expected a number", ptr);
  return v.get<double>();
}

const json& array_at(const json& doc, const std::string& ptr) {
  const json::json_pointer jp(ptr);
  if (!doc.contains(jp)) throw ValidationError("missing", ptr);
  const json& v = doc.at(jp);
  if (!v.is_array()) throw ValidationError("expected an array", ptr);
  return v;
}

std::vector<std::string> names_at(const json& doc, const std::string& ptr) {
  std::vector<std::string> out;
  const json& arr = array_at(doc, ptr);
  for (std::size_t i = 0; i < arr.size(); ++i) {
    if (!arr[i].is_string()) throw ValidationError("expected a string", ptr + "/" + std::to_string(i));
    out.push_back(arr[i].get<std::string>());
  }
  return out;
}

Matrix matrix_at(const json& doc, const std::string& ptr, Index rows, Index cols) {
  const json& arr = array_at(doc, ptr);
  if (static_cast<Index>(arr.size()) != rows) {
    throw ValidationError("expected " + std::to_string(rows) + " rows", ptr);
  }
  Matrix out(rows, cols);
  for (Index r = 0; r < rows; ++r) {
    const std::string row_ptr = ptr + "/" + std::to_string(r);
    const json& row = array_at(doc, row_ptr);
    if (static_cast<Index>(row.size()) != cols) {
      throw ValidationError("expected " + std::to_string(cols) + " entries", row_ptr);
    }
    for (Index c = 0; c < cols; ++c) out(r, c) = number_at(doc, row_ptr + "/" + std::to_string(c));
  }
  return out;
}

}  // namespace

ProblemInstance instance_from_json(const json& doc, std::uint64_t cap) {
  if (!doc.is_object()) throw ValidationError("instance must be an object", "");
  const json& concepts = array_at(doc, "/concepts");
  std::vector<std::string> concept_names;
  Vector prior(static_cast<Index>(concepts.size()));
  for (std::size_t c = 0; c < concepts.size(); ++c) {
    const std::string ptr = "/concepts/" + std::to_string(c);
    if (!concepts[c].is_object() || !concepts[c].contains("name") || !concepts[c]["name"].is_string()) {
      throw ValidationError("concept needs a string name", ptr + "/name");
    }
    concept_names.push_back(concepts[c]["name"].get<std::string>());
    if (!concepts[c].contains("prior")) throw ValidationError("missing", ptr + "/prior");
    prior(static_cast<Index>(c)) = number_at(doc, ptr + "/prior");
  }
  const auto samples = names_at(doc, "/samples");
  const auto hyps = names_at(doc, "/hypotheses");
  const auto nc = static_cast<Index>(concept_names.size());
  const auto nz = static_cast<Index>(samples.size());
  const auto nh = static_cast<Index>(hyps.size());
  if (nc == 0) throw ValidationError("at least one concept required", "/concepts");
  if (nz == 0) throw ValidationError("at least one sample symbol required", "/samples");
  if (nh == 0) throw ValidationError("at least one hypothesis required", "/hypotheses");

  Matrix law = matrix_at(doc, "/data_law", nc, nz);
  for (Index c = 0; c < nc; ++c) {
    try {
      Distribution check(law.row(c).transpose());
    } catch (const ValidationError& e) {
      throw ValidationError(e.what(), "/data_law/" + std::to_string(c));
    }
  }
  Distribution prior_dist = [&] {
    try {
      return Distribution(prior);
    } catch (const ValidationError& e) {
      throw ValidationError(e.what(), "/concepts");
    }
  }();

  const json& loss_arr = array_at(doc, "/loss");
  if (static_cast<Index>(loss_arr.size()) != nc) throw ValidationError("one slice per concept", "/loss");
  std::vector<Matrix> loss;
  for (Index c = 0; c < nc; ++c) loss.push_back(matrix_at(doc, "/loss/" + std::to_string(c), nh, nz));

  double l_max = 1.0;
  if (doc.contains("l_max")) l_max = number_at(doc, "/l_max");
  if (!(l_max > 0.0)) throw ValidationError("must be positive", "/l_max");
  for (Index c = 0; c < nc; ++c) {
    for (Index h = 0; h < nh; ++h) {
      for (Index z = 0; z < nz; ++z) {
        const double v = loss[c](h, z);
        if (!(v >= 0.0 && v <= l_max)) {
          throw ValidationError("loss outside [0, l_max]", "/loss/" + std::to_string(c) + "/" +
                                                               std::to_string(h) + "/" +
                                                               std::to_string(z));
        }
      }
    }
  }
  if (!doc.contains("m") || !doc["m"].is_number_integer()) {
    throw ValidationError("expected a positive integer", "/m");
  }
  const auto m = doc["m"].get<long long>();
  if (m < 1) throw ValidationError("expected a positive integer", "/m");

  try {
    return ProblemInstance(ConceptSpace(std::move(concept_names), samples, std::move(prior_dist), law),
                           HypothesisSpace(hyps, std::move(loss), l_max), static_cast<Index>(m), cap);
  } catch (const EnumerationTooLarge& e) {
    throw ValidationError(e.what(), "/m");
  }
}

json instance_to_json(const ProblemInstance& instance) {
  const auto& cs = instance.concepts();
  const auto& hs = instance.hypotheses();
  json doc;
  doc["concepts"] = json::array();
  for (Index c = 0; c < cs.num_concepts(); ++c) {
    doc["concepts"].push_back({{"name", cs.concept_names[c]}, {"prior", cs.prior[c]}});
  }
  doc["samples"] = cs.sample_names;
  doc["hypotheses"] = hs.hypothesis_names;
  doc["data_law"] = json::array();
  for (Index c = 0; c < cs.num_concepts(); ++c) {
    json row = json::array();
    for (Index z = 0; z < cs.num_samples(); ++z) row.push_back(cs.data_law(c, z));
    doc["data_law"].push_back(row);
  }
  doc["loss"] = json::array();
  for (const Matrix& slice : hs.loss) {
    json s = json::array();
    for (Index h = 0; h < slice.rows(); ++h) {
      json row = json::array();
      for (Index z = 0; z < slice.cols(); ++z) row.push_back(slice(h, z));
      s.push_back(row);
    }
    doc["loss"].push_back(s);
  }
  doc["m"] = instance.m();
  doc["l_max"] = hs.l_max;
  return doc;
}

ProblemInstance load_instance(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open instance file '" + path + "'");
  json doc;
  try {
    in >> doc;
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("invalid JSON: ") + e.what());
  }
  return instance_from_json(doc);
}

}  // namespace semcom
