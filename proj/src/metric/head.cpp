#include <cmath>

#include "convsv/common/error.hpp"
#include "convsv/common/hashing.hpp"
#include "convsv/common/jsonl.hpp"
#include "convsv/common/random.hpp"
#include "convsv/kernels/kernels.hpp"
#include "convsv/metric/metric.hpp"

namespace convsv {

ProjectionHead ProjectionHead::identity(std::size_t dim) {
  ProjectionHead h;
  h.in_dim = dim;
  h.out_dim = dim;
  h.weight.assign(dim * dim, 0.0);
  for (std::size_t i = 0; i < dim; ++i) h.weight[i * dim + i] = 1.0;
  return h;
}

ProjectionHead ProjectionHead::initialized(std::size_t in_dim, std::size_t out_dim,
                                           std::uint64_t seed, double noise) {
  if (in_dim == 0 || out_dim == 0) {
    throw Error(ErrorKind::kValidation, "projection head dims must be >= 1");
  }
  ProjectionHead h;
  h.in_dim = in_dim;
  h.out_dim = out_dim;
  h.init_seed = seed;
  h.weight.assign(in_dim * out_dim, 0.0);
  Rng rng(derive_seed(seed, "projection_head_init"));
  for (std::size_t r = 0; r < out_dim; ++r) {
    for (std::size_t c = 0; c < in_dim; ++c) {
      h.weight[r * in_dim + c] = (r == c ? 1.0 : 0.0) + rng.normal(0.0, noise);
    }
  }
  return h;
}

void ProjectionHead::apply(std::span<const double> in, std::span<double> out) const {
  if (in.size() != in_dim || out.size() != out_dim) {
    throw Error(ErrorKind::kMismatch, "projection: expected input dim " + std::to_string(in_dim) +
                                          ", got " + std::to_string(in.size()));
  }
  for (std::size_t r = 0; r < out_dim; ++r) {
    const double* row = weight.data() + r * in_dim;
    double s = 0.0;
    for (std::size_t c = 0; c < in_dim; ++c) s += row[c] * in[c];
    out[r] = s;
  }
}

Vector ProjectionHead::apply(std::span<const double> in) const {
  Vector out(out_dim);
  apply(in, out);
  return out;
}

std::string ProjectionHead::hash() const {
  Sha256 h;
  h.update(std::to_string(in_dim) + "x" + std::to_string(out_dim) + ";");
  for (double w : weight) h.update(format_double(w)).update(",");
  return h.hex();
}

std::string ProjectionHead::id() const { return "proj-" + hash().substr(0, 8); }

SetEmbedding project(const SetEmbedding& embedding, const ProjectionHead& head) {
  SetEmbedding out;
  out.set_id = embedding.set_id;
  out.backend_id = embedding.backend_id + "+" + head.id();
  out.values = head.apply(embedding.values);
  out.num_pooled = embedding.num_pooled;
  return out;
}

EmbeddingTable project_table(const EmbeddingTable& table, const ProjectionHead& head) {
  if (table.dim != head.in_dim) {
    throw Error(ErrorKind::kMismatch, "project_table: table dim " + std::to_string(table.dim) +
                                          " does not match head input " + std::to_string(head.in_dim));
  }
  EmbeddingTable out;
  out.backend_id = table.backend_id + "+" + head.id();
  out.dim = head.out_dim;
  std::vector<double> rows(table.size() * head.out_dim);
  kernels::parallel::project_rows(table.data, head, rows);
  for (std::size_t i = 0; i < table.size(); ++i) {
    out.add(table.ids[i], std::span<const double>(rows).subspan(i * head.out_dim, head.out_dim),
            table.num_pooled[i]);
  }
  return out;
}

OrderedJson train_config_to_json(const TrainConfig& c) {
  OrderedJson j;
  j["margin"] = c.margin;
  j["learning_rate"] = c.learning_rate;
  j["epochs"] = c.epochs;
  j["batch_size"] = c.batch_size;
  j["warmup_fraction"] = c.warmup_fraction;
  j["seed"] = c.seed;
  j["clamp_negative_term"] = c.clamp_negative_term;
  j["out_dim"] = c.out_dim;
  j["init_noise"] = c.init_noise;
  return j;
}

TrainConfig train_config_from_json(const Json& j) {
  TrainConfig c;
  c.margin = j.value("margin", c.margin);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.warmup_fraction = j.value("warmup_fraction", c.warmup_fraction);
  c.seed = j.value("seed", c.seed);
  c.clamp_negative_term = j.value("clamp_negative_term", c.clamp_negative_term);
  c.out_dim = j.value("out_dim", c.out_dim);
  c.init_noise = j.value("init_noise", c.init_noise);
  return c;
}

std::string head_json(const TrainedMetric& metric) {
  const auto& h = metric.head;
  OrderedJson doc;
  doc["in_dim"] = h.in_dim;
  doc["out_dim"] = h.out_dim;
  OrderedJson rows = OrderedJson::array();
  for (std::size_t r = 0; r < h.out_dim; ++r) {
    rows.push_back(std::vector<double>(h.weight.begin() + static_cast<std::ptrdiff_t>(r * h.in_dim),
                                       h.weight.begin() + static_cast<std::ptrdiff_t>((r + 1) * h.in_dim)));
  }
  doc["weight"] = std::move(rows);
  doc["config"] = train_config_to_json(metric.config);
  doc["backend_id"] = metric.backend_id;
  doc["init_seed"] = h.init_seed;
  OrderedJson curve = OrderedJson::array();
  for (const auto& p : metric.loss_curve) curve.push_back({p.step, p.loss});
  doc["loss_curve"] = std::move(curve);
  doc["hash"] = metric.hash;
  return doc.dump(1) + "\n";
}

TrainedMetric parse_head_json(std::string_view json_text) {
  TrainedMetric m;
  try {
    const auto doc = Json::parse(json_text);
    m.head.in_dim = doc.at("in_dim").get<std::size_t>();
    m.head.out_dim = doc.at("out_dim").get<std::size_t>();
    m.head.init_seed = doc.value("init_seed", std::uint64_t{0});
    const auto& rows = doc.at("weight");
    if (rows.size() != m.head.out_dim) {
      throw Error(ErrorKind::kMismatch, "head: weight has wrong number of rows");
    }
    for (const auto& row : rows) {
      auto r = row.get<std::vector<double>>();
      if (r.size() != m.head.in_dim) throw Error(ErrorKind::kMismatch, "head: ragged weight row");
      for (double w : r) {
        if (!std::isfinite(w)) throw Error(ErrorKind::kNonFinite, "head: non-finite weight");
      }
      m.head.weight.insert(m.head.weight.end(), r.begin(), r.end());
    }
    if (doc.contains("config")) m.config = train_config_from_json(doc.at("config"));
    m.backend_id = doc.value("backend_id", "");
    if (doc.contains("loss_curve")) {
      for (const auto& p : doc.at("loss_curve")) {
        m.loss_curve.push_back({p.at(0).get<std::size_t>(), p.at(1).get<double>()});
      }
    }
    m.hash = doc.value("hash", "");
  } catch (const Json::exception& e) {
    throw Error(ErrorKind::kParse, std::string("head: ") + e.what());
  }
  return m;
}

}  // namespace convsv
