#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <unordered_set>

#include "convsv/common/error.hpp"
#include "convsv/common/jsonl.hpp"
#include "convsv/common/text.hpp"
#include "convsv/embedding/embedding.hpp"

namespace convsv {
namespace {

bool mentions_non_finite(std::string_view line) {
  for (std::string_view token : {"NaN", "nan", "Infinity", "inf"}) {
    if (line.find(token) != std::string_view::npos) return true;
  }
  return false;
}

}  // namespace

ExternalEmbeddings load_external_embeddings(std::istream& in, const Corpus* corpus) {
  ExternalEmbeddings out;
  std::unordered_set<std::string> known;
  if (corpus != nullptr) {
    for (const auto& c : corpus->conversations) {
      for (const auto& u : c.utterances) known.insert(u.utterance_id);
    }
    out.corpus_utterances = known.size();
  }

  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (text::trim(line).empty()) continue;

    Json doc;
    try {
      doc = Json::parse(line);
    } catch (const Json::parse_error& e) {
      if (have_header && mentions_non_finite(line)) {
        out.rejected_lines.push_back(line_no);
        continue;
      }
      throw Error(ErrorKind::kParse,
                  "line " + std::to_string(line_no) + ": invalid JSON (" + e.what() + ")", line_no);
    }

    try {
      if (!have_header) {
        out.backend_id = doc.at("backend_id").get<std::string>();
        const auto dim = doc.at("dim").get<long long>();
        if (dim < 1) {
          throw Error(ErrorKind::kValidation, "line " + std::to_string(line_no) + ": dim must be >= 1",
                      line_no);
        }
        out.dim = static_cast<std::size_t>(dim);
        have_header = true;
        continue;
      }
      auto id = doc.at("utterance_id").get<std::string>();
      const auto& values = doc.at("values");
      if (!values.is_array() || values.size() != out.dim) {
        throw Error(ErrorKind::kMismatch,
                    "line " + std::to_string(line_no) + ": expected " + std::to_string(out.dim) +
                        " values, got " + std::to_string(values.is_array() ? values.size() : 0),
                    line_no);
      }
      Vector v;
      v.reserve(out.dim);
      bool finite = true;
      for (const auto& x : values) {
        if (!x.is_number()) {
          throw Error(ErrorKind::kParse, "line " + std::to_string(line_no) + ": non-numeric value",
                      line_no);
        }
        const double d = x.get<double>();
        finite = finite && std::isfinite(d);
        v.push_back(d);
      }
      if (!finite) {
        out.rejected_lines.push_back(line_no);
        continue;
      }
      if (corpus != nullptr && !known.contains(id)) {
        ++out.unknown_skipped;
        continue;
      }
      if (out.vectors.contains(id)) {
        throw Error(ErrorKind::kDuplicate,
                    "line " + std::to_string(line_no) + ": duplicate utterance_id '" + id + "'",
                    line_no);
      }
      out.vectors.emplace(std::move(id), std::move(v));
    } catch (const Json::exception& e) {
      throw Error(ErrorKind::kParse, "line " + std::to_string(line_no) + ": " + e.what(), line_no);
    }
  }
  if (!have_header) throw Error(ErrorKind::kParse, "embedding file has no header line");

  if (corpus != nullptr) {
    for (const auto& id : known) {
      if (!out.vectors.contains(id)) out.missing_ids.push_back(id);
    }
    std::sort(out.missing_ids.begin(), out.missing_ids.end());
  }
  return out;
}

ExternalEmbeddings load_external_embeddings(const std::filesystem::path& path,
                                            const Corpus* corpus) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path.string());
  return load_external_embeddings(in, corpus);
}

}  // namespace convsv
