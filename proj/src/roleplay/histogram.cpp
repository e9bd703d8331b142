#include <algorithm>
#include <cmath>
#include <cstdio>

#include "convsv/common/error.hpp"
#include "convsv/common/jsonl.hpp"
#include "convsv/roleplay/roleplay.hpp"

namespace convsv {

std::vector<PairInstance> real_generated_pairs(const RoleplayBundle& bundle,
                                               std::span<const RealReference> references) {
  std::vector<PairInstance> pairs;
  for (const auto& role : bundle.roles) {
    for (const auto& g : bundle.generated.at(role)) {
      for (const auto& ref : references) {
        for (const auto& r : ref.real_sets) {
          PairInstance p;
          p.pair_id = "rg-" + std::to_string(pairs.size());
          p.set_a = g.set_id;
          p.set_b = r.set_id;
          p.label = ref.role_id == role ? Label::kPositive : Label::kNegative;
          pairs.push_back(std::move(p));
        }
      }
    }
  }
  return pairs;
}

std::vector<PairInstance> generated_generated_pairs(const RoleplayBundle& bundle) {
  const auto sets = bundle.all_sets();
  std::vector<PairInstance> pairs;
  for (std::size_t i = 0; i < sets.size(); ++i) {
    for (std::size_t j = i + 1; j < sets.size(); ++j) {
      PairInstance p;
      p.pair_id = "gg-" + std::to_string(pairs.size());
      p.set_a = sets[i].set_id;
      p.set_b = sets[j].set_id;
      p.label = sets[i].speaker_id == sets[j].speaker_id ? Label::kPositive : Label::kNegative;
      pairs.push_back(std::move(p));
    }
  }
  return pairs;
}

ScoreDistributions score_distributions(std::span<const ScoredPair> pairs, std::size_t bins) {
  if (bins == 0) throw Error(ErrorKind::kValidation, "histogram: bins must be >= 1");
  ScoreDistributions out;
  out.positive.counts.assign(bins, 0);
  out.negative.counts.assign(bins, 0);
  const double width = 2.0 / static_cast<double>(bins);
  for (const auto& p : pairs) {
    if (!std::isfinite(p.score)) throw Error(ErrorKind::kNonFinite, "histogram: non-finite score");
    const double x = std::clamp(p.score, -1.0, 1.0);
    auto b = static_cast<std::size_t>(std::floor((x + 1.0) / width));
    b = std::min(b, bins - 1);  // 1.0 falls into the top bin
    (p.positive() ? out.positive : out.negative).counts[b] += 1;
  }
  for (Histogram* h : {&out.positive, &out.negative}) {
    std::size_t total = 0;
    for (auto c : h->counts) total += c;
    h->mass.assign(bins, 0.0);
    if (total == 0) continue;
    for (std::size_t b = 0; b < bins; ++b) {
      h->mass[b] = static_cast<double>(h->counts[b]) / static_cast<double>(total);
    }
  }
  return out;
}

std::string histogram_csv(const ScoreDistributions& dist) {
  std::string out = "bin_lower,bin_upper,positive_count,positive_mass,negative_count,negative_mass\n";
  const std::size_t bins = dist.positive.counts.size();
  const double width = 2.0 / static_cast<double>(bins);
  for (std::size_t b = 0; b < bins; ++b) {
    out += format_double(-1.0 + width * static_cast<double>(b)) + "," +
           format_double(-1.0 + width * static_cast<double>(b + 1)) + "," +
           std::to_string(dist.positive.counts[b]) + "," + format_double(dist.positive.mass[b]) + "," +
           std::to_string(dist.negative.counts[b]) + "," + format_double(dist.negative.mass[b]) + "\n";
  }
  return out;
}

std::string histogram_svg(const ScoreDistributions& dist, std::string_view title) {
  constexpr double kW = 640, kH = 320, kPad = 40;
  const std::size_t bins = dist.positive.counts.size();
  double peak = 0.0;
  for (std::size_t b = 0; b < bins; ++b) {
    peak = std::max({peak, dist.positive.mass[b], dist.negative.mass[b]});
  }
  if (peak == 0.0) peak = 1.0;
  const double bw = (kW - 2 * kPad) / static_cast<double>(bins);
  char buf[256];
  std::string out;
  std::snprintf(buf, sizeof buf,
                "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%.0f\" height=\"%.0f\">\n", kW, kH);
  out += buf;
  std::string escaped;
  for (char c : title) {
    if (c == '<') escaped += "&lt;";
    else if (c == '>') escaped += "&gt;";
    else if (c == '&') escaped += "&amp;";
    else escaped += c;
  }
  std::snprintf(buf, sizeof buf, "<text x=\"%.0f\" y=\"20\" font-family=\"sans-serif\" font-size=\"14\">",
                kPad);
  out += buf + escaped + "</text>\n";
  auto bars = [&](const Histogram& h, const char* color) {
    for (std::size_t b = 0; b < bins; ++b) {
      if (h.mass[b] == 0.0) continue;
      const double height = (kH - 2 * kPad) * h.mass[b] / peak;
      std::snprintf(buf, sizeof buf,
                    "<rect x=\"%.2f\" y=\"%.2f\" width=\"%.2f\" height=\"%.2f\" fill=\"%s\" "
                    "fill-opacity=\"0.5\"/>\n",
                    kPad + bw * static_cast<double>(b), kH - kPad - height, bw, height, color);
      out += buf;
    }
  };
  bars(dist.negative, "#d62728");
  bars(dist.positive, "#1f77b4");
  std::snprintf(buf, sizeof buf,
                "<line x1=\"%.0f\" y1=\"%.0f\" x2=\"%.0f\" y2=\"%.0f\" stroke=\"black\"/>\n", kPad,
                kH - kPad, kW - kPad, kH - kPad);
  out += buf;
  for (double tick : {-1.0, -0.5, 0.0, 0.5, 1.0}) {
    std::snprintf(buf, sizeof buf,
                  "<text x=\"%.2f\" y=\"%.0f\" font-family=\"sans-serif\" font-size=\"11\" "
                  "text-anchor=\"middle\">%.1f</text>\n",
                  kPad + (tick + 1.0) / 2.0 * (kW - 2 * kPad), kH - kPad + 16, tick);
    out += buf;
  }
  out += "<text x=\"" + std::to_string(static_cast<int>(kW - kPad - 150)) +
         "\" y=\"20\" font-family=\"sans-serif\" font-size=\"12\" fill=\"#1f77b4\">positive</text>\n";
  out += "<text x=\"" + std::to_string(static_cast<int>(kW - kPad - 80)) +
         "\" y=\"20\" font-family=\"sans-serif\" font-size=\"12\" fill=\"#d62728\">negative</text>\n";
  out += "</svg>\n";
  return out;
}

std::string sim_csv(std::span<const SimReport> reports) {
  std::string out = "model_id,role_id,sim\n";
  for (const auto& r : reports) {
    for (const auto& [role, v] : r.per_role) out += r.model_id + "," + role + "," + format_double(v) + "\n";
    out += r.model_id + ",ALL," + format_double(r.aggregate) + "\n";
  }
  return out;
}

std::string dist_csv(std::span<const DistReport> reports) {
  std::string out = "model_id,role_id,dist,excluded_pairs\n";
  for (const auto& r : reports) {
    for (const auto& [role, v] : r.per_role) out += r.model_id + "," + role + "," + format_double(v) + ",\n";
    out += r.model_id + ",ALL," + format_double(r.aggregate) + "," + std::to_string(r.excluded_pairs) + "\n";
  }
  return out;
}

std::string rank_csv(const RankTables& tables) {
  std::string out = "table,model_id,role_id,rank,candidates,top\n";
  for (const auto& a : tables.assigned) {
    std::string top;
    for (const auto& [role, score] : a.top) {
      if (!top.empty()) top += ";";
      top += role + "=" + format_double(score);
    }
    out += "assigned," + a.model_id + "," + a.role_id + "," + format_double(a.rank) + "," +
           std::to_string(a.candidates) + "," + top + "\n";
  }
  for (const auto& m : tables.models) {
    for (const auto& [role, r] : m.per_role) out += "model," + m.model_id + "," + role + "," + format_double(r) + ",,\n";
    out += "model," + m.model_id + ",ALL," + format_double(m.mean_rank) + ",,\n";
  }
  return out;
}

}  // namespace convsv
