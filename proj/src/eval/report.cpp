#include <algorithm>
#include <cstdio>

#include "convsv/common/jsonl.hpp"
#include "convsv/eval/eval.hpp"

namespace convsv {
namespace {

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

std::string report_csv(const MetricsReport& report) {
  std::string out = "exposure,level,metric,mean,std\n";
  for (const auto& [key, cell] : report.cells) {
    const std::pair<const char*, const MetricSummary*> rows[] = {
        {"auc", &cell.auc}, {"acc", &cell.accuracy}, {"f1", &cell.macro_f1}};
    for (const auto& [name, m] : rows) {
      out += std::string(to_string(key.first)) + "," + to_string(key.second) + "," + name + "," +
             format_double(m->mean) + "," + format_double(m->std) + "\n";
    }
  }
  return out;
}

std::string report_markdown(const MetricsReport& report) {
  std::vector<Level> levels;
  for (const auto& [key, cell] : report.cells) {
    if (std::find(levels.begin(), levels.end(), key.second) == levels.end()) levels.push_back(key.second);
  }
  std::sort(levels.begin(), levels.end());

  std::string out = "Scores are percentages, mean ± std over " + std::to_string(report.rounds) +
                    " round(s).\n\n| Exposure |";
  std::string rule = "|---|";
  for (Level l : levels) {
    for (const char* m : {"AUC", "ACC", "F1"}) {
      out += std::string(" ") + to_string(l) + " " + m + " |";
      rule += "---|";
    }
  }
  out += "\n" + rule + "\n";
  for (Exposure e : kTestExposures) {
    out += std::string("| ") + to_string(e) + " |";
    for (Level l : levels) {
      auto it = report.cells.find({e, l});
      for (int k = 0; k < 3; ++k) {
        if (it == report.cells.end()) {
          out += " n/a |";
          continue;
        }
        const auto& m = k == 0 ? it->second.auc : k == 1 ? it->second.accuracy : it->second.macro_f1;
        out += " " + fixed(100.0 * m.mean, 2) + " ± " + fixed(100.0 * m.std, 2) + " |";
      }
    }
    out += "\n";
  }
  if (!report.warnings.empty()) {
    out += "\nWarnings:\n\n";
    for (const auto& w : report.warnings) out += "- " + w + "\n";
  }
  return out;
}

std::string scores_jsonl(const MetricsReport& report) {
  std::string out;
  for (std::size_t r = 0; r < report.per_round.size(); ++r) {
    for (const auto& p : report.per_round[r].scores) {
      OrderedJson j;
      j["round"] = r;
      j["pair_id"] = p.pair_id;
      j["set_a"] = p.set_a;
      j["set_b"] = p.set_b;
      j["label"] = to_string(p.label);
      j["level"] = to_string(p.level);
      j["exposure"] = to_string(p.exposure);
      j["score"] = p.score;
      j["len_a"] = p.len_a;
      j["len_b"] = p.len_b;
      if (p.degenerate) j["degenerate"] = true;
      out += j.dump() + "\n";
    }
  }
  return out;
}

std::string sweep_csv(std::span<const SweepBucket> buckets) {
  std::string out = "lower,upper,pairs,positives,negatives,auc\n";
  for (const auto& b : buckets) {
    out += std::to_string(b.lower) + "," + (b.upper ? std::to_string(*b.upper) : "inf") + "," +
           std::to_string(b.pairs) + "," + std::to_string(b.positives) + "," +
           std::to_string(b.negatives) + "," + (b.auc ? format_double(*b.auc) : "") + "\n";
  }
  return out;
}

}  // namespace convsv
