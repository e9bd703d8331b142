#include <algorithm>
#include <cstdio>
#include <sstream>

#include "convsv/cli/cli.hpp"
#include "convsv/common/error.hpp"

namespace convsv::cli {
namespace fs = std::filesystem;
namespace {

using Row = std::vector<std::string>;

// Data rows of a CSV written by this tool: comment lines and the header are
// dropped. Fields never contain commas.
std::vector<Row> read_csv(const fs::path& p) {
  std::istringstream in(read_file(p));
  std::vector<Row> rows;
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (header) {
      header = false;
      continue;
    }
    Row row;
    std::string field;
    std::istringstream ls(line);
    while (std::getline(ls, field, ',')) row.push_back(field);
    if (!line.empty() && line.back() == ',') row.emplace_back();
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string two_dp(const std::string& v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", std::stod(v));
  return buf;
}

std::optional<Provenance> usable(const fs::path& dir) {
  if (fs::exists(dir / "STALE")) return std::nullopt;
  return read_provenance(dir);
}

std::string strip_comment(std::string md) {
  if (md.starts_with("<!--")) md.erase(0, md.find('\n') + 1);
  return md;
}

}  // namespace

std::string emit_report(const fs::path& run_dir, const fs::path& out_dir) {
  const fs::path eval_dir = run_dir / "eval";
  const fs::path rp_dir = run_dir / "roleplay";
  const auto eval = usable(eval_dir);
  const auto rp = usable(rp_dir);
  if (!eval && !rp) {
    throw Error(ErrorKind::kMissing, "report: no eval or roleplay artifacts under " + run_dir.string());
  }
  if (eval && rp &&
      (eval->config_hash != rp->config_hash || eval->corpus_hash != rp->corpus_hash || eval->seed != rp->seed)) {
    throw Error(ErrorKind::kMismatch, "report: eval and roleplay artifacts come from different runs");
  }
  const auto& prov = eval ? *eval : *rp;
  fs::create_directories(out_dir);
  auto link = [&](const fs::path& target) {
    return fs::relative(target, fs::absolute(out_dir)).generic_string();
  };

  std::string md = "<!-- " + provenance_line(Provenance{"report", prov.config_hash, prov.corpus_hash, prov.seed, ""}) +
                   " -->\n# Run report\n\n";
  if (eval && rp) md += "Sections: [speaker verification](#speaker-verification), [role-play](#role-play).\n\n";

  if (eval) {
    md += "## Speaker verification\n\n";
    md += strip_comment(read_file(eval_dir / "report.md")) + "\n";
    md += "Raw values: [report.csv](" + link(fs::absolute(eval_dir / "report.csv")) + "), [rounds.csv](" +
          link(fs::absolute(eval_dir / "rounds.csv")) + "), [scores.jsonl](" +
          link(fs::absolute(eval_dir / "scores.jsonl")) + ").\n\n";
    if (fs::exists(eval_dir / "sweep.csv")) {
      md += "### AUC by utterances per set (round 0, test pairs)\n\n| Utterances | Pairs | AUC |\n|---|---|---|\n";
      for (const auto& r : read_csv(eval_dir / "sweep.csv")) {
        const auto range = r[1] == "inf" ? r[0] + "+" : r[0] + "-" + std::to_string(std::stoul(r[1]) - 1);
        md += "| " + range + " | " + r[2] + " | " + (r[5].empty() ? "absent" : two_dp(std::to_string(100 * std::stod(r[5])))) + " |\n";
      }
      md += "\nSource: [sweep.csv](" + link(fs::absolute(eval_dir / "sweep.csv")) + ").\n\n";
    }
  }

  if (rp) {
    md += "## Role-play\n\n| Model | Sim | Dist | Mean rank |\n|---|---|---|---|\n";
    std::map<std::string, std::string> sim;
    std::map<std::string, std::string> dist;
    std::map<std::string, std::string> rank;
    std::vector<std::string> models;
    for (const auto& r : read_csv(rp_dir / "sim.csv")) {
      if (r[1] != "ALL") continue;
      sim[r[0]] = two_dp(r[2]);
      if (std::find(models.begin(), models.end(), r[0]) == models.end()) models.push_back(r[0]);
    }
    for (const auto& r : read_csv(rp_dir / "dist.csv")) {
      if (r[1] == "ALL") dist[r[0]] = two_dp(r[2]);
    }
    for (const auto& r : read_csv(rp_dir / "rank.csv")) {
      if (r[0] == "model" && r[2] == "ALL") rank[r[1]] = two_dp(r[3]);
    }
    for (const auto& m : models) {
      md += "| " + m + " | " + sim[m] + " | " + (dist.contains(m) ? dist[m] : "n/a") + " | " +
            (rank.contains(m) ? rank[m] : "n/a") + " |\n";
    }
    md += "\nSim and Dist are x100. Raw values: [sim.csv](" + link(fs::absolute(rp_dir / "sim.csv")) +
          "), [dist.csv](" + link(fs::absolute(rp_dir / "dist.csv")) + "), [rank.csv](" +
          link(fs::absolute(rp_dir / "rank.csv")) + ").\n\n";
    std::vector<fs::path> svgs;
    for (const auto& e : fs::directory_iterator(rp_dir)) {
      if (e.path().extension() == ".svg") svgs.push_back(e.path());
    }
    std::sort(svgs.begin(), svgs.end());
    if (!svgs.empty()) md += "### Score distributions\n\n";
    for (const auto& s : svgs) {
      md += "![" + s.stem().string() + "](" + link(fs::absolute(s)) + ")\n";
    }
  }
  write_file_atomic(out_dir / "report.md", md);
  return md;
}

}  // namespace convsv::cli
