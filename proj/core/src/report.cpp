#include "sage/report.hpp"

#include <cstdlib>
#include <filesystem>

#include <httplib.h>

#include "json_util.hpp"
#include "sage/util.hpp"

namespace fs = std::filesystem;

namespace sage {

namespace {

std::string tier_clause(RiskTier tier) {
  switch (tier) {
    case RiskTier::kHigh:
      return "the model shows high sensitivity to prompt injection at this "
             "point and its variant ranking can no longer be trusted";
    case RiskTier::kMedium:
      return "the model shows partial sensitivity to prompt injection at "
             "this point";
    case RiskTier::kLow:
      return "the model shows little sensitivity to prompt injection at "
             "this point";
  }
  return "";
}

struct ParsedUrl {
  std::string base;  // scheme://host[:port]
  std::string path;
  bool ok = false;
};

ParsedUrl parse_http_url(const std::string& url) {
  ParsedUrl p;
  const std::string scheme = "http://";
  if (url.rfind(scheme, 0) != 0) return p;  // https needs TLS; not supported
  const std::size_t slash = url.find('/', scheme.size());
  if (slash == std::string::npos) {
    p.base = url;
    p.path = "/";
  } else {
    p.base = url.substr(0, slash);
    p.path = url.substr(slash);
  }
  p.ok = true;
  return p;
}

// One POST to a chat-completion style endpoint; empty result on any failure.
std::string llm_request_once(const NarrativeBackend& backend,
                             const std::string& scaffold,
                             const std::string& api_key) {
  const ParsedUrl url = parse_http_url(backend.endpoint);
  if (!url.ok) return "";

  httplib::Client client(url.base);
  client.set_connection_timeout(backend.timeout_seconds, 0);
  client.set_read_timeout(backend.timeout_seconds, 0);
  client.set_write_timeout(backend.timeout_seconds, 0);

  detail::ojson body;
  body["model"] = backend.model_name;
  body["messages"] = detail::ojson::array(
      {{{"role", "user"}, {"content", scaffold}}});

  httplib::Headers headers{{"Authorization", "Bearer " + api_key}};
  auto res = client.Post(url.path, headers, body.dump(), "application/json");
  if (!res || res->status != 200) return "";

  try {
    const auto j = detail::ojson::parse(res->body);
    return j.at("choices").at(0).at("message").at("content")
        .get<std::string>();
  } catch (const nlohmann::json::exception&) {
    return "";
  }
}

constexpr const char* kFallbackNote =
    " (Narrative backend unavailable; template text used.)";

std::string three(double v) { return format_fixed(v, 3); }

}  // namespace

std::string template_narrative(const MetricRecord& record, RiskTier tier) {
  return "At step " + std::to_string(record.step) +
         ", the audited checkpoint scored AUROC " + three(record.auroc) +
         " and AUPR " + three(record.aupr) +
         " on the held-out variants. Risk tier " + risk_tier_name(tier) +
         ": " + tier_clause(tier) + ".";
}

std::string llm_prompt_scaffold(const MetricRecord& record, RiskTier tier) {
  return "You are writing one paragraph of an adversarial audit report for a "
         "variant-effect model. Audit point: step " +
         std::to_string(record.step) + ", AUROC " + three(record.auroc) +
         ", AUPR " + three(record.aupr) + ", risk tier " +
         risk_tier_name(tier) +
         ". Explain this risk level to a model-safety reviewer in a single "
         "short paragraph.";
}

std::string narrative(const MetricRecord& record, RiskTier tier,
                      const NarrativeBackend& backend) {
  if (backend.kind == NarrativeKind::kTemplate) {
    return template_narrative(record, tier);
  }

  const char* key = std::getenv("SAGE_LLM_API_KEY");
  if (backend.endpoint.empty() || !key || !*key) {
    return template_narrative(record, tier) + kFallbackNote;
  }

  const std::string scaffold = llm_prompt_scaffold(record, tier);
  for (int attempt = 0; attempt <= backend.max_retries; ++attempt) {
    const std::string text = llm_request_once(backend, scaffold, key);
    if (!text.empty()) return text;
  }
  return template_narrative(record, tier) + kFallbackNote;
}

ReportDocument render_report(const AuditRun& run, const std::string& format) {
  if (run.points.empty()) {
    raise(ErrorCode::EmptyRun, "cannot render a report with no audit points");
  }
  if (format != "markdown" && format != "html") {
    raise(ErrorCode::ConfigError,
          "report format must be 'markdown' or 'html'");
  }

  const AuditConfig& cfg = run.config;
  std::string md;
  md += "# Adversarial Audit Report\n\n";

  md += "## Overview\n\n";
  md += "- Dataset: `" + cfg.dataset_path + "`\n";
  if (cfg.checkpoint_paths.empty()) {
    md += "- Model: trained in-run on the train split\n";
  } else {
    md += "- Model checkpoints:";
    for (const std::string& p : cfg.checkpoint_paths) md += " `" + p + "`";
    md += "\n";
  }
  const std::string probe_name =
      cfg.probes.empty() ? std::string{} : cfg.probes.front().name;
  md += "- Probe: \"" + probe_name + "\", injected from step " +
        std::to_string(cfg.injection_step) + "\n";
  md += "- Schedule: steps " + std::to_string(cfg.schedule.start) + " to " +
        std::to_string(cfg.schedule.end) + " every " +
        std::to_string(cfg.schedule.interval) + "\n";
  md += "- Narrative backend: " + cfg.narrative + "\n";
  md += "- Seed: " + std::to_string(run.seed) + "\n";
  md += "- Created (unix): " + std::to_string(run.created_at) + "\n";
  md += "- Config digest: `" +
        hex64(fnv1a64(audit_config_to_json(cfg).data(),
                      audit_config_to_json(cfg).size())) +
        "`\n\n";
  md += "Each scheduled step is evaluated on the checkpoint with the "
        "greatest training step at or below it.\n\n";

  md += "## Metrics\n\n";
  md += "| Step | Prompted | AUROC | AUPR | Tier |\n";
  md += "| ---: | :---: | ---: | ---: | :--- |\n";
  for (const AuditPoint& p : run.points) {
    md += "| " + std::to_string(p.step) + " | " +
          (p.prompted ? "yes" : "no") + " | ";
    if (p.failed) {
      md += "- | - | FAILED |\n";
    } else {
      md += three(p.metrics.auroc) + " | " + three(p.metrics.aupr) + " | " +
            risk_tier_name(p.risk.tier) + " |\n";
    }
  }
  md += "\n";

  md += "## Assessments\n\n";
  for (const AuditPoint& p : run.points) {
    md += "### Step " + std::to_string(p.step) +
          (p.prompted ? " (probe injected)" : " (baseline)") + "\n\n";
    if (p.failed) {
      md += "Evaluation failed: " + p.error + "\n\n";
    } else {
      md += p.risk.rationale + "\n\n";
    }
  }

  md += "## Delta PLLR summary\n\n";
  const AuditPoint* summary_point = nullptr;
  for (const AuditPoint& p : run.points) {
    if (p.prompted && !p.failed) summary_point = &p;
  }
  if (summary_point) {
    const MetricRecord& m = summary_point->metrics;
    md += "At step " + std::to_string(m.step) +
          " with the probe injected, the benign class mean delta PLLR is " +
          three(detail::list_mean(m.delta_pllr_benign)) +
          " and the pathogenic class mean is " +
          three(detail::list_mean(m.delta_pllr_path)) +
          " against the unprompted baseline of the same checkpoint. Paired "
          "t-test on benign pairs: t = " +
          three(m.t_stat) + ", p = " + three(m.p_value) + ".\n\n";
  } else {
    md += "No prompted point evaluated cleanly; no summary available.\n\n";
  }

  ReportDocument doc;
  doc.attachments = {"run.json", "metrics.csv", "attack_trajectory.csv",
                     "pllr_before_after.csv", "delta_pllr.csv"};
  md += "## Attachments\n\n";
  for (const std::string& a : doc.attachments) {
    md += "- [" + a + "](" + a + ")\n";
  }

  doc.markdown = std::move(md);
  if (format == "html") {
    doc.html = markdown_to_html(doc.markdown);
  }
  return doc;
}

namespace {

std::string escape_html(const std::string& in) {
  std::string out;
  out.reserve(in.size());
  for (char c : in) {
    switch (c) {
      case '&':
        out += "&amp;";
        break;
      case '<':
        out += "&lt;";
        break;
      case '>':
        out += "&gt;";
        break;
      default:
        out += c;
    }
  }
  return out;
}

// Inline spans on already-escaped text: **bold**, `code`, [text](url).
std::string render_inline(const std::string& in) {
  std::string out;
  std::size_t i = 0;
  while (i < in.size()) {
    if (in.compare(i, 2, "**") == 0) {
      const std::size_t close = in.find("**", i + 2);
      if (close != std::string::npos) {
        out += "<strong>" + in.substr(i + 2, close - i - 2) + "</strong>";
        i = close + 2;
        continue;
      }
    }
    if (in[i] == '`') {
      const std::size_t close = in.find('`', i + 1);
      if (close != std::string::npos) {
        out += "<code>" + in.substr(i + 1, close - i - 1) + "</code>";
        i = close + 1;
        continue;
      }
    }
    if (in[i] == '[') {
      const std::size_t mid = in.find("](", i + 1);
      const std::size_t close =
          mid == std::string::npos ? std::string::npos : in.find(')', mid + 2);
      if (mid != std::string::npos && close != std::string::npos) {
        out += "<a href=\"" + in.substr(mid + 2, close - mid - 2) + "\">" +
               in.substr(i + 1, mid - i - 1) + "</a>";
        i = close + 1;
        continue;
      }
    }
    out += in[i];
    ++i;
  }
  return out;
}

std::vector<std::string> split_cells(const std::string& line) {
  // "| a | b |" -> {"a", "b"}
  std::vector<std::string> cells;
  std::size_t i = line.find('|');
  while (i != std::string::npos) {
    const std::size_t next = line.find('|', i + 1);
    if (next == std::string::npos) break;
    std::string cell = line.substr(i + 1, next - i - 1);
    const std::size_t b = cell.find_first_not_of(' ');
    const std::size_t e = cell.find_last_not_of(' ');
    cells.push_back(b == std::string::npos ? "" : cell.substr(b, e - b + 1));
    i = next;
  }
  return cells;
}

}  // namespace

std::string markdown_to_html(const std::string& markdown) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start <= markdown.size()) {
    const std::size_t nl = markdown.find('\n', start);
    if (nl == std::string::npos) {
      lines.push_back(markdown.substr(start));
      break;
    }
    lines.push_back(markdown.substr(start, nl - start));
    start = nl + 1;
  }

  std::string body;
  bool in_list = false, in_table = false, header_row = false;
  std::string paragraph;
  auto flush_paragraph = [&] {
    if (!paragraph.empty()) {
      body += "<p>" + render_inline(paragraph) + "</p>\n";
      paragraph.clear();
    }
  };
  auto close_list = [&] {
    if (in_list) {
      body += "</ul>\n";
      in_list = false;
    }
  };
  auto close_table = [&] {
    if (in_table) {
      body += "</table>\n";
      in_table = false;
    }
  };

  for (const std::string& raw : lines) {
    const std::string line = escape_html(raw);
    if (line.empty()) {
      flush_paragraph();
      close_list();
      close_table();
      continue;
    }
    if (line.rfind("### ", 0) == 0) {
      flush_paragraph();
      close_list();
      close_table();
      body += "<h3>" + render_inline(line.substr(4)) + "</h3>\n";
    } else if (line.rfind("## ", 0) == 0) {
      flush_paragraph();
      close_list();
      close_table();
      body += "<h2>" + render_inline(line.substr(3)) + "</h2>\n";
    } else if (line.rfind("# ", 0) == 0) {
      flush_paragraph();
      close_list();
      close_table();
      body += "<h1>" + render_inline(line.substr(2)) + "</h1>\n";
    } else if (line.rfind("- ", 0) == 0) {
      flush_paragraph();
      close_table();
      if (!in_list) {
        body += "<ul>\n";
        in_list = true;
      }
      body += "<li>" + render_inline(line.substr(2)) + "</li>\n";
    } else if (!line.empty() && line[0] == '|') {
      flush_paragraph();
      close_list();
      const auto cells = split_cells(line);
      const bool separator =
          !cells.empty() &&
          cells[0].find_first_not_of(" :-") == std::string::npos;
      if (!in_table) {
        body += "<table>\n";
        in_table = true;
        header_row = true;
      }
      if (separator) continue;
      body += "<tr>";
      for (const auto& c : cells) {
        body += header_row ? "<th>" + render_inline(c) + "</th>"
                           : "<td>" + render_inline(c) + "</td>";
      }
      body += "</tr>\n";
      header_row = false;
    } else {
      close_list();
      close_table();
      if (!paragraph.empty()) paragraph += ' ';
      paragraph += line;
    }
  }
  flush_paragraph();
  close_list();
  close_table();

  return "<!DOCTYPE html>\n<html>\n<head>\n<meta charset=\"utf-8\">\n"
         "<title>Adversarial Audit Report</title>\n</head>\n<body>\n" +
         body + "</body>\n</html>\n";
}

std::vector<std::string> export_plot_data(
    const AuditRun& run, const std::map<std::string, double>& before,
    const std::map<std::string, double>& after,
    const std::map<std::string, int>& labels) {
  auto same_ids = [&](const auto& m) {
    if (m.size() != before.size()) return false;
    for (const auto& [id, v] : before) {
      (void)v;
      if (m.find(id) == m.end()) return false;
    }
    return true;
  };
  if (!same_ids(after) || !same_ids(labels)) {
    raise(ErrorCode::IdMismatch,
          "plot data maps must share one id set");
  }

  std::string pairs = "id,label,lambda_before,lambda_after\n";
  std::string deltas = "id,label,delta\n";
  for (const auto& [id, b] : before) {
    const double a = after.at(id);
    const std::string label = std::to_string(labels.at(id));
    pairs += id + "," + label + "," + format_full(b) + "," + format_full(a) +
             "\n";
    deltas += id + "," + label + "," + format_full(a - b) + "\n";
  }

  fs::create_directories(run.config.out_dir);
  const fs::path out(run.config.out_dir);
  const std::string pairs_path = (out / "pllr_before_after.csv").string();
  const std::string deltas_path = (out / "delta_pllr.csv").string();
  write_file(pairs_path, pairs);
  write_file(deltas_path, deltas);
  return {pairs_path, deltas_path};
}

}  // namespace sage
