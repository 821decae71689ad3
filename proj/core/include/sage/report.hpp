#pragma once

#include <map>
#include <string>
#include <vector>

#include "sage/agent.hpp"
#include "sage/metrics.hpp"

namespace sage {

enum class NarrativeKind { kTemplate, kLlm };

/// How per-point explanations are produced. The llm kind talks to a
/// chat-completion style JSON endpoint (credential from SAGE_LLM_API_KEY)
/// and falls back to the template on any failure; the template kind is a
/// pure function of the metric fields.
struct NarrativeBackend {
  NarrativeKind kind = NarrativeKind::kTemplate;
  std::string endpoint;
  std::string model_name;
  int timeout_seconds = 30;
  int max_retries = 2;
};

struct ReportDocument {
  std::string markdown;
  std::string html;  // filled when format is html
  std::vector<std::string> attachments;  // file names the document links
};

/// One-paragraph explanation of a single audit point. Only step, auroc,
/// aupr, and tier feed the text (template and llm scaffold alike).
std::string narrative(const MetricRecord& record, RiskTier tier,
                      const NarrativeBackend& backend);

/// The deterministic template text, also used as the llm fallback.
std::string template_narrative(const MetricRecord& record, RiskTier tier);

/// The fixed scaffold sent as the single user message to an llm backend.
std::string llm_prompt_scaffold(const MetricRecord& record, RiskTier tier);

/// Assembles the document: overview header, one metrics row and one
/// narrative block per point, delta summary, attachment links. format is
/// "markdown" or "html" (html additionally renders the markdown).
ReportDocument render_report(const AuditRun& run, const std::string& format);

/// Minimal CommonMark-subset renderer (headings, tables, lists, bold,
/// links) used for the html format.
std::string markdown_to_html(const std::string& markdown);

/// Writes pllr_before_after.csv and delta_pllr.csv into run.config.out_dir;
/// returns the two paths. All three maps must share one id set.
std::vector<std::string> export_plot_data(
    const AuditRun& run, const std::map<std::string, double>& before,
    const std::map<std::string, double>& after,
    const std::map<std::string, int>& labels);

}  // namespace sage
