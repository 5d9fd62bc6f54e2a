//! Per-hop attention weight reports for a trained model, as plain text and
//! as an HTML heatmap with grayscale shading.

use crate::corpus::{Instance, Polarity};
use crate::model::{predict, ForwardTrace};

/// Attention weights of one instance, one row per context token and one
/// column per hop.
#[derive(Debug, Clone)]
pub struct AttentionReport {
    pub raw_text: String,
    pub aspect: String,
    pub gold: Polarity,
    pub predicted: Polarity,
    pub context_tokens: Vec<String>,
    /// weights[token][hop]
    pub weights: Vec<Vec<f64>>,
}

impl AttentionReport {
    pub fn hops(&self) -> usize {
        self.weights.first().map_or(0, Vec::len)
    }
}

/// Copy the per-hop weights out of a forward trace and attach the labels.
pub fn report(instance: &Instance, trace: &ForwardTrace) -> AttentionReport {
    let context_tokens: Vec<String> = instance
        .context_indices()
        .map(|i| instance.tokens[i].text.clone())
        .collect();
    let weights = (0..context_tokens.len())
        .map(|row| trace.hops.iter().map(|h| h.weights[row]).collect())
        .collect();
    AttentionReport {
        raw_text: instance.raw_text.clone(),
        aspect: instance.aspect_text(),
        gold: instance.label,
        predicted: predict(trace),
        context_tokens,
        weights,
    }
}

/// Aligned table with two-decimal weights.
pub fn render_text(report: &AttentionReport) -> String {
    let mut out = String::new();
    out.push_str(&format!("sentence:  {}\n", report.raw_text));
    out.push_str(&format!("aspect:    {}\n", report.aspect));
    out.push_str(&format!("gold:      {}\n", report.gold));
    out.push_str(&format!("predicted: {}\n", report.predicted));

    let width = report
        .context_tokens
        .iter()
        .map(String::len)
        .max()
        .unwrap_or(0)
        .max(8);
    out.push_str(&format!("{:<width$}", ""));
    for h in 1..=report.hops() {
        out.push_str(&format!(" {:>6}", format!("hop {h}")));
    }
    out.push('\n');
    for (token, row) in report.context_tokens.iter().zip(&report.weights) {
        out.push_str(&format!("{token:<width$}"));
        for w in row {
            out.push_str(&format!(" {w:>6.2}"));
        }
        out.push('\n');
    }
    out
}

/// HTML document with one table per report. Cell backgrounds map weight 0 to
/// white and weight 1 to black, linearly.
pub fn render_html(reports: &[AttentionReport]) -> String {
    let mut body = String::new();
    for report in reports {
        body.push_str(&format!(
            "<h2>{}</h2>\n<p>aspect: <b>{}</b> &middot; gold: {} &middot; predicted: {}</p>\n",
            escape(&report.raw_text),
            escape(&report.aspect),
            report.gold,
            report.predicted
        ));
        body.push_str("<table border=\"1\" cellspacing=\"0\">\n<tr><th></th>");
        for h in 1..=report.hops() {
            body.push_str(&format!("<th>hop {h}</th>"));
        }
        body.push_str("</tr>\n");
        for (token, row) in report.context_tokens.iter().zip(&report.weights) {
            body.push_str(&format!("<tr><td>{}</td>", escape(token)));
            for w in row {
                let shade = (255.0 * (1.0 - w.clamp(0.0, 1.0))).round() as u8;
                let text = if *w > 0.5 { "#ffffff" } else { "#000000" };
                body.push_str(&format!(
                    "<td style=\"background-color:#{shade:02x}{shade:02x}{shade:02x};color:{text}\">{w:.2}</td>"
                ));
            }
            body.push_str("</tr>\n");
        }
        body.push_str("</table>\n");
    }
    format!(
        "<!DOCTYPE html>\n<html>\n<head><meta charset=\"utf-8\"><title>attention weights</title></head>\n<body>\n{body}</body>\n</html>\n"
    )
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}
