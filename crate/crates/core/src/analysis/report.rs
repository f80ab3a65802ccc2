use std::fmt::Write;

use super::AnalysisReport;
use crate::stats::{rational, Method};

/// Plain-text rendering of a report: the statistics followed by the full
/// ranked anecdote list.
pub fn render_text(report: &AnalysisReport) -> String {
    let r = &report.result;
    let mut out = String::new();
    let _ = writeln!(out, "Rank-sum analysis {}", report.analysis_id);
    let _ = writeln!(
        out,
        "Session {} (version {}, finalized by {})",
        report.audit_ref.session_id,
        report.audit_ref.session_version,
        report.audit_ref.chair_id.as_deref().unwrap_or("unknown"),
    );
    let _ = writeln!(out);
    let _ = writeln!(out, "  n_A = {}, n_B = {}", r.n_a, r.n_b);
    let _ = writeln!(
        out,
        "  R_A = {}, R_B = {}",
        rational::display(&r.rank_sum_a),
        rational::display(&r.rank_sum_b)
    );
    let _ = writeln!(
        out,
        "  U_A = {}, U_B = {}, U = {}",
        rational::display(&r.u_a),
        rational::display(&r.u_b),
        rational::display(&r.u_min)
    );
    let method = match r.method {
        Method::Exact => "exact".to_string(),
        Method::NormalApprox => format!(
            "normal approximation{}{}",
            if r.ties_present { ", tie-corrected" } else { "" },
            if r.continuity_correction { ", continuity-corrected" } else { "" }
        ),
    };
    let _ = writeln!(out, "  method: {method}, alternative: {:?}", r.alternative);
    if let Some(z) = r.z_score {
        let _ = writeln!(out, "  z = {z:.4}");
    }
    let _ = writeln!(out, "  p = {:.4} ({})", r.p_value, report.significance.note);
    let _ = writeln!(
        out,
        "  relative effect: p̂_A = {:.3}, p̂_B = {:.3}",
        r.relative_effect_a, r.relative_effect_b
    );
    let _ = writeln!(out, "  {}", report.direction);
    let _ = writeln!(out);
    let _ = writeln!(out, "Ranked anecdotes (most meaningful first):");
    for item in &report.ranked_list {
        let group = item.group.map(|g| g.to_string()).unwrap_or_else(|| "-".into());
        let _ = writeln!(
            out,
            "  {:>5}  [{}] ({}) {}",
            item.rank.to_string(),
            group,
            item.domain,
            item.text
        );
    }
    out
}
