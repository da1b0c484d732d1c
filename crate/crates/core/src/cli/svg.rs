//! Plot of one prediction window: observed tracks solid, ground truth
//! dashed, predictions dotted.

use std::fmt::Write as _;

use crate::dataio::SequenceBatch;
use crate::tensor::Tensor;

const SIZE: f64 = 600.0;
const MARGIN: f64 = 30.0;
const COLORS: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn track(t: &Tensor, i: usize) -> Vec<[f64; 2]> {
    let (steps, base) = (t.shape()[1], i * t.shape()[1] * 2);
    (0..steps)
        .map(|s| [t.data()[base + 2 * s], t.data()[base + 2 * s + 1]])
        .collect()
}

/// `pred` is `[n × t_pred × 2]` in world coordinates.
pub fn render(seq: &SequenceBatch, pred: &Tensor) -> String {
    let live: Vec<usize> = (0..seq.n()).filter(|&i| seq.node_mask[i]).collect();
    let tracks: Vec<[Vec<[f64; 2]>; 3]> = live
        .iter()
        .map(|&i| [track(&seq.positions_obs, i), track(&seq.positions_gt, i), track(pred, i)])
        .collect();
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in tracks.iter().flatten().flatten() {
        for d in 0..2 {
            lo[d] = lo[d].min(p[d]);
            hi[d] = hi[d].max(p[d]);
        }
    }
    if !lo[0].is_finite() {
        (lo, hi) = ([0.0; 2], [1.0; 2]);
    }
    let span = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(1e-6);
    let scale = (SIZE - 2.0 * MARGIN) / span;
    let map = |p: &[f64; 2]| (MARGIN + (p[0] - lo[0]) * scale, SIZE - MARGIN - (p[1] - lo[1]) * scale);

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
    );
    let _ = writeln!(out, "<title>{} frame {}</title>", escape(&seq.scene_name), seq.start_frame);
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for (k, (&i, parts)) in live.iter().zip(&tracks).enumerate() {
        let color = COLORS[k % COLORS.len()];
        let _ = writeln!(out, r#"<g id="ped-{}" stroke="{color}" fill="none" stroke-width="2">"#, seq.ped_ids[i]);
        // the future tracks start from the last observed point
        let last = parts[0].last().copied();
        for (j, (kind, dash)) in [("observed", None), ("ground-truth", Some("6 4")), ("predicted", Some("1 4"))]
            .into_iter()
            .enumerate()
        {
            let pts: Vec<String> = last
                .filter(|_| j > 0)
                .iter()
                .chain(&parts[j])
                .map(|p| {
                    let (x, y) = map(p);
                    format!("{x:.2},{y:.2}")
                })
                .collect();
            let dash = dash.map(|d| format!(r#" stroke-dasharray="{d}""#)).unwrap_or_default();
            let _ = writeln!(out, r#"<polyline class="{kind}"{dash} points="{}"/>"#, pts.join(" "));
        }
        let _ = writeln!(out, "</g>");
    }
    out.push_str("</svg>\n");
    out
}
