//! SVG figures for the report. Every function maps data to a complete SVG
//! document.

use kpt_diagnose::background::{FpAreaHistogram, Heatmap, AREA_LABELS};
use kpt_diagnose::benchmarks::BenchmarkReport;
use kpt_diagnose::correction::{KindImpact, ProgressiveResult};
use kpt_diagnose::scoring::{HistogramPair, ScoreHistograms};
use kpt_diagnose::taxonomy::{ErrorBreakdown, ErrorKind, KindCounts};

use crate::svg::{Svg, PALETTE};

const PIE_KINDS: [ErrorKind; 5] = [
    ErrorKind::Good,
    ErrorKind::Jitter,
    ErrorKind::Inversion,
    ErrorKind::Swap,
    ErrorKind::Miss,
];

fn kind_color(kind: ErrorKind) -> &'static str {
    match kind {
        ErrorKind::Good => PALETTE[2],
        ErrorKind::Jitter => PALETTE[0],
        ErrorKind::Inversion => PALETTE[1],
        ErrorKind::Swap => PALETTE[4],
        ErrorKind::Miss => PALETTE[3],
        ErrorKind::Unclassifiable => PALETTE[7],
    }
}

struct Frame {
    x: f64,
    y: f64,
    w: f64,
    h: f64,
}

impl Frame {
    fn px(&self, u: f64) -> f64 {
        self.x + u * self.w
    }

    fn py(&self, v: f64) -> f64 {
        self.y + self.h - v * self.h
    }

    fn axes(&self, svg: &mut Svg, xlabel: &str, ylabel: &str) {
        svg.line(
            self.x,
            self.y + self.h,
            self.x + self.w,
            self.y + self.h,
            "black",
        );
        svg.line(self.x, self.y, self.x, self.y + self.h, "black");
        for i in 0..=5 {
            let t = i as f64 / 5.0;
            let label = format!("{t:.1}");
            svg.line(
                self.px(t),
                self.y + self.h,
                self.px(t),
                self.y + self.h + 4.0,
                "black",
            );
            svg.text(self.px(t), self.y + self.h + 16.0, 10.0, "middle", &label);
            svg.line(self.x - 4.0, self.py(t), self.x, self.py(t), "black");
            svg.text(self.x - 6.0, self.py(t) + 3.0, 10.0, "end", &label);
        }
        svg.text(
            self.x + self.w / 2.0,
            self.y + self.h + 32.0,
            12.0,
            "middle",
            xlabel,
        );
        svg.vertical_text(self.x - 36.0, self.y + self.h / 2.0, 12.0, ylabel);
    }
}

/// Stacked precision-recall areas, one labeled curve per stage including
/// the original curve.
pub fn progressive_pr(result: &ProgressiveResult) -> String {
    let mut svg = Svg::new(640.0, 420.0);
    let f = Frame {
        x: 60.0,
        y: 30.0,
        w: 380.0,
        h: 320.0,
    };
    svg.text(
        320.0,
        18.0,
        14.0,
        "middle",
        &format!("Progressive PR at OKS {:.2}", result.threshold),
    );
    let curves: Vec<Vec<(f64, f64)>> = result
        .stages
        .iter()
        .map(|s| {
            s.result
                .pr_samples
                .iter()
                .map(|p| (f.px(p.recall), f.py(p.precision)))
                .collect()
        })
        .collect();
    // filled band between each curve and the one below it, latest on top
    // so earlier stages stay visible
    for (i, curve) in curves.iter().enumerate().rev() {
        let mut band = curve.clone();
        match i.checked_sub(1).map(|j| &curves[j]) {
            Some(below) => band.extend(below.iter().rev()),
            None => {
                band.push((f.px(1.0), f.py(0.0)));
                band.push((f.px(0.0), f.py(0.0)));
            }
        }
        svg.polygon(&band, PALETTE[i % PALETTE.len()], 0.35);
    }
    for (i, (stage, curve)) in result.stages.iter().zip(&curves).enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        svg.raw(&format!(
            r#"<g class="curve" data-label="{}">"#,
            crate::svg::escape(&stage.label)
        ));
        svg.polyline(curve, color);
        svg.raw("</g>");
        let ly = 50.0 + 18.0 * i as f64;
        svg.rect(460.0, ly - 9.0, 12.0, 12.0, color);
        svg.text(
            478.0,
            ly + 1.0,
            11.0,
            "start",
            &format!("[{:.3}] {}", stage.result.ap, stage.label),
        );
    }
    f.axes(&mut svg, "recall", "precision");
    svg.finish()
}

/// Share of each localization outcome. With no classified keypoints the pie
/// is a single Good sector.
pub fn error_pie(counts: &KindCounts, title: &str) -> String {
    let mut svg = Svg::new(420.0, 300.0);
    svg.text(210.0, 18.0, 14.0, "middle", title);
    let total = counts.classified();
    let parts: Vec<(ErrorKind, f64)> = if total == 0 {
        vec![(ErrorKind::Good, 1.0)]
    } else {
        PIE_KINDS
            .iter()
            .map(|&k| (k, counts.get(k) as f64 / total as f64))
            .filter(|&(_, share)| share > 0.0)
            .collect()
    };
    let (cx, cy, r) = (140.0, 160.0, 110.0);
    let mut angle = 0.0;
    for (i, &(kind, share)) in parts.iter().enumerate() {
        let end = if i + 1 == parts.len() {
            std::f64::consts::TAU
        } else {
            angle + share * std::f64::consts::TAU
        };
        svg.raw(&format!(
            r#"<g class="sector" data-kind="{}">"#,
            kind.name()
        ));
        svg.sector(cx, cy, r, angle, end, kind_color(kind));
        svg.raw("</g>");
        angle = end;
    }
    for (i, &(kind, share)) in parts.iter().enumerate() {
        let ly = 70.0 + 20.0 * i as f64;
        svg.rect(280.0, ly - 10.0, 12.0, 12.0, kind_color(kind));
        svg.text(
            298.0,
            ly,
            12.0,
            "start",
            &format!("{} {:.1}%", kind.name(), 100.0 * share),
        );
    }
    svg.finish()
}

/// Horizontal stacked bars of the error mix of every keypoint and group.
pub fn per_part_bars(breakdown: &ErrorBreakdown) -> String {
    let rows: Vec<_> = breakdown
        .by_keypoint
        .iter()
        .chain(&breakdown.by_group)
        .collect();
    let height = 70.0 + 20.0 * rows.len().max(1) as f64;
    let mut svg = Svg::new(640.0, height);
    svg.text(320.0, 18.0, 14.0, "middle", "Localization errors by part");
    let (x0, w) = (140.0, 380.0);
    for (i, row) in rows.iter().enumerate() {
        let y = 34.0 + 20.0 * i as f64;
        svg.text(x0 - 6.0, y + 11.0, 11.0, "end", &row.name);
        let total = row.counts.classified().max(1) as f64;
        let mut x = x0;
        for kind in PIE_KINDS {
            let bw = w * row.counts.get(kind) as f64 / total;
            svg.rect(x, y, bw, 14.0, kind_color(kind));
            x += bw;
        }
    }
    for (i, kind) in PIE_KINDS.iter().enumerate() {
        let ly = 44.0 + 18.0 * i as f64;
        svg.rect(535.0, ly - 10.0, 12.0, 12.0, kind_color(*kind));
        svg.text(552.0, ly, 11.0, "start", kind.name());
    }
    svg.finish()
}

/// AP improvement at each impact threshold when one kind is corrected.
pub fn separate_impact(impacts: &[KindImpact]) -> String {
    let thresholds: Vec<f64> = impacts
        .first()
        .map(|k| k.ap_delta.iter().map(|&(t, _)| t).collect())
        .unwrap_or_default();
    let mut svg = Svg::new(480.0, 300.0);
    svg.text(
        240.0,
        18.0,
        14.0,
        "middle",
        "AP gain from correcting one error kind",
    );
    let f = Frame {
        x: 60.0,
        y: 40.0,
        w: 300.0,
        h: 200.0,
    };
    let max = impacts
        .iter()
        .flat_map(|k| k.ap_delta.iter().map(|&(_, d)| d))
        .fold(0.0f64, f64::max)
        .max(1e-9);
    let group_w = f.w / impacts.len().max(1) as f64;
    let bar_w = group_w * 0.8 / thresholds.len().max(1) as f64;
    for (g, impact) in impacts.iter().enumerate() {
        for (b, &(_, delta)) in impact.ap_delta.iter().enumerate() {
            let h = f.h * delta.max(0.0) / max;
            let x = f.x + g as f64 * group_w + group_w * 0.1 + b as f64 * bar_w;
            svg.rect(x, f.y + f.h - h, bar_w, h, PALETTE[b % PALETTE.len()]);
        }
        svg.text(
            f.x + (g as f64 + 0.5) * group_w,
            f.y + f.h + 16.0,
            11.0,
            "middle",
            impact.kind.name(),
        );
    }
    svg.line(f.x, f.y + f.h, f.x + f.w, f.y + f.h, "black");
    svg.text(f.x - 6.0, f.y + 4.0, 10.0, "end", &format!("{max:.3}"));
    for (b, t) in thresholds.iter().enumerate() {
        let ly = 60.0 + 18.0 * b as f64;
        svg.rect(380.0, ly - 10.0, 12.0, 12.0, PALETTE[b % PALETTE.len()]);
        svg.text(398.0, ly, 11.0, "start", &format!("OKS {t:.2}"));
    }
    svg.finish()
}

fn histogram_panel(svg: &mut Svg, f: &Frame, edges: &[f64], pair: &HistogramPair, title: &str) {
    let norm = |v: &[usize]| -> Vec<f64> {
        let total: usize = v.iter().sum();
        v.iter()
            .map(|&c| {
                if total == 0 {
                    0.0
                } else {
                    c as f64 / total as f64
                }
            })
            .collect()
    };
    let best = norm(&pair.best_match);
    let other = norm(&pair.other);
    let peak = best
        .iter()
        .chain(&other)
        .fold(0.0f64, |a, &b| a.max(b))
        .max(1e-9);
    let (lo, hi) = (edges[0], edges[edges.len() - 1]);
    let span = (hi - lo).max(1e-12);
    for (series, color) in [(&best, PALETTE[0]), (&other, PALETTE[3])] {
        for (i, &v) in series.iter().enumerate() {
            let x0 = f.px((edges[i] - lo) / span);
            let x1 = f.px((edges[i + 1] - lo) / span);
            let h = f.h * v / peak;
            svg.raw(r#"<g fill-opacity="0.5">"#);
            svg.rect(x0, f.y + f.h - h, x1 - x0, h, color);
            svg.raw("</g>");
        }
    }
    svg.line(f.x, f.y + f.h, f.x + f.w, f.y + f.h, "black");
    svg.text(f.x, f.y + f.h + 14.0, 10.0, "middle", &format!("{lo:.2}"));
    svg.text(
        f.x + f.w,
        f.y + f.h + 14.0,
        10.0,
        "middle",
        &format!("{hi:.2}"),
    );
    svg.text(
        f.x + f.w / 2.0,
        f.y - 6.0,
        12.0,
        "middle",
        &format!("{title} (overlap {:.3})", pair.overlap),
    );
}

/// Score distributions of best-matching and other detections, for the
/// original and the optimal scores.
pub fn score_histograms(h: &ScoreHistograms) -> String {
    let mut svg = Svg::new(640.0, 280.0);
    let left = Frame {
        x: 30.0,
        y: 40.0,
        w: 260.0,
        h: 190.0,
    };
    let right = Frame { x: 350.0, ..left };
    histogram_panel(&mut svg, &left, &h.edges, &h.original, "original scores");
    histogram_panel(&mut svg, &right, &h.edges, &h.optimal, "optimal scores");
    svg.rect(30.0, 258.0, 12.0, 12.0, PALETTE[0]);
    svg.text(48.0, 268.0, 11.0, "start", "best match");
    svg.rect(140.0, 258.0, 12.0, 12.0, PALETTE[3]);
    svg.text(158.0, 268.0, 11.0, "start", "other");
    svg.finish()
}

/// Counts of high-confidence background false positives per area bin.
pub fn fp_area_histogram(h: &FpAreaHistogram) -> String {
    let mut svg = Svg::new(480.0, 300.0);
    let cutoff = h
        .score_cutoff
        .map_or_else(|| "none".to_string(), |c| format!("{c:.3}"));
    svg.text(
        240.0,
        18.0,
        14.0,
        "middle",
        &format!("High-confidence false positives (score >= {cutoff})"),
    );
    let f = Frame {
        x: 50.0,
        y: 40.0,
        w: 400.0,
        h: 200.0,
    };
    let peak = h.counts.iter().copied().max().unwrap_or(0).max(1) as f64;
    let bw = f.w / AREA_LABELS.len() as f64;
    for (i, (label, &count)) in AREA_LABELS.iter().zip(&h.counts).enumerate() {
        let bh = f.h * count as f64 / peak;
        let x = f.x + i as f64 * bw;
        svg.rect(x + bw * 0.1, f.y + f.h - bh, bw * 0.8, bh, PALETTE[0]);
        svg.text(
            x + bw / 2.0,
            f.y + f.h - bh - 4.0,
            10.0,
            "middle",
            &count.to_string(),
        );
        svg.text(x + bw / 2.0, f.y + f.h + 16.0, 11.0, "middle", label);
    }
    svg.line(f.x, f.y + f.h, f.x + f.w, f.y + f.h, "black");
    svg.finish()
}

/// Grayscale grid of where missed ground truths lie in their images.
pub fn fn_heatmap(h: &Heatmap) -> String {
    let cell = (320.0 / h.rows.max(h.cols).max(1) as f64).floor().max(1.0);
    let mut svg = Svg::new(40.0 + cell * h.cols as f64, 60.0 + cell * h.rows as f64);
    svg.text(
        20.0,
        18.0,
        14.0,
        "start",
        &format!("False negative locations ({:.0} total)", h.total()),
    );
    for r in 0..h.rows {
        for c in 0..h.cols {
            let v = h.normalized[r * h.cols + c].clamp(0.0, 1.0);
            let shade = (255.0 * (1.0 - v)).round() as u8;
            svg.rect(
                20.0 + c as f64 * cell,
                30.0 + r as f64 * cell,
                cell,
                cell,
                &format!("#{shade:02x}{shade:02x}{shade:02x}"),
            );
        }
    }
    svg.finish()
}

/// cocoAP of every benchmark cell: the occlusion grid (visibility rows by
/// overlap columns) followed by the size row.
pub fn benchmark_grid(report: &BenchmarkReport) -> String {
    let ap = |id: &str| {
        report
            .cells
            .iter()
            .find(|c| c.id == id)
            .and_then(|c| c.coco_ap())
    };
    let mut vis: Vec<String> = Vec::new();
    let mut ovl: Vec<String> = Vec::new();
    for c in &report.partition.occlusion {
        let (v, o) = (c.visibility.label(), c.overlap.label());
        if !vis.contains(&v) {
            vis.push(v);
        }
        if !ovl.contains(&o) {
            ovl.push(o);
        }
    }
    let (cw, ch) = (90.0, 40.0);
    let size_y = 70.0 + ch * vis.len() as f64 + 40.0;
    let width = (160.0 + cw * ovl.len().max(report.partition.size.len()) as f64).max(400.0);
    let mut svg = Svg::new(width, size_y + ch + 60.0);
    svg.text(width / 2.0, 18.0, 14.0, "middle", "cocoAP per benchmark");
    let fill = |v: Option<f64>| match v {
        Some(a) => {
            let g = (255.0 * (1.0 - 0.7 * a.clamp(0.0, 1.0))).round() as u8;
            format!("#{g:02x}{:02x}ff", g)
        }
        None => "#eeeeee".to_string(),
    };
    let text = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), |a| format!("{a:.3}"));
    svg.text(120.0, 52.0, 11.0, "end", "visible \\ overlaps");
    for (j, o) in ovl.iter().enumerate() {
        svg.text(140.0 + cw * (j as f64 + 0.5), 52.0, 11.0, "middle", o);
    }
    for c in &report.partition.occlusion {
        let i = vis
            .iter()
            .position(|v| *v == c.visibility.label())
            .unwrap_or(0);
        let j = ovl
            .iter()
            .position(|o| *o == c.overlap.label())
            .unwrap_or(0);
        let (x, y) = (140.0 + cw * j as f64, 60.0 + ch * i as f64);
        svg.rect(x, y, cw - 2.0, ch - 2.0, &fill(ap(&c.id)));
        svg.text(
            x + cw / 2.0,
            y + ch / 2.0 + 4.0,
            11.0,
            "middle",
            &text(ap(&c.id)),
        );
        if j == 0 {
            svg.text(
                120.0,
                y + ch / 2.0 + 4.0,
                11.0,
                "end",
                &c.visibility.label(),
            );
        }
    }
    svg.text(120.0, size_y - 8.0, 11.0, "end", "size");
    for (j, c) in report.partition.size.iter().enumerate() {
        let x = 140.0 + cw * j as f64;
        svg.text(x + cw / 2.0, size_y - 8.0, 11.0, "middle", &c.range.name);
        svg.rect(x, size_y, cw - 2.0, ch - 2.0, &fill(ap(&c.id)));
        svg.text(
            x + cw / 2.0,
            size_y + ch / 2.0 + 4.0,
            11.0,
            "middle",
            &text(ap(&c.id)),
        );
    }
    svg.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use kpt_diagnose::correction::StageResult;
    use kpt_diagnose::matching::{EvalResult, PrPoint};

    fn stage(label: &str, ap: f64) -> StageResult {
        StageResult {
            stage: None,
            label: label.into(),
            result: EvalResult {
                threshold: 0.75,
                tp: 1,
                fp: 0,
                fn_count: 0,
                pr_samples: (0..=10)
                    .map(|i| PrPoint {
                        recall: i as f64 / 10.0,
                        precision: ap,
                    })
                    .collect(),
                ap,
                recall: 1.0,
            },
            ap_gain: 0.0,
        }
    }

    #[test]
    fn one_labeled_curve_per_stage() {
        let r = ProgressiveResult {
            threshold: 0.75,
            stages: vec![
                stage("Original", 0.5),
                stage("Miss", 0.6),
                stage("Jitter", 0.7),
            ],
        };
        let svg = progressive_pr(&r);
        assert_eq!(svg.matches(r#"class="curve""#).count(), 3);
        assert!(svg.contains(r#"data-label="Jitter""#));
        assert_eq!(svg, progressive_pr(&r));
    }

    #[test]
    fn empty_pie_is_all_good() {
        let svg = error_pie(&KindCounts::default(), "errors");
        assert_eq!(svg.matches(r#"class="sector""#).count(), 1);
        assert!(svg.contains(r#"data-kind="good""#));
        assert!(svg.contains("<circle"));
        assert!(svg.contains("good 100.0%"));
    }

    #[test]
    fn pie_sectors_follow_counts() {
        let counts = KindCounts {
            good: 3,
            jitter: 1,
            unclassifiable: 5,
            ..KindCounts::default()
        };
        let svg = error_pie(&counts, "errors");
        assert_eq!(svg.matches(r#"class="sector""#).count(), 2);
        assert!(svg.contains("good 75.0%") && svg.contains("jitter 25.0%"));
    }

    #[test]
    fn heatmap_shades() {
        let h = Heatmap {
            rows: 1,
            cols: 2,
            counts: vec![2.0, 0.0],
            normalized: vec![1.0, 0.0],
            warnings: vec![],
        };
        let svg = fn_heatmap(&h);
        assert!(svg.contains("#000000") && svg.contains("#ffffff"));
    }
}
