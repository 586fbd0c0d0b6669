//! Evaluation tables as CSV and ROC / DET plots as SVG.

use std::fmt::Write as _;

use crate::metrics::{EnsembleEvaluation, RocCurve};

/// Per-class counts and accuracy metrics.
pub fn accuracy_table_csv(eval: &EnsembleEvaluation) -> String {
    let mut s = String::from("class,tp,fp,fn,tn,accuracy,precision,recall,f1\n");
    for c in &eval.classes {
        let m = &c.prf1;
        let _ = writeln!(
            s,
            "{},{},{},{},{},{:.4},{:.4},{:.4},{:.4}",
            c.class,
            c.counts.tp,
            c.counts.fp,
            c.counts.fn_,
            c.counts.tn,
            m.accuracy.value,
            m.precision.value,
            m.recall.value,
            m.f1.value
        );
    }
    let _ = writeln!(s, "ocon,,,,,{:.4},,,", eval.ocon_accuracy);
    s
}

/// Per-class AUC and error rates.
pub fn roc_det_table_csv(eval: &EnsembleEvaluation) -> String {
    let mut s = String::from("class,auc,er,fdr,for,npv\n");
    for c in &eval.classes {
        let r = &c.rates;
        let auc = c.auc.map(|a| format!("{a:.4}")).unwrap_or_default();
        let _ = writeln!(
            s,
            "{},{},{:.4},{:.4},{:.4},{:.4}",
            c.class, auc, r.er.value, r.fdr.value, r.for_.value, r.npv.value
        );
    }
    s
}

const PALETTE: [&str; 12] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
    "#393b79", "#637939",
];

fn svg_plot(title: &str, x_label: &str, y_label: &str, series: &[(String, Vec<(f64, f64)>)]) -> String {
    let (w, h, m) = (520.0, 420.0, 50.0);
    let pw = w - 2.0 * m - 90.0;
    let ph = h - 2.0 * m;
    let px = |x: f64| m + x * pw;
    let py = |y: f64| h - m - y * ph;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{title}</text>"#, m + pw / 2.0);
    let _ = writeln!(
        s,
        r#"<rect x="{m}" y="{m}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    for i in 0..=4 {
        let t = i as f64 / 4.0;
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{t:.2}</text>"#, px(t), h - m + 15.0);
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{t:.2}</text>"#, m - 5.0, py(t) + 4.0);
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{x_label}</text>"#, m + pw / 2.0, h - 12.0);
    let _ = writeln!(
        s,
        r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">{y_label}</text>"#,
        m + ph / 2.0,
        m + ph / 2.0
    );
    for (i, (name, pts)) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let path: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y))).collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            path.join(" ")
        );
        let ly = m + 14.0 * i as f64 + 8.0;
        let lx = m + pw + 12.0;
        let _ = writeln!(s, r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#, lx + 16.0);
        let _ = writeln!(s, r#"<text x="{}" y="{}">{name}</text>"#, lx + 20.0, ly + 4.0);
    }
    s.push_str("</svg>\n");
    s
}

fn curves(eval: &EnsembleEvaluation, map: impl Fn(&RocCurve) -> Vec<(f64, f64)>) -> Vec<(String, Vec<(f64, f64)>)> {
    eval.classes
        .iter()
        .filter_map(|c| c.roc.as_ref().map(|r| (c.class.clone(), map(r))))
        .collect()
}

pub fn roc_svg(eval: &EnsembleEvaluation) -> String {
    let series = curves(eval, |r| r.points.iter().map(|p| (p.fpr, p.tpr)).collect());
    svg_plot("ROC", "false positive rate", "true positive rate", &series)
}

pub fn det_svg(eval: &EnsembleEvaluation) -> String {
    let series = curves(eval, |r| r.points.iter().map(|p| (p.fpr, 1.0 - p.tpr)).collect());
    svg_plot("DET", "false positive rate", "false negative rate", &series)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{det_err_rates, prf1, roc_auc, ClassEvaluation, ConfusionCounts};

    fn eval() -> EnsembleEvaluation {
        let counts = ConfusionCounts::new(133, 6, 1, 126);
        let (roc, auc) = roc_auc(&[0.9, 0.2, 0.7], &[true, false, true]).unwrap();
        EnsembleEvaluation {
            classes: vec![ClassEvaluation {
                class: "ae".into(),
                counts,
                prf1: prf1(&counts),
                rates: det_err_rates(&counts),
                auc: Some(auc),
                roc: Some(roc),
            }],
            ocon_accuracy: 0.9,
        }
    }

    #[test]
    fn tables() {
        let e = eval();
        let t = accuracy_table_csv(&e);
        assert!(t.lines().nth(1).unwrap().starts_with("ae,133,6,1,126,0.9737,0.9568,0.9925,0.9744"));
        let r = roc_det_table_csv(&e);
        assert_eq!(r.lines().nth(1).unwrap(), "ae,1.0000,0.0263,0.0432,0.0079,0.9921");
    }

    #[test]
    fn svgs_are_well_formed() {
        let e = eval();
        for s in [roc_svg(&e), det_svg(&e)] {
            assert!(s.starts_with("<svg") && s.trim_end().ends_with("</svg>"));
            assert_eq!(s.matches("<polyline").count(), 1);
        }
    }
}
