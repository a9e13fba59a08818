//! Plot-data emission: whitespace-separated text files with `#` header
//! comments, renderable by any plotting tool (gnuplot, matplotlib, ...).
//! Rendering itself is out of scope.

use std::path::Path;

use crate::error::Result;
use crate::interventions::StudyRow;
use crate::population::Bin;
use crate::textio::fmt_float;

/// First line of every plot-data file; reruns must be byte-identical
/// modulo this header.
pub const VERSION_HEADER: &str = "# ctxlab v0.1.0";

fn write_dat(path: &Path, comments: &[String], lines: &[String]) -> Result<()> {
    let mut out = String::from(VERSION_HEADER);
    out.push('\n');
    for c in comments {
        out.push_str("# ");
        out.push_str(c);
        out.push('\n');
    }
    for l in lines {
        out.push_str(l);
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// OOD1-vs-OOD2 accuracy scatter with the population correlation noted in
/// the header.
pub fn write_tradeoff_scatter(
    path: &Path,
    scatter: &[(f64, f64)],
    r: f64,
    p: f64,
) -> Result<()> {
    let comments = vec![
        "tradeoff scatter: columns = ood1_acc ood2_acc".to_string(),
        format!("pearson_r = {}", fmt_float(r)),
        format!("p_value = {}", fmt_float(p)),
    ];
    let lines: Vec<String> = scatter
        .iter()
        .map(|(x, y)| format!("{} {}", fmt_float(*x), fmt_float(*y)))
        .collect();
    write_dat(path, &comments, &lines)
}

/// Binned FBPS-vs-accuracy curve: columns = bin center, mean, std, count.
/// Empty bins appear as blank lines (gnuplot-style gaps).
pub fn write_fbps_curve(path: &Path, bins: &[Option<Bin>]) -> Result<()> {
    let comments = vec![
        "binned curve: columns = fbps_kl_out_bin_center mean_avg_ood std_avg_ood count"
            .to_string(),
    ];
    let lines: Vec<String> = bins
        .iter()
        .map(|bin| match bin {
            Some(b) => format!(
                "{} {} {} {}",
                fmt_float(b.x_center),
                fmt_float(b.mean),
                fmt_float(b.std),
                b.count
            ),
            None => String::new(),
        })
        .collect();
    write_dat(path, &comments, &lines)
}

/// Mixing-weight curve: columns = alpha1, mean OOD1 accuracy, mean OOD2
/// accuracy over seeds.
pub fn write_mixing_curve(path: &Path, curve: &[(f64, f64, f64)]) -> Result<()> {
    let comments =
        vec!["mixing-weight curve: columns = alpha1 mean_ood1_acc mean_ood2_acc".to_string()];
    let lines: Vec<String> = curve
        .iter()
        .map(|(a, o1, o2)| format!("{} {} {}", fmt_float(*a), fmt_float(*o1), fmt_float(*o2)))
        .collect();
    write_dat(path, &comments, &lines)
}

/// Per-boost-factor mean accuracy deltas from intervention study rows,
/// sorted by g: `(g, mean delta OOD1, mean delta OOD2)`.
pub fn boost_curve_points(rows: &[StudyRow]) -> Vec<(f64, f64, f64)> {
    let mut gs: Vec<f64> = Vec::new();
    for r in rows {
        if !gs.iter().any(|&g| (g - r.g).abs() < 1e-15) {
            gs.push(r.g);
        }
    }
    gs.sort_by(|a, b| a.partial_cmp(b).expect("finite boost factors"));
    gs.into_iter()
        .map(|g| {
            let mean_delta = |metric: &str| {
                let deltas: Vec<f64> = rows
                    .iter()
                    .filter(|r| (r.g - g).abs() < 1e-15 && r.metric == metric)
                    .map(|r| r.delta())
                    .collect();
                if deltas.is_empty() {
                    0.0
                } else {
                    deltas.iter().sum::<f64>() / deltas.len() as f64
                }
            };
            (g, mean_delta("ood1_acc"), mean_delta("ood2_acc"))
        })
        .collect()
}

/// Boost-factor curve: columns = g, mean delta OOD1, mean delta OOD2.
pub fn write_boost_curve(path: &Path, points: &[(f64, f64, f64)]) -> Result<()> {
    let mut comments =
        vec!["boost-factor curve: columns = g mean_delta_ood1 mean_delta_ood2".to_string()];
    if points.is_empty() {
        comments.push("no boost study provided".to_string());
    }
    let lines: Vec<String> = points
        .iter()
        .map(|(g, d1, d2)| format!("{} {} {}", fmt_float(*g), fmt_float(*d1), fmt_float(*d2)))
        .collect();
    write_dat(path, &comments, &lines)
}
