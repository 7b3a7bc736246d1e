//! Writes analysis products as CSV and SVG pairs.

use std::fs;
use std::path::{Path, PathBuf};

use super::svg::{axes, color, sequential, Scale, Svg, GREY};
use super::{
    cluster_performance_with, cumulative_ranks, heatmap_matrix, pareto_frontier, Analysis, AnalysisConfig,
    Clustering, Heatmap, ParetoPoint, RankCurve,
};
use crate::error::{Error, Result};
use crate::harness::{ResultTable, MISSING};
use crate::seeding::format_real;

const WIDTH: f64 = 820.0;
const HEIGHT: f64 = 520.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 190.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 60.0;

/// Computes the requested analyses and writes `<basename>.csv` and
/// `<basename>.svg` for each into `out_dir`. Returns the written paths.
pub fn render(t: &ResultTable, which: &[Analysis], out_dir: &Path, cfg: &AnalysisConfig) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut written = Vec::new();
    for a in which {
        let (csv, svg) = match a {
            Analysis::Rank => {
                let c = cumulative_ranks(t)?;
                (rank_csv(&c)?, rank_svg(&c))
            }
            Analysis::Heatmap => {
                let h = heatmap_matrix(t, cfg.heatmap_floor, cfg.heatmap_ceil)?;
                (heatmap_csv(&h)?, heatmap_svg(&h))
            }
            Analysis::Pareto => {
                let p = pareto_frontier(t, &cfg.score)?;
                (pareto_csv(&p)?, pareto_svg(&p))
            }
            Analysis::Cluster => {
                let c = cluster_performance_with(t, &cfg.cluster)?;
                (cluster_csv(&c)?, cluster_svg(&c))
            }
        };
        for (ext, body) in [("csv", csv), ("svg", svg)] {
            let path = out_dir.join(format!("{}.{ext}", a.basename()));
            fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
            written.push(path);
        }
    }
    Ok(written)
}

fn csv_string(header: &[&str], rows: Vec<Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Ingest(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| MISSING.to_string(), format_real)
}

/// Header `method,auc,r,proportion`; one line per method and rank.
fn rank_csv(curves: &[RankCurve]) -> Result<String> {
    let rows = curves
        .iter()
        .flat_map(|c| {
            c.proportions
                .iter()
                .enumerate()
                .map(|(i, p)| vec![c.method.clone(), format_real(c.auc), (i + 1).to_string(), format_real(*p)])
        })
        .collect();
    csv_string(&["method", "auc", "r", "proportion"], rows)
}

/// Header `problem,method,column_order,raw,display`; absent cells hold `NA`.
fn heatmap_csv(h: &Heatmap) -> Result<String> {
    let mut rows = Vec::new();
    for (i, p) in h.problems.iter().enumerate() {
        for (j, m) in h.methods.iter().enumerate() {
            rows.push(vec![p.clone(), m.clone(), (j + 1).to_string(), opt(h.raw[i][j]), opt(h.display[i][j])]);
        }
    }
    csv_string(&["problem", "method", "column_order", "raw", "display"], rows)
}

/// Header `method,avg_rel_crps,avg_rel_runtime,dominated`.
fn pareto_csv(points: &[ParetoPoint]) -> Result<String> {
    let rows = points
        .iter()
        .map(|p| {
            vec![
                p.method.clone(),
                format_real(p.avg_rel_crps),
                format_real(p.avg_rel_runtime),
                p.dominated.to_string(),
            ]
        })
        .collect();
    csv_string(&["method", "avg_rel_crps", "avg_rel_runtime", "dominated"], rows)
}

/// Header `item,axis,x,y,label`; label `-1` is noise.
fn cluster_csv(c: &Clustering) -> Result<String> {
    let rows = c
        .items
        .iter()
        .zip(&c.coords)
        .zip(&c.labels)
        .map(|((item, xy), l)| {
            vec![item.clone(), c.axis.to_string(), format_real(xy[0]), format_real(xy[1]), l.to_string()]
        })
        .collect();
    csv_string(&["item", "axis", "x", "y", "label"], rows)
}

fn plot_scales(x: (f64, f64), y: (f64, f64)) -> (Scale, Scale) {
    (
        Scale::new(x.0, x.1, LEFT, WIDTH - RIGHT),
        Scale::new(y.0, y.1, HEIGHT - BOTTOM, TOP),
    )
}

fn legend(svg: &mut Svg, entries: &[(String, &str)]) {
    let x = WIDTH - RIGHT + 15.0;
    for (i, (name, c)) in entries.iter().enumerate() {
        let y = TOP + 10.0 + 16.0 * i as f64;
        svg.rect(x, y - 9.0, 10.0, 10.0, c, None);
        svg.text(x + 15.0, y, name, "start", 11.0);
    }
}

fn linear_ticks(s: &Scale, n: usize) -> Vec<(f64, String)> {
    s.ticks(n).into_iter().map(|v| (v, format!("{v:.2}"))).collect()
}

fn rank_svg(curves: &[RankCurve]) -> String {
    let k = curves.iter().map(|c| c.proportions.len()).max().unwrap_or(1);
    let mut svg = Svg::new(WIDTH, HEIGHT);
    let (xs, ys) = plot_scales((1.0, k as f64), (0.0, 1.0));
    let xticks: Vec<(f64, String)> = (1..=k).map(|r| (r as f64, r.to_string())).collect();
    axes(&mut svg, &xs, &ys, &xticks, &linear_ticks(&ys, 5), ("rank r", "proportion in top r"));
    let mut entries = Vec::new();
    for (i, c) in curves.iter().enumerate() {
        let mut pts = vec![(xs.map(1.0), ys.map(c.proportions[0]))];
        for r in 1..c.proportions.len() {
            let x = xs.map(r as f64 + 1.0);
            pts.push((x, ys.map(c.proportions[r - 1])));
            pts.push((x, ys.map(c.proportions[r])));
        }
        svg.polyline(&pts, color(i), false);
        entries.push((format!("{} ({:.3})", c.method, c.auc), color(i)));
    }
    legend(&mut svg, &entries);
    svg.finish()
}

fn heatmap_svg(h: &Heatmap) -> String {
    let cell = 26.0;
    let (left, top) = (140.0, 120.0);
    let width = left + cell * h.methods.len() as f64 + 120.0;
    let height = top + cell * h.problems.len() as f64 + 30.0;
    let mut svg = Svg::new(width, height);
    let (lf, lc) = (h.floor.log10(), h.ceil.log10());
    for (j, m) in h.methods.iter().enumerate() {
        svg.rotated_text(left + cell * (j as f64 + 0.6), top - 6.0, m, -60.0, 11.0);
    }
    for (i, p) in h.problems.iter().enumerate() {
        let y = top + cell * i as f64;
        svg.text(left - 6.0, y + cell * 0.65, p, "end", 11.0);
        for (j, m) in h.methods.iter().enumerate() {
            let x = left + cell * j as f64;
            match (h.display[i][j], h.raw[i][j]) {
                (Some(d), Some(r)) => {
                    let fill = sequential((d.log10() - lf) / (lc - lf));
                    svg.rect(x, y, cell - 1.0, cell - 1.0, &fill, Some(&format!("{p} / {m}: {}", format_real(r))));
                }
                _ => svg.rect(x, y, cell - 1.0, cell - 1.0, GREY, Some(&format!("{p} / {m}: absent"))),
            }
        }
    }
    let bar_x = left + cell * h.methods.len() as f64 + 30.0;
    for k in 0..20 {
        let t = 1.0 - k as f64 / 19.0;
        svg.rect(bar_x, top + 8.0 * k as f64, 14.0, 8.0, &sequential(t), None);
    }
    svg.text(bar_x + 20.0, top + 8.0, &format_real(h.ceil), "start", 10.0);
    svg.text(bar_x + 20.0, top + 160.0, &format_real(h.floor), "start", 10.0);
    svg.finish()
}

fn pareto_svg(points: &[ParetoPoint]) -> String {
    let lx: Vec<f64> = points.iter().map(|p| p.avg_rel_runtime.log10()).collect();
    let x_hi = lx.iter().copied().fold(0.0f64, f64::max).ceil().max(1.0);
    let y_hi = points.iter().map(|p| p.avg_rel_crps).fold(1.0f64, f64::max);
    let mut svg = Svg::new(WIDTH, HEIGHT);
    let (xs, ys) = plot_scales((0.0, x_hi), (1.0, y_hi * 1.05));
    let xticks: Vec<(f64, String)> = (0..=x_hi as i32).map(|e| (e as f64, format_real(10f64.powi(e)))).collect();
    axes(
        &mut svg,
        &xs,
        &ys,
        &xticks,
        &linear_ticks(&ys, 5),
        ("average relative runtime (log scale)", "average relative CRPS"),
    );
    let mut front: Vec<(f64, f64)> = points
        .iter()
        .zip(&lx)
        .filter(|(p, _)| !p.dominated)
        .map(|(p, x)| (xs.map(*x), ys.map(p.avg_rel_crps)))
        .collect();
    front.sort_by(|a, b| a.0.total_cmp(&b.0));
    if front.len() > 1 {
        svg.polyline(&front, "black", true);
    }
    for (i, (p, x)) in points.iter().zip(&lx).enumerate() {
        let (px, py) = (xs.map(*x), ys.map(p.avg_rel_crps));
        svg.circle(px, py, 5.0, color(i), p.dominated);
        svg.text(px + 7.0, py - 6.0, &p.method, "start", 10.0);
    }
    svg.finish()
}

fn cluster_svg(c: &Clustering) -> String {
    let xr = c.coords.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |a, p| (a.0.min(p[0]), a.1.max(p[0])));
    let yr = c.coords.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |a, p| (a.0.min(p[1]), a.1.max(p[1])));
    let pad = |r: (f64, f64)| {
        let d = (r.1 - r.0).max(1e-6) * 0.1;
        (r.0 - d, r.1 + d)
    };
    let mut svg = Svg::new(WIDTH, HEIGHT);
    let (xs, ys) = plot_scales(pad(xr), pad(yr));
    axes(&mut svg, &xs, &ys, &linear_ticks(&xs, 4), &linear_ticks(&ys, 4), ("MDS 1", "MDS 2"));
    for ((item, xy), l) in c.items.iter().zip(&c.coords).zip(&c.labels) {
        let fill = if *l < 0 { GREY } else { color(*l as usize) };
        let (px, py) = (xs.map(xy[0]), ys.map(xy[1]));
        svg.circle(px, py, 5.0, fill, false);
        svg.text(px + 7.0, py - 6.0, item, "start", 10.0);
    }
    let mut ids: Vec<i32> = c.labels.clone();
    ids.sort_unstable();
    ids.dedup();
    let entries: Vec<(String, &str)> = ids
        .iter()
        .map(|l| {
            if *l < 0 {
                ("noise".to_string(), GREY)
            } else {
                (format!("cluster {l}"), color(*l as usize))
            }
        })
        .collect();
    legend(&mut svg, &entries);
    svg.finish()
}
