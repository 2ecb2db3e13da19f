//! Standalone SVG line plots and PNG heatmaps from a run directory.

use crate::error::{Error, Result};
use crate::grid::ScalarField;
use crate::io::{self, Table};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

pub struct Series<'a> {
    pub name: &'a str,
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
}

const W: f64 = 640.0;
const H: f64 = 420.0;
const PAD: f64 = 60.0;
const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

fn axis_map(vals: impl Iterator<Item = f64>, log: bool) -> (f64, f64) {
    let (lo, hi) = vals
        .filter(|v| v.is_finite() && (!log || *v > 0.0))
        .map(|v| if log { v.log10() } else { v })
        .fold((f64::MAX, f64::MIN), |(a, b), v| (a.min(v), b.max(v)));
    if lo > hi {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

/// Line plot with optional logarithmic axes. Non-positive values are
/// dropped on a log axis.
pub fn line_plot_svg(
    title: &str,
    xlabel: &str,
    series: &[Series],
    log_x: bool,
    log_y: bool,
) -> String {
    let tx = |v: f64| if log_x { v.log10() } else { v };
    let ty = |v: f64| if log_y { v.log10() } else { v };
    let (x0, x1) = axis_map(series.iter().flat_map(|s| s.xs.iter().copied()), log_x);
    let (y0, y1) = axis_map(series.iter().flat_map(|s| s.ys.iter().copied()), log_y);
    let px = |v: f64| PAD + (tx(v) - x0) / (x1 - x0) * (W - 2.0 * PAD);
    let py = |v: f64| H - PAD - (ty(v) - y0) / (y1 - y0) * (H - 2.0 * PAD);
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" font-family=\"sans-serif\" font-size=\"12\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">{title}</text>\n\
         <text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{xlabel}</text>\n\
         <rect x=\"{PAD}\" y=\"{PAD}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>\n",
        W / 2.0,
        W / 2.0,
        H - 15.0,
        W - 2.0 * PAD,
        H - 2.0 * PAD
    );
    for (k, (lo, hi)) in [(x0, x1), (y0, y1)].into_iter().enumerate() {
        let log = if k == 0 { log_x } else { log_y };
        for i in 0..=4 {
            let v = lo + (hi - lo) * i as f64 / 4.0;
            let label = if log {
                format!("1e{v:.1}")
            } else {
                format!("{v:.3e}")
            };
            let f = i as f64 / 4.0;
            let _ = if k == 0 {
                writeln!(
                    s,
                    "<text x=\"{:.1}\" y=\"{}\" text-anchor=\"middle\">{label}</text>",
                    PAD + f * (W - 2.0 * PAD),
                    H - PAD + 16.0
                )
            } else {
                writeln!(
                    s,
                    "<text x=\"{}\" y=\"{:.1}\" text-anchor=\"end\">{label}</text>",
                    PAD - 4.0,
                    H - PAD - f * (H - 2.0 * PAD) + 4.0
                )
            };
        }
    }
    if log_y {
        let _ = writeln!(s, "<text x=\"14\" y=\"{}\" transform=\"rotate(-90 14 {})\" text-anchor=\"middle\">log scale</text>", H / 2.0, H / 2.0);
    }
    for (i, se) in series.iter().enumerate() {
        let pts: Vec<String> = se
            .xs
            .iter()
            .zip(&se.ys)
            .filter(|(x, y)| {
                x.is_finite() && y.is_finite() && (!log_x || **x > 0.0) && (!log_y || **y > 0.0)
            })
            .map(|(x, y)| format!("{:.2},{:.2}", px(*x), py(*y)))
            .collect();
        let c = COLORS[i % COLORS.len()];
        let _ = writeln!(
            s,
            "<polyline fill=\"none\" stroke=\"{c}\" stroke-width=\"1.8\" points=\"{}\"/>",
            pts.join(" ")
        );
        let _ = writeln!(
            s,
            "<text x=\"{}\" y=\"{}\" fill=\"{c}\">{}</text>",
            W - PAD - 150.0,
            PAD + 16.0 * (i as f64 + 1.0),
            se.name
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Blue-white-red heatmap of `f` over `[-1, 1]`, one pixel block per cell,
/// with `y` pointing up.
pub fn heatmap_png(f: &ScalarField, path: &Path, scale: u32) -> Result<()> {
    let g = f.grid;
    let (w, h) = (g.nx as u32 * scale, g.ny as u32 * scale);
    let img = image::RgbImage::from_fn(w, h, |x, y| {
        let (i, j) = ((x / scale) as usize, g.ny - 1 - (y / scale) as usize);
        let v = f.at(i, j).clamp(-1.0, 1.0);
        let a = (255.0 * (1.0 - v.abs())) as u8;
        if v >= 0.0 {
            image::Rgb([255, a, a])
        } else {
            image::Rgb([a, a, 255])
        }
    });
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    img.save(path)
        .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))
}

fn svg(dir: &Path, name: &str, body: String, out: &mut Vec<PathBuf>) -> Result<()> {
    let p = dir.join(name);
    io::write_atomic(&p, body.as_bytes())?;
    out.push(p);
    Ok(())
}

fn col(t: &Table, name: &str) -> Result<Vec<f64>> {
    t.column(name)
        .ok_or_else(|| Error::MissingInput(format!("column {name}")))
}

/// Render every plot whose input exists in `dir`; returns the written paths.
pub fn emit_plots(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = vec![];
    if let Ok(t) = Table::read(&dir.join("history.csv")) {
        let it = col(&t, "iter")?;
        let series = [
            Series {
                name: "J",
                xs: it.clone(),
                ys: col(&t, "J")?,
            },
            Series {
                name: "projected gradient",
                xs: it,
                ys: col(&t, "grad_residual")?,
            },
        ];
        svg(
            dir,
            "cost_history.svg",
            line_plot_svg("Cost history", "iteration", &series, false, true),
            &mut out,
        )?;
    }
    if let Ok(t) = Table::read(&dir.join("diagnostics.csv")) {
        let ts = col(&t, "t")?;
        let series = [
            Series {
                name: "kinetic + mixing",
                xs: ts.clone(),
                ys: col(&t, "total_energy")?,
            },
            Series {
                name: "mixing",
                xs: ts,
                ys: col(&t, "mixing_energy")?,
            },
        ];
        svg(
            dir,
            "energy.svg",
            line_plot_svg("Energy", "t", &series, false, false),
            &mut out,
        )?;
    }
    if let Ok(t) = Table::read(&dir.join("gradcheck.csv")) {
        let series = [Series {
            name: "relative error",
            xs: col(&t, "direction")?,
            ys: col(&t, "rel_error")?,
        }];
        svg(
            dir,
            "gradcheck.svg",
            line_plot_svg("Gradient check", "direction", &series, false, true),
            &mut out,
        )?;
    }
    if let Ok(t) = Table::read(&dir.join("taylor.csv")) {
        let series = [Series {
            name: "remainder",
            xs: col(&t, "eps")?,
            ys: col(&t, "remainder")?,
        }];
        svg(
            dir,
            "taylor.svg",
            line_plot_svg("Taylor remainder", "eps", &series, true, true),
            &mut out,
        )?;
    }
    let snaps = dir.join("snapshots");
    if snaps.is_dir() {
        let mut files: Vec<PathBuf> = std::fs::read_dir(&snaps)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| {
                p.file_name()
                    .and_then(|n| n.to_str())
                    .is_some_and(|n| n.starts_with("phi_") && n.ends_with(".txt"))
            })
            .collect();
        files.sort();
        for f in files {
            let (phi, _) = io::read_scalar(&f)?;
            let p = dir
                .join("frames")
                .join(f.with_extension("png").file_name().expect("file name"));
            heatmap_png(&phi, &p, (256 / phi.grid.nx.max(1)).max(1) as u32)?;
            out.push(p);
        }
    }
    if out.is_empty() {
        return Err(Error::MissingInput(format!(
            "no plottable inputs in {}",
            dir.display()
        )));
    }
    Ok(out)
}
