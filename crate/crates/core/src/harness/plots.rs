use std::collections::BTreeSet;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use plotters::prelude::*;

use super::agent::Phase;
use super::metrics::{csv_header, MetricsRow};

/// One run's metrics, labelled for the chart legend.
#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub rows: Vec<MetricsRow>,
}

fn field_names(line: &str) -> anyhow::Result<BTreeSet<String>> {
    let v: serde_json::Value = serde_json::from_str(line)?;
    let Some(obj) = v.as_object() else { bail!("metrics line is not an object") };
    Ok(obj.keys().cloned().collect())
}

/// Reads `metrics.jsonl` from each directory. Every line of every run must
/// carry the same fields as the first line of the first run.
pub fn load_runs(dirs: &[PathBuf]) -> anyhow::Result<Vec<Series>> {
    if dirs.is_empty() {
        bail!("export-plots needs at least one run directory");
    }
    let mut schema: Option<(BTreeSet<String>, PathBuf)> = None;
    let mut out = Vec::new();
    for dir in dirs {
        let path = dir.join("metrics.jsonl");
        let f = File::open(&path).with_context(|| format!("opening {}", path.display()))?;
        let mut rows = Vec::new();
        for (i, line) in BufReader::new(f).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let names = field_names(&line).with_context(|| format!("{} line {}", path.display(), i + 1))?;
            match &schema {
                None => schema = Some((names, dir.clone())),
                Some((want, first)) if *want != names => bail!(
                    "schema mismatch: {} line {} has fields {:?}, {} has {:?}",
                    path.display(),
                    i + 1,
                    names,
                    first.display(),
                    want
                ),
                Some(_) => {}
            }
            let row: MetricsRow =
                serde_json::from_str(&line).with_context(|| format!("{} line {}", path.display(), i + 1))?;
            rows.push(row);
        }
        let label = match rows.first() {
            Some(r) => format!("{} seed {}", r.agent, r.seed),
            None => dir.file_name().map_or_else(|| dir.display().to_string(), |n| n.to_string_lossy().into_owned()),
        };
        out.push(Series { label, rows });
    }
    Ok(out)
}

fn chart(path: &Path, title: &str, y_label: &str, series: &[(String, Vec<(f64, f64)>)]) -> anyhow::Result<()> {
    let x_max = series.iter().flat_map(|(_, p)| p.iter().map(|q| q.0)).fold(1.0, f64::max);
    let y_max = series.iter().flat_map(|(_, p)| p.iter().map(|q| q.1)).fold(1.0, f64::max) * 1.05;
    let root = SVGBackend::new(path, (800, 480)).into_drawing_area();
    root.fill(&WHITE).map_err(|e| anyhow::anyhow!("{e:?}"))?;
    let mut c = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 22))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(56)
        .build_cartesian_2d(0.0..x_max, 0.0..y_max)
        .map_err(|e| anyhow::anyhow!("{e:?}"))?;
    c.configure_mesh()
        .x_desc("ground steps")
        .y_desc(y_label)
        .draw()
        .map_err(|e| anyhow::anyhow!("{e:?}"))?;
    for (i, (label, points)) in series.iter().enumerate() {
        let color = Palette99::pick(i).to_rgba();
        c.draw_series(LineSeries::new(points.iter().copied(), color.stroke_width(2)))
            .map_err(|e| anyhow::anyhow!("{e:?}"))?
            .label(label.as_str())
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 16, y)], color.stroke_width(2)));
    }
    c.configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()
        .map_err(|e| anyhow::anyhow!("{e:?}"))?;
    root.present().map_err(|e| anyhow::anyhow!("{e:?}"))?;
    Ok(())
}

/// Writes `metrics.csv` (every row of every run, prefixed by the run
/// label) and two SVG charts overlaying the runs: evaluation reward and
/// rooms discovered against training steps.
pub fn export_plots(dirs: &[PathBuf], out: &Path) -> anyhow::Result<Vec<Series>> {
    let runs = load_runs(dirs)?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let mut w = BufWriter::new(File::create(out.join("metrics.csv"))?);
    writeln!(w, "run,{}", csv_header())?;
    for s in &runs {
        for r in &s.rows {
            writeln!(w, "{},{}", s.label, r.csv_line())?;
        }
    }
    w.flush()?;
    let eval = |f: fn(&MetricsRow) -> f64| -> Vec<(String, Vec<(f64, f64)>)> {
        runs.iter()
            .map(|s| {
                let pts = s
                    .rows
                    .iter()
                    .filter(|r| r.phase == Phase::Eval)
                    .map(|r| (r.ground_steps as f64, f(r)))
                    .collect();
                (s.label.clone(), pts)
            })
            .collect()
    };
    chart(&out.join("reward.svg"), "Evaluation reward", "mean episode reward", &eval(|r| r.episode_reward_mean))?;
    chart(&out.join("rooms.svg"), "Rooms discovered", "rooms", &eval(|r| r.rooms_discovered as f64))?;
    Ok(runs)
}
