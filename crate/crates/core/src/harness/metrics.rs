use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::agent::Phase;

/// One line of `metrics.jsonl`. Field order is the CSV column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub agent: String,
    pub seed: u64,
    /// Training ground steps taken so far.
    pub ground_steps: u64,
    pub phase: Phase,
    /// Completed episodes in the window this row covers.
    pub episodes: u64,
    pub episode_reward_mean: f64,
    pub rooms_discovered: usize,
    pub abstract_states: usize,
    pub known_actions: usize,
    pub options: usize,
    pub option_success_mean: f64,
}

pub const CSV_COLUMNS: [&str; 11] = [
    "agent",
    "seed",
    "ground_steps",
    "phase",
    "episodes",
    "episode_reward_mean",
    "rooms_discovered",
    "abstract_states",
    "known_actions",
    "options",
    "option_success_mean",
];

impl MetricsRow {
    pub fn csv_line(&self) -> String {
        let phase = match self.phase {
            Phase::Train => "train",
            Phase::Eval => "eval",
        };
        format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            self.agent,
            self.seed,
            self.ground_steps,
            phase,
            self.episodes,
            self.episode_reward_mean,
            self.rooms_discovered,
            self.abstract_states,
            self.known_actions,
            self.options,
            self.option_success_mean
        )
    }
}

pub fn csv_header() -> String {
    CSV_COLUMNS.join(",")
}

pub fn write_csv(rows: &[MetricsRow], path: &Path) -> std::io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{}", csv_header())?;
    for r in rows {
        writeln!(w, "{}", r.csv_line())?;
    }
    w.flush()
}

pub fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> anyhow::Result<Vec<T>> {
    let f = File::open(path).map_err(|e| anyhow::anyhow!("opening {}: {e}", path.display()))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line)
                .map_err(|e| anyhow::anyhow!("{} line {}: {e}", path.display(), i + 1))?,
        );
    }
    Ok(out)
}

/// Appends JSON lines; `truncate_to` keeps only the first n lines of an
/// existing file, which is how resumed runs drop rows written after the
/// checkpoint they restart from.
pub struct JsonlWriter {
    out: BufWriter<File>,
    pub lines: usize,
}

impl JsonlWriter {
    pub fn create(path: &Path) -> std::io::Result<JsonlWriter> {
        Ok(JsonlWriter {
            out: BufWriter::new(File::create(path)?),
            lines: 0,
        })
    }

    pub fn truncate_to(path: &Path, keep: usize) -> std::io::Result<JsonlWriter> {
        let mut kept = String::new();
        if path.exists() {
            let f = BufReader::new(File::open(path)?);
            for line in f.lines().take(keep) {
                kept.push_str(&line?);
                kept.push('\n');
            }
        }
        let lines = kept.lines().count();
        std::fs::write(path, kept)?;
        let f = OpenOptions::new().append(true).open(path)?;
        Ok(JsonlWriter {
            out: BufWriter::new(f),
            lines,
        })
    }

    pub fn write<T: Serialize>(&mut self, value: &T) -> std::io::Result<()> {
        serde_json::to_writer(&mut self.out, value)?;
        self.out.write_all(b"\n")?;
        self.lines += 1;
        Ok(())
    }

    pub fn flush(&mut self) -> std::io::Result<()> {
        self.out.flush()
    }
}
