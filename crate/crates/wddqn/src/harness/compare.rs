//! Merge the summaries of several runs into one plot-ready CSV keyed by
//! (agent, seed, window), with optimal/suboptimal reference series for the
//! pursuit game.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::harness::HarnessError;

#[derive(Debug, Clone)]
struct RunMeta {
    agent: String,
    seed: String,
    env: String,
    ref_optimal: Option<f64>,
    ref_suboptimal: Option<f64>,
}

#[derive(Debug, Clone)]
struct SummaryRow {
    window: usize,
    start: String,
    end: String,
    mean: String,
    min: String,
    max: String,
}

fn bad(file: &Path, msg: impl Into<String>) -> HarnessError {
    HarnessError::BadInput {
        file: file.display().to_string(),
        msg: msg.into(),
    }
}

fn read_meta(dir: &Path) -> Result<RunMeta, HarnessError> {
    let path = dir.join("meta.csv");
    let text = fs::read_to_string(&path)?;
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| bad(&path, "empty file"))?;
    if header != "agent,seed,env,episodes,ref_optimal,ref_suboptimal" {
        return Err(bad(&path, format!("unexpected header '{header}'")));
    }
    let row = lines.next().ok_or_else(|| bad(&path, "missing data row"))?;
    let fields: Vec<&str> = row.split(',').collect();
    if fields.len() != 6 {
        return Err(bad(&path, "expected 6 fields"));
    }
    Ok(RunMeta {
        agent: fields[0].to_string(),
        seed: fields[1].to_string(),
        env: fields[2].to_string(),
        ref_optimal: fields[4].parse().ok(),
        ref_suboptimal: fields[5].parse().ok(),
    })
}

fn read_summary(dir: &Path) -> Result<Vec<SummaryRow>, HarnessError> {
    let path = dir.join("summary.csv");
    let text = fs::read_to_string(&path)?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 {
            if line != "window,start_episode,end_episode,mean_reward,min_reward,max_reward" {
                return Err(bad(&path, format!("unexpected header '{line}'")));
            }
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(bad(&path, format!("row {i}: expected 6 fields")));
        }
        rows.push(SummaryRow {
            window: fields[0]
                .parse()
                .map_err(|_| bad(&path, format!("row {i}: bad window index")))?,
            start: fields[1].to_string(),
            end: fields[2].to_string(),
            mean: fields[3].to_string(),
            min: fields[4].to_string(),
            max: fields[5].to_string(),
        });
    }
    Ok(rows)
}

/// Merge run directories (each holding `meta.csv` and `summary.csv`) into
/// one CSV at `out`. All runs must come from the same environment.
pub fn compare(inputs: &[impl AsRef<Path>], out: &Path) -> Result<(), HarnessError> {
    if inputs.is_empty() {
        return Err(HarnessError::NoInputs);
    }
    let mut merged = String::from(
        "agent,seed,window,start_episode,end_episode,mean_reward,min_reward,max_reward\n",
    );
    let mut env: Option<String> = None;
    let mut reference: Option<(Option<f64>, Option<f64>)> = None;
    let mut longest: Vec<SummaryRow> = Vec::new();

    for input in inputs {
        let dir = input.as_ref();
        let meta = read_meta(dir)?;
        match &env {
            None => env = Some(meta.env.clone()),
            Some(e) if *e != meta.env => {
                return Err(HarnessError::EnvMismatch(e.clone(), meta.env));
            }
            _ => {}
        }
        reference.get_or_insert((meta.ref_optimal, meta.ref_suboptimal));
        let rows = read_summary(dir)?;
        if rows.len() > longest.len() {
            longest = rows.clone();
        }
        for r in &rows {
            merged.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                meta.agent, meta.seed, r.window, r.start, r.end, r.mean, r.min, r.max
            ));
        }
    }

    // Reference series so plots can show the optimal/suboptimal levels.
    if let Some((opt, sub)) = reference {
        for (name, value) in [("optimal", opt), ("suboptimal", sub)] {
            if let Some(v) = value {
                for r in &longest {
                    merged.push_str(&format!(
                        "{},-,{},{},{},{},{},{}\n",
                        name, r.window, r.start, r.end, v, v, v
                    ));
                }
            }
        }
    }

    let mut f = fs::File::create(out)?;
    f.write_all(merged.as_bytes())?;
    Ok(())
}
