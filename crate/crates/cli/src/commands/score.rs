use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{bail, Result};
use clap::Args;
use serde::Serialize;

use super::{num, read_input, Artifact, Ctx};
use crate::results::ResultsDocument;
use nvi_core::nvi::{composite, ModalityInputs, NviResult, Tier, MODALITIES};

pub const COLUMNS: [&str; 5] = ["spo2_pct", "rmssd_ms", "pi", "phase_left_deg", "phase_right_deg"];
const ID_COLUMNS: [&str; 2] = ["record_id", "id"];

#[derive(Debug, Args, Serialize)]
pub struct ScoreArgs {
    /// CSV with any of the columns spo2_pct, rmssd_ms, pi, phase_left_deg,
    /// phase_right_deg; empty cells are missing modalities.
    pub input: PathBuf,
    /// Reject rows with missing modalities instead of redistributing weights.
    #[arg(long)]
    pub no_degraded: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RowResult {
    /// 1-based data row.
    pub row: usize,
    /// 1-based line in the file.
    pub line: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub record_id: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub result: Option<NviResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreMetrics {
    pub rows: Vec<RowResult>,
    pub tier_counts: BTreeMap<String, usize>,
    pub n_errors: usize,
}

fn parse_cell(raw: &str, column: &str) -> Result<Option<f64>, String> {
    let t = raw.trim();
    if t.is_empty() {
        return Ok(None);
    }
    t.parse::<f64>()
        .map(Some)
        .map_err(|_| format!("column `{column}`: `{t}` is not a number"))
}

fn score_row(cells: &[Option<&str>], no_degraded: bool) -> Result<NviResult, String> {
    let mut v = [None; 5];
    for (k, cell) in cells.iter().enumerate() {
        if let Some(raw) = cell {
            v[k] = parse_cell(raw, COLUMNS[k])?;
        }
    }
    let inputs = ModalityInputs {
        spo2_pct: v[0],
        rmssd_ms: v[1],
        pi: v[2],
        phase_left_deg: v[3],
        phase_right_deg: v[4],
    };
    if no_degraded {
        if let Some(k) = v.iter().position(Option::is_none) {
            return Err(format!("column `{}` missing and degraded mode is disabled", COLUMNS[k]));
        }
    }
    composite(&inputs).map_err(|e| e.to_string())
}

pub fn score_text(text: &str, no_degraded: bool) -> Result<ScoreMetrics> {
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = rdr.headers()?.clone();
    let pos: Vec<Option<usize>> = COLUMNS.iter().map(|c| headers.iter().position(|h| h == *c)).collect();
    if pos.iter().all(Option::is_none) {
        bail!("no modality column found; expected any of {}", COLUMNS.join(", "));
    }
    let id_pos = ID_COLUMNS.iter().find_map(|c| headers.iter().position(|h| h == *c));
    let mut rows = Vec::new();
    let mut tier_counts: BTreeMap<String, usize> = [Tier::Normal, Tier::Alert1, Tier::Alert2]
        .iter()
        .map(|t| (t.as_str().to_string(), 0))
        .collect();
    let mut n_errors = 0;
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = rec.position().map_or(i + 2, |p| p.line() as usize);
        let cells: Vec<Option<&str>> = pos.iter().map(|p| p.and_then(|j| rec.get(j))).collect();
        let outcome = score_row(&cells, no_degraded);
        let record_id = id_pos.and_then(|j| rec.get(j)).map(str::to_string);
        let (result, error) = match outcome {
            Ok(r) => {
                *tier_counts.entry(r.tier.as_str().to_string()).or_default() += 1;
                (Some(r), None)
            }
            Err(e) => {
                n_errors += 1;
                (None, Some(e))
            }
        };
        rows.push(RowResult {
            row: i + 1,
            line,
            record_id,
            result,
            error,
        });
    }
    Ok(ScoreMetrics {
        rows,
        tier_counts,
        n_errors,
    })
}

pub fn table(m: &ScoreMetrics) -> String {
    let mut s = String::from("row,record_id,score,tier,w_spo2,w_hrv,w_perfusion,w_phase,error\n");
    for r in &m.rows {
        let id = r.record_id.clone().unwrap_or_default();
        match (&r.result, &r.error) {
            (Some(res), _) => {
                let w: Vec<String> = (0..MODALITIES).map(|k| num(res.effective_weights[k])).collect();
                s.push_str(&format!(
                    "{},{id},{},{},{},\n",
                    r.row,
                    num(res.score),
                    res.tier.as_str(),
                    w.join(",")
                ));
            }
            (None, e) => {
                let e = e.clone().unwrap_or_default().replace('"', "'");
                s.push_str(&format!("{},{id},,,,,,,\"{e}\"\n", r.row));
            }
        }
    }
    s
}

pub fn run(ctx: &Ctx, args: ScoreArgs) -> Result<()> {
    let text = read_input(&args.input)?;
    let m = score_text(&text, args.no_degraded)?;
    let t = table(&m);
    let doc = ResultsDocument::new("score", &args, &m, ctx.seed)?;
    ctx.emit(&doc, Some(&t), &[Artifact::new("scores.csv", t.clone())])
}
