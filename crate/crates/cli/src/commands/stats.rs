use std::path::PathBuf;

use anyhow::{anyhow, bail, Result};
use clap::{Args, Subcommand};
use serde::Serialize;

use super::{parse_label, read_input, Artifact, Ctx};
use crate::results::ResultsDocument;
use crate::UsageError;
use nvi_core::stats::{bland_altman, evaluate, group_table_csv, mann_whitney, pearson, GroupComparison};

#[derive(Debug, Subcommand)]
pub enum StatsCmd {
    /// Mann-Whitney U and Cohen's d for every numeric column between two groups.
    Groups(GroupsArgs),
    /// Bland-Altman agreement and Pearson correlation of two columns.
    Agreement(AgreementArgs),
    /// ROC AUC with bootstrap CI and the Youden operating point.
    Roc(RocArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct Input {
    pub input: PathBuf,
    /// Multiply these columns by 1000 (seconds to milliseconds). Repeatable.
    #[arg(long = "seconds-to-ms", value_name = "COLUMN")]
    pub seconds_to_ms: Vec<String>,
}

#[derive(Debug, Args, Serialize)]
pub struct GroupsArgs {
    #[command(flatten)]
    pub input: Input,
    #[arg(long, default_value = "group")]
    pub group_col: String,
    /// Value of the group column for group A.
    #[arg(long)]
    pub a: String,
    /// Value of the group column for group B.
    #[arg(long)]
    pub b: String,
    /// Columns to compare; defaults to every other column.
    #[arg(long, value_delimiter = ',')]
    pub columns: Vec<String>,
}

#[derive(Debug, Args, Serialize)]
pub struct AgreementArgs {
    #[command(flatten)]
    pub input: Input,
    #[arg(long)]
    pub col_a: String,
    #[arg(long)]
    pub col_b: String,
}

#[derive(Debug, Args, Serialize)]
pub struct RocArgs {
    #[command(flatten)]
    pub input: Input,
    /// Higher scores indicate the positive class.
    #[arg(long, default_value = "score")]
    pub score_col: String,
    #[arg(long, default_value = "label")]
    pub label_col: String,
    #[arg(long, default_value_t = 1000)]
    pub bootstrap: usize,
}

/// A CSV held as strings, with line numbers for error messages.
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<(usize, Vec<String>)>,
    pub scaled: Vec<String>,
}

impl Table {
    pub fn parse(text: &str, seconds_to_ms: &[String]) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
        let headers: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        if headers.is_empty() || headers.iter().all(String::is_empty) {
            bail!("empty CSV");
        }
        for c in seconds_to_ms {
            if !headers.contains(c) {
                return Err(UsageError(format!("--seconds-to-ms: no column named `{c}`")).into());
            }
        }
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let line = rec.position().map_or(0, |p| p.line() as usize);
            rows.push((line, rec.iter().map(str::to_string).collect()));
        }
        Ok(Self {
            headers,
            rows,
            scaled: seconds_to_ms.to_vec(),
        })
    }

    pub fn index(&self, name: &str) -> Result<usize> {
        self.headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| UsageError(format!("no column named `{name}`")).into())
    }

    /// Values of a numeric column on the selected rows; empty cells are skipped
    /// unless `paired` asks for an error.
    pub fn numeric(&self, name: &str, rows: &[usize], paired: bool) -> Result<Vec<Option<f64>>> {
        let j = self.index(name)?;
        let k = if self.scaled.iter().any(|c| c == name) { 1000.0 } else { 1.0 };
        rows.iter()
            .map(|&r| {
                let (line, cells) = &self.rows[r];
                let raw = cells.get(j).map(String::as_str).unwrap_or("");
                if raw.is_empty() {
                    if paired {
                        bail!("line {line}, column `{name}`: missing value");
                    }
                    return Ok(None);
                }
                raw.parse::<f64>()
                    .map(|v| Some(v * k))
                    .map_err(|_| anyhow!("line {line}, column `{name}`: `{raw}` is not a number"))
            })
            .collect()
    }

    pub fn all_rows(&self) -> Vec<usize> {
        (0..self.rows.len()).collect()
    }
}

pub fn run(ctx: &Ctx, cmd: StatsCmd) -> Result<()> {
    match cmd {
        StatsCmd::Groups(a) => groups(ctx, a),
        StatsCmd::Agreement(a) => agreement(ctx, a),
        StatsCmd::Roc(a) => roc(ctx, a),
    }
}

#[derive(Serialize)]
struct GroupRow {
    feature: String,
    comparison: GroupComparison,
}

pub fn group_rows(t: &Table, a: &GroupsArgs) -> Result<Vec<(String, GroupComparison)>> {
    let g = t.index(&a.group_col)?;
    let members = |v: &str| -> Vec<usize> {
        (0..t.rows.len())
            .filter(|&r| t.rows[r].1.get(g).is_some_and(|c| c == v))
            .collect()
    };
    let (ra, rb) = (members(&a.a), members(&a.b));
    let columns: Vec<String> = if a.columns.is_empty() {
        t.headers.iter().filter(|h| **h != a.group_col).cloned().collect()
    } else {
        a.columns.clone()
    };
    let mut out = Vec::new();
    for c in columns {
        let xa: Vec<f64> = t.numeric(&c, &ra, false)?.into_iter().flatten().collect();
        let xb: Vec<f64> = t.numeric(&c, &rb, false)?.into_iter().flatten().collect();
        let cmp = mann_whitney(&xa, &xb).map_err(|e| anyhow!("column `{c}`: {e}"))?;
        out.push((c, cmp));
    }
    Ok(out)
}

fn groups(ctx: &Ctx, a: GroupsArgs) -> Result<()> {
    let t = Table::parse(&read_input(&a.input.input)?, &a.input.seconds_to_ms)?;
    let rows = group_rows(&t, &a)?;
    let csv = group_table_csv(&rows, &a.a, &a.b);
    let m: Vec<GroupRow> = rows
        .into_iter()
        .map(|(feature, comparison)| GroupRow { feature, comparison })
        .collect();
    let doc = ResultsDocument::new("stats groups", &a, &m, ctx.seed)?;
    ctx.emit(&doc, Some(&csv), &[Artifact::new("groups.csv", csv.clone())])
}

fn agreement(ctx: &Ctx, a: AgreementArgs) -> Result<()> {
    let t = Table::parse(&read_input(&a.input.input)?, &a.input.seconds_to_ms)?;
    let rows = t.all_rows();
    let x: Vec<f64> = t.numeric(&a.col_a, &rows, true)?.into_iter().flatten().collect();
    let y: Vec<f64> = t.numeric(&a.col_b, &rows, true)?.into_iter().flatten().collect();
    let ba = bland_altman(&x, &y)?;
    let r = pearson(&x, &y).ok();
    let csv = format!(
        "n,bias,sd_diff,loa_low,loa_high,pearson_r\n{},{},{},{},{},{}\n",
        ba.n,
        ba.bias,
        ba.sd_diff,
        ba.loa_low,
        ba.loa_high,
        r.map(|c| c.r.to_string()).unwrap_or_default()
    );
    let m = serde_json::json!({ "bland_altman": ba, "pearson": r });
    let doc = ResultsDocument::new("stats agreement", &a, &m, ctx.seed)?;
    ctx.emit(&doc, Some(&csv), &[Artifact::new("agreement.csv", csv.clone())])
}

fn roc(ctx: &Ctx, a: RocArgs) -> Result<()> {
    let t = Table::parse(&read_input(&a.input.input)?, &a.input.seconds_to_ms)?;
    let rows = t.all_rows();
    let scores: Vec<f64> = t.numeric(&a.score_col, &rows, true)?.into_iter().flatten().collect();
    let j = t.index(&a.label_col)?;
    let labels = t
        .rows
        .iter()
        .map(|(line, cells)| {
            let raw = cells.get(j).map(String::as_str).unwrap_or("");
            parse_label(raw).ok_or_else(|| anyhow!("line {line}, column `{}`: `{raw}` is not a label", a.label_col))
        })
        .collect::<Result<Vec<bool>>>()?;
    let report = evaluate(&scores, &labels, a.bootstrap, ctx.seed)?;
    let csv = format!(
        "auc,auc_ci_low,auc_ci_high,sens,spec,ppv,npv,youden_threshold\n{},{},{},{},{},{},{},{}\n",
        report.auc,
        report.auc_ci_low,
        report.auc_ci_high,
        report.sens,
        report.spec,
        report.ppv,
        report.npv,
        report.youden_threshold
    );
    let doc = ResultsDocument::new("stats roc", &a, &report, ctx.seed)?;
    ctx.emit(&doc, Some(&csv), &[Artifact::new("roc.csv", csv.clone())])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seconds_to_ms_scales_named_column() {
        let t = Table::parse("rr,x\n0.8,1\n1.2,2\n", &["rr".to_string()]).unwrap();
        let v = t.numeric("rr", &t.all_rows(), true).unwrap();
        assert_eq!(v, vec![Some(800.0), Some(1200.0)]);
        assert_eq!(t.numeric("x", &t.all_rows(), true).unwrap(), vec![Some(1.0), Some(2.0)]);
    }

    #[test]
    fn bad_cell_names_line_and_column() {
        let t = Table::parse("a\n1\nzz\n", &[]).unwrap();
        let e = t.numeric("a", &t.all_rows(), true).unwrap_err().to_string();
        assert!(e.contains("line 3") && e.contains("`a`"), "{e}");
    }

    #[test]
    fn groups_compare_every_column() {
        let t = Table::parse("group,x\nA,1\nA,2\nA,3\nB,4\nB,5\nB,6\n", &[]).unwrap();
        let a = GroupsArgs {
            input: Input { input: PathBuf::new(), seconds_to_ms: vec![] },
            group_col: "group".into(),
            a: "A".into(),
            b: "B".into(),
            columns: vec![],
        };
        let rows = group_rows(&t, &a).unwrap();
        assert_eq!(rows.len(), 1);
        assert!((rows[0].1.p_value - 0.1).abs() < 1e-12);
    }
}
