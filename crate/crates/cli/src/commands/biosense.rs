use std::fmt::Write as _;

use anyhow::Result;
use clap::{Args, Subcommand, ValueEnum};
use serde::Serialize;

use super::{num, Artifact, Ctx};
use crate::results::ResultsDocument;
use crate::svg::{line_chart, Series};
use nvi_core::biosense::{ConductivityModel, CurveShape};

#[derive(Debug, Subcommand)]
pub enum BiosenseCmd {
    /// Conductivity and gain over the humidity range.
    Curve(CurveArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShapeArg {
    LogLinear,
    LogLogistic,
}

#[derive(Debug, Args, Serialize)]
pub struct CurveArgs {
    #[arg(long, default_value_t = 61)]
    pub points: usize,
    #[arg(long, value_enum, default_value_t = ShapeArg::LogLinear)]
    pub shape: ShapeArg,
    /// AC amplitude before amplification.
    #[arg(long, default_value_t = 1.0)]
    pub base_ac: f64,
}

pub fn run(ctx: &Ctx, cmd: BiosenseCmd) -> Result<()> {
    match cmd {
        BiosenseCmd::Curve(a) => curve(ctx, a),
    }
}

#[derive(Serialize)]
struct Row {
    rh_pct: f64,
    sigma_s_per_m: f64,
    gain: f64,
    amplified_ac: f64,
}

fn curve(ctx: &Ctx, a: CurveArgs) -> Result<()> {
    let shape = match a.shape {
        ShapeArg::LogLinear => CurveShape::LogLinear,
        ShapeArg::LogLogistic => CurveShape::LogLogistic,
    };
    let model = ConductivityModel::default().with_shape(shape);
    let rows = model
        .curve(a.points)?
        .into_iter()
        .map(|p| {
            Ok(Row {
                rh_pct: p.rh_pct,
                sigma_s_per_m: p.sigma_s_per_m,
                gain: p.gain,
                amplified_ac: model.amplification(p.rh_pct, a.base_ac)?,
            })
        })
        .collect::<nvi_core::Result<Vec<Row>>>()?;
    let mut csv = String::from("rh_pct,sigma_s_per_m,gain,amplified_ac\n");
    for r in &rows {
        let _ = writeln!(
            csv,
            "{},{},{},{}",
            num(r.rh_pct),
            num(r.sigma_s_per_m),
            num(r.gain),
            num(r.amplified_ac)
        );
    }
    let svg = line_chart(
        "Conductivity versus humidity",
        "relative humidity (%)",
        "log10 conductivity (S/m)",
        &[Series {
            name: "log10 sigma",
            points: rows.iter().map(|r| (r.rh_pct, r.sigma_s_per_m.log10())).collect(),
        }],
    );
    let m = serde_json::json!({ "model": model, "curve": rows });
    let doc = ResultsDocument::new("biosense curve", &a, &m, ctx.seed)?;
    ctx.emit(
        &doc,
        Some(&csv),
        &[Artifact::new("conductivity.csv", csv.clone()), Artifact::new("conductivity.svg", svg)],
    )
}
