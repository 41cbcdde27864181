use std::io::Write;

use serde::Serialize;

use super::io::{read_dataset, read_model, write_dataset, write_json, ModelFile, ModelMetadata, FORMAT_VERSION};
use super::{ApproxArgs, ApproxTarget, BoundsArgs, EvalArgs, GenArgs, SweepArgs, TrainArgs};
use crate::error::{invalid, Error, Result};
use crate::eval::{
    cross_validate_b, evaluate_predictor, generate, is_margin_mistake, l_for_margin, sample_size_hb,
    sample_size_hphi, Budget, GeneratorSpec, HbVariant, MarginErrorEntry, MarginTransfer, SampleSize,
};
use crate::kernel::KernelSpec;
use crate::polyspace::{
    approx_sigmoid_chebyshev, b_bound_sigmoid, erf_taylor_coeffs_on, ChebyshevOptions, LogBudget, PolynomialApprox,
};
use crate::solver::{Batch, SolverOptions};

/// Highest odd Taylor degree tried when `--degree` is not given.
const MAX_ERF_DEGREE: usize = 79;

pub(super) fn gen(args: &GenArgs, out: &mut dyn Write) -> Result<()> {
    let spec = GeneratorSpec::with_random_direction(
        args.dim as usize,
        args.transfer.kind(args.lipschitz)?,
        args.noise.into(),
        args.w_seed,
        args.seed,
    )?;
    let data = generate(&spec, args.m as usize)?;
    write_dataset(&args.out, &data)?;
    writeln!(out, "m = {}", data.len())?;
    writeln!(out, "dim = {}", args.dim)?;
    writeln!(out, "positive rate = {:.4}", data.positive_rate())?;
    writeln!(out, "w* = {:?}", spec.w_star.coords())?;
    Ok(())
}

pub(super) fn train(args: &TrainArgs, out: &mut dyn Write) -> Result<()> {
    let b = match (args.b, args.log_b) {
        (Some(b), _) => b,
        (None, Some(log_b)) => LogBudget { log_b }.value().ok_or_else(|| {
            invalid(format!(
                "B = exp({log_b}) overflows a double; pick B by cross-validation over a practical grid (see `sweep`)"
            ))
        })?,
        (None, None) => return Err(invalid("one of --B or --log-B is required")),
    };
    let data = read_dataset(&args.data)?;
    let spec = KernelSpec::new(args.nu)?;
    let opts = args.solver.options();
    let (predictor, report) = crate::solver::train(&data.points(), &data.labels(), &spec, b, &opts)?;
    let metadata = ModelMetadata {
        seed: args.solver.seed,
        objective: report.final_objective,
        iters_used: report.iters_used,
        constraint_active: report.constraint_active,
    };
    write_json(&args.out, &ModelFile::from_predictor(&predictor, metadata))?;
    writeln!(out, "objective = {}", report.final_objective)?;
    writeln!(out, "iterations = {}", report.iters_used)?;
    writeln!(out, "constraint active = {}", report.constraint_active)?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct EvalOutput {
    format_version: u32,
    m: usize,
    /// Mean `|clip(f(x)) - y|`.
    abs_error: f64,
    /// Mean `|f(x) - y|` without clipping; equals the training objective on the training set.
    raw_abs_error: f64,
    zero_one_error: f64,
    /// Margin errors of the score `f(x) - 1/2`.
    margin_errors: Vec<MarginErrorEntry>,
}

pub(super) fn eval(args: &EvalArgs, out: &mut dyn Write) -> Result<()> {
    let predictor = read_model(&args.model)?;
    let data = read_dataset(&args.data)?;
    let report = evaluate_predictor(&predictor, &data)?;
    let raw: Vec<f64> = data.samples().iter().map(|s| predictor.predict_raw(&s.x)).collect::<Result<_>>()?;
    let m = data.len();
    let raw_abs_error =
        raw.iter().zip(data.samples()).map(|(r, s)| (r - f64::from(s.y)).abs()).sum::<f64>() / m as f64;
    let margin_errors = args
        .mu
        .iter()
        .map(|&mu| {
            let count =
                raw.iter().zip(data.samples()).filter(|(r, s)| is_margin_mistake(*r - 0.5, s.y, mu)).count();
            MarginErrorEntry { mu, error: count as f64 / m as f64 }
        })
        .collect();
    let result = EvalOutput {
        format_version: FORMAT_VERSION,
        m,
        abs_error: report.abs_error,
        raw_abs_error,
        zero_one_error: report.zero_one_error,
        margin_errors,
    };

    writeln!(out, "m = {m}")?;
    writeln!(out, "abs error = {}", result.abs_error)?;
    writeln!(out, "raw abs error = {}", result.raw_abs_error)?;
    writeln!(out, "zero-one error = {}", result.zero_one_error)?;
    for e in &result.margin_errors {
        writeln!(out, "margin error (mu = {}) = {}", e.mu, e.error)?;
    }
    if let Some(path) = &args.json {
        write_json(path, &result)?;
    }
    if let Some(path) = &args.csv {
        let mut w = csv::Writer::from_path(path).map_err(csv_io)?;
        w.write_record(["format_version", "metric", "mu", "value"]).map_err(csv_io)?;
        let v = FORMAT_VERSION.to_string();
        for (name, value) in [
            ("abs_error", result.abs_error),
            ("raw_abs_error", result.raw_abs_error),
            ("zero_one_error", result.zero_one_error),
        ] {
            w.write_record([v.as_str(), name, "", &value.to_string()]).map_err(csv_io)?;
        }
        for e in &result.margin_errors {
            w.write_record([v.as_str(), "margin_error", &e.mu.to_string(), &e.error.to_string()]).map_err(csv_io)?;
        }
        w.flush()?;
    }
    Ok(())
}

fn csv_io(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

#[derive(Debug, Serialize)]
struct SweepRow {
    format_version: u32,
    seed: u64,
    #[serde(rename = "B")]
    b: f64,
    train_objective: f64,
    holdout_zero_one: f64,
    holdout_abs: f64,
    iters_used: usize,
    constraint_active: bool,
    selected: bool,
}

pub(super) fn sweep(args: &SweepArgs, out: &mut dyn Write) -> Result<()> {
    let kind = args.transfer.kind(args.lipschitz)?;
    let spec = KernelSpec::new(args.nu)?;
    let mut rows = Vec::new();
    for i in 0..args.seeds {
        let seed = args.seed_base + i;
        let gen = GeneratorSpec::with_random_direction(args.dim as usize, kind, args.noise.into(), args.w_seed, seed)?;
        let data = generate(&gen, args.m as usize)?;
        let (train, holdout) = data.split(args.holdout, seed.wrapping_add(args.split_seed))?;
        let opts = SolverOptions {
            max_iters: Some(args.epochs as usize * train.len()),
            seed,
            batch: Batch::SingleSample,
            ..SolverOptions::default()
        };
        let cv = cross_validate_b(&train, &holdout, &args.grid, &spec, &opts)?;
        writeln!(out, "seed {seed}: best B = {}", cv.best_b)?;
        for e in cv.per_b {
            writeln!(
                out,
                "  B = {:<8} objective = {:.6}  holdout 0-1 = {:.4}  active = {}",
                e.b, e.train_objective, e.holdout_zero_one, e.constraint_active
            )?;
            rows.push(SweepRow {
                format_version: FORMAT_VERSION,
                seed,
                b: e.b,
                train_objective: e.train_objective,
                holdout_zero_one: e.holdout_zero_one,
                holdout_abs: e.holdout_abs,
                iters_used: e.iters_used,
                constraint_active: e.constraint_active,
                selected: e.b == cv.best_b,
            });
        }
    }
    let mut w = csv::Writer::from_path(&args.out).map_err(csv_io)?;
    for row in &rows {
        w.serialize(row).map_err(csv_io)?;
    }
    w.flush()?;
    if let Some(path) = &args.json {
        write_json(path, &serde_json::json!({ "format_version": FORMAT_VERSION, "rows": rows }))?;
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct ApproxOutput {
    format_version: u32,
    eps: f64,
    reports: Vec<PolynomialApprox>,
}

pub(super) fn approx(args: &ApproxArgs, out: &mut dyn Write) -> Result<()> {
    let mut reports = Vec::new();
    if matches!(args.target, ApproxTarget::Sig | ApproxTarget::Both) {
        let opts = ChebyshevOptions { grid_size: args.grid_size, max_degree: args.max_degree };
        reports.push(approx_sigmoid_chebyshev(args.lipschitz, args.eps, &opts)?);
    }
    if matches!(args.target, ApproxTarget::Erf | ApproxTarget::Both) {
        reports.push(erf_report(args)?);
    }
    for r in &reports {
        writeln!(
            out,
            "{:?}: degree = {}  sup error = {:.3e}  ln pb norm = {:.4}",
            r.target,
            r.degree(),
            r.sup_error,
            r.log_pb_norm()
        )?;
    }
    let result = ApproxOutput { format_version: FORMAT_VERSION, eps: args.eps, reports };
    match &args.out {
        Some(path) => write_json(path, &result)?,
        None => writeln!(out, "{}", serde_json::to_string_pretty(&result)?)?,
    }
    Ok(())
}

fn erf_report(args: &ApproxArgs) -> Result<PolynomialApprox> {
    if let Some(d) = args.degree {
        return erf_taylor_coeffs_on(args.lipschitz, d, args.grid_size);
    }
    let mut best: Option<PolynomialApprox> = None;
    for d in (1..=MAX_ERF_DEGREE).step_by(2) {
        let p = erf_taylor_coeffs_on(args.lipschitz, d, args.grid_size)?;
        if p.sup_error <= args.eps {
            return Ok(p);
        }
        if best.as_ref().is_none_or(|b| p.sup_error < b.sup_error) {
            best = Some(p);
        }
    }
    let best = best.expect("at least one degree tried");
    Err(Error::Approximation {
        reason: format!("no odd Taylor degree up to {MAX_ERF_DEGREE} reaches eps = {}", args.eps),
        best_error: best.sup_error,
        best_degree: best.degree(),
    })
}

#[derive(Debug, Serialize)]
struct BoundsOutput {
    format_version: u32,
    #[serde(rename = "L")]
    lipschitz: f64,
    eps: f64,
    delta: f64,
    sample_size_hphi: u64,
    log_b_sigmoid: f64,
    b_sigmoid_warning: Option<String>,
    hb_erm: SampleSize,
    hb_mainres: SampleSize,
    hb_budget_log: f64,
    l_piecewise_linear: Option<f64>,
    l_sigmoid: Option<f64>,
}

fn show_size(s: &SampleSize) -> String {
    if s.saturated {
        format!("> 2^63 - 1 (ln m = {:.6})", s.log_value)
    } else {
        s.value.to_string()
    }
}

pub(super) fn bounds(args: &BoundsArgs, out: &mut dyn Write) -> Result<()> {
    let (l, eps, delta) = (args.lipschitz, args.eps, args.delta);
    let hphi = sample_size_hphi(l, eps, delta)?;
    let sig = b_bound_sigmoid(l, eps)?;
    let budget = match args.b {
        Some(b) => Budget::Value(b),
        None => Budget::Log(sig.budget),
    };
    let hb_budget_log = match budget {
        Budget::Value(b) => b.ln(),
        Budget::Log(lb) => lb.log_b,
    };
    let hb_erm = sample_size_hb(budget, eps, delta, HbVariant::Erm)?;
    let hb_mainres = sample_size_hb(budget, eps, delta, HbVariant::Mainres)?;
    let (l_pw, l_sig) = match args.mu {
        Some(mu) => (
            Some(l_for_margin(MarginTransfer::PiecewiseLinear, mu, eps)?),
            Some(l_for_margin(MarginTransfer::Sigmoid, mu, eps)?),
        ),
        None => (None, None),
    };

    let b_shown = match sig.budget.value() {
        Some(v) if v < 1e15 => format!("{v:.6e}"),
        _ => format!("exp({:.6})", sig.budget.log_b),
    };
    writeln!(out, "{:<34} value", "quantity")?;
    writeln!(out, "{:<34} {}", "m for Lipschitz class", hphi)?;
    writeln!(out, "{:<34} {:.12}", "ln B (sigmoid)", sig.budget.log_b)?;
    writeln!(out, "{:<34} {}", "B (sigmoid)", b_shown)?;
    writeln!(out, "{:<34} {:.6}", "ln B used for ball sizes", hb_budget_log)?;
    writeln!(out, "{:<34} {}", "m for ball ERM (c = 2)", show_size(&hb_erm))?;
    writeln!(out, "{:<34} {}", "m for agnostic guarantee (c = 8)", show_size(&hb_mainres))?;
    if let (Some(a), Some(b)) = (l_pw, l_sig) {
        writeln!(out, "{:<34} {}", "L for margin (piecewise-linear)", a)?;
        writeln!(out, "{:<34} {}", "L for margin (sigmoid)", b)?;
    }
    if let Some(w) = &sig.warning {
        writeln!(out, "warning: {w}")?;
    }
    if let Some(path) = &args.json {
        let result = BoundsOutput {
            format_version: FORMAT_VERSION,
            lipschitz: l,
            eps,
            delta,
            sample_size_hphi: hphi,
            log_b_sigmoid: sig.budget.log_b,
            b_sigmoid_warning: sig.warning.clone(),
            hb_erm,
            hb_mainres,
            hb_budget_log,
            l_piecewise_linear: l_pw,
            l_sigmoid: l_sig,
        };
        write_json(path, &result)?;
    }
    Ok(())
}
