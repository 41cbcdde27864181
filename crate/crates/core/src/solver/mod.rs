//! Absolute-loss ERM over the norm ball of the composed-kernel RKHS.
//!
//! By the representer theorem the minimizer of
//!
//! ```text
//! (1/m) sum_i |<v, psi(x_i)> - y_i|   subject to ||v||^2 <= B
//! ```
//!
//! can be written `v = sum_j alpha_j psi(x_j)`, turning the problem into
//!
//! ```text
//! min_alpha (1/m) sum_i |(K alpha)_i - y_i|   subject to alpha^T K alpha <= B.
//! ```
//!
//! [`solve_erm`] runs projected subgradient descent in the RKHS geometry: a
//! subgradient step on `v` is a step on `alpha` along the sign vector of the
//! residuals, and the metric projection onto the centered ball is a rescale.

mod oracle;

pub use oracle::{exhaustive_erm_small, OracleResult, MAX_ORACLE_GRID, MAX_ORACLE_SIZE};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::kernel::{gram, GramMatrix, KernelSpec, Point};

/// Slack on the norm constraint accepted for returned predictors.
pub const FEASIBILITY_SLACK: f64 = 1e-6;

/// Upper bound on the default iteration count.
pub const DEFAULT_ITER_CAP: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "c", rename_all = "snake_case")]
pub enum StepSchedule {
    /// `eta_t = c`
    Constant(f64),
    /// `eta_t = c / sqrt(t)`
    InverseSqrt(f64),
}

impl StepSchedule {
    fn step(&self, t: usize) -> f64 {
        match *self {
            StepSchedule::Constant(c) => c,
            StepSchedule::InverseSqrt(c) => c / (t as f64).sqrt(),
        }
    }

    fn constant(&self) -> f64 {
        match *self {
            StepSchedule::Constant(c) | StepSchedule::InverseSqrt(c) => c,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Batch {
    /// Subgradient of the full empirical objective per iteration.
    #[default]
    Full,
    /// One example per iteration, visiting a seeded permutation each epoch.
    SingleSample,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// `None` uses `10 * m * ceil(1 / tolerance^2)`, capped at [`DEFAULT_ITER_CAP`].
    pub max_iters: Option<usize>,
    /// `None` uses `InverseSqrt(sqrt(B) / G)` with `G = max_i sqrt(K_ii)`.
    pub step_schedule: Option<StepSchedule>,
    pub seed: u64,
    pub tolerance: f64,
    pub batch: Batch,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { max_iters: None, step_schedule: None, seed: 0, tolerance: 1e-3, batch: Batch::Full }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == Some(0) {
            return Err(invalid("max_iters must be at least 1"));
        }
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return Err(invalid(format!("tolerance must be positive, got {}", self.tolerance)));
        }
        if let Some(s) = self.step_schedule {
            let c = s.constant();
            if !(c > 0.0 && c.is_finite()) {
                return Err(invalid(format!("step constant must be positive, got {c}")));
            }
        }
        Ok(())
    }

    fn iterations(&self, m: usize) -> usize {
        self.max_iters.unwrap_or_else(|| {
            let per = (1.0 / (self.tolerance * self.tolerance)).ceil();
            let total = 10.0 * m as f64 * per;
            if total >= DEFAULT_ITER_CAP as f64 {
                DEFAULT_ITER_CAP
            } else {
                total as usize
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    /// Objective of the returned coefficients.
    pub final_objective: f64,
    /// Objective after every epoch (one iteration for full batch, `m` for single-sample).
    pub objective_trace: Vec<f64>,
    pub iters_used: usize,
    /// Whether the returned coefficients sit on the norm boundary.
    pub constraint_active: bool,
}

/// A predictor `x -> sum_j alpha_j K(anchor_j, x)` with `alpha^T K alpha <= B`.
#[derive(Debug, Clone, PartialEq)]
pub struct DualPredictor {
    alpha: Vec<f64>,
    anchors: Vec<Point>,
    spec: KernelSpec,
    b_budget: f64,
}

impl DualPredictor {
    /// Checks lengths, dimensions and the norm constraint against the anchors' Gram matrix.
    pub fn new(alpha: Vec<f64>, anchors: Vec<Point>, spec: KernelSpec, b_budget: f64) -> Result<Self> {
        if alpha.len() != anchors.len() || anchors.is_empty() {
            return Err(invalid(format!(
                "need one coefficient per anchor ({} coefficients, {} anchors)",
                alpha.len(),
                anchors.len()
            )));
        }
        if !(b_budget > 0.0 && b_budget.is_finite()) {
            return Err(invalid(format!("B must be positive and finite, got {b_budget}")));
        }
        if alpha.iter().any(|a| !a.is_finite()) {
            return Err(Error::InvalidInput("coefficients must be finite".into()));
        }
        let g = gram(&anchors, &spec)?;
        let norm = g.quadratic_form(&alpha);
        if norm > b_budget * (1.0 + FEASIBILITY_SLACK) {
            return Err(Error::InvalidInput(format!("coefficients have squared norm {norm} above B = {b_budget}")));
        }
        Ok(Self { alpha, anchors, spec, b_budget })
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn anchors(&self) -> &[Point] {
        &self.anchors
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn b_budget(&self) -> f64 {
        self.b_budget
    }

    pub fn dim(&self) -> usize {
        self.anchors[0].dim()
    }

    /// `sum_j alpha_j K(anchor_j, x)`; unbounded.
    pub fn predict_raw(&self, x: &Point) -> Result<f64> {
        if x.dim() != self.dim() {
            return Err(Error::Domain(format!(
                "point has dimension {}, predictor expects {}",
                x.dim(),
                self.dim()
            )));
        }
        Ok(self.alpha.iter().zip(&self.anchors).map(|(a, anchor)| a * self.spec.eval(anchor, x)).sum())
    }

    /// Raw prediction clipped to `[0, 1]`.
    pub fn predict_prob(&self, x: &Point) -> Result<f64> {
        self.predict_raw(x).map(clip_prob)
    }

    /// Raw prediction thresholded at 1/2; ties go to 1.
    pub fn predict_label(&self, x: &Point) -> Result<u8> {
        self.predict_raw(x).map(threshold_label)
    }
}

pub fn clip_prob(raw: f64) -> f64 {
    raw.clamp(0.0, 1.0)
}

pub fn threshold_label(raw: f64) -> u8 {
    u8::from(raw >= 0.5)
}

pub(crate) fn check_labels(labels: &[u8], m: usize) -> Result<()> {
    if labels.len() != m {
        return Err(invalid(format!("expected {m} labels, got {}", labels.len())));
    }
    if let Some(y) = labels.iter().find(|&&y| y > 1) {
        return Err(invalid(format!("labels must be 0 or 1, got {y}")));
    }
    Ok(())
}

fn mean_abs_residual(predictions: &[f64], labels: &[u8]) -> f64 {
    let total: f64 = predictions.iter().zip(labels).map(|(p, &y)| (p - f64::from(y)).abs()).sum();
    total / predictions.len() as f64
}

/// `(1/m) sum_i |(K alpha)_i - y_i|`.
pub fn objective(alpha: &[f64], gram: &GramMatrix, labels: &[u8]) -> Result<f64> {
    let m = gram.size();
    if alpha.len() != m {
        return Err(invalid(format!("expected {m} coefficients, got {}", alpha.len())));
    }
    check_labels(labels, m)?;
    Ok(mean_abs_residual(&gram.mul_vec(alpha), labels))
}

fn sign(r: f64) -> f64 {
    if r > 0.0 {
        1.0
    } else if r < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Iterate state: coefficients, cached predictions `K alpha`, and `alpha^T K alpha`.
struct State {
    alpha: Vec<f64>,
    pred: Vec<f64>,
    norm_sq: f64,
}

impl State {
    fn project(&mut self, b: f64) {
        if self.norm_sq > b {
            let scale = (b / self.norm_sq).sqrt();
            self.alpha.iter_mut().for_each(|a| *a *= scale);
            self.pred.iter_mut().for_each(|p| *p *= scale);
            self.norm_sq = b;
        }
    }

    fn resync(&mut self, gram: &GramMatrix) {
        self.pred = gram.mul_vec(&self.alpha);
        self.norm_sq = self.pred.iter().zip(&self.alpha).map(|(p, a)| p * a).sum();
    }
}

/// Minimizes the absolute-loss objective over `{alpha : alpha^T K alpha <= B}`.
///
/// Starts from `alpha = 0` and returns the best iterate seen. Deterministic for
/// fixed inputs and seed. The Gram matrix must already satisfy the PSD checks
/// performed by [`GramMatrix::from_entries`].
pub fn solve_erm(gram: &GramMatrix, labels: &[u8], b: f64, opts: &SolverOptions) -> Result<(Vec<f64>, SolveReport)> {
    let m = gram.size();
    check_labels(labels, m)?;
    if !(b > 0.0 && b.is_finite()) {
        return Err(invalid(format!("B must be positive and finite, got {b}")));
    }
    opts.validate()?;

    let max_sqrt_diag = gram.diagonal().into_iter().fold(0.0f64, f64::max).sqrt();
    let schedule = opts
        .step_schedule
        .unwrap_or_else(|| StepSchedule::InverseSqrt(b.sqrt() / max_sqrt_diag.max(f64::MIN_POSITIVE)));
    let iters = opts.iterations(m);

    let mut state = State { alpha: vec![0.0; m], pred: vec![0.0; m], norm_sq: 0.0 };
    let mut best_alpha = state.alpha.clone();
    let mut best = mean_abs_residual(&state.pred, labels);
    let mut trace = Vec::new();
    let mut iters_used = 0;

    let labels_f: Vec<f64> = labels.iter().map(|&y| f64::from(y)).collect();

    match opts.batch {
        Batch::Full => {
            let mut signs = vec![0.0; m];
            for t in 1..=iters {
                for ((s, p), y) in signs.iter_mut().zip(&state.pred).zip(&labels_f) {
                    *s = sign(p - y);
                }
                if signs.iter().all(|&s| s == 0.0) {
                    break;
                }
                let eta = schedule.step(t) / m as f64;
                for (a, s) in state.alpha.iter_mut().zip(&signs) {
                    *a -= eta * s;
                }
                let delta = gram.mul_vec(&signs);
                for (p, d) in state.pred.iter_mut().zip(&delta) {
                    *p -= eta * d;
                }
                state.norm_sq = state.pred.iter().zip(&state.alpha).map(|(p, a)| p * a).sum();
                state.project(b);
                iters_used = t;

                let value = mean_abs_residual(&state.pred, labels);
                if !value.is_finite() {
                    return Err(Error::Divergence(format!("objective became {value} at iteration {t}")));
                }
                trace.push(value);
                if value < best {
                    best = value;
                    best_alpha.clone_from(&state.alpha);
                }
            }
        }
        Batch::SingleSample => {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            let mut order: Vec<usize> = (0..m).collect();
            let mut t = 0;
            'epochs: while t < iters {
                order.shuffle(&mut rng);
                for &i in &order {
                    if t == iters {
                        break;
                    }
                    t += 1;
                    let s = sign(state.pred[i] - labels_f[i]);
                    if s == 0.0 {
                        continue;
                    }
                    let eta = schedule.step(t);
                    let column = gram.column(i);
                    let p_i = state.pred[i];
                    state.alpha[i] -= eta * s;
                    for (p, k) in state.pred.iter_mut().zip(column) {
                        *p -= eta * s * k;
                    }
                    state.norm_sq += -2.0 * eta * s * p_i + eta * eta * column[i];
                    state.project(b);
                }
                iters_used = t;
                // cached predictions drift under incremental updates
                state.resync(gram);
                state.project(b);
                let value = mean_abs_residual(&state.pred, labels);
                if !value.is_finite() {
                    return Err(Error::Divergence(format!("objective became {value} after {t} steps")));
                }
                trace.push(value);
                if value < best {
                    best = value;
                    best_alpha.clone_from(&state.alpha);
                }
                if value == 0.0 {
                    break 'epochs;
                }
            }
        }
    }

    let final_pred = gram.mul_vec(&best_alpha);
    let final_norm: f64 = final_pred.iter().zip(&best_alpha).map(|(p, a)| p * a).sum();
    let report = SolveReport {
        final_objective: mean_abs_residual(&final_pred, labels),
        objective_trace: trace,
        iters_used,
        constraint_active: final_norm >= b * (1.0 - FEASIBILITY_SLACK),
    };
    Ok((best_alpha, report))
}

/// Builds the Gram matrix of `points`, solves the ERM and wraps the result as a predictor.
pub fn train(
    points: &[Point],
    labels: &[u8],
    spec: &KernelSpec,
    b: f64,
    opts: &SolverOptions,
) -> Result<(DualPredictor, SolveReport)> {
    let g = gram(points, spec)?;
    train_with_gram(points, &g, labels, b, opts)
}

/// As [`train`], reusing a Gram matrix already built over `points`.
pub fn train_with_gram(
    points: &[Point],
    gram: &GramMatrix,
    labels: &[u8],
    b: f64,
    opts: &SolverOptions,
) -> Result<(DualPredictor, SolveReport)> {
    if points.len() != gram.size() {
        return Err(invalid("Gram matrix size does not match the number of points"));
    }
    let (alpha, report) = solve_erm(gram, labels, b, opts)?;
    let predictor = DualPredictor { alpha, anchors: points.to_vec(), spec: *gram.spec(), b_budget: b };
    Ok((predictor, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn g(rows: &[&[f64]]) -> GramMatrix {
        let m = rows.len();
        let flat: Vec<f64> = rows.iter().flat_map(|r| r.iter().copied()).collect();
        GramMatrix::from_entries(DMatrix::from_row_slice(m, m, &flat), KernelSpec::default()).unwrap()
    }

    #[test]
    fn objective_hand_cases() {
        let k = g(&[&[2.0, 1.0], &[1.0, 2.0]]);
        assert_eq!(objective(&[0.0, 0.0], &k, &[0, 0]).unwrap(), 0.0);
        assert_eq!(objective(&[0.0, 0.0], &k, &[1, 1]).unwrap(), 1.0);
        assert_eq!(objective(&[0.5, 0.0], &k, &[1, 0]).unwrap(), 0.25);
        assert!(objective(&[0.5], &k, &[1, 0]).is_err());
        assert!(objective(&[0.5, 0.0], &k, &[1, 2]).is_err());
    }

    #[test]
    fn all_zero_labels_stay_at_origin() {
        let k = g(&[&[2.0, 1.0], &[1.0, 2.0]]);
        let (alpha, report) = solve_erm(&k, &[0, 0], 3.0, &SolverOptions::default()).unwrap();
        assert_eq!(alpha, vec![0.0, 0.0]);
        assert_eq!(report.final_objective, 0.0);
        assert!(!report.constraint_active);
    }

    #[test]
    fn one_point_instances() {
        // prediction 2a, constraint 2a^2 <= B, loss |2a - 1|: zero once B >= 1/2,
        // otherwise 1 - sqrt(2B) on the boundary
        let k = g(&[&[2.0]]);
        let (alpha, report) = solve_erm(&k, &[1], 1.0, &SolverOptions::default()).unwrap();
        assert!(report.final_objective < 1e-4, "{}", report.final_objective);
        assert!((alpha[0] - 0.5).abs() < 1e-4);

        let b = 3.0 - 2.0 * 2f64.sqrt();
        let (alpha, report) = solve_erm(&k, &[1], b, &SolverOptions::default()).unwrap();
        assert!((report.final_objective - (2f64.sqrt() - 1.0)).abs() < 1e-4, "{}", report.final_objective);
        assert!((alpha[0] - (b / 2.0).sqrt()).abs() < 1e-4);
        assert!(report.constraint_active);
    }

    #[test]
    fn projection_lands_on_the_sphere() {
        let k = g(&[&[2.0, 1.0, 0.5], &[1.0, 2.0, 0.3], &[0.5, 0.3, 2.0]]);
        let alpha = vec![3.0, -2.0, 5.0];
        let pred = k.mul_vec(&alpha);
        let norm_sq = k.quadratic_form(&alpha);
        let mut s = State { alpha, pred, norm_sq };
        s.project(1.5);
        let after = k.quadratic_form(&s.alpha);
        assert!((after - 1.5).abs() <= 1e-9 * 1.5);
    }

    proptest::proptest! {
        #[test]
        fn projection_is_exact_for_any_overshoot(
            coeffs in proptest::collection::vec(-50.0f64..50.0, 3),
            b in 1e-3f64..10.0,
        ) {
            let k = g(&[&[2.0, 1.0, 0.5], &[1.0, 2.0, 0.3], &[0.5, 0.3, 2.0]]);
            let norm_sq = k.quadratic_form(&coeffs);
            proptest::prop_assume!(norm_sq > b);
            let pred = k.mul_vec(&coeffs);
            let mut s = State { alpha: coeffs, pred, norm_sq };
            s.project(b);
            let after = k.quadratic_form(&s.alpha);
            proptest::prop_assert!((after - b).abs() <= 1e-9 * b);
        }
    }

    #[test]
    fn best_so_far_is_nonincreasing_and_feasible() {
        let k = g(&[&[2.0, 1.2, 0.7], &[1.2, 2.0, 0.9], &[0.7, 0.9, 1.5]]);
        let opts = SolverOptions { max_iters: Some(2000), ..Default::default() };
        let (alpha, report) = solve_erm(&k, &[1, 0, 1], 0.8, &opts).unwrap();
        assert!(k.quadratic_form(&alpha) <= 0.8 * (1.0 + FEASIBILITY_SLACK));
        let mut best = f64::INFINITY;
        for v in &report.objective_trace {
            assert!(*v >= 0.0);
            best = best.min(*v);
        }
        assert!(report.final_objective <= best + 1e-12);
    }

    #[test]
    fn single_sample_is_seed_deterministic() {
        let k = g(&[&[2.0, 1.2, 0.7], &[1.2, 2.0, 0.9], &[0.7, 0.9, 1.5]]);
        let opts = SolverOptions { batch: Batch::SingleSample, max_iters: Some(3000), seed: 11, ..Default::default() };
        let a = solve_erm(&k, &[1, 0, 1], 4.0, &opts).unwrap();
        let b = solve_erm(&k, &[1, 0, 1], 4.0, &opts).unwrap();
        assert_eq!(a.0, b.0);
        assert_eq!(a.1, b.1);
        assert!(k.quadratic_form(&a.0) <= 4.0 * (1.0 + FEASIBILITY_SLACK));
    }

    #[test]
    fn invalid_options_rejected() {
        let k = g(&[&[2.0]]);
        let bad = SolverOptions { max_iters: Some(0), ..Default::default() };
        assert!(solve_erm(&k, &[1], 1.0, &bad).is_err());
        let bad = SolverOptions { step_schedule: Some(StepSchedule::Constant(-1.0)), ..Default::default() };
        assert!(solve_erm(&k, &[1], 1.0, &bad).is_err());
        assert!(solve_erm(&k, &[1], 0.0, &SolverOptions::default()).is_err());
    }

    #[test]
    fn prediction_conventions() {
        assert_eq!((clip_prob(-0.2), threshold_label(-0.2)), (0.0, 0));
        assert_eq!((clip_prob(0.5), threshold_label(0.5)), (0.5, 1));
        assert_eq!((clip_prob(1.7), threshold_label(1.7)), (1.0, 1));
    }

    #[test]
    fn single_anchor_predicts_kernel_value() {
        let anchor = Point::new(vec![0.6, 0.8]).unwrap();
        let pred = DualPredictor::new(vec![1.0], vec![anchor.clone()], KernelSpec::default(), 2.0).unwrap();
        assert!((pred.predict_raw(&anchor).unwrap() - 2.0).abs() < 1e-15);
        let zero = DualPredictor::new(vec![0.0], vec![anchor], KernelSpec::default(), 2.0).unwrap();
        assert_eq!(zero.predict_raw(&Point::new(vec![0.1, -0.3]).unwrap()).unwrap(), 0.0);
        assert!(zero.predict_raw(&Point::new(vec![0.1]).unwrap()).is_err());
    }

    #[test]
    fn predictor_rejects_infeasible_coefficients() {
        let anchor = Point::new(vec![1.0, 0.0]).unwrap();
        assert!(DualPredictor::new(vec![2.0], vec![anchor], KernelSpec::default(), 1.0).is_err());
    }
}
