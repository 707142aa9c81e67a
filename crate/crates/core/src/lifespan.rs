//! Epsilon sweeps of the leapfrog solver and least-squares fits of the
//! lifespan exponent `T(eps) ~ C eps^{-kappa}`.

use rayon::prelude::*;

use crate::domain::ProblemSpec;
use crate::error::{invalid, Error, Result};
use crate::wave_fd::{self, FdConfig, SolveResult, Termination};

/// Which branch of the lifespan estimate applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CaseLabel {
    /// `int g > 0`.
    PositiveG,
    /// `g = 0`, `f >= 0` nonzero.
    ZeroG,
}

impl CaseLabel {
    pub fn of(spec: &ProblemSpec) -> CaseLabel {
        if spec.g.is_null() {
            CaseLabel::ZeroG
        } else {
            CaseLabel::PositiveG
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            CaseLabel::PositiveG => "positive_g",
            CaseLabel::ZeroG => "zero_g",
        }
    }
}

/// Upper-bound exponent: `(p-1)/(alpha+2)` for positive `int g`,
/// `p(p-1)/(p+1+alpha)` for `g = 0`.
pub fn theory_exponent(p: f64, alpha: f64, case: CaseLabel) -> Result<f64> {
    if !(p > 1.0) {
        return Err(invalid("p", "p > 1", p));
    }
    match case {
        CaseLabel::PositiveG => {
            if !(alpha > -2.0) {
                return Err(invalid("alpha", "alpha > -2", alpha));
            }
            Ok((p - 1.0) / (alpha + 2.0))
        }
        CaseLabel::ZeroG => {
            if !(alpha >= 0.0 && alpha < p - 1.0) {
                return Err(invalid(
                    "alpha",
                    format!("0 <= alpha < p - 1 = {}", p - 1.0),
                    alpha,
                ));
            }
            Ok(p * (p - 1.0) / (p + 1.0 + alpha))
        }
    }
}

/// Per-epsilon resolution and horizon.
///
/// The predicted lifespan is `C eps^{-kappa}` with `kappa` from
/// [`theory_exponent`]; `C` is either given or measured by a pilot run at the
/// largest epsilon. Each run gets `dx = min(base_dx, T_pred / cells_per_lifespan)`
/// and `t_max = headroom * T_pred`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPolicy {
    pub base_dx: f64,
    pub cells_per_lifespan: f64,
    pub headroom: f64,
    pub prefactor: Option<f64>,
    /// Horizon of the pilot run.
    pub pilot_horizon: f64,
    /// Target number of diagnostic records per run.
    pub max_records: usize,
}

impl Default for GridPolicy {
    fn default() -> Self {
        GridPolicy {
            base_dx: 1.0 / 256.0,
            cells_per_lifespan: 4096.0,
            headroom: 3.0,
            prefactor: None,
            pilot_horizon: 100.0,
            max_records: 4000,
        }
    }
}

impl GridPolicy {
    pub fn validate(&self) -> Result<()> {
        if !(self.base_dx > 0.0) {
            return Err(invalid("base_dx", "base_dx > 0", self.base_dx));
        }
        if !(self.cells_per_lifespan >= 1.0) {
            return Err(invalid("cells_per_lifespan", "cells_per_lifespan >= 1", self.cells_per_lifespan));
        }
        if !(self.headroom >= 1.0) {
            return Err(invalid("headroom", "headroom >= 1", self.headroom));
        }
        if let Some(c) = self.prefactor {
            if !(c > 0.0) {
                return Err(invalid("prefactor", "prefactor > 0", c));
            }
        }
        if !(self.pilot_horizon > 0.0) {
            return Err(invalid("pilot_horizon", "pilot_horizon > 0", self.pilot_horizon));
        }
        if self.max_records == 0 {
            return Err(invalid("max_records", "max_records >= 1", 0.0));
        }
        Ok(())
    }

    pub fn dx_for(&self, predicted: f64) -> f64 {
        self.base_dx.min(predicted / self.cells_per_lifespan)
    }

    /// Grid and solver settings for a run with predicted lifespan `predicted`.
    pub fn run_setup(&self, spec: &ProblemSpec, predicted: f64, cfg: &FdConfig) -> Result<(crate::Grid1D, FdConfig)> {
        let dx = self.dx_for(predicted);
        let t_max = self.headroom * predicted;
        let grid = crate::Grid1D::covering(t_max + spec.radius + 4.0 * dx, dx)?;
        let steps = predicted / (cfg.cfl * dx);
        let stride = ((steps / self.max_records as f64).floor() as usize).max(1);
        let run_cfg = FdConfig {
            t_max,
            sample_stride: stride,
            ..cfg.clone()
        };
        Ok((grid, run_cfg))
    }
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    /// The template with `epsilon` left at its input value.
    pub spec_template: ProblemSpec,
    pub case_label: CaseLabel,
    /// Strictly decreasing.
    pub eps_values: Vec<f64>,
    /// `NaN` where the run did not blow up.
    pub lifespans: Vec<f64>,
    pub uncertainties: Vec<f64>,
    /// Indices whose run did not blow up.
    pub failures: Vec<usize>,
    /// Prefactor used for the horizons.
    pub prefactor: f64,
    pub results: Vec<SolveResult>,
}

impl SweepResult {
    /// Indices `k` where `T(eps_{k+1}) < T(eps_k)` among successful runs.
    pub fn monotonicity_violations(&self) -> Vec<usize> {
        let ok: Vec<usize> = (0..self.eps_values.len())
            .filter(|k| !self.failures.contains(k))
            .collect();
        ok.windows(2)
            .filter(|w| self.lifespans[w[1]] < self.lifespans[w[0]])
            .map(|w| w[0])
            .collect()
    }

    /// First doubling time of `F` per run, `NaN` when not observed.
    pub fn doubling_times(&self) -> Vec<f64> {
        self.results
            .iter()
            .map(|r| r.diagnostics.first_doubling_time().unwrap_or(f64::NAN))
            .collect()
    }
}

/// Runs the leapfrog solver once per epsilon. `cfg` supplies the CFL number
/// and thresholds; horizon, grid and sampling come from `policy`.
pub fn sweep(template: &ProblemSpec, eps_values: &[f64], policy: &GridPolicy, cfg: &FdConfig) -> Result<SweepResult> {
    template.validate()?;
    policy.validate()?;
    cfg.validate()?;
    if eps_values.is_empty() {
        return Err(Error::Precondition("empty epsilon list".into()));
    }
    if eps_values.iter().any(|&e| !(e > 0.0)) || eps_values.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Precondition(
            "epsilon values must be positive and strictly decreasing".into(),
        ));
    }
    let case = CaseLabel::of(template);
    let kappa = theory_exponent(template.p, template.alpha, case)?;
    let eps_max = eps_values[0];

    let (prefactor, pilot) = match policy.prefactor {
        Some(c) => (c, None),
        None => {
            let spec = template.with_epsilon(eps_max);
            let (grid, run_cfg) = policy.run_setup(&spec, policy.pilot_horizon / policy.headroom, cfg)?;
            let res = wave_fd::solve(&spec, &grid, &run_cfg)?;
            let t = res.lifespan_estimate.unwrap_or(policy.pilot_horizon);
            (t * eps_max.powf(kappa), Some(res))
        }
    };

    let predicted = |eps: f64| prefactor * eps.powf(-kappa);
    // The pilot already has the resolution the policy asks for only if its
    // lifespan is long enough; otherwise the first point is rerun.
    let pilot = pilot.filter(|r| {
        r.termination == Termination::BlewUp
            && (policy.dx_for(predicted(eps_max)) - r.grid.dx).abs() <= 1e-15 * r.grid.dx
    });

    let start = usize::from(pilot.is_some());
    let runs: Vec<Result<SolveResult>> = eps_values[start..]
        .par_iter()
        .map(|&eps| {
            let spec = template.with_epsilon(eps);
            let (grid, run_cfg) = policy.run_setup(&spec, predicted(eps), cfg)?;
            wave_fd::solve(&spec, &grid, &run_cfg)
        })
        .collect();

    let mut results = Vec::with_capacity(eps_values.len());
    results.extend(pilot);
    for r in runs {
        results.push(r?);
    }

    let mut lifespans = Vec::with_capacity(results.len());
    let mut uncertainties = Vec::with_capacity(results.len());
    let mut failures = Vec::new();
    for (k, r) in results.iter().enumerate() {
        match (r.termination, r.lifespan_estimate) {
            (Termination::BlewUp, Some(t)) => {
                lifespans.push(t);
                uncertainties.push(r.uncertainty.unwrap_or(0.0));
            }
            _ => {
                failures.push(k);
                lifespans.push(f64::NAN);
                uncertainties.push(f64::NAN);
            }
        }
    }
    if failures.len() == results.len() {
        return Err(Error::AllRunsFailed { runs: results.len() });
    }
    Ok(SweepResult {
        spec_template: *template,
        case_label: case,
        eps_values: eps_values.to_vec(),
        lifespans,
        uncertainties,
        failures,
        prefactor,
        results,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitResult {
    pub kappa_fit: f64,
    /// `log C` in `log T = log C + kappa log(1/eps)`.
    pub intercept: f64,
    pub r_squared: f64,
    pub kappa_theory: f64,
    pub case_label: CaseLabel,
    pub points_used: usize,
}

/// Ordinary least squares `y = a + b x`; returns `(a, b, r^2)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my) * (v - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy > 0.0 {
        (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0)
    } else {
        1.0
    };
    (intercept, slope, r2)
}

/// Points `(log(1/eps), log T)` of the successful runs, skipping the
/// `drop_largest` biggest epsilons.
fn fit_points(sweep: &SweepResult, values: &[f64], drop_largest: usize) -> (Vec<f64>, Vec<f64>) {
    sweep
        .eps_values
        .iter()
        .zip(values)
        .skip(drop_largest)
        .filter(|(_, v)| v.is_finite() && **v > 0.0)
        .map(|(e, v)| (-e.ln(), v.ln()))
        .unzip()
}

/// Slope of `log T` against `log(1/eps)`.
pub fn fit_exponent(sweep: &SweepResult, drop_largest: usize) -> Result<FitResult> {
    let t = &sweep.spec_template;
    let kappa_theory = theory_exponent(t.p, t.alpha, sweep.case_label)?;
    let (x, y) = fit_points(sweep, &sweep.lifespans, drop_largest);
    if x.len() < 3 {
        return Err(Error::InsufficientPoints {
            needed: 3,
            available: x.len(),
        });
    }
    let (intercept, kappa_fit, r_squared) = linear_fit(&x, &y);
    Ok(FitResult {
        kappa_fit,
        intercept,
        r_squared,
        kappa_theory,
        case_label: sweep.case_label,
        points_used: x.len(),
    })
}

/// Prefactor `C` of `T = C eps^{-kappa}` at fixed `kappa`, fitted in the
/// log domain over all successful runs (geometric mean of `T eps^kappa`).
pub fn envelope_prefactor(sweep: &SweepResult, kappa: f64) -> Result<f64> {
    let logs: Vec<f64> = sweep
        .eps_values
        .iter()
        .zip(&sweep.lifespans)
        .filter(|(_, t)| t.is_finite())
        .map(|(e, t)| t.ln() + kappa * e.ln())
        .collect();
    if logs.is_empty() {
        return Err(Error::InsufficientPoints {
            needed: 1,
            available: 0,
        });
    }
    Ok((logs.iter().sum::<f64>() / logs.len() as f64).exp())
}

/// Largest `T / (C eps^{-kappa})` over the successful runs.
pub fn envelope_excess(sweep: &SweepResult, kappa: f64, c: f64) -> f64 {
    sweep
        .eps_values
        .iter()
        .zip(&sweep.lifespans)
        .filter(|(_, t)| t.is_finite())
        .map(|(e, t)| t / (c * e.powf(-kappa)))
        .fold(0.0, f64::max)
}

/// Fit of the first doubling time of `F` against `log(1/eps)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DoublingFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// `(p - 1)/2`.
    pub slope_theory: f64,
    pub points_used: usize,
}

pub fn fit_doubling_times(sweep: &SweepResult, drop_largest: usize) -> Result<DoublingFit> {
    let (x, y) = fit_points(sweep, &sweep.doubling_times(), drop_largest);
    if x.len() < 3 {
        return Err(Error::InsufficientPoints {
            needed: 3,
            available: x.len(),
        });
    }
    let (intercept, slope, r_squared) = linear_fit(&x, &y);
    Ok(DoublingFit {
        slope,
        intercept,
        r_squared,
        slope_theory: 0.5 * (sweep.spec_template.p - 1.0),
        points_used: x.len(),
    })
}

/// Outcome of the interior-cone check `u >= G eps (1 - 0.02)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InteriorCheck {
    pub passed: bool,
    /// `min u / (G eps)` over `|x| <= t - R` at every recorded level and snapshot.
    pub margin: f64,
    pub levels_checked: usize,
}

/// Checks `u(t, x) >= G eps` on `|x| <= t - R`, `G = (1/2) int g`, using the
/// recorded cone minima and any snapshots with `t > R`.
pub fn case1_interior_bound_check(result: &SolveResult, spec: &ProblemSpec) -> Result<InteriorCheck> {
    let g = spec.plateau();
    if !(g > 0.0) {
        return Err(Error::Precondition("interior bound needs int g > 0".into()));
    }
    let r = spec.radius;
    let grid = &result.grid;
    let mut floor = f64::INFINITY;
    let mut levels = 0usize;
    for &(t, m) in &result.cone_floor {
        if t > r {
            floor = floor.min(m);
            levels += 1;
        }
    }
    for (t, u) in &result.snapshots {
        if *t > r && u.len() == grid.nx {
            let c = grid.center();
            let k = (((t - r) / grid.dx + 1e-9).floor() as usize).min(c);
            floor = u[c - k..=c + k].iter().fold(floor, |m, &v| m.min(v));
            levels += 1;
        }
    }
    if levels == 0 {
        return Err(Error::NoInteriorSnapshot);
    }
    let margin = floor / (g * spec.epsilon);
    Ok(InteriorCheck {
        passed: margin >= 0.98,
        margin,
        levels_checked: levels,
    })
}

/// `eps_k = 2^{-k}`, `k = 0..n`.
pub fn dyadic_eps(n: usize) -> Vec<f64> {
    (0..n).map(|k| 0.5f64.powi(k as i32)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::ProfileKind;

    fn synthetic(eps: &[f64], t: impl Fn(f64, usize) -> f64) -> SweepResult {
        let spec = ProblemSpec::bump(2.0, 0.0, 1.0, 1.0).unwrap();
        SweepResult {
            spec_template: spec,
            case_label: CaseLabel::PositiveG,
            eps_values: eps.to_vec(),
            lifespans: eps.iter().enumerate().map(|(k, &e)| t(e, k)).collect(),
            uncertainties: vec![0.0; eps.len()],
            failures: Vec::new(),
            prefactor: 1.0,
            results: Vec::new(),
        }
    }

    #[test]
    fn theory_exponents() {
        assert_eq!(theory_exponent(3.0, 0.0, CaseLabel::PositiveG).unwrap(), 1.0);
        assert!((theory_exponent(2.0, 0.0, CaseLabel::ZeroG).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!((theory_exponent(2.0, 1.0, CaseLabel::PositiveG).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!(theory_exponent(1.0, 0.0, CaseLabel::PositiveG).is_err());
        assert!(theory_exponent(2.0, 1.0, CaseLabel::ZeroG).is_err());
        assert!(theory_exponent(2.0, -0.5, CaseLabel::ZeroG).is_err());
    }

    #[test]
    fn exact_power_law_fit() {
        let s = synthetic(&dyadic_eps(8), |e, _| 1.0 / e);
        let f = fit_exponent(&s, 0).unwrap();
        assert!((f.kappa_fit - 1.0).abs() < 1e-12);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
        assert_eq!(f.points_used, 8);
        assert!(f.intercept.abs() < 1e-12);
    }

    #[test]
    fn noisy_power_law_fit() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let noise: Vec<f64> = (0..8).map(|_| rng.gen_range(-0.01..0.01)).collect();
        let s = synthetic(&dyadic_eps(8), |e, k| 5.0 * e.powf(-2.0 / 3.0) * (1.0 + noise[k]));
        let f = fit_exponent(&s, 2).unwrap();
        assert!((0.63..=0.70).contains(&f.kappa_fit), "{}", f.kappa_fit);
        assert!(f.r_squared >= 0.99);
    }

    #[test]
    fn too_few_points() {
        let s = synthetic(&dyadic_eps(4), |e, _| 1.0 / e);
        assert!(matches!(
            fit_exponent(&s, 2),
            Err(Error::InsufficientPoints { needed: 3, available: 2 })
        ));
    }

    #[test]
    fn envelope_of_exact_law() {
        let s = synthetic(&dyadic_eps(6), |e, _| 3.0 * e.powf(-0.5));
        let c = envelope_prefactor(&s, 0.5).unwrap();
        assert!((c - 3.0).abs() < 1e-12);
        assert!((envelope_excess(&s, 0.5, c) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn monotonicity_report() {
        let s = synthetic(&[1.0, 0.5, 0.25], |_, k| [1.0, 3.0, 2.0][k]);
        assert_eq!(s.monotonicity_violations(), vec![1]);
    }

    #[test]
    fn sweep_rejects_unordered_eps() {
        let spec = ProblemSpec::bump(2.0, 0.0, 1.0, 1.0).unwrap();
        let p = GridPolicy::default();
        let c = FdConfig::default();
        assert!(sweep(&spec, &[0.5, 1.0], &p, &c).is_err());
        assert!(sweep(&spec, &[], &p, &c).is_err());
    }

    #[test]
    fn single_point_sweep_blows_up() {
        let spec = ProblemSpec::bump(2.0, 0.0, 1.0, 1.0).unwrap();
        let policy = GridPolicy {
            base_dx: 1.0 / 64.0,
            cells_per_lifespan: 256.0,
            ..GridPolicy::default()
        };
        let s = sweep(&spec, &[1.0], &policy, &FdConfig::default()).unwrap();
        assert!(s.failures.is_empty());
        assert!(s.lifespans[0].is_finite() && s.lifespans[0] > 0.0);
        assert_eq!(s.results[0].termination, Termination::BlewUp);
    }

    #[test]
    fn null_template_fails_everywhere() {
        let mut spec = ProblemSpec::bump(2.0, 0.0, 1.0, 1.0).unwrap();
        spec.f = ProfileKind::Null;
        spec.g = ProfileKind::Null;
        let policy = GridPolicy {
            base_dx: 1.0 / 16.0,
            pilot_horizon: 5.0,
            ..GridPolicy::default()
        };
        let r = sweep(&spec, &[1.0, 0.5], &policy, &FdConfig::default());
        assert!(matches!(r, Err(Error::AllRunsFailed { runs: 2 })));
    }

    #[test]
    fn interior_check_needs_positive_g() {
        let mut spec = ProblemSpec::bump(2.0, 0.0, 1.0, 1.0).unwrap();
        spec.g = ProfileKind::Null;
        let grid = crate::Grid1D::covering(4.0, 1.0 / 32.0).unwrap();
        let cfg = FdConfig { t_max: 2.0, ..FdConfig::default() };
        let res = wave_fd::solve(&spec, &grid, &cfg).unwrap();
        assert!(matches!(case1_interior_bound_check(&res, &spec), Err(Error::Precondition(_))));
    }

    #[test]
    fn interior_check_linear_plateau() {
        let mut spec = ProblemSpec::bump(2.0, 0.0, 1.0, 1.0).unwrap().linear();
        spec.f = ProfileKind::Null;
        let grid = crate::Grid1D::covering(4.2, 1.0 / 128.0).unwrap();
        let cfg = FdConfig {
            t_max: 3.0,
            snapshot_times: vec![3.0],
            ..FdConfig::default()
        };
        let res = wave_fd::solve(&spec, &grid, &cfg).unwrap();
        let c = case1_interior_bound_check(&res, &spec).unwrap();
        assert!(c.passed);
        assert!((c.margin - 1.0).abs() < 1e-3, "{}", c.margin);
    }

    #[test]
    fn interior_check_without_late_records() {
        let spec = ProblemSpec::bump(2.0, 0.0, 1.0, 1.0).unwrap();
        let grid = crate::Grid1D::covering(2.0, 1.0 / 32.0).unwrap();
        let cfg = FdConfig { t_max: 0.5, ..FdConfig::default() };
        let res = wave_fd::solve(&spec, &grid, &cfg).unwrap();
        assert!(matches!(case1_interior_bound_check(&res, &spec), Err(Error::NoInteriorSnapshot)));
    }
}
