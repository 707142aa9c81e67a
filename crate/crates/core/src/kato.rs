//! Kato-type blow-up lemmas, checked on the extremal ODE.
//!
//! If `F'' >= B (t+R)^{-q} |F|^p`, `F >= A t^a` for `t >= T0`, and either
//! `F(0) >= 0, F'(0) > 0` or (`F(0) > 0, F'(0) = 0` with `F(t0) >= 2F(0)`),
//! then `F` blows up before `2^{M/2} T1` (resp. `2^{M/2} T2`), where
//! `M = (p-1)a/2 - q/2 + 1`, `T1 = max{T0, F(0)/F'(0), R}` and
//! `T2 = max{T0, t0, R}`, provided `T1 >= C0 A^{-(p-1)/(2M)}`.
//!
//! The equality case `F'' = B (t+R)^{-q} |F|^p` is integrated with RK4 and
//! a step size that shrinks like `(|F| + 1)^{-(p-1)/2}`, which tracks the
//! algebraic singularity `F ~ (T - t)^{-2/(p-1)}`.

use rand::{Rng, SeedableRng};

use crate::error::{invalid, Error, Result};
use crate::functionals::{verify_polynomial_lower_bound, DiagnosticSeries};
use crate::wave_fd::extrapolate_blowup_time;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KatoConfig {
    pub p: f64,
    /// Growth exponent `a` of the lower bound `F >= A t^a`.
    pub a: f64,
    pub q: f64,
    /// Coefficient `A` of the lower bound.
    pub lower_coef: f64,
    /// `B` in `F'' >= B (t+R)^{-q} |F|^p`.
    pub b: f64,
    pub radius: f64,
    /// Time `T0` from which the lower bound is required.
    pub t_lower: f64,
    pub f0: f64,
    pub f1: f64,
    /// Doubling time `t0`; selects the `F'(0) = 0` variant.
    pub doubling_time: Option<f64>,
    /// Constant `C0` of the smallness condition, when known.
    pub c0: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LemmaMode {
    /// `F(0) >= 0`, `F'(0) > 0`.
    PositiveSlope,
    /// `F(0) > 0`, `F'(0) = 0`, with a doubling time.
    Doubling,
}

impl KatoConfig {
    pub fn mode(&self) -> LemmaMode {
        if self.doubling_time.is_some() {
            LemmaMode::Doubling
        } else {
            LemmaMode::PositiveSlope
        }
    }

    pub fn m(&self) -> f64 {
        compute_m(self.p, self.a, self.q)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p > 1.0) {
            return Err(invalid("p", "p > 1", self.p));
        }
        if !(self.a > 0.0) {
            return Err(invalid("a", "a > 0", self.a));
        }
        if !(self.q >= 0.0) {
            return Err(invalid("q", "q >= 0", self.q));
        }
        if !(self.b > 0.0) {
            return Err(invalid("B", "B > 0", self.b));
        }
        if !(self.radius > 0.0) {
            return Err(invalid("R", "R > 0", self.radius));
        }
        if !(self.lower_coef >= 0.0) {
            return Err(invalid("A", "A >= 0", self.lower_coef));
        }
        if !(self.t_lower >= 0.0) {
            return Err(invalid("T0", "T0 >= 0", self.t_lower));
        }
        let m = self.m();
        if !(m > 0.0) {
            return Err(invalid("M", "M = (p-1)a/2 - q/2 + 1 > 0", m));
        }
        match self.mode() {
            LemmaMode::PositiveSlope => {
                if !(self.f0 >= 0.0) {
                    return Err(invalid("F0", "F(0) >= 0", self.f0));
                }
                if !(self.f1 > 0.0) {
                    return Err(invalid("F1", "F'(0) > 0", self.f1));
                }
            }
            LemmaMode::Doubling => {
                if !(self.f0 > 0.0) {
                    return Err(invalid("F0", "F(0) > 0", self.f0));
                }
                if self.f1 != 0.0 {
                    return Err(invalid("F1", "F'(0) = 0 with a doubling time", self.f1));
                }
                let t0 = self.doubling_time.unwrap_or(0.0);
                if !(t0 > 0.0) {
                    return Err(invalid("t0", "t0 > 0", t0));
                }
            }
        }
        Ok(())
    }

    /// `T1` or `T2`, depending on the mode.
    pub fn threshold_time(&self) -> f64 {
        let middle = match self.doubling_time {
            Some(t0) => t0,
            None => self.f0 / self.f1,
        };
        self.t_lower.max(middle).max(self.radius)
    }
}

/// `M = (p-1) a / 2 - q / 2 + 1`.
pub fn compute_m(p: f64, a: f64, q: f64) -> f64 {
    (p - 1.0) * a / 2.0 - q / 2.0 + 1.0
}

/// Step control of the extremal-ODE integrator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stepping {
    pub c_step: f64,
    pub dt_max: f64,
    /// Integration gives up past this time.
    pub horizon: f64,
    pub blowup_cap: f64,
}

impl Default for Stepping {
    fn default() -> Self {
        Stepping {
            c_step: 0.01,
            dt_max: 0.01,
            horizon: 1e4,
            blowup_cap: 1e12,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    /// Extrapolated blow-up time.
    pub t_blowup: f64,
    /// `(cap, time)` for the caps `1e-4 cap`, `1e-2 cap`, `cap`.
    pub crossings: Vec<(f64, f64)>,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl Trajectory {
    /// `F` at time `t` by linear interpolation; `+inf` past the last point.
    pub fn value_at(&self, t: f64) -> f64 {
        match self.times.iter().position(|&s| s >= t) {
            Some(0) => self.values[0],
            Some(k) => {
                let (t0, t1) = (self.times[k - 1], self.times[k]);
                let w = (t - t0) / (t1 - t0);
                self.values[k - 1] * (1.0 - w) + self.values[k] * w
            }
            None => f64::INFINITY,
        }
    }

    pub fn as_series(&self) -> DiagnosticSeries {
        DiagnosticSeries::from_f(self.times.clone(), self.values.clone())
    }

    /// Largest `A` with `F(t) >= A t^a` at every point with `t >= t_lower`.
    pub fn lower_bound_coefficient(&self, a: f64, t_lower: f64) -> f64 {
        self.times
            .iter()
            .zip(&self.values)
            .filter(|(&t, _)| t >= t_lower && t > 0.0)
            .map(|(&t, &f)| f / t.powf(a))
            .fold(f64::INFINITY, f64::min)
    }
}

fn rhs(cfg: &KatoConfig, t: f64, f: f64) -> f64 {
    cfg.b * (t + cfg.radius).powf(-cfg.q) * f.abs().powf(cfg.p)
}

/// Integrates `F'' = B (t+R)^{-q} |F|^p` from `(F0, F1)` until `F` crosses
/// `stepping.blowup_cap`.
pub fn integrate_saturated(cfg: &KatoConfig, stepping: &Stepping) -> Result<Trajectory> {
    let cap = stepping.blowup_cap;
    let caps = [cap * 1e-4, cap * 1e-2, cap];
    let expo = 0.5 * (cfg.p - 1.0);
    let (mut t, mut f, mut v) = (0.0f64, cfg.f0, cfg.f1);
    let mut times = vec![t];
    let mut values = vec![f];
    let mut crossings = Vec::with_capacity(3);
    while crossings.len() < caps.len() {
        if t > stepping.horizon {
            return Err(Error::NoBlowupWithinHorizon {
                cap,
                horizon: stepping.horizon,
            });
        }
        // Strong coefficients shorten the local time scale like B^{-1/2}.
        let coef = cfg.b * (t + cfg.radius).powf(-cfg.q);
        let dt = (stepping.c_step * (f.abs() + 1.0).powf(-expo) * coef.max(1.0).powf(-0.5))
            .min(stepping.dt_max);

        let k1f = v;
        let k1v = rhs(cfg, t, f);
        let k2f = v + 0.5 * dt * k1v;
        let k2v = rhs(cfg, t + 0.5 * dt, f + 0.5 * dt * k1f);
        let k3f = v + 0.5 * dt * k2v;
        let k3v = rhs(cfg, t + 0.5 * dt, f + 0.5 * dt * k2f);
        let k4f = v + dt * k3v;
        let k4v = rhs(cfg, t + dt, f + dt * k3f);
        let f_new = f + dt / 6.0 * (k1f + 2.0 * k2f + 2.0 * k3f + k4f);
        let v_new = v + dt / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
        let t_new = t + dt;
        if !f_new.is_finite() {
            // Overflow inside one step: every remaining cap is crossed at t_new.
            while crossings.len() < caps.len() {
                crossings.push((caps[crossings.len()], t_new));
            }
            break;
        }
        while crossings.len() < caps.len() && f_new >= caps[crossings.len()] {
            let c = caps[crossings.len()];
            let tc = if f > 0.0 && f < c {
                t + dt * (c.ln() - f.ln()) / (f_new.ln() - f.ln())
            } else {
                t_new
            };
            crossings.push((c, tc));
        }
        t = t_new;
        f = f_new;
        v = v_new;
        times.push(t);
        values.push(f);
    }
    let ts: Vec<f64> = crossings.iter().map(|c| c.1).collect();
    Ok(Trajectory {
        t_blowup: extrapolate_blowup_time(&ts),
        crossings,
        times,
        values,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct KatoReport {
    pub m: f64,
    /// `T1` or `T2`.
    pub t_threshold: f64,
    /// `2^{M/2} T_threshold`.
    pub bound: f64,
    pub t_blowup_numeric: f64,
    /// `F >= A t^a` verified on the trajectory and, when `C0` is given,
    /// `T_threshold >= C0 A^{-(p-1)/(2M)}`.
    pub condition_met: bool,
    pub certified: bool,
    /// `T_threshold A^{(p-1)/(2M)}`: the quantity the smallness condition compares to `C0`.
    pub scale_ratio: f64,
    pub lower_bound_margin: f64,
}

/// Runs the extremal ODE and checks the lemma's conclusion.
pub fn certify_lemma(cfg: &KatoConfig, stepping: &Stepping) -> Result<KatoReport> {
    cfg.validate()?;
    let m = cfg.m();
    let t_threshold = cfg.threshold_time();
    let bound = 2f64.powf(m / 2.0) * t_threshold;
    let traj = integrate_saturated(cfg, stepping)?;
    if let Some(t0) = cfg.doubling_time {
        let value = traj.value_at(t0);
        if !(value >= 2.0 * cfg.f0) {
            return Err(Error::NoDoubling { t0, value });
        }
    }
    let check = verify_polynomial_lower_bound(&traj.as_series(), cfg.lower_coef, cfg.a, cfg.t_lower);
    let scale_ratio = t_threshold * cfg.lower_coef.powf((cfg.p - 1.0) / (2.0 * m));
    let small_enough = cfg.c0.map_or(true, |c0| scale_ratio >= c0);
    let condition_met = check.holds && small_enough;
    Ok(KatoReport {
        m,
        t_threshold,
        bound,
        t_blowup_numeric: traj.t_blowup,
        condition_met,
        certified: condition_met && traj.t_blowup < bound,
        scale_ratio,
        lower_bound_margin: check.margin,
    })
}

/// Sets `A` to the largest coefficient the extremal trajectory supports
/// (times `1 - 1e-9`), so the growth hypothesis holds by measurement.
pub fn with_measured_lower_bound(cfg: &KatoConfig, stepping: &Stepping) -> Result<KatoConfig> {
    let traj = integrate_saturated(cfg, stepping)?;
    let a = traj.lower_bound_coefficient(cfg.a, cfg.t_lower);
    let mut out = *cfg;
    out.lower_coef = if a.is_finite() { a * (1.0 - 1e-9) } else { 0.0 };
    Ok(out)
}

/// Random exponents and coefficient `(p, a, q, B)` with `M > 0`; the data
/// fields are placeholders to be filled by [`random_data`].
///
/// `q` stays below `p + 1` as well: beyond it the extremal ODE grows only
/// linearly and no `A > 0` can satisfy the growth hypothesis for `a > 1`.
pub fn random_family<R: Rng>(rng: &mut R) -> KatoConfig {
    let p: f64 = rng.gen_range(1.5..4.0);
    let a: f64 = rng.gen_range(1.0..4.0);
    let q_max = ((p - 1.0) * a + 2.0).min(p + 1.0).min(3.5) - 0.5;
    let q = rng.gen_range(0.1..q_max);
    KatoConfig {
        p,
        a,
        q,
        lower_coef: 0.0,
        b: rng.gen_range(0.2..2.0),
        radius: 1.0,
        t_lower: 1.0,
        f0: 0.0,
        f1: 1.0,
        doubling_time: None,
        c0: None,
    }
}

/// Redraws `R`, `T0`, `F(0)`, `F'(0)` for a fixed family, positive-slope mode.
pub fn random_data<R: Rng>(rng: &mut R, family: &KatoConfig) -> KatoConfig {
    KatoConfig {
        radius: rng.gen_range(0.5..2.0),
        t_lower: rng.gen_range(0.5..3.0),
        f0: rng.gen_range(0.0..2.0),
        f1: rng.gen_range(0.1..2.0),
        lower_coef: 0.0,
        doubling_time: None,
        ..*family
    }
}

pub fn random_admissible_config<R: Rng>(rng: &mut R) -> KatoConfig {
    let family = random_family(rng);
    random_data(rng, &family)
}

/// Smallest `C0` for which every report with `scale_ratio >= C0` and a verified
/// growth hypothesis is certified. Zero when no report violates the bound.
pub fn empirical_c0(reports: &[KatoReport]) -> f64 {
    let worst = reports
        .iter()
        .filter(|r| r.lower_bound_margin >= 1.0 && r.t_blowup_numeric >= r.bound)
        .map(|r| r.scale_ratio)
        .fold(0.0f64, f64::max);
    // Strictly above the worst violator.
    worst * (1.0 + 1e-12)
}

/// `n` seeded draws of data for one family, with measured lower-bound
/// coefficients and the given `C0`, each certified.
pub fn family_scan(
    family: &KatoConfig,
    seed: u64,
    n: usize,
    c0: Option<f64>,
    stepping: &Stepping,
) -> Result<Vec<KatoReport>> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let mut k = random_data(&mut rng, family);
            k.c0 = c0;
            let k = with_measured_lower_bound(&k, stepping)?;
            certify_lemma(&k, stepping)
        })
        .collect()
}

/// Calibrates `C0` for one family on `n_cal` draws, then draws held-out data
/// (at most `max_draws`) until one satisfies the condition with `A > 0`. Returns the
/// calibrated constant and that report, if any.
pub fn calibrated_draw(
    family: &KatoConfig,
    seed: u64,
    n_cal: usize,
    max_draws: usize,
    stepping: &Stepping,
) -> Result<(f64, Option<KatoReport>)> {
    let c0 = empirical_c0(&family_scan(family, seed, n_cal, None, stepping)?);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    for _ in 0..max_draws {
        let mut k = random_data(&mut rng, family);
        k.c0 = Some(c0);
        let k = with_measured_lower_bound(&k, stepping)?;
        let r = certify_lemma(&k, stepping)?;
        if r.condition_met && r.scale_ratio > 0.0 {
            return Ok((c0, Some(r)));
        }
    }
    Ok((c0, None))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn closed_form(t_star: f64) -> KatoConfig {
        // F(t) = 6 (T - t)^{-2} solves F'' = F^2.
        KatoConfig {
            p: 2.0,
            a: 2.0,
            q: 0.0,
            lower_coef: 0.0,
            b: 1.0,
            radius: 0.1,
            t_lower: 0.1,
            f0: 6.0 / (t_star * t_star),
            f1: 12.0 / (t_star * t_star * t_star),
            doubling_time: None,
            c0: None,
        }
    }

    #[test]
    fn m_values() {
        assert_eq!(compute_m(2.0, 2.0, 1.0), 1.5);
        let (p, alpha) = (3.0, 0.0);
        assert_eq!(compute_m(p, alpha + 3.0, p - 1.0 - alpha), p * (1.0 + alpha / 2.0));
        assert_eq!(compute_m(p, 2.0, p - 1.0 - alpha), (p + alpha + 1.0) / 2.0);
    }

    #[test]
    fn closed_form_blowup_times() {
        for t_star in [1.0, 2.0] {
            let traj = integrate_saturated(&closed_form(t_star), &Stepping::default()).unwrap();
            assert!((traj.t_blowup - t_star).abs() < 1e-3 * t_star, "{}", traj.t_blowup);
        }
    }

    #[test]
    fn no_blowup_is_reported() {
        let mut cfg = closed_form(1.0);
        cfg.f0 = 0.0;
        cfg.f1 = 1e-3;
        cfg.q = 2.9;
        let stepping = Stepping { horizon: 50.0, ..Stepping::default() };
        assert!(matches!(
            integrate_saturated(&cfg, &stepping),
            Err(Error::NoBlowupWithinHorizon { .. })
        ));
    }

    #[test]
    fn validation() {
        let mut cfg = closed_form(1.0);
        assert!(cfg.validate().is_ok());
        cfg.q = 10.0;
        assert!(cfg.validate().is_err());
        let mut cfg = closed_form(1.0);
        cfg.f1 = 0.0;
        assert!(cfg.validate().is_err());
        cfg.doubling_time = Some(0.5);
        assert!(cfg.validate().is_ok());
        cfg.f0 = 0.0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn threshold_time_picks_max() {
        let cfg = closed_form(1.0);
        assert_eq!(cfg.threshold_time(), 0.5);
    }

    #[test]
    fn doubling_mode_passes_at_first_doubling() {
        let mut cfg = closed_form(1.0);
        cfg.f0 = 1.0;
        cfg.f1 = 0.0;
        cfg.doubling_time = Some(1.0);
        let probe = integrate_saturated(
            &KatoConfig { f1: 1e-300, doubling_time: None, ..cfg },
            &Stepping::default(),
        )
        .unwrap();
        let k = probe.values.iter().position(|&v| v >= 2.0).unwrap();
        cfg.doubling_time = Some(probe.times[k]);
        let rep = certify_lemma(&cfg, &Stepping::default()).unwrap();
        assert!(rep.condition_met);

        cfg.doubling_time = Some(probe.times[k] * 0.5);
        assert!(matches!(
            certify_lemma(&cfg, &Stepping::default()),
            Err(Error::NoDoubling { .. })
        ));
    }

    #[test]
    fn measured_lower_bound_holds() {
        let cfg = with_measured_lower_bound(&closed_form(1.0), &Stepping::default()).unwrap();
        assert!(cfg.lower_coef > 0.0);
        let rep = certify_lemma(&cfg, &Stepping::default()).unwrap();
        assert!(rep.lower_bound_margin >= 1.0);
    }
}
