//! Explicit leapfrog scheme for `u_tt - u_xx = |x|^alpha |u|^p` with
//! threshold-based blow-up detection.
//!
//! The interior update is
//! `u^{n+1}_i = 2u^n_i - u^{n-1}_i + c^2 (u^n_{i+1} - 2u^n_i + u^n_{i-1}) + dt^2 w_i |u^n_i|^p`
//! with `c = dt/dx` and `w_i` the cell average of `|x|^alpha`. Boundary nodes
//! stay at zero; the grid is required to contain the light cone, so the
//! boundary never sees the solution.

use crate::domain::{Grid1D, ProblemSpec};
use crate::error::{invalid, Error, Result};
use crate::functionals::{self, DiagnosticSeries, Power};

#[derive(Debug, Clone, PartialEq)]
pub struct FdConfig {
    /// `dt / dx`, in `(0, 1]`.
    pub cfl: f64,
    pub t_max: f64,
    /// Strictly increasing sup-norm levels; crossing the last one ends the run.
    pub blowup_thresholds: Vec<f64>,
    /// Diagnostics are recorded every `sample_stride` steps (and at `t = 0`).
    pub sample_stride: usize,
    /// Full-field snapshots are kept at the first level with `t >= ` each entry.
    pub snapshot_times: Vec<f64>,
}

impl Default for FdConfig {
    fn default() -> Self {
        FdConfig {
            cfl: 0.9,
            t_max: 10.0,
            blowup_thresholds: vec![1e3, 3e4, 1e6],
            sample_stride: 1,
            snapshot_times: Vec::new(),
        }
    }
}

impl FdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(invalid("cfl", "0 < cfl <= 1", self.cfl));
        }
        if !(self.t_max > 0.0) || !self.t_max.is_finite() {
            return Err(invalid("t_max", "t_max > 0", self.t_max));
        }
        if self.blowup_thresholds.is_empty() {
            return Err(Error::Precondition("at least one blow-up threshold".into()));
        }
        if self.blowup_thresholds[0] <= 0.0
            || self.blowup_thresholds.windows(2).any(|w| w[1] <= w[0])
        {
            return Err(Error::Precondition(
                "blow-up thresholds must be positive and strictly increasing".into(),
            ));
        }
        if self.sample_stride == 0 {
            return Err(invalid("sample_stride", "sample_stride >= 1", 0.0));
        }
        Ok(())
    }
}

/// Two consecutive time levels: `u_prev` at `t - dt`, `u_curr` at `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldState {
    pub t: f64,
    pub dt: f64,
    pub u_prev: Vec<f64>,
    pub u_curr: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    BlewUp,
    ReachedHorizon,
    NumericalInstability,
}

impl Termination {
    pub fn name(&self) -> &'static str {
        match self {
            Termination::BlewUp => "blew_up",
            Termination::ReachedHorizon => "reached_horizon",
            Termination::NumericalInstability => "numerical_instability",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub termination: Termination,
    /// Present iff the run blew up.
    pub lifespan_estimate: Option<f64>,
    /// Spread between first and last threshold crossing.
    pub uncertainty: Option<f64>,
    /// `(threshold, time)` pairs in threshold order.
    pub threshold_crossings: Vec<(f64, f64)>,
    pub diagnostics: DiagnosticSeries,
    /// `(t, min u over |x| <= t - R)` at every recorded level with `t > R`.
    pub cone_floor: Vec<(f64, f64)>,
    pub snapshots: Vec<(f64, Vec<f64>)>,
    /// Largest `max{|u_i| : |x_i| > t + R + 2dx} / sup|u|` seen at recorded levels.
    pub support_leak: f64,
    pub steps: usize,
    pub grid: Grid1D,
    pub final_state: FieldState,
}

/// Aitken Delta^2 extrapolation of crossing times `t_1 <= t_2 <= t_3`.
/// Falls back to the last crossing when the differences do not contract
/// or the extrapolated value would precede it.
pub fn extrapolate_blowup_time(times: &[f64]) -> f64 {
    let n = times.len();
    if n == 0 {
        return f64::NAN;
    }
    let last = times[n - 1];
    if n < 3 {
        return last;
    }
    let (t1, t2, t3) = (times[n - 3], times[n - 2], times[n - 1]);
    let d1 = t2 - t1;
    let d2 = t3 - t2;
    let denom = d2 - d1;
    if d1 > 0.0 && d2 >= 0.0 && d2 < d1 && denom < 0.0 {
        let est = t3 - d2 * d2 / denom;
        if est.is_finite() && est >= t3 {
            return est;
        }
    }
    last
}

/// Second-order Taylor start: level 0 is `eps f`, level 1 is
/// `u0 + dt eps g + dt^2/2 (D2 u0 + w |u0|^p)`.
pub fn initialize(spec: &ProblemSpec, grid: &Grid1D, cfg: &FdConfig) -> Result<FieldState> {
    spec.validate()?;
    cfg.validate()?;
    let dx = grid.dx;
    let required = cfg.t_max + spec.radius + 2.0 * dx;
    if grid.x_max < required * (1.0 - 1e-12) {
        return Err(Error::GridTooSmall {
            x_max: grid.x_max,
            required,
        });
    }
    let dt = cfg.cfl * dx;
    let u0: Vec<f64> = grid
        .coords()
        .iter()
        .map(|&x| spec.epsilon * spec.f.eval(x))
        .collect();
    let v0: Vec<f64> = grid
        .coords()
        .iter()
        .map(|&x| spec.epsilon * spec.g.eval(x))
        .collect();
    let u1 = taylor_level(&u0, &v0, spec, grid, dt, 1.0)?;
    Ok(FieldState {
        t: dt,
        dt,
        u_prev: u0,
        u_curr: u1,
    })
}

/// `u0 + s dt v0 + dt^2/2 (D2 u0 + w |u0|^p)` with `s = +1` forward, `-1` backward.
fn taylor_level(
    u0: &[f64],
    v0: &[f64],
    spec: &ProblemSpec,
    grid: &Grid1D,
    dt: f64,
    sign: f64,
) -> Result<Vec<f64>> {
    let n = grid.nx;
    let inv_dx2 = 1.0 / (grid.dx * grid.dx);
    let weights = grid.cell_weights(spec.alpha)?;
    let pow = Power::new(spec.p);
    let mut u1 = vec![0.0; n];
    for i in 1..n - 1 {
        let d2 = (u0[i + 1] - 2.0 * u0[i] + u0[i - 1]) * inv_dx2;
        let src = if spec.nonlinear {
            weights[i] * pow.abs_pow(u0[i])
        } else {
            0.0
        };
        u1[i] = u0[i] + sign * dt * v0[i] + 0.5 * dt * dt * (d2 + src);
    }
    Ok(u1)
}

/// Precomputed coefficients of the leapfrog update.
struct Leapfrog {
    weights: Vec<f64>,
    pow: Power,
    nonlinear: bool,
    cfl2: f64,
    dt2: f64,
}

/// Per-step reductions over the updated window.
struct StepStats {
    sup: f64,
}

impl Leapfrog {
    fn new(spec: &ProblemSpec, grid: &Grid1D, dt: f64) -> Result<Leapfrog> {
        let cfl = dt / grid.dx;
        Ok(Leapfrog {
            weights: grid.cell_weights(spec.alpha)?,
            pow: Power::new(spec.p),
            nonlinear: spec.nonlinear,
            cfl2: cfl * cfl,
            dt2: dt * dt,
        })
    }

    /// Overwrites `prev[lo..=hi]` with the next level. Nodes outside the
    /// window must be zero in both `prev` and `curr`.
    fn advance(&self, prev: &mut [f64], curr: &[f64], lo: usize, hi: usize) -> StepStats {
        if !self.nonlinear {
            return self.advance_with(prev, curr, lo, hi, |_| 0.0);
        }
        match self.pow {
            Power::Two => self.advance_with(prev, curr, lo, hi, |v| v * v),
            Power::Three => self.advance_with(prev, curr, lo, hi, |v| {
                let a = v.abs();
                a * a * a
            }),
            Power::General(p) => self.advance_with(prev, curr, lo, hi, |v| {
                if v == 0.0 {
                    0.0
                } else {
                    v.abs().powf(p)
                }
            }),
        }
    }

    #[inline(always)]
    fn advance_with(
        &self,
        prev: &mut [f64],
        curr: &[f64],
        lo: usize,
        hi: usize,
        source: impl Fn(f64) -> f64,
    ) -> StepStats {
        let dt2 = self.dt2;
        let cfl2 = self.cfl2;
        let out = &mut prev[lo..=hi];
        let left = &curr[lo - 1..hi];
        let mid = &curr[lo..=hi];
        let right = &curr[lo + 1..hi + 2];
        let w = &self.weights[lo..=hi];
        for ((((o, &l), &c), &r), &wi) in out.iter_mut().zip(left).zip(mid).zip(right).zip(w) {
            *o = 2.0 * c - *o + cfl2 * (r - 2.0 * c + l) + dt2 * wi * source(c);
        }
        StepStats { sup: sup_abs(out) }
    }
}

/// `max |v|`; infinite if any entry overflowed. NaN entries are skipped.
fn sup_abs(v: &[f64]) -> f64 {
    let mut lanes = [0.0f64; 8];
    let chunks = v.chunks_exact(8);
    let tail = chunks.remainder();
    for ch in chunks {
        for k in 0..8 {
            let a = ch[k].abs();
            lanes[k] = if a > lanes[k] { a } else { lanes[k] };
        }
    }
    let mut m = lanes.iter().fold(0.0f64, |m, &x| m.max(x));
    for &x in tail {
        m = m.max(x.abs());
    }
    m
}

/// Sets flush-to-zero and denormals-are-zero for the current thread and
/// restores the previous mode on drop.
struct FlushSubnormals {
    #[cfg(target_arch = "x86_64")]
    saved: u32,
}

impl FlushSubnormals {
    #[cfg(target_arch = "x86_64")]
    fn enable() -> Self {
        let mut saved: u32 = 0;
        // SAFETY: stmxcsr/ldmxcsr only touch the SSE control register of this thread.
        unsafe {
            std::arch::asm!("stmxcsr [{}]", in(reg) &mut saved, options(nostack));
            let mode = saved | 0x8040;
            std::arch::asm!("ldmxcsr [{}]", in(reg) &mode, options(nostack, readonly));
        }
        FlushSubnormals { saved }
    }

    #[cfg(not(target_arch = "x86_64"))]
    fn enable() -> Self {
        FlushSubnormals {}
    }
}

impl Drop for FlushSubnormals {
    fn drop(&mut self) {
        #[cfg(target_arch = "x86_64")]
        // SAFETY: restores the value read in `enable`.
        unsafe {
            std::arch::asm!("ldmxcsr [{}]", in(reg) &self.saved, options(nostack, readonly));
        }
    }
}

/// One leapfrog step over the full interior.
pub fn step(state: &FieldState, spec: &ProblemSpec, grid: &Grid1D, _cfg: &FdConfig) -> Result<FieldState> {
    grid.check_len(&state.u_prev)?;
    grid.check_len(&state.u_curr)?;
    if let Some(index) = state
        .u_prev
        .iter()
        .chain(&state.u_curr)
        .position(|v| !v.is_finite())
    {
        return Err(Error::NonFinite {
            index: index % grid.nx,
        });
    }
    let lf = Leapfrog::new(spec, grid, state.dt)?;
    let mut next = state.u_prev.clone();
    lf.advance(&mut next, &state.u_curr, 1, grid.nx - 2);
    next[0] = 0.0;
    next[grid.nx - 1] = 0.0;
    Ok(FieldState {
        t: state.t + state.dt,
        dt: state.dt,
        u_prev: state.u_curr.clone(),
        u_curr: next,
    })
}

/// Index hull of the nonzero entries, `None` for the zero field.
fn nonzero_hull(u: &[f64]) -> Option<(usize, usize)> {
    let lo = u.iter().position(|&v| v != 0.0)?;
    let hi = u.iter().rposition(|&v| v != 0.0)?;
    Some((lo, hi))
}

struct Recorder<'a> {
    spec: &'a ProblemSpec,
    grid: &'a Grid1D,
    weights: Vec<f64>,
    series: DiagnosticSeries,
    cone_floor: Vec<(f64, f64)>,
    support_leak: f64,
    scratch_mid: Vec<f64>,
    scratch_vel: Vec<f64>,
}

impl<'a> Recorder<'a> {
    fn new(spec: &'a ProblemSpec, grid: &'a Grid1D) -> Result<Recorder<'a>> {
        Ok(Recorder {
            spec,
            grid,
            weights: grid.cell_weights(spec.alpha)?,
            series: DiagnosticSeries::default(),
            cone_floor: Vec::new(),
            support_leak: 0.0,
            scratch_mid: Vec::new(),
            scratch_vel: Vec::new(),
        })
    }

    /// Records level `curr` at time `t`; `prev` is the level one step
    /// earlier. Both vanish outside `window`.
    fn record(&mut self, t: f64, dt: f64, prev: &[f64], curr: &[f64], window: Option<(usize, usize)>) {
        let grid = self.grid;
        let dx = grid.dx;
        let Some((lo, hi)) = window else {
            self.series.push(t, 0.0, 0.0, 0.0, 0.0);
            if t > self.spec.radius {
                self.cone_floor.push((t, 0.0));
            }
            return;
        };
        // One zero node on each side closes the difference quotients.
        let lo = lo.saturating_sub(1);
        let hi = (hi + 1).min(grid.nx - 1);
        let cu = &curr[lo..=hi];
        let pu = &prev[lo..=hi];
        let f = cu.iter().sum::<f64>() * dx;
        let f2 = functionals::weighted_source_with(cu, &self.weights[lo..=hi], self.spec.p, dx);
        let sup = cu.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        self.scratch_mid.clear();
        self.scratch_vel.clear();
        for (c, p) in cu.iter().zip(pu) {
            self.scratch_mid.push(0.5 * (c + p));
            self.scratch_vel.push((c - p) / dt);
        }
        let e = functionals::energy_sum(&self.scratch_mid, &self.scratch_vel, dx);
        self.series.push(t, f, f2, sup, e);

        let r = self.spec.radius;
        let c = grid.center();
        let reach = t + r + 2.0 * dx;
        let first_out = (reach / dx).floor() as usize + 1;
        if sup > 0.0 && first_out <= c {
            let leak = curr[lo.min(c - first_out)..=c - first_out]
                .iter()
                .chain(&curr[c + first_out..=hi.max(c + first_out)])
                .fold(0.0f64, |m, v| m.max(v.abs()));
            self.support_leak = self.support_leak.max(leak / sup);
        }
        if t > r {
            let k = (((t - r) / dx + 1e-9).floor() as usize).min(c);
            let floor = curr[c - k..=c + k]
                .iter()
                .fold(f64::INFINITY, |m, &v| m.min(v));
            self.cone_floor.push((t, floor));
        }
    }
}

/// Marches until the largest threshold is crossed, the horizon is reached
/// or the field stops being finite.
pub fn solve(spec: &ProblemSpec, grid: &Grid1D, cfg: &FdConfig) -> Result<SolveResult> {
    let mut state = initialize(spec, grid, cfg)?;
    let dt = state.dt;
    let nx = grid.nx;
    let sup0 = state.u_prev.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if sup0 >= cfg.blowup_thresholds[0] {
        return Err(Error::Precondition(format!(
            "initial sup {sup0} exceeds the first blow-up threshold"
        )));
    }
    let lf = Leapfrog::new(spec, grid, dt)?;
    let mut rec = Recorder::new(spec, grid)?;
    // The dispersive precursor ahead of the front decays into subnormals,
    // which are very slow on x86 and carry no information at this scale.
    let _ftz = FlushSubnormals::enable();

    let mut window = match (nonzero_hull(&state.u_prev), nonzero_hull(&state.u_curr)) {
        (None, None) => None,
        (Some(a), None) | (None, Some(a)) => Some(a),
        (Some(a), Some(b)) => Some((a.0.min(b.0), a.1.max(b.1))),
    };
    // Level 0 is recorded against a backward Taylor level so that the
    // staggered energy is defined consistently from the start.
    {
        let v0: Vec<f64> = grid
            .coords()
            .iter()
            .map(|&x| spec.epsilon * spec.g.eval(x))
            .collect();
        let back = taylor_level(&state.u_prev, &v0, spec, grid, dt, -1.0)?;
        rec.record(0.0, dt, &back, &state.u_prev, window);
    }

    let n_max = ((cfg.t_max / dt) - 1e-9).ceil().max(1.0) as usize;
    let mut snapshots: Vec<(f64, Vec<f64>)> = Vec::new();
    let mut pending_snaps: Vec<f64> = cfg.snapshot_times.clone();
    pending_snaps.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let take_snapshots = |t: f64, u: &[f64], snaps: &mut Vec<(f64, Vec<f64>)>, pending: &mut Vec<f64>| {
        while let Some(&ts) = pending.first() {
            if t + 0.5 * dt >= ts {
                snaps.push((t, u.to_vec()));
                pending.remove(0);
            } else {
                break;
            }
        }
    };
    take_snapshots(0.0, &state.u_prev, &mut snapshots, &mut pending_snaps);


    let mut level = 1usize;
    let mut sup_prev = sup0;
    let mut t_prev = 0.0;
    let mut sup_curr = state.u_curr.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut crossings: Vec<(f64, f64)> = Vec::new();
    let mut termination = Termination::ReachedHorizon;

    let check_crossings = |t0: f64, s0: f64, t1: f64, s1: f64, crossings: &mut Vec<(f64, f64)>| {
        while crossings.len() < cfg.blowup_thresholds.len() {
            let theta = cfg.blowup_thresholds[crossings.len()];
            if !(s1 >= theta) {
                break;
            }
            let tc = if s1.is_finite() && s0 > 0.0 && s1 > s0 {
                let frac = (theta.ln() - s0.ln()) / (s1.ln() - s0.ln());
                t0 + (t1 - t0) * frac.clamp(0.0, 1.0)
            } else {
                t1
            };
            crossings.push((theta, tc));
        }
    };

    check_crossings(t_prev, sup_prev, dt, sup_curr, &mut crossings);
    if level % cfg.sample_stride == 0 {
        rec.record(state.t, dt, &state.u_prev, &state.u_curr, window);
    }
    take_snapshots(state.t, &state.u_curr, &mut snapshots, &mut pending_snaps);

    while crossings.len() < cfg.blowup_thresholds.len() && level < n_max {
        let stats = match window {
            Some((lo, hi)) => {
                let lo = lo.saturating_sub(1).max(1);
                let hi = (hi + 1).min(nx - 2);
                window = Some((lo, hi));
                lf.advance(&mut state.u_prev, &state.u_curr, lo, hi)
            }
            None => StepStats { sup: 0.0 },
        };
        std::mem::swap(&mut state.u_prev, &mut state.u_curr);
        level += 1;
        t_prev = state.t;
        state.t = level as f64 * dt;
        sup_prev = sup_curr;
        sup_curr = stats.sup;

        check_crossings(t_prev, sup_prev, state.t, sup_curr, &mut crossings);
        if sup_curr.is_nan() {
            termination = Termination::NumericalInstability;
            break;
        }
        let done = crossings.len() == cfg.blowup_thresholds.len();
        if (level % cfg.sample_stride == 0 || done || level == n_max) && sup_curr.is_finite() {
            rec.record(state.t, dt, &state.u_prev, &state.u_curr, window);
        }
        take_snapshots(state.t, &state.u_curr, &mut snapshots, &mut pending_snaps);
    }

    let mut lifespan_estimate = None;
    let mut uncertainty = None;
    if crossings.len() == cfg.blowup_thresholds.len() {
        termination = Termination::BlewUp;
        let times: Vec<f64> = crossings.iter().map(|c| c.1).collect();
        lifespan_estimate = Some(extrapolate_blowup_time(&times));
        uncertainty = Some(times[times.len() - 1] - times[0]);
    }

    Ok(SolveResult {
        termination,
        lifespan_estimate,
        uncertainty,
        threshold_crossings: crossings,
        diagnostics: rec.series,
        cone_floor: rec.cone_floor,
        snapshots,
        support_leak: rec.support_leak,
        steps: level,
        grid: *grid,
        final_state: state,
    })
}
