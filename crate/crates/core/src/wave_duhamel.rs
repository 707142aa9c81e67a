//! Integral-equation solver on the characteristic lattice.
//!
//! The solution is written as the free wave plus the Duhamel term,
//!
//! `u(t,x) = v0(t,x) + 1/2 int_0^t int_{x-t+s}^{x+t-s} |y|^alpha |u(s,y)|^p dy ds`,
//!
//! with `v0` given by d'Alembert's formula, and the fixed point is found by
//! Picard iteration starting from `v0`. The lattice has `dx = dt`, so every
//! backward cone boundary passes through lattice nodes.

use rayon::prelude::*;

use crate::domain::{weighted_cell_integral, ProblemSpec};
use crate::error::{invalid, Error, Result};
use crate::functionals::Power;

/// Time levels `t_n = n dt`, `n = 0..nt`, with `dt = horizon / (nt - 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConeGrid {
    pub horizon: f64,
    pub nt: usize,
    pub dt: f64,
}

impl ConeGrid {
    pub fn new(horizon: f64, nt: usize) -> Result<ConeGrid> {
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(invalid("T", "T > 0", horizon));
        }
        if nt < 2 {
            return Err(invalid("nt", "nt >= 2", nt as f64));
        }
        Ok(ConeGrid {
            horizon,
            nt,
            dt: horizon / (nt - 1) as f64,
        })
    }

    /// Spacing; equal to the time step.
    pub fn dx(&self) -> f64 {
        self.dt
    }

    pub fn time(&self, level: usize) -> f64 {
        level as f64 * self.dt
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PicardConfig {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for PicardConfig {
    fn default() -> Self {
        PicardConfig {
            tol: 1e-10,
            max_iter: 50,
        }
    }
}

impl PicardConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(invalid("tol", "tol > 0", self.tol));
        }
        if self.max_iter == 0 {
            return Err(invalid("max_iter", "max_iter >= 1", 0.0));
        }
        Ok(())
    }
}

/// Field on the lattice `{(n dt, j dt) : 0 <= n < nt, |j| <= half}`.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeField {
    pub cone: ConeGrid,
    /// Nodes per side; `x_j = j dt` for `-half <= j <= half`.
    pub half: usize,
    values: Vec<f64>,
}

impl LatticeField {
    /// Zero field wide enough for data supported in `|x| <= radius`.
    pub fn zeros(cone: ConeGrid, radius: f64) -> LatticeField {
        let half = ((radius + cone.horizon) / cone.dt - 1e-9).ceil() as usize + 1;
        LatticeField {
            cone,
            half,
            values: vec![0.0; cone.nt * (2 * half + 1)],
        }
    }

    pub fn width(&self) -> usize {
        2 * self.half + 1
    }

    pub fn x(&self, col: usize) -> f64 {
        (col as isize - self.half as isize) as f64 * self.cone.dt
    }

    /// Column index of lattice node `j`.
    pub fn col(&self, node: isize) -> Option<usize> {
        let c = node + self.half as isize;
        (c >= 0 && (c as usize) < self.width()).then_some(c as usize)
    }

    pub fn level(&self, n: usize) -> &[f64] {
        let w = self.width();
        &self.values[n * w..(n + 1) * w]
    }

    fn level_mut(&mut self, n: usize) -> &mut [f64] {
        let w = self.width();
        &mut self.values[n * w..(n + 1) * w]
    }

    pub fn get(&self, level: usize, node: isize) -> Option<f64> {
        if level >= self.cone.nt {
            return None;
        }
        self.col(node).map(|c| self.level(level)[c])
    }

    pub fn set(&mut self, level: usize, node: isize, value: f64) -> Result<()> {
        let c = self
            .col(node)
            .filter(|_| level < self.cone.nt)
            .ok_or(Error::LatticeMisalignment { level, node })?;
        self.level_mut(level)[c] = value;
        Ok(())
    }

    pub fn sup_distance(&self, other: &LatticeField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().fold(f64::INFINITY, |m, &v| m.min(v))
    }
}

/// `eps (f(x+t) + f(x-t))/2 + (eps/2) int_{x-t}^{x+t} g`.
pub fn dalembert(spec: &ProblemSpec, t: f64, x: f64) -> f64 {
    let e = spec.epsilon;
    let translate = 0.5 * e * (spec.f.eval(x + t) + spec.f.eval(x - t));
    if t == 0.0 {
        return translate;
    }
    translate + 0.5 * e * spec.g.integral(x - t, x + t)
}

/// Half-cell weight integrals of `|y|^alpha` at each lattice column:
/// `left[k] = int_{x_k - dt/2}^{x_k}`, `right[k] = int_{x_k}^{x_k + dt/2}`.
struct HalfCells {
    left: Vec<f64>,
    right: Vec<f64>,
}

impl HalfCells {
    fn new(field: &LatticeField, alpha: f64) -> Result<HalfCells> {
        let h = 0.5 * field.cone.dt;
        let mut left = Vec::with_capacity(field.width());
        let mut right = Vec::with_capacity(field.width());
        for k in 0..field.width() {
            let x = field.x(k);
            left.push(weighted_cell_integral(x - h, x, alpha)?);
            right.push(weighted_cell_integral(x, x + h, alpha)?);
        }
        Ok(HalfCells { left, right })
    }
}

/// Per-level `|u|^p` values and prefix sums of `(left + right) |u|^p`.
struct SourceTable {
    width: usize,
    powered: Vec<f64>,
    prefix: Vec<f64>,
}

impl SourceTable {
    fn new(u: &LatticeField, cells: &HalfCells, p: f64) -> SourceTable {
        let width = u.width();
        let pow = Power::new(p);
        let nt = u.cone.nt;
        let mut powered = vec![0.0; nt * width];
        let mut prefix = vec![0.0; nt * (width + 1)];
        for n in 0..nt {
            let row = u.level(n);
            let pw = &mut powered[n * width..(n + 1) * width];
            let pf = &mut prefix[n * (width + 1)..(n + 1) * (width + 1)];
            let mut acc = 0.0;
            for k in 0..width {
                let a = pow.abs_pow(row[k]);
                pw[k] = a;
                acc += (cells.left[k] + cells.right[k]) * a;
                pf[k + 1] = acc;
            }
        }
        SourceTable {
            width,
            powered,
            prefix,
        }
    }

    /// `int_{x_j - h dt}^{x_j + h dt} |y|^alpha |u(s_m, y)|^p dy` by the
    /// product rule (exact weight integral against nodal `|u|^p`).
    fn inner(&self, cells: &HalfCells, m: usize, col: usize, h: usize) -> f64 {
        if h == 0 {
            return 0.0;
        }
        let lo = col.saturating_sub(h);
        let hi = (col + h).min(self.width - 1);
        let pf = &self.prefix[m * (self.width + 1)..];
        let pw = &self.powered[m * self.width..];
        pf[hi + 1] - pf[lo] - cells.left[lo] * pw[lo] - cells.right[hi] * pw[hi]
    }

    /// Duhamel term at `(t_n, x_col)`, trapezoid in `s`.
    fn duhamel(&self, cells: &HalfCells, dt: f64, n: usize, col: usize) -> f64 {
        if n == 0 {
            return 0.0;
        }
        let mut sum = 0.5 * self.inner(cells, 0, col, n);
        for m in 1..n {
            sum += self.inner(cells, m, col, n - m);
        }
        // The m = n term has zero width.
        0.5 * dt * sum
    }
}

/// Duhamel term `1/2 int_0^t int_{x-t+s}^{x+t-s} |y|^alpha |u(s,y)|^p dy ds`
/// at lattice point `(level, node)`.
pub fn duhamel_source(u: &LatticeField, spec: &ProblemSpec, level: usize, node: isize) -> Result<f64> {
    let col = u
        .col(node)
        .filter(|_| level < u.cone.nt)
        .ok_or(Error::LatticeMisalignment { level, node })?;
    if !spec.nonlinear {
        return Ok(0.0);
    }
    let cells = HalfCells::new(u, spec.alpha)?;
    let table = SourceTable::new(u, &cells, spec.p);
    Ok(table.duhamel(&cells, u.cone.dt, level, col))
}

/// Linear part `v0` sampled on the lattice.
pub fn dalembert_field(spec: &ProblemSpec, cone: ConeGrid) -> LatticeField {
    let mut field = LatticeField::zeros(cone, spec.radius);
    let width = field.width();
    let xs: Vec<f64> = (0..width).map(|k| field.x(k)).collect();
    for n in 0..cone.nt {
        let t = cone.time(n);
        let row = field.level_mut(n);
        for (k, &x) in xs.iter().enumerate() {
            row[k] = dalembert(spec, t, x);
        }
    }
    field
}

#[derive(Debug, Clone)]
pub struct PicardOutcome {
    pub field: LatticeField,
    /// Sup-norm change of each iteration.
    pub changes: Vec<f64>,
}

impl PicardOutcome {
    pub fn iterations(&self) -> usize {
        self.changes.len()
    }

    /// Successive change ratios `c_{k+1} / c_k` over iterations with a nonzero change.
    pub fn contraction_ratios(&self) -> Vec<f64> {
        self.changes
            .windows(2)
            .filter(|w| w[0] > 0.0)
            .map(|w| w[1] / w[0])
            .collect()
    }
}

/// One application of the solution map: `v0 + Duhamel(u)`.
fn apply_map(
    v0: &LatticeField,
    u: &LatticeField,
    cells: &HalfCells,
    spec: &ProblemSpec,
) -> LatticeField {
    let mut next = v0.clone();
    if !spec.nonlinear {
        return next;
    }
    let table = SourceTable::new(u, cells, spec.p);
    let dt = u.cone.dt;
    let width = u.width();
    next.values
        .par_chunks_mut(width)
        .enumerate()
        .skip(1)
        .for_each(|(n, row)| {
            for (col, v) in row.iter_mut().enumerate() {
                *v += table.duhamel(cells, dt, n, col);
            }
        });
    next
}

/// Picard iteration `u_{k+1} = v0 + Duhamel(u_k)` from `u_0 = v0`.
pub fn picard_solve(spec: &ProblemSpec, cone: ConeGrid, cfg: &PicardConfig) -> Result<PicardOutcome> {
    spec.validate()?;
    cfg.validate()?;
    let v0 = dalembert_field(spec, cone);
    let cells = HalfCells::new(&v0, spec.alpha)?;
    let mut current = v0.clone();
    let mut changes = Vec::new();
    let mut rising = 0;
    loop {
        let next = apply_map(&v0, &current, &cells, spec);
        let change = next.sup_distance(&current);
        if !change.is_finite() {
            return Err(Error::NonContraction {
                iterations: changes.len() + 1,
                last_change: change,
            });
        }
        if let Some(&last) = changes.last() {
            rising = if change > last { rising + 1 } else { 0 };
        }
        changes.push(change);
        current = next;
        if change < cfg.tol {
            return Ok(PicardOutcome {
                field: current,
                changes,
            });
        }
        if rising >= 3 || changes.len() >= cfg.max_iter {
            return Err(Error::NonContraction {
                iterations: changes.len(),
                last_change: change,
            });
        }
    }
}
