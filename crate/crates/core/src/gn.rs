//! Probes of the weighted Gagliardo-Nirenberg ratio
//! `int |x|^{-b} |u|^{p+1} dx / ||u||_{H^1}^{p+1}`, bounded over nonzero `u`
//! exactly when `0 <= b < 1`.

use rayon::prelude::*;

use crate::domain::{discrete_h1_norm, Grid1D, ProfileKind};
use crate::error::{invalid, Error, Result};
use crate::lifespan::linear_fit;

fn check_exponents(b: f64, p: f64) -> Result<()> {
    if !(p > 1.0) {
        return Err(invalid("p", "p > 1", p));
    }
    if !(b < 1.0) {
        return Err(invalid("b", "b < 1", b));
    }
    Ok(())
}

/// Ratio with the cell-averaged weight `|x|^{-b}` and the discrete `H^1` norm.
pub fn gn_ratio(u: &[f64], grid: &Grid1D, b: f64, p: f64) -> Result<f64> {
    check_exponents(b, p)?;
    grid.check_len(u)?;
    if u.iter().all(|&v| v == 0.0) {
        return Err(Error::ZeroFunction);
    }
    let w = grid.cell_weights(-b)?;
    let num: f64 = u
        .iter()
        .zip(&w)
        .map(|(v, w)| w * v.abs().powf(p + 1.0))
        .sum::<f64>()
        * grid.dx;
    let h1 = discrete_h1_norm(u, grid)?;
    Ok(num / h1.powf(p + 1.0))
}

/// `chi(s)`: the profile rescaled to support `[0, 1]`.
pub fn chi(kind: ProfileKind, s: f64) -> f64 {
    if kind.is_null() {
        return 0.0;
    }
    kind.with_radius(0.5).eval(s - 0.5)
}

/// Samples of `chi(|x| - k)`.
pub fn translated_bump(chi_kind: ProfileKind, k: f64, grid: &Grid1D) -> Result<Vec<f64>> {
    if !(k >= 0.0) {
        return Err(invalid("k", "k >= 0", k));
    }
    if chi_kind.is_null() {
        return Err(Error::ZeroFunction);
    }
    let required = k + 2.0;
    if grid.x_max < required {
        return Err(Error::GridTooSmall {
            x_max: grid.x_max,
            required,
        });
    }
    Ok((0..grid.nx).map(|i| chi(chi_kind, grid.x(i).abs() - k)).collect())
}

/// Named trial function on its own grid.
#[derive(Debug, Clone)]
pub struct TrialFunction {
    pub label: String,
    pub grid: Grid1D,
    pub samples: Vec<f64>,
}

/// Ratios of the translates `u_k` with the log-log growth slope.
#[derive(Debug, Clone, PartialEq)]
pub struct DivergenceScan {
    pub k_values: Vec<f64>,
    pub ratios: Vec<f64>,
    /// Least-squares slope of `log ratio` against `log k`.
    pub slope: f64,
}

fn translate_grid(k: f64, dx: f64) -> Result<Grid1D> {
    Grid1D::covering(k + 2.0, dx)
}

/// Ratios of `chi(|x| - k)` for each `k`, on grids of spacing `dx`.
pub fn translate_scan(chi_kind: ProfileKind, b: f64, p: f64, k_values: &[f64], dx: f64) -> Result<DivergenceScan> {
    check_exponents(b, p)?;
    if k_values.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Precondition("k values must be increasing".into()));
    }
    let ratios = k_values
        .par_iter()
        .map(|&k| {
            let grid = translate_grid(k, dx)?;
            let u = translated_bump(chi_kind, k, &grid)?;
            gn_ratio(&u, &grid, b, p)
        })
        .collect::<Result<Vec<f64>>>()?;
    let slope = if k_values.len() >= 2 && k_values[0] > 0.0 {
        let x: Vec<f64> = k_values.iter().map(|k| k.ln()).collect();
        let y: Vec<f64> = ratios.iter().map(|r| r.ln()).collect();
        linear_fit(&x, &y).1
    } else {
        f64::NAN
    };
    Ok(DivergenceScan {
        k_values: k_values.to_vec(),
        ratios,
        slope,
    })
}

/// Growth of the ratio along translates for `b < 0`; the slope is close to `-b`.
pub fn divergence_scan(chi_kind: ProfileKind, b: f64, p: f64, k_values: &[f64], dx: f64) -> Result<DivergenceScan> {
    if !(b < 0.0) {
        return Err(invalid("b", "b < 0", b));
    }
    translate_scan(chi_kind, b, p, k_values, dx)
}

/// Translates `k = 0, 1, 2, 5, ..., 100`, dilates of half-width `2^{-j}`
/// (`j = 0..=8`, each on a grid resolving its width), and amplitude
/// multiples of the unit bump.
pub fn stress_family(chi_kind: ProfileKind, dx: f64) -> Result<Vec<TrialFunction>> {
    let mut family = Vec::new();
    for &k in &[0.0, 1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0] {
        let grid = translate_grid(k, dx)?;
        family.push(TrialFunction {
            label: format!("translate k={k}"),
            samples: translated_bump(chi_kind, k, &grid)?,
            grid,
        });
    }
    for j in 0..=8 {
        let width = 0.5f64.powi(j);
        let h = dx.min(width / 64.0);
        let grid = Grid1D::covering(width + 1.0, h)?;
        let kind = chi_kind.with_radius(width);
        family.push(TrialFunction {
            label: format!("dilate j={j}"),
            samples: grid.sample(kind),
            grid,
        });
    }
    let unit = chi_kind.with_radius(1.0);
    let grid = Grid1D::covering(2.0, dx)?;
    for &c in &[1e-3, 1.0, 1e3] {
        family.push(TrialFunction {
            label: format!("amplitude c={c}"),
            samples: grid.sample(unit).iter().map(|v| c * v).collect(),
            grid,
        });
    }
    Ok(family)
}

/// Largest ratio over the family, with the label of the maximizer.
pub fn boundedness_scan(b: f64, p: f64, family: &[TrialFunction]) -> Result<(f64, String)> {
    if !(b >= 0.0) {
        return Err(invalid("b", "0 <= b < 1", b));
    }
    check_exponents(b, p)?;
    if family.is_empty() {
        return Err(Error::Precondition("empty trial family".into()));
    }
    let ratios = family
        .par_iter()
        .map(|m| gn_ratio(&m.samples, &m.grid, b, p))
        .collect::<Result<Vec<f64>>>()?;
    let (k, r) = ratios
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (k, &r)| if r > acc.1 { (k, r) } else { acc });
    Ok((r, family[k].label.clone()))
}

/// `int_a^c |x|^{-b} dx` for `0 < a < c`, any real `b`.
fn power_integral(a: f64, c: f64, b: f64) -> f64 {
    let e = 1.0 - b;
    if e.abs() < 1e-14 {
        (c / a).ln()
    } else {
        (c.powf(e) - a.powf(e)) / e
    }
}

/// Discrete ratio for `b >= 1`, where the cell containing the origin is
/// dropped from the weighted sum (its weight integral diverges) and every
/// other cell keeps its exact `|x|^{-b}` average. Returned for each `dx`;
/// the values grow without bound under refinement when `u(0) != 0`.
pub fn singular_refinement_scan(chi_kind: ProfileKind, b: f64, p: f64, dx_values: &[f64]) -> Result<Vec<(f64, f64)>> {
    if !(p > 1.0) {
        return Err(invalid("p", "p > 1", p));
    }
    let unit = chi_kind.with_radius(1.0);
    dx_values
        .iter()
        .map(|&dx| {
            let grid = Grid1D::covering(2.0, dx)?;
            let u = grid.sample(unit);
            let c = grid.center();
            let h = 0.5 * dx;
            let num: f64 = (0..grid.nx)
                .filter(|&i| i != c)
                .map(|i| {
                    let x = (i as f64 - c as f64) * dx;
                    let a = x.abs();
                    power_integral(a - h, a + h, b) * u[i].abs().powf(p + 1.0)
                })
                .sum();
            let h1 = discrete_h1_norm(&u, &grid)?;
            Ok((dx, num / h1.powf(p + 1.0)))
        })
        .collect()
}
