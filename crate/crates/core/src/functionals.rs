//! Scalar diagnostics of the blow-up argument: the functional
//! `F(t) = int u dx`, its second derivative `F'' = int |x|^alpha |u|^p dx`,
//! the Hölder gap, the linear energy, and the polynomial lower bounds that
//! feed the Kato-type lemmas.

use crate::domain::{Grid1D, ProblemSpec};
use crate::error::{invalid, Error, Result};

/// Time series recorded along a solver run. All arrays have equal length.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DiagnosticSeries {
    pub times: Vec<f64>,
    pub f: Vec<f64>,
    pub f_second: Vec<f64>,
    pub energy: Vec<f64>,
    pub sup_norm: Vec<f64>,
}

impl DiagnosticSeries {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn push(&mut self, t: f64, f: f64, f_second: f64, sup_norm: f64, energy: f64) {
        self.times.push(t);
        self.f.push(f);
        self.f_second.push(f_second);
        self.sup_norm.push(sup_norm);
        self.energy.push(energy);
    }

    /// Builds a series from `(t, F)` pairs with the other channels zeroed.
    pub fn from_f(times: Vec<f64>, f: Vec<f64>) -> DiagnosticSeries {
        let n = times.len();
        DiagnosticSeries {
            times,
            f,
            f_second: vec![0.0; n],
            energy: vec![0.0; n],
            sup_norm: vec![0.0; n],
        }
    }

    /// Equal lengths, strictly increasing times, nonnegative `F''`.
    pub fn check_invariants(&self) -> bool {
        let n = self.times.len();
        [self.f.len(), self.f_second.len(), self.energy.len(), self.sup_norm.len()]
            .iter()
            .all(|&l| l == n)
            && self.times.windows(2).all(|w| w[1] > w[0])
            && self.f_second.iter().all(|&v| v >= 0.0)
    }

    /// First time at which `F` reaches `2 F(0)`, linearly interpolated
    /// between records. `None` if `F(0) <= 0` or no doubling was recorded.
    pub fn first_doubling_time(&self) -> Option<f64> {
        let f0 = *self.f.first()?;
        if !(f0 > 0.0) {
            return None;
        }
        let target = 2.0 * f0;
        for k in 1..self.len() {
            if self.f[k] >= target {
                let (t0, t1) = (self.times[k - 1], self.times[k]);
                let (a, b) = (self.f[k - 1], self.f[k]);
                return Some(t0 + (t1 - t0) * (target - a) / (b - a));
            }
        }
        None
    }
}

/// `F = int u dx` by the trapezoid rule.
pub fn integral_f(u: &[f64], grid: &Grid1D) -> Result<f64> {
    grid.check_len(u)?;
    if u[0] != 0.0 || u[grid.nx - 1] != 0.0 {
        return Err(Error::SupportAtBoundary);
    }
    Ok(u.iter().sum::<f64>() * grid.dx)
}

/// `|u|^p` with fast paths for the integer exponents used in the experiments.
#[derive(Debug, Clone, Copy)]
pub(crate) enum Power {
    Two,
    Three,
    General(f64),
}

impl Power {
    pub(crate) fn new(p: f64) -> Power {
        if p == 2.0 {
            Power::Two
        } else if p == 3.0 {
            Power::Three
        } else {
            Power::General(p)
        }
    }

    #[inline(always)]
    pub(crate) fn abs_pow(self, v: f64) -> f64 {
        let a = v.abs();
        match self {
            Power::Two => a * a,
            Power::Three => a * a * a,
            Power::General(p) => a.powf(p),
        }
    }
}

pub(crate) fn weighted_source_with(u: &[f64], weights: &[f64], p: f64, dx: f64) -> f64 {
    let pow = Power::new(p);
    u.iter()
        .zip(weights)
        .filter(|(v, _)| **v != 0.0)
        .map(|(v, w)| w * pow.abs_pow(*v))
        .sum::<f64>()
        * dx
}

/// `F'' = sum_i w_i |u_i|^p dx` with cell-averaged weights `w_i`.
pub fn weighted_source(u: &[f64], grid: &Grid1D, alpha: f64, p: f64) -> Result<f64> {
    grid.check_len(u)?;
    let w = grid.cell_weights(alpha)?;
    Ok(weighted_source_with(u, &w, p, grid.dx))
}

/// Constants of the differential inequality `F'' >= B (t+R)^{-q} |F|^p`
/// obtained from Hölder's inequality on `|x| <= t + R`:
/// `q = p - 1 - alpha`, `B = 2^{1-p} (1 - alpha/(p-1))^{p-1}`.
pub fn holder_constants(p: f64, alpha: f64) -> Result<(f64, f64)> {
    if !(p > 1.0) {
        return Err(invalid("p", "p > 1", p));
    }
    if !(alpha < p - 1.0) {
        return Err(invalid("alpha", format!("alpha < p - 1 = {}", p - 1.0), alpha));
    }
    let q = p - 1.0 - alpha;
    let b = 2f64.powf(1.0 - p) * (1.0 - alpha / (p - 1.0)).powf(p - 1.0);
    Ok((b, q))
}

/// Slack `F'' - B (t+R)^{-q} |F|^p`; nonnegative on genuine solutions.
pub fn holder_gap(f_val: f64, f2_val: f64, t: f64, radius: f64, p: f64, alpha: f64) -> Result<f64> {
    let (b, q) = holder_constants(p, alpha)?;
    Ok(f2_val - b * (t + radius).powf(-q) * f_val.abs().powf(p))
}

/// `(1/2) sum (u_t^2 + (D+ u)^2) dx`.
pub fn energy(u: &[f64], u_t: &[f64], grid: &Grid1D) -> Result<f64> {
    grid.check_len(u)?;
    grid.check_len(u_t)?;
    Ok(energy_sum(u, u_t, grid.dx))
}

pub(crate) fn energy_sum(u: &[f64], u_t: &[f64], dx: f64) -> f64 {
    let kinetic: f64 = u_t.iter().map(|v| v * v).sum();
    let potential: f64 = u
        .windows(2)
        .map(|w| {
            let d = (w[1] - w[0]) / dx;
            d * d
        })
        .sum();
    0.5 * (kinetic + potential) * dx
}

/// Outcome of checking `F(t_k) >= A t_k^a` for every record with `t_k >= T0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LowerBoundCheck {
    pub holds: bool,
    /// `min F / (A t^a)` over the checked records; `+inf` when `A = 0` or
    /// when no record lies past `T0`.
    pub margin: f64,
    pub checked: usize,
}

pub fn verify_polynomial_lower_bound(
    series: &DiagnosticSeries,
    a_coef: f64,
    a_exp: f64,
    t0: f64,
) -> LowerBoundCheck {
    let mut margin = f64::INFINITY;
    let mut checked = 0;
    for (&t, &f) in series.times.iter().zip(&series.f) {
        if t < t0 {
            continue;
        }
        checked += 1;
        let bound = a_coef * t.powf(a_exp);
        if bound > 0.0 {
            margin = margin.min(f / bound);
        } else if f < bound {
            margin = f64::NEG_INFINITY;
        }
    }
    LowerBoundCheck {
        holds: margin >= 1.0,
        margin,
        checked,
    }
}

/// `F(t) >= A t^a` for `t >= t_start`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolynomialBound {
    pub coefficient: f64,
    pub exponent: f64,
    pub t_start: f64,
}

/// Lower bound for positive `int g`.
///
/// From `u >= G eps` on `|x| <= t - R`:
/// `F'' >= 2 (G eps)^p (t-R)^{alpha+1} / (alpha+1)` for `t > R`. Integrating
/// twice from `R` and dropping the nonnegative `F(R) + F'(R)(t-R)`:
/// `F >= 2 G^p eps^p (t-R)^{alpha+3} / ((alpha+1)(alpha+2)(alpha+3))`.
/// For `t >= 2R`, `t - R >= t/2`, which gives
/// `A = 2 G^p eps^p / ((alpha+1)(alpha+2)(alpha+3) 2^{alpha+3})`, `a = alpha + 3`.
pub fn positive_g_lower_bound(spec: &ProblemSpec) -> PolynomialBound {
    let g = spec.plateau();
    let al = spec.alpha;
    let coefficient = 2.0 * (g * spec.epsilon).powf(spec.p)
        / ((al + 1.0) * (al + 2.0) * (al + 3.0) * 2f64.powf(al + 3.0));
    PolynomialBound {
        coefficient,
        exponent: al + 3.0,
        t_start: 2.0 * spec.radius,
    }
}

/// Lower bound for `g = 0`, `f >= 0` not identically zero, `alpha >= 0`.
///
/// The right-moving pulse gives `u >= (eps/2) f(x - t)`; for `t >= 2R` the
/// weight satisfies `|x|^alpha >= |x - t|^alpha` on the pulse, so
/// `F'' >= K eps^p` with `K = 2^{-p} int |f|^p |y|^alpha dy`. Integrating
/// twice from `2R` gives `F >= (K/2) eps^p (t - 2R)^2`, and for `t >= 4R`,
/// `(t - 2R)^2 >= t^2 / 4`: `A = K eps^p / 8`, `a = 2`.
pub fn zero_g_lower_bound(spec: &ProblemSpec) -> PolynomialBound {
    let k = zero_g_source_floor(spec);
    PolynomialBound {
        coefficient: k * spec.epsilon.powf(spec.p) / 8.0,
        exponent: 2.0,
        t_start: 4.0 * spec.radius,
    }
}

/// `2^{-p} int |f(y)|^p |y|^alpha dy`.
fn zero_g_source_floor(spec: &ProblemSpec) -> f64 {
    let r = spec.f.radius();
    if spec.f.is_null() {
        return 0.0;
    }
    let f = spec.f;
    let p = spec.p;
    let al = spec.alpha;
    let half = crate::domain::gauss_legendre(|y| f.eval(y).powf(p) * y.abs().powf(al), 0.0, r, 256);
    2.0 * half * 2f64.powf(-p)
}

/// Doubling-time scale `t0 = (2 ||f||_1 / C)^{1/2} eps^{(1-p)/2}` implied by
/// `F >= C eps^p t^2` and `F(0) = eps ||f||_1`, with `C` from
/// [`zero_g_lower_bound`].
pub fn zero_g_doubling_time_bound(spec: &ProblemSpec) -> f64 {
    let l1 = spec.f.integral(-spec.radius, spec.radius);
    let c = zero_g_source_floor(spec) / 8.0;
    (2.0 * l1 / c).sqrt() * spec.epsilon.powf(0.5 * (1.0 - spec.p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::ProfileKind;

    fn grid() -> Grid1D {
        Grid1D::covering(4.0, 1.0 / 512.0).unwrap()
    }

    #[test]
    fn f_integral_of_hat() {
        let g = grid();
        assert_eq!(integral_f(&vec![0.0; g.nx], &g).unwrap(), 0.0);
        let u = g.sample(ProfileKind::Hat { radius: 1.0 });
        assert!((integral_f(&u, &g).unwrap() - 1.0).abs() < 1e-13);
    }

    #[test]
    fn f_integral_rejects_support_at_boundary() {
        let g = grid();
        let u = vec![1.0; g.nx];
        assert!(matches!(integral_f(&u, &g), Err(Error::SupportAtBoundary)));
    }

    #[test]
    fn weighted_source_examples() {
        let g = grid();
        let u = g.sample(ProfileKind::Hat { radius: 1.0 });
        let s = weighted_source(&u, &g, 0.0, 2.0).unwrap();
        assert!((s - 2.0 / 3.0).abs() < 1e-5, "{s}");
        assert_eq!(weighted_source(&vec![0.0; g.nx], &g, 0.0, 2.0).unwrap(), 0.0);

        let plateau: Vec<f64> = g
            .coords()
            .iter()
            .map(|&x| if (0.0..=1.0).contains(&x) { 1.0 } else { 0.0 })
            .collect();
        let s = weighted_source(&plateau, &g, 1.0, 3.0).unwrap();
        assert!((s - 0.5).abs() < 2.0 * g.dx, "{s}");
        assert!(weighted_source(&u, &g, -1.0, 2.0).is_err());
    }

    #[test]
    fn holder_constant_values() {
        assert_eq!(holder_constants(2.0, 0.0).unwrap(), (0.5, 1.0));
        let (b, q) = holder_constants(3.0, 1.0).unwrap();
        assert!((b - 1.0 / 16.0).abs() < 1e-15);
        assert_eq!(q, 1.0);
        assert!(holder_constants(2.0, 1.0).is_err());
        assert!(holder_constants(1.0, 0.0).is_err());
    }

    #[test]
    fn holder_gap_snapshot() {
        let gap = holder_gap(1.0, 2.0 / 3.0, 0.0, 1.0, 2.0, 0.0).unwrap();
        assert!((gap - 1.0 / 6.0).abs() < 1e-15);
        assert_eq!(holder_gap(0.0, 0.0, 3.0, 1.0, 2.0, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn energy_examples() {
        let g = grid();
        let z = vec![0.0; g.nx];
        assert_eq!(energy(&z, &z, &g).unwrap(), 0.0);
        let ut = g.sample(ProfileKind::Hat { radius: 1.0 });
        let e = energy(&z, &ut, &g).unwrap();
        assert!((e - 1.0 / 3.0).abs() < 1e-5);
        assert!(energy(&z, &ut[1..], &g).is_err());
    }

    #[test]
    fn lower_bound_verifier() {
        let times: Vec<f64> = (0..50).map(|k| k as f64 * 0.1).collect();
        let f: Vec<f64> = times.iter().map(|t| t * t).collect();
        let s = DiagnosticSeries::from_f(times, f);
        let c = verify_polynomial_lower_bound(&s, 1.0, 2.0, 1.0);
        assert!(c.holds);
        assert!((c.margin - 1.0).abs() < 1e-12);
        let c = verify_polynomial_lower_bound(&s, 0.0, 2.0, 1.0);
        assert!(c.holds && c.margin.is_infinite());
        let c = verify_polynomial_lower_bound(&s, 1.1, 2.0, 1.0);
        assert!(!c.holds);
    }

    #[test]
    fn doubling_time_interpolates() {
        let times = vec![0.0, 1.0, 2.0, 3.0];
        let f = vec![1.0, 1.5, 2.5, 4.0];
        let s = DiagnosticSeries::from_f(times, f);
        assert!((s.first_doubling_time().unwrap() - 1.5).abs() < 1e-15);
        let s = DiagnosticSeries::from_f(vec![0.0, 1.0], vec![0.0, 1.0]);
        assert!(s.first_doubling_time().is_none());
    }

    #[test]
    fn case_constants_are_positive() {
        let spec = ProblemSpec::bump(2.0, 0.5, 1.0, 1.0).unwrap();
        let b = positive_g_lower_bound(&spec);
        assert!(b.coefficient > 0.0 && b.exponent == 3.5 && b.t_start == 2.0);
        let mut z = spec;
        z.g = ProfileKind::Null;
        let b = zero_g_lower_bound(&z);
        assert!(b.coefficient > 0.0 && b.exponent == 2.0);
        assert!(zero_g_doubling_time_bound(&z) > 0.0);
    }
}
