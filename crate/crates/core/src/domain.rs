//! Problem parameters, the compactly supported profile family, the
//! symmetric grid and the grid-level integrals shared by every solver.

use std::f64::consts::PI;

use crate::error::{invalid, Error, Result};

/// Nonnegative initial-data profile vanishing outside `|x| <= radius`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProfileKind {
    /// `exp(-1 / (1 - (x/R)^2))` inside the support. C-infinity.
    SmoothBump { radius: f64 },
    /// `max(0, 1 - |x|/R)`. Lipschitz only.
    Hat { radius: f64 },
    /// `cos^2(pi x / (2R))` inside the support. C^1 with bounded second derivative.
    CosineSquared { radius: f64 },
    /// The zero function.
    Null,
}

impl ProfileKind {
    pub fn radius(&self) -> f64 {
        match *self {
            ProfileKind::SmoothBump { radius }
            | ProfileKind::Hat { radius }
            | ProfileKind::CosineSquared { radius } => radius,
            ProfileKind::Null => 0.0,
        }
    }

    pub fn is_null(&self) -> bool {
        matches!(self, ProfileKind::Null)
    }

    /// Same shape with a different support radius.
    pub fn with_radius(&self, radius: f64) -> ProfileKind {
        match self {
            ProfileKind::SmoothBump { .. } => ProfileKind::SmoothBump { radius },
            ProfileKind::Hat { .. } => ProfileKind::Hat { radius },
            ProfileKind::CosineSquared { .. } => ProfileKind::CosineSquared { radius },
            ProfileKind::Null => ProfileKind::Null,
        }
    }

    /// Short name used in config files and CSV labels.
    pub fn name(&self) -> &'static str {
        match self {
            ProfileKind::SmoothBump { .. } => "bump",
            ProfileKind::Hat { .. } => "hat",
            ProfileKind::CosineSquared { .. } => "cos2",
            ProfileKind::Null => "null",
        }
    }

    pub fn from_name(name: &str, radius: f64) -> Option<ProfileKind> {
        match name {
            "bump" | "smooth_bump" => Some(ProfileKind::SmoothBump { radius }),
            "hat" => Some(ProfileKind::Hat { radius }),
            "cos2" | "cosine_squared" => Some(ProfileKind::CosineSquared { radius }),
            "null" | "zero" => Some(ProfileKind::Null),
            _ => None,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        eval_profile(*self, x)
    }

    /// Points where the profile is not smooth, inside its support.
    fn breakpoints(&self) -> &'static [f64] {
        match self {
            ProfileKind::Hat { .. } => &[-1.0, 0.0, 1.0],
            ProfileKind::Null => &[],
            _ => &[-1.0, 1.0],
        }
    }

    /// `int_a^b profile(y) dy` by composite 8-point Gauss-Legendre, split at the
    /// profile's kinks so every panel sees a smooth integrand.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        if self.is_null() || b <= a {
            return 0.0;
        }
        let r = self.radius();
        let lo = a.max(-r);
        let hi = b.min(r);
        if hi <= lo {
            return 0.0;
        }
        let mut cuts = vec![lo];
        cuts.extend(
            self.breakpoints()
                .iter()
                .map(|s| s * r)
                .filter(|&c| c > lo && c < hi),
        );
        cuts.push(hi);
        cuts.windows(2)
            .map(|w| gauss_legendre(|y| self.eval(y), w[0], w[1], 64))
            .sum()
    }

    /// `int |profile|^power dy` over the whole line.
    pub fn power_integral(&self, power: f64) -> f64 {
        let r = self.radius();
        if self.is_null() {
            return 0.0;
        }
        let mut total = 0.0;
        let cuts: Vec<f64> = std::iter::once(-r)
            .chain(self.breakpoints().iter().map(|s| s * r).filter(|c| c.abs() < r))
            .chain(std::iter::once(r))
            .collect();
        for w in cuts.windows(2) {
            total += gauss_legendre(|y| self.eval(y).abs().powf(power), w[0], w[1], 64);
        }
        total
    }
}

/// Profile value at `x`; exactly zero for `|x| >= R`.
pub fn eval_profile(kind: ProfileKind, x: f64) -> f64 {
    match kind {
        ProfileKind::SmoothBump { radius } => {
            let s = x / radius;
            let d = 1.0 - s * s;
            if d <= 0.0 {
                0.0
            } else {
                (-1.0 / d).exp()
            }
        }
        ProfileKind::Hat { radius } => (1.0 - x.abs() / radius).max(0.0),
        ProfileKind::CosineSquared { radius } => {
            if x.abs() >= radius {
                0.0
            } else {
                let c = (PI * x / (2.0 * radius)).cos();
                c * c
            }
        }
        ProfileKind::Null => 0.0,
    }
}

const GL8_NODES: [f64; 8] = [
    -0.960_289_856_497_536_3,
    -0.796_666_477_413_626_7,
    -0.525_532_409_916_329_0,
    -0.183_434_642_495_649_8,
    0.183_434_642_495_649_8,
    0.525_532_409_916_329_0,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];
const GL8_WEIGHTS: [f64; 8] = [
    0.101_228_536_290_376_3,
    0.222_381_034_453_374_5,
    0.313_706_645_877_887_3,
    0.362_683_783_378_362_0,
    0.362_683_783_378_362_0,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_5,
    0.101_228_536_290_376_3,
];

pub(crate) fn gauss_legendre(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let h = (b - a) / panels as f64;
    let mut sum = 0.0;
    for k in 0..panels {
        let mid = a + (k as f64 + 0.5) * h;
        let half = 0.5 * h;
        for (node, weight) in GL8_NODES.iter().zip(GL8_WEIGHTS.iter()) {
            sum += weight * f(mid + half * node);
        }
    }
    sum * 0.5 * h
}

/// Which lifespan regime a parameter set falls under.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// `0 <= alpha < p - 1`, C^2 x C^1 data.
    NonnegativeWeight,
    /// `-1 < alpha < 0`; requires `g` not identically zero.
    SingularWeight,
    /// Outside both regimes (still solvable numerically).
    Unclassified,
}

/// Full parameterization of the Cauchy problem with data `epsilon (f, g)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProblemSpec {
    pub p: f64,
    pub alpha: f64,
    pub epsilon: f64,
    /// Support radius of the data.
    pub radius: f64,
    pub f: ProfileKind,
    pub g: ProfileKind,
    /// When false the source `|x|^alpha |u|^p` is dropped (linear wave equation).
    pub nonlinear: bool,
}

impl ProblemSpec {
    pub fn new(
        p: f64,
        alpha: f64,
        epsilon: f64,
        radius: f64,
        f: ProfileKind,
        g: ProfileKind,
    ) -> Result<ProblemSpec> {
        let spec = ProblemSpec {
            p,
            alpha,
            epsilon,
            radius,
            f,
            g,
            nonlinear: true,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Both profiles are `SmoothBump(radius)`.
    pub fn bump(p: f64, alpha: f64, epsilon: f64, radius: f64) -> Result<ProblemSpec> {
        let bump = ProfileKind::SmoothBump { radius };
        ProblemSpec::new(p, alpha, epsilon, radius, bump, bump)
    }

    pub fn linear(mut self) -> ProblemSpec {
        self.nonlinear = false;
        self
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> ProblemSpec {
        self.epsilon = epsilon;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p > 1.0) || !self.p.is_finite() {
            return Err(invalid("p", "p > 1", self.p));
        }
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return Err(invalid("epsilon", "epsilon > 0", self.epsilon));
        }
        if !(self.radius > 0.0) || !self.radius.is_finite() {
            return Err(invalid("R", "R > 0", self.radius));
        }
        if !(self.alpha > -1.0) || !self.alpha.is_finite() {
            return Err(Error::UnsupportedWeight { alpha: self.alpha });
        }
        for (name, prof) in [("f", self.f), ("g", self.g)] {
            let r = prof.radius();
            if !prof.is_null() && !(r > 0.0 && r <= self.radius) {
                return Err(invalid(
                    if name == "f" { "f" } else { "g" },
                    format!("profile radius must lie in (0, R = {}]", self.radius),
                    r,
                ));
            }
        }
        Ok(())
    }

    pub fn regime(&self) -> Regime {
        if self.alpha >= 0.0 && self.alpha < self.p - 1.0 {
            Regime::NonnegativeWeight
        } else if self.alpha > -1.0 && self.alpha < 0.0 && !self.g.is_null() {
            Regime::SingularWeight
        } else {
            Regime::Unclassified
        }
    }

    /// `G = (1/2) int g`, the interior-cone plateau height per unit epsilon.
    pub fn plateau(&self) -> f64 {
        0.5 * self.g.integral(-self.radius, self.radius)
    }
}

/// Uniform grid symmetric about the origin with an odd node count, so
/// `x = 0` is always the middle node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid1D {
    pub x_max: f64,
    pub nx: usize,
    pub dx: f64,
}

impl Grid1D {
    /// Grid on `[-x_max, x_max]` with `nx` nodes (odd, >= 3).
    pub fn new(x_max: f64, nx: usize) -> Result<Grid1D> {
        if !(x_max > 0.0) || !x_max.is_finite() {
            return Err(invalid("x_max", "x_max > 0", x_max));
        }
        if nx < 3 || nx % 2 == 0 {
            return Err(invalid("nx", "odd node count >= 3", nx as f64));
        }
        Ok(Grid1D {
            x_max,
            nx,
            dx: 2.0 * x_max / (nx - 1) as f64,
        })
    }

    /// Smallest grid with spacing exactly `dx` that covers `[-half_width, half_width]`.
    pub fn covering(half_width: f64, dx: f64) -> Result<Grid1D> {
        if !(dx > 0.0) || !dx.is_finite() {
            return Err(invalid("dx", "dx > 0", dx));
        }
        let half = ((half_width / dx) - 1e-9).ceil().max(1.0) as usize;
        Ok(Grid1D {
            x_max: half as f64 * dx,
            nx: 2 * half + 1,
            dx,
        })
    }

    pub fn x_min(&self) -> f64 {
        -self.x_max
    }

    /// Index of the node at `x = 0`.
    pub fn center(&self) -> usize {
        self.nx / 2
    }

    pub fn x(&self, i: usize) -> f64 {
        (i as f64 - self.center() as f64) * self.dx
    }

    pub fn coords(&self) -> Vec<f64> {
        (0..self.nx).map(|i| self.x(i)).collect()
    }

    pub fn sample(&self, kind: ProfileKind) -> Vec<f64> {
        (0..self.nx).map(|i| kind.eval(self.x(i))).collect()
    }

    /// Cell-averaged weight `(1/dx) int_{x_i - dx/2}^{x_i + dx/2} |x|^alpha dx` at every node.
    pub fn cell_weights(&self, alpha: f64) -> Result<Vec<f64>> {
        if !(alpha > -1.0) {
            return Err(Error::UnsupportedWeight { alpha });
        }
        let h = 0.5 * self.dx;
        let c = self.center() as isize;
        Ok((0..self.nx)
            .map(|i| {
                // Exact node coordinates avoid roundoff in the symmetric pair.
                let x = (i as isize - c) as f64 * self.dx;
                antiderivative(x + h, alpha) - antiderivative(x - h, alpha)
            })
            .map(|v| v / self.dx)
            .collect())
    }

    pub(crate) fn check_len(&self, u: &[f64]) -> Result<()> {
        if u.len() != self.nx {
            return Err(Error::LengthMismatch {
                expected: self.nx,
                got: u.len(),
            });
        }
        Ok(())
    }
}

/// `sign(x) |x|^(alpha+1) / (alpha+1)`, an antiderivative of `|x|^alpha`.
#[inline]
fn antiderivative(x: f64, alpha: f64) -> f64 {
    let e = alpha + 1.0;
    let v = if alpha == 0.0 {
        x.abs()
    } else {
        x.abs().powf(e) / e
    };
    v.copysign(x)
}

/// `int_a^b |x|^alpha dx` from the closed-form antiderivative.
pub fn weighted_cell_integral(a: f64, b: f64, alpha: f64) -> Result<f64> {
    if !(alpha > -1.0) {
        return Err(Error::UnsupportedWeight { alpha });
    }
    if !(a < b) {
        return Err(Error::Precondition(format!("need a < b, got [{a}, {b}]")));
    }
    if a < 0.0 && b > 0.0 {
        // Both halves are positive; summing them avoids cancellation.
        Ok(antiderivative(b, alpha) + antiderivative(-a, alpha))
    } else {
        Ok(antiderivative(b, alpha) - antiderivative(a, alpha))
    }
}

/// Trapezoid sum; with zero endpoints this is the plain Riemann sum.
pub fn trapezoid(u: &[f64], dx: f64) -> f64 {
    match u.len() {
        0 => 0.0,
        1 => 0.0,
        n => (u[1..n - 1].iter().sum::<f64>() + 0.5 * (u[0] + u[n - 1])) * dx,
    }
}

/// Discrete H^1 norm: L^2 part plus forward-difference derivative part.
pub fn discrete_h1_norm(u: &[f64], grid: &Grid1D) -> Result<f64> {
    grid.check_len(u)?;
    let dx = grid.dx;
    let l2: f64 = u.iter().map(|v| v * v).sum::<f64>() * dx;
    let grad: f64 = u
        .windows(2)
        .map(|w| {
            let d = (w[1] - w[0]) / dx;
            d * d
        })
        .sum::<f64>()
        * dx;
    Ok((l2 + grad).sqrt())
}
