//! Beta-distribution special functions and trapezoid quadrature on [0, 1].
//!
//! Every integral in the IDS pipeline is evaluated on a fixed [`Grid`]. The
//! Beta CDF is computed with a continued fraction rather than by cumulative
//! quadrature, so its accuracy does not depend on the grid.

use crate::error::{Error, Result};

/// Value returned by [`beta_pdf`] at an endpoint where the density diverges.
///
/// On a grid this cap enters the trapezoid sum with weight `h / 2`, so
/// quadrature of a density with a shape parameter below one is badly biased.
/// The default Beta(1, 1) prior never hits it.
pub const PDF_CAP: f64 = 1e12;

/// Default number of grid points (1000 intervals).
pub const DEFAULT_GRID_POINTS: usize = 1001;

const LANCZOS_G: f64 = 10.900511;
const LANCZOS_COEFFS: [f64; 11] = [
    2.48574089138753565546e-5,
    1.05142378581721974210,
    -3.45687097222016235469,
    4.51227709466894823700,
    -2.98285225323576655721,
    1.05639711577126713077,
    -1.95428773191645869583e-1,
    1.70970543404441224307e-2,
    -5.71926117404305781283e-4,
    4.63399473359905636708e-6,
    -2.71994908488607703910e-9,
];
// ln(2 * sqrt(e / pi))
const LN_2_SQRT_E_OVER_PI: f64 = 0.620_782_237_635_245_2;

const CF_MAX_ITERS: usize = 10_000;
const CF_EPS: f64 = 1e-16;
const CF_TINY: f64 = 1e-300;

/// Natural log of the gamma function for `x > 0`.
pub fn log_gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!("log_gamma requires x > 0, got {x}")));
    }
    Ok(ln_gamma(x))
}

/// Lanczos approximation; callers guarantee `x > 0`.
pub(crate) fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // reflection: Γ(x)Γ(1-x) = π / sin(πx)
        let s = (std::f64::consts::PI * x).sin();
        return std::f64::consts::PI.ln() - s.ln() - ln_gamma(1.0 - x);
    }
    let series = LANCZOS_COEFFS
        .iter()
        .enumerate()
        .skip(1)
        .fold(LANCZOS_COEFFS[0], |acc, (i, c)| {
            acc + c / (x + i as f64 - 1.0)
        });
    series.ln()
        + LN_2_SQRT_E_OVER_PI
        + (x - 0.5) * ((x - 0.5 + LANCZOS_G) / std::f64::consts::E).ln()
}

/// ln B(a, b).
pub(crate) fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

fn check_shape(b1: f64, b2: f64) -> Result<()> {
    if !(b1 > 0.0 && b2 > 0.0 && b1.is_finite() && b2.is_finite()) {
        return Err(Error::Domain(format!(
            "Beta shape parameters must be positive, got ({b1}, {b2})"
        )));
    }
    Ok(())
}

fn check_unit(x: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Domain(format!("x must lie in [0, 1], got {x}")));
    }
    Ok(())
}

/// Density of Beta(b1, b2) at `x`, capped at [`PDF_CAP`] where it diverges.
pub fn beta_pdf(x: f64, b1: f64, b2: f64) -> Result<f64> {
    check_shape(b1, b2)?;
    check_unit(x)?;
    Ok(BetaDensity::new_unchecked(b1, b2).pdf(x))
}

/// Regularized incomplete beta function I_x(b1, b2).
pub fn beta_cdf(x: f64, b1: f64, b2: f64) -> Result<f64> {
    check_shape(b1, b2)?;
    check_unit(x)?;
    Ok(BetaDensity::new_unchecked(b1, b2).cdf(x))
}

/// A Beta(b1, b2) law with its normalizer precomputed.
///
/// Grid evaluation calls `pdf`/`cdf` once per point, so the log-beta term is
/// hoisted out of the loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaDensity {
    b1: f64,
    b2: f64,
    ln_beta: f64,
}

impl BetaDensity {
    pub fn new(b1: f64, b2: f64) -> Result<Self> {
        check_shape(b1, b2)?;
        Ok(Self::new_unchecked(b1, b2))
    }

    pub(crate) fn new_unchecked(b1: f64, b2: f64) -> Self {
        Self {
            b1,
            b2,
            ln_beta: ln_beta(b1, b2),
        }
    }

    pub fn shape(&self) -> (f64, f64) {
        (self.b1, self.b2)
    }

    pub fn mean(&self) -> f64 {
        self.b1 / (self.b1 + self.b2)
    }

    /// Density at `x ∈ [0, 1]`.
    pub fn pdf(&self, x: f64) -> f64 {
        let (a, b) = (self.b1, self.b2);
        if x <= 0.0 {
            return endpoint_pdf(a, self.ln_beta);
        }
        if x >= 1.0 {
            return endpoint_pdf(b, self.ln_beta);
        }
        ((a - 1.0) * x.ln() + (b - 1.0) * (-x).ln_1p() - self.ln_beta).exp()
    }

    /// Distribution function at `x ∈ [0, 1]`.
    pub fn cdf(&self, x: f64) -> f64 {
        let (a, b) = (self.b1, self.b2);
        if x <= 0.0 {
            return 0.0;
        }
        if x >= 1.0 {
            return 1.0;
        }
        let ln_front = a * x.ln() + b * (-x).ln_1p() - self.ln_beta;
        let front = ln_front.exp();
        let value = if x < (a + 1.0) / (a + b + 2.0) {
            front * continued_fraction(a, b, x) / a
        } else {
            1.0 - front * continued_fraction(b, a, 1.0 - x) / b
        };
        value.clamp(0.0, 1.0)
    }
}

/// Density at the endpoint where the `near` exponent applies.
fn endpoint_pdf(near: f64, ln_beta: f64) -> f64 {
    if near < 1.0 {
        PDF_CAP
    } else if near > 1.0 {
        0.0
    } else {
        (-ln_beta).exp()
    }
}

/// Continued fraction for I_x(a, b), evaluated with the modified Lentz method.
fn continued_fraction(a: f64, b: f64, x: f64) -> f64 {
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < CF_TINY {
        d = CF_TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=CF_MAX_ITERS {
        let m = m as f64;
        let m2 = 2.0 * m;

        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < CF_TINY {
            d = CF_TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < CF_TINY {
            c = CF_TINY;
        }
        d = 1.0 / d;
        h *= d * c;

        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < CF_TINY {
            d = CF_TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < CF_TINY {
            c = CF_TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < CF_EPS {
            break;
        }
    }
    h
}

/// Ordered abscissae in [0, 1] on which integrands are sampled.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    points: Vec<f64>,
}

impl Grid {
    /// Evenly spaced grid with `count` points including both endpoints.
    pub fn uniform(count: usize) -> Result<Self> {
        if count < 3 {
            return Err(Error::InvalidGrid(format!(
                "need at least 3 points, got {count}"
            )));
        }
        let n = (count - 1) as f64;
        let points = (0..count).map(|i| i as f64 / n).collect();
        Ok(Self { points })
    }

    /// Grid from explicit abscissae; they must be strictly increasing within [0, 1].
    pub fn from_points(points: Vec<f64>) -> Result<Self> {
        if points.len() < 3 {
            return Err(Error::InvalidGrid(format!(
                "need at least 3 points, got {}",
                points.len()
            )));
        }
        if points[0] < 0.0 || points[points.len() - 1] > 1.0 {
            return Err(Error::InvalidGrid("points must lie in [0, 1]".into()));
        }
        if points.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidGrid(
                "points must be strictly increasing".into(),
            ));
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Composite trapezoid estimate of the integral over the grid's span.
    pub fn integrate(&self, values: &[f64]) -> Result<f64> {
        self.check_len(values)?;
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("non-finite integrand value {bad}")));
        }
        Ok(self.trapezoid(values))
    }

    /// Running trapezoid integral: entry `k` is the integral from the first
    /// point up to point `k`.
    pub fn cumulative(&self, values: &[f64]) -> Result<Vec<f64>> {
        self.check_len(values)?;
        Ok(self.cumulative_unchecked(values))
    }

    pub(crate) fn trapezoid(&self, values: &[f64]) -> f64 {
        self.points
            .windows(2)
            .zip(values.windows(2))
            .map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1]))
            .sum()
    }

    pub(crate) fn cumulative_unchecked(&self, values: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(values.len());
        let mut acc = 0.0;
        out.push(0.0);
        for (x, y) in self.points.windows(2).zip(values.windows(2)) {
            acc += 0.5 * (x[1] - x[0]) * (y[0] + y[1]);
            out.push(acc);
        }
        out
    }

    fn check_len(&self, values: &[f64]) -> Result<()> {
        if values.len() != self.points.len() {
            return Err(Error::LengthMismatch {
                expected: self.points.len(),
                got: values.len(),
            });
        }
        Ok(())
    }
}

impl Default for Grid {
    fn default() -> Self {
        Self::uniform(DEFAULT_GRID_POINTS).expect("default grid is valid")
    }
}

/// Free-function form of [`Grid::integrate`].
pub fn integrate(grid: &Grid, values: &[f64]) -> Result<f64> {
    grid.integrate(values)
}
