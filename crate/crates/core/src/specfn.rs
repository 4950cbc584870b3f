//! Closed forms and quadratures attached to the coalescent: the Laplace
//! exponent of the subordinator, moments of the limit of the number of
//! events, and the generating function `φ_α` of the last-event block count.

use crate::error::{ensure, Result};
use crate::numerics::{integrate_unit, ln_gamma, ln_gamma_signed, Endpoints, QuadratureSpec};
use crate::offspring::Alpha;

pub use crate::offspring::mean_root_excess;

/// Below this abscissa the `φ_α` integrand is replaced by its two-term series.
pub const SERIES_CUTOFF: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Closed,
    Quadrature,
}

/// `ln(1 - x)` from the pair `(x, 1 - x)`, accurate at both ends.
fn ln_one_minus(x: f64, y: f64) -> f64 {
    if x < 0.5 {
        (-x).ln_1p()
    } else {
        y.ln()
    }
}

/// Laplace exponent `φ(λ) = ∫ (1 - (1-x)^λ) x^{α-2} (1-x)^{-α} dx`.
pub fn phi_subordinator(alpha: Alpha, lambda: f64, mode: Mode) -> Result<f64> {
    let a = alpha.value();
    ensure!(lambda > a - 1.0, "λ = {lambda} must exceed α - 1 = {}", a - 1.0);
    match mode {
        Mode::Closed => {
            let ratio = ln_gamma(a) + ln_gamma(lambda + 1.0 - a) - ln_gamma(lambda + 1.0);
            Ok(lambda * ratio.exp() / (1.0 - a))
        }
        Mode::Quadrature => {
            let right = (-a).min(lambda - a);
            let spec = QuadratureSpec::default().with_endpoints(Endpoints::Algebraic { left: a - 1.0, right });
            let f = |x: f64, y: f64| {
                let ly = ln_one_minus(x, y);
                -(lambda * ly).exp_m1() * (x.ln() * (a - 2.0) - a * ly).exp()
            };
            Ok(integrate_unit(f, &spec)?.value)
        }
    }
}

/// `E[Z^j] = α^j j! Γ(1-α) / Γ((j+1)(1-α))`.
pub fn z_moment(alpha: Alpha, j: u32) -> f64 {
    if j == 0 {
        return 1.0;
    }
    let a = alpha.value();
    let jf = f64::from(j);
    (jf * a.ln() + ln_gamma(jf + 1.0) + ln_gamma(1.0 - a) - ln_gamma((jf + 1.0) * (1.0 - a))).exp()
}

/// The same moment obtained from the subordinator exponent,
/// `j! / ∏_{i ≤ j} φ(i(1-α))`, rescaled by `(Γ(1+α)/(1-α))^j`.
pub fn z_moment_via_subordinator(alpha: Alpha, j: u32, mode: Mode) -> Result<f64> {
    let a = alpha.value();
    let scale = ln_gamma(1.0 + a).exp() / (1.0 - a);
    let mut value = 1.0;
    for i in 1..=j {
        value *= f64::from(i) * scale / phi_subordinator(alpha, f64::from(i) * (1.0 - a), mode)?;
    }
    Ok(value)
}

/// Parameter of `φ_α` and of the block-count law: `α ∈ [-1, 1)` with the
/// two special cases spelled out.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Family {
    /// `α = -1`: `φ(r) = r²`.
    Quadratic,
    /// `α = 0`: the logarithmic form.
    Logarithmic,
    General(f64),
}

fn family(alpha: f64) -> Result<Family> {
    ensure!((-1.0..1.0).contains(&alpha), "α = {alpha} outside [-1, 1)");
    Ok(if alpha == -1.0 {
        Family::Quadratic
    } else if alpha == 0.0 {
        Family::Logarithmic
    } else {
        Family::General(alpha)
    })
}

/// The generating function `φ_α(r)` of the limit block count in the last
/// coalescence event.
pub fn phi_alpha(alpha: f64, r: f64) -> Result<f64> {
    let fam = family(alpha)?;
    ensure!((0.0..=1.0).contains(&r), "r = {r} outside [0, 1]");
    if r == 0.0 {
        return Ok(0.0);
    }
    let a = alpha;
    // integrand of ∫ dx, with the factor (1-α) r outside
    let integrand = |x: f64, y: f64| -> f64 {
        if x < SERIES_CUTOFF {
            return r + x * r * ((a + 1.0) * r + (a - 1.0)) / 2.0;
        }
        let lrx = if r * x < 0.5 { (-r * x).ln_1p() } else { ((1.0 - r) + r * y).ln() };
        let ly = ln_one_minus(x, y);
        match fam {
            Family::Logarithmic => lrx / ly,
            _ => (-a * lrx).exp_m1() / -(a * ly).exp_m1(),
        }
    };
    match fam {
        Family::Quadratic => Ok(r * r),
        Family::Logarithmic | Family::General(_) => {
            let right = if r == 1.0 && a > 0.0 { -a } else { 0.0 };
            let spec = QuadratureSpec::default().with_endpoints(Endpoints::Algebraic { left: 0.0, right });
            Ok((1.0 - a) * r * integrate_unit(integrand, &spec)?.value)
        }
    }
}

/// Coefficient `c_j` of `x^j` in the expansion of `(1-x)^{-α} - 1`
/// (of `-ln(1-x)` when `α = 0`), as `(sign, ln|c_j|)`.
fn ln_series_coefficient(fam: Family, j: u64) -> (f64, f64) {
    match fam {
        Family::Logarithmic => (1.0, -(j as f64).ln()),
        Family::General(a) => {
            let (lg_top, s_top) = ln_gamma_signed(a + j as f64);
            let (lg_a, s_a) = ln_gamma_signed(a);
            (f64::from(s_top * s_a), lg_top - lg_a - ln_gamma(j as f64 + 1.0))
        }
        Family::Quadratic => unreachable!("the quadratic case has no series"),
    }
}

/// Weight `(1-α)/(1-(1-x)^α)`, or `1/(-ln(1-x))` when `α = 0`.
fn series_weight(fam: Family, x: f64, y: f64) -> f64 {
    let ly = ln_one_minus(x, y);
    match fam {
        Family::Logarithmic => -1.0 / ly,
        Family::General(a) => (1.0 - a) / -(a * ly).exp_m1(),
        Family::Quadratic => unreachable!("the quadratic case has no series"),
    }
}

/// `P(B = m)` for the limit block count `B` of the last coalescence event.
pub fn b_pmf(alpha: f64, m: u64) -> Result<f64> {
    let fam = family(alpha)?;
    ensure!(m >= 1, "m must be at least 1");
    if m == 1 {
        return Ok(0.0);
    }
    if fam == Family::Quadratic {
        return Ok(if m == 2 { 1.0 } else { 0.0 });
    }
    let j = m - 1;
    let (sign, ln_c) = ln_series_coefficient(fam, j);
    let jf = j as f64;
    let f = |x: f64, y: f64| (jf * x.ln()).exp() * series_weight(fam, x, y);
    let integral = integrate_unit(f, &QuadratureSpec::default())?.value;
    Ok(sign * ln_c.exp() * integral)
}

/// `P(B > m)`, integrating the series remainder rather than subtracting
/// partial sums of [`b_pmf`] from one.
pub fn b_pmf_tail(alpha: f64, m: u64) -> Result<f64> {
    let fam = family(alpha)?;
    ensure!(m >= 1, "m must be at least 1");
    if fam == Family::Quadratic {
        return Ok(if m < 2 { 1.0 } else { 0.0 });
    }
    // P(B > m) = ∫ w(x) Σ_{j ≥ m} c_j x^j dx
    let coef: Vec<f64> = (1..m)
        .map(|j| {
            let (s, l) = ln_series_coefficient(fam, j);
            s * l.exp()
        })
        .collect();
    let remainder = |x: f64, y: f64| -> f64 {
        if x < 0.5 {
            let mut sum = 0.0f64;
            let mut j = m;
            let (s, l) = ln_series_coefficient(fam, j);
            let mut term = s * (l + j as f64 * x.ln()).exp();
            while term != 0.0 && term.abs() > 1e-18 * sum.abs() {
                sum += term;
                // c_{j+1}/c_j is (α+j)/(j+1), or j/(j+1) for the logarithm
                let ratio = match fam {
                    Family::Logarithmic => j as f64 / (j as f64 + 1.0),
                    Family::General(a) => (a + j as f64) / (j as f64 + 1.0),
                    Family::Quadratic => unreachable!(),
                };
                term *= ratio * x;
                j += 1;
            }
            sum
        } else {
            let ly = ln_one_minus(x, y);
            let total = match fam {
                Family::Logarithmic => -ly,
                Family::General(a) => (-a * ly).exp_m1(),
                Family::Quadratic => unreachable!(),
            };
            let mut partial = 0.0;
            let mut xp = x;
            for c in &coef {
                partial += c * xp;
                xp *= x;
            }
            total - partial
        }
    };
    let right = match fam {
        Family::General(a) if a > 0.0 => -a,
        _ => 0.0,
    };
    let spec = QuadratureSpec::default().with_endpoints(Endpoints::Algebraic { left: 0.0, right });
    let v = integrate_unit(|x, y| remainder(x, y) * series_weight(fam, x, y), &spec)?.value;
    Ok(v.max(0.0))
}
