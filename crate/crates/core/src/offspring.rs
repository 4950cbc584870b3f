//! Scalar laws attached to the stable Galton-Watson tree with offspring
//! generating function `g(r) = r + α (1 - r)^{1/α}`.

use std::fmt;

use crate::error::{ensure, Result};
use crate::numerics::ln_gamma;
use crate::tree::Tree;

/// Stability index `α ∈ (0, 1)`; `γ = 1/α`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Alpha(f64);

impl Alpha {
    pub fn new(alpha: f64) -> Result<Alpha> {
        ensure!(alpha > 0.0 && alpha < 1.0, "alpha must lie in (0, 1), got {alpha}");
        Ok(Alpha(alpha))
    }

    /// Stricter constructor for the samplers, which need `α ∈ [1/2, 1)`.
    pub fn for_simulation(alpha: f64) -> Result<Alpha> {
        ensure!((0.5..1.0).contains(&alpha), "simulation requires alpha in [1/2, 1), got {alpha}");
        Ok(Alpha(alpha))
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }

    #[inline]
    pub fn gamma(self) -> f64 {
        1.0 / self.0
    }

    pub fn is_simulation_range(self) -> bool {
        self.0 >= 0.5
    }
}

impl fmt::Display for Alpha {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// `ln ν_g(k)`; `-∞` where the mass vanishes.
pub fn ln_offspring_pmf(alpha: Alpha, k: u64) -> f64 {
    let a = alpha.value();
    let g = alpha.gamma();
    match k {
        0 => a.ln(),
        1 => f64::NEG_INFINITY,
        _ => {
            // ν(k) = α γ (γ-1) ∏_{j=2}^{k-1} (j-γ) / k!
            let head = a.ln() + g.ln() + (g - 1.0).ln() - ln_gamma(k as f64 + 1.0);
            if k == 2 {
                head
            } else if g >= 2.0 {
                f64::NEG_INFINITY
            } else {
                head + ln_gamma(k as f64 - g) - ln_gamma(2.0 - g)
            }
        }
    }
}

/// `ν_g(k)`, the `k`-th Taylor coefficient of `g`.
pub fn offspring_pmf(alpha: Alpha, k: u64) -> f64 {
    ln_offspring_pmf(alpha, k).exp()
}

/// `P(X > k)` for `X ~ ν_g`.
pub fn offspring_survival(alpha: Alpha, k: u64) -> f64 {
    let a = alpha.value();
    let g = alpha.gamma();
    if k == 0 {
        return 1.0 - a;
    }
    if g >= 2.0 {
        return if k == 1 { 1.0 - a } else { 0.0 };
    }
    // α (γ-1) Γ(k+1-γ) / (Γ(2-γ) k!)
    (a.ln() + (g - 1.0).ln() + ln_gamma(k as f64 + 1.0 - g) - ln_gamma(2.0 - g) - ln_gamma(k as f64 + 1.0)).exp()
}

/// Successive masses `ν_g(0), ν_g(1), ...` by the ratio recurrence
/// `ν(k+1) = ν(k) (k-γ)/(k+1)` seeded at `ν(2) = αγ(γ-1)/2`.
pub fn offspring_masses(alpha: Alpha) -> impl Iterator<Item = f64> {
    let a = alpha.value();
    let g = alpha.gamma();
    let mut k = 0u64;
    let mut current = a * g * (g - 1.0) / 2.0;
    std::iter::from_fn(move || {
        let out = match k {
            0 => a,
            1 => 0.0,
            2 => current,
            _ => {
                current *= (k as f64 - 1.0 - g) / k as f64;
                current
            }
        };
        k += 1;
        Some(out)
    })
}

fn check_theta(theta: f64) -> Result<()> {
    ensure!(theta >= 0.0 && theta.is_finite(), "theta must be a finite non-negative real, got {theta}");
    Ok(())
}

fn check_unit(r: f64) -> Result<()> {
    ensure!((0.0..=1.0).contains(&r), "r must lie in [0, 1], got {r}");
    Ok(())
}

/// `ν_θ(k)`: offspring law of the tree pruned at time `θ`.
pub fn offspring_pmf_pruned(alpha: Alpha, theta: f64, k: u64) -> Result<f64> {
    check_theta(theta)?;
    Ok(match k {
        0 => pruned_extinction(alpha, theta),
        1 => 0.0,
        _ => (ln_offspring_pmf(alpha, k) - (k as f64 - 1.0) * theta.ln_1p()).exp(),
    })
}

/// `g_θ(0) = α (1+θ) [1 - (θ/(1+θ))^{1/α}]`.
fn pruned_extinction(alpha: Alpha, theta: f64) -> f64 {
    let a = alpha.value();
    a * (1.0 + theta) * (1.0 - (theta / (1.0 + theta)).powf(alpha.gamma()))
}

/// `g_θ(r) = r + α [(1-r+θ)^{1/α} - θ^{1/α}] / (1+θ)^{1/α - 1}`.
pub fn gf_g_theta(alpha: Alpha, theta: f64, r: f64) -> Result<f64> {
    check_theta(theta)?;
    check_unit(r)?;
    let g = alpha.gamma();
    Ok(r + alpha.value() * ((1.0 - r + theta).powf(g) - theta.powf(g)) / (1.0 + theta).powf(g - 1.0))
}

/// Offspring generating function `g(r) = r + α (1-r)^{1/α}`.
pub fn gf_g(alpha: Alpha, r: f64) -> Result<f64> {
    gf_g_theta(alpha, 0.0, r)
}

fn survival_scale(alpha: Alpha, theta: f64) -> f64 {
    1.0 - (theta / (1.0 + theta)).powf(alpha.gamma())
}

/// Leaf-count generating function of the pruned tree:
/// `h_θ(r) = (1+θ) [1 - {1 - r (1 - (θ/(1+θ))^{1/α})}^α]`.
pub fn h_theta(alpha: Alpha, theta: f64, r: f64) -> Result<f64> {
    check_theta(theta)?;
    check_unit(r)?;
    let c = survival_scale(alpha, theta);
    Ok((1.0 + theta) * (1.0 - (1.0 - r * c).powf(alpha.value())))
}

/// `h'_θ(r)`; infinite at `r = 1` when `θ = 0`.
pub fn h_theta_prime(alpha: Alpha, theta: f64, r: f64) -> Result<f64> {
    check_theta(theta)?;
    check_unit(r)?;
    let a = alpha.value();
    let c = survival_scale(alpha, theta);
    Ok((1.0 + theta) * a * c * (1.0 - r * c).powf(a - 1.0))
}

/// `q_n = P(L(T) = n)` for the unconditioned tree.
pub fn leaf_count_pmf(alpha: Alpha, n: u64) -> Result<f64> {
    Ok(ln_leaf_count_pmf(alpha, n)?.exp())
}

pub fn ln_leaf_count_pmf(alpha: Alpha, n: u64) -> Result<f64> {
    ensure!(n >= 1, "leaf count must be positive");
    let a = alpha.value();
    Ok(if n == 1 { a.ln() } else { a.ln() + ln_gamma(n as f64 - a) - ln_gamma(n as f64 + 1.0) - ln_gamma(1.0 - a) })
}

/// Log-probability of the ordered tree `t` under the law conditioned on
/// having `L(t)` leaves: `Σ_v ln ν_g(k_v) - ln q_{L(t)}`.
pub fn tree_log_prob_given_leaves(alpha: Alpha, t: &Tree) -> Result<f64> {
    ensure!(t.is_gw_valid(), "tree has a node with exactly one child");
    let n = t.leaf_count() as u64;
    let mass: f64 = t.child_counts().iter().map(|&k| ln_offspring_pmf(alpha, k as u64)).sum();
    Ok(mass - ln_leaf_count_pmf(alpha, n)?)
}

/// `E_n[k_∅ - 1] = ((1-α)/α) (Γ(1-α)/Γ(α)) (Γ(n-1+α)/Γ(n-α))`.
pub fn mean_root_excess(alpha: Alpha, n: u64) -> Result<f64> {
    ensure!(n >= 2, "mean root excess needs n >= 2, got {n}");
    let a = alpha.value();
    let nf = n as f64;
    Ok((((1.0 - a) / a).ln() + ln_gamma(1.0 - a) - ln_gamma(a) + ln_gamma(nf - 1.0 + a) - ln_gamma(nf - a)).exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn al(a: f64) -> Alpha {
        Alpha::new(a).unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn alpha_domains() {
        assert!(Alpha::new(0.0).is_err());
        assert!(Alpha::new(1.0).is_err());
        assert!(Alpha::new(0.3).is_ok());
        assert!(Alpha::for_simulation(0.3).is_err());
        assert!(Alpha::for_simulation(0.5).is_ok());
        assert!(Alpha::for_simulation(1.0).is_err());
    }

    #[test]
    fn offspring_examples() {
        assert!(close(offspring_pmf(al(0.5), 0), 0.5, 1e-15));
        assert!(close(offspring_pmf(al(0.5), 2), 0.5, 1e-15));
        assert_eq!(offspring_pmf(al(0.5), 3), 0.0);
        assert_eq!(offspring_pmf(al(0.7), 1), 0.0);
        assert!(close(offspring_pmf(al(2.0 / 3.0), 3), 1.0 / 24.0, 1e-15));
    }

    #[test]
    fn recurrence_matches_log_gamma() {
        for a in [0.5, 0.6, 2.0 / 3.0, 0.9] {
            for (k, m) in offspring_masses(al(a)).enumerate().take(300) {
                let direct = offspring_pmf(al(a), k as u64);
                assert!(close(m, direct, 1e-12 * direct.max(1e-300)), "a={a} k={k}: {m} vs {direct}");
            }
        }
    }

    #[test]
    fn survival_matches_partial_sums() {
        for a in [0.5, 0.7, 0.9] {
            let mut cum = 0.0;
            for (k, m) in offspring_masses(al(a)).enumerate().take(200) {
                cum += m;
                let s = offspring_survival(al(a), k as u64);
                assert!(close(1.0 - cum, s, 1e-12), "a={a} k={k}");
            }
        }
    }

    #[test]
    fn normalization_with_tail_bound() {
        for a in [0.5, 0.7, 0.9] {
            let sum: f64 = offspring_masses(al(a)).take(10_001).sum();
            let tail = offspring_survival(al(a), 10_000);
            assert!((1.0 - sum - tail).abs() < 1e-12);
            // The tail decays like K^{-γ}; at α = 0.9 it is still 3.3e-6 at K = 10^4.
            if a <= 0.7 {
                assert!((1.0 - sum).abs() < 1e-6, "a={a}: {}", 1.0 - sum);
            }
            let g = al(a).gamma();
            let ratio = offspring_survival(al(a), 20_000) / tail;
            if g < 2.0 {
                assert!(close(ratio, 2f64.powf(-g), 1e-3));
            }
        }
    }

    #[test]
    fn pruned_examples() {
        let a = al(0.5);
        for k in 0..6 {
            assert!(close(offspring_pmf_pruned(a, 0.0, k).unwrap(), offspring_pmf(a, k), 1e-15));
        }
        assert!(close(offspring_pmf_pruned(a, 1.0, 2).unwrap(), 0.25, 1e-15));
        assert!(close(offspring_pmf_pruned(a, 1.0, 0).unwrap(), 0.75, 1e-15));
        assert!(offspring_pmf_pruned(a, -0.1, 0).is_err());
    }

    #[test]
    fn pruned_masses_sum_to_one() {
        for a in [0.5, 0.7, 0.9] {
            for theta in [0.1, 1.0, 5.0] {
                let sum: f64 = (0..20_000).map(|k| offspring_pmf_pruned(al(a), theta, k).unwrap()).sum();
                assert!(close(sum, 1.0, 1e-10), "a={a} theta={theta}: {sum}");
            }
        }
    }

    #[test]
    fn leaf_count_examples() {
        assert!(close(leaf_count_pmf(al(0.7), 1).unwrap(), 0.7, 1e-15));
        assert!(close(leaf_count_pmf(al(0.5), 2).unwrap(), 0.125, 1e-15));
        assert!(close(leaf_count_pmf(al(0.5), 3).unwrap(), 0.0625, 1e-15));
        assert!(close(leaf_count_pmf(al(2.0 / 3.0), 3).unwrap(), 4.0 / 81.0, 1e-15));
        assert!(leaf_count_pmf(al(0.5), 0).is_err());
    }

    #[test]
    fn generating_function_examples() {
        for a in [0.5, 0.8] {
            for theta in [0.0, 0.5, 3.0] {
                assert!(close(gf_g_theta(al(a), theta, 1.0).unwrap(), 1.0, 1e-14));
                assert!(close(h_theta(al(a), theta, 1.0).unwrap(), 1.0, 1e-14));
            }
        }
        assert!(close(gf_g_theta(al(0.5), 0.0, 0.0).unwrap(), 0.5, 1e-15));
        assert!(close(gf_g_theta(al(0.5), 1.0, 0.0).unwrap(), 0.75, 1e-15));
        assert!(close(h_theta(al(0.5), 1.0, 0.5).unwrap(), 2.0 * (1.0 - 0.625f64.sqrt()), 1e-15));
        assert!(close(h_theta(al(0.5), 1.0, 0.5).unwrap(), 0.4188612, 1e-7));
        for r in [0.0, 0.3, 0.9] {
            let h0 = h_theta(al(0.6), 0.0, r).unwrap();
            assert!(close(h0, 1.0 - (1.0 - r).powf(0.6), 1e-15));
        }
        assert!(gf_g_theta(al(0.5), 0.0, 1.5).is_err());
        assert!(h_theta(al(0.5), 0.0, -0.1).is_err());
    }

    #[test]
    fn leaf_generating_identity() {
        // g(h(t)) - h(t) = α (1 - t)
        for a in [0.5, 0.6, 0.75, 0.9] {
            for i in 0..100 {
                let t = i as f64 / 99.0;
                let h = h_theta(al(a), 0.0, t).unwrap();
                let lhs = gf_g(al(a), h).unwrap() - h;
                assert!(close(lhs, a * (1.0 - t), 1e-12), "a={a} t={t}");
            }
        }
    }

    #[test]
    fn pruned_leaf_generating_identity() {
        // g_θ(h_θ(r)) - h_θ(r) = g_θ(0) (1 - r)
        for a in [0.5, 0.7, 0.9] {
            for theta in [0.01, 0.2, 1.0, 4.0, 20.0] {
                let g0 = gf_g_theta(al(a), theta, 0.0).unwrap();
                for i in 0..=20 {
                    let r = i as f64 / 20.0;
                    let h = h_theta(al(a), theta, r).unwrap().min(1.0);
                    let lhs = gf_g_theta(al(a), theta, h).unwrap() - h;
                    assert!(close(lhs, g0 * (1.0 - r), 1e-12), "a={a} theta={theta} r={r}");
                }
            }
        }
    }

    #[test]
    fn pruned_pmf_matches_generating_function() {
        for a in [0.5, 0.7, 0.9] {
            for theta in [0.0, 0.3, 2.0] {
                for r in [0.0f64, 0.25, 0.5, 0.8] {
                    let series: f64 =
                        (0..4000).map(|k| offspring_pmf_pruned(al(a), theta, k).unwrap() * r.powi(k as i32)).sum();
                    let gf = gf_g_theta(al(a), theta, r).unwrap();
                    assert!(close(series, gf, 1e-10), "a={a} theta={theta} r={r}");
                }
            }
        }
    }

    #[test]
    fn derivative_of_h_theta() {
        let a = al(0.7);
        for theta in [0.1, 1.0] {
            for r in [0.2, 0.5, 0.9] {
                let eps = 1e-6;
                let fd = (h_theta(a, theta, r + eps).unwrap() - h_theta(a, theta, r - eps).unwrap()) / (2.0 * eps);
                assert!(close(fd, h_theta_prime(a, theta, r).unwrap(), 1e-7));
            }
        }
    }

    #[test]
    fn tree_probability_examples() {
        for a in [0.5, 0.7, 0.9] {
            let lp = tree_log_prob_given_leaves(al(a), &Tree::cherry()).unwrap();
            assert!(close(lp, 0.0, 1e-13));
        }
        let lp = tree_log_prob_given_leaves(al(2.0 / 3.0), &Tree::star(3)).unwrap();
        assert!(close(lp, 0.25f64.ln(), 1e-13));
        let lp = tree_log_prob_given_leaves(al(0.5), &Tree::star(3)).unwrap();
        assert_eq!(lp, f64::NEG_INFINITY);
        let unary = Tree::from_child_counts(vec![1, 0]).unwrap();
        assert!(tree_log_prob_given_leaves(al(0.5), &unary).is_err());
    }

    #[test]
    fn mean_root_excess_examples() {
        for a in [0.5, 0.6, 0.8, 0.95] {
            assert!(close(mean_root_excess(al(a), 2).unwrap(), 1.0, 1e-13));
        }
        for n in [3, 10, 1000, 1_000_000] {
            assert!(close(mean_root_excess(al(0.5), n).unwrap(), 1.0, 1e-10));
        }
        assert!(close(mean_root_excess(al(2.0 / 3.0), 3).unwrap(), 1.25, 1e-13));
        assert!(mean_root_excess(al(0.5), 1).is_err());
    }
}
