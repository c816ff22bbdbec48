//! Deterministic and space-time water-filling, transmit power statistics and
//! the per-symbol baseline.

use crate::channels::{ChannelLaw, EigDensity};
use crate::error::{domain, Error, Result};
use crate::linalg::{herm_eig, quad, svd, ComplexMatrix, HermitianMatrix};
use crate::montecarlo::{run_batches, McEstimate, SeededStream};

/// Outcome of deterministic water-filling.
#[derive(Clone, Debug, PartialEq)]
pub struct WaterfillSolution {
    /// Water level `μ`.
    pub level: f64,
    /// Per-mode powers, in the order of the input eigenvalues.
    pub powers: Vec<f64>,
    /// Nats per symbol.
    pub rate: f64,
    pub active: usize,
}

/// Water-filling over `eigs` with total power `budget`.
pub fn waterfill_det(eigs: &[f64], budget: f64) -> Result<WaterfillSolution> {
    if !(budget > 0.0) {
        return Err(domain!("power budget must be positive, got {budget}"));
    }
    if eigs.iter().any(|&l| !(l >= 0.0) || !l.is_finite()) {
        return Err(domain!("eigenvalues must be finite and non-negative"));
    }
    let mut order: Vec<usize> = (0..eigs.len()).filter(|&i| eigs[i] > 0.0).collect();
    if order.is_empty() {
        return Err(domain!("all eigenvalues are zero"));
    }
    order.sort_by(|&a, &b| eigs[b].total_cmp(&eigs[a]));
    let mut inv_sum = 0.0;
    let mut level = 0.0;
    let mut active = 0;
    for (k, &i) in order.iter().enumerate() {
        let inv = 1.0 / eigs[i];
        let candidate = (budget + inv_sum + inv) / (k + 1) as f64;
        if candidate <= inv {
            break;
        }
        inv_sum += inv;
        level = candidate;
        active = k + 1;
    }
    let mut powers = vec![0.0; eigs.len()];
    let mut rate = 0.0;
    for &i in &order[..active] {
        powers[i] = level - 1.0 / eigs[i];
        rate += (level * eigs[i]).ln();
    }
    Ok(WaterfillSolution {
        level,
        powers,
        rate,
        active,
    })
}

/// Water level `ξ` of space-time water-filling:
/// `γ/m = ∫_{1/ξ}^∞ (ξ − 1/λ) f(λ) dλ`, solved by bisection.
pub fn st_water_level(f: &EigDensity, gamma: f64, m: usize) -> Result<f64> {
    let target = check_budget(f, gamma, m)?;
    let power = |xi: f64| f.tail_power(xi, None);
    let positive_median = f.quantile(f.cdf(0.0) + 0.5 * f.mass_above_zero());
    let mut lo = 1e-12;
    let mut hi = target + 1.0 / positive_median.max(1e-300) + 10.0;
    if !hi.is_finite() {
        hi = target + 10.0;
    }
    while power(hi)? < target {
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(Error::Numerical("water level bracket overflowed".into()));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if power(mid)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // the upper end is never below the target
    let (plo, phi) = (power(lo)?, power(hi)?);
    Ok(if (plo - target).abs() < (phi - target).abs() {
        lo
    } else {
        hi
    })
}

fn check_budget(f: &EigDensity, gamma: f64, m: usize) -> Result<f64> {
    if !(gamma > 0.0) || m == 0 {
        return Err(domain!("need γ > 0 and m ≥ 1, got γ={gamma}, m={m}"));
    }
    if f.mass_above_zero() <= 0.0 {
        return Err(domain!("eigenvalue density has no mass above zero"));
    }
    if let Some(n) = f.pool_size() {
        if n < 10_000 {
            return Err(domain!(
                "empirical pool of {n} eigenvalues is below the 10⁴ needed for level solving"
            ));
        }
    }
    Ok(gamma / m as f64)
}

/// Space-time capacity `C = m ∫_{1/ξ}^∞ ln(ξλ) f(λ) dλ` in nats.
pub fn st_capacity(f: &EigDensity, xi: f64, m: usize) -> Result<f64> {
    Ok(m as f64 * f.tail_log(xi, None)?)
}

/// Level and capacity together.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpaceTime {
    pub xi: f64,
    pub capacity: f64,
}

pub fn space_time(f: &EigDensity, gamma: f64, m: usize) -> Result<SpaceTime> {
    let xi = st_water_level(f, gamma, m)?;
    Ok(SpaceTime {
        xi,
        capacity: st_capacity(f, xi, m)?,
    })
}

/// Transmit covariance for one channel draw at common level `ξ`:
/// `V† diag((ξ − 1/σ_i²)⁺) V` on the right singular directions.
pub fn instantaneous_covariance(h: &ComplexMatrix, xi: f64) -> Result<HermitianMatrix> {
    if !(xi > 0.0) {
        return Err(domain!("water level must be positive, got {xi}"));
    }
    let t = h.cols();
    let d = svd(h);
    let mut q = ComplexMatrix::zeros(t, t);
    for (k, &s) in d.sigma.iter().enumerate() {
        let lambda = s * s;
        if lambda <= 0.0 || xi <= 1.0 / lambda {
            continue;
        }
        let p = xi - 1.0 / lambda;
        for i in 0..t {
            for j in 0..t {
                q[(i, j)] += d.v[(k, i)].conj() * d.v[(k, j)] * p;
            }
        }
    }
    Ok(HermitianMatrix::symmetrize(q))
}

/// Per-symbol baseline: each draw is water-filled with its own budget `γ`
/// and the rates averaged.
pub fn naive_avg_rate(
    law: &ChannelLaw,
    gamma: f64,
    samples: usize,
    stream: &SeededStream,
) -> Result<McEstimate> {
    if !(gamma > 0.0) {
        return Err(domain!("SNR must be positive, got {gamma}"));
    }
    let m = law.rx().min(law.tx());
    let rate = |h: &ComplexMatrix| -> f64 {
        let g = HermitianMatrix::symmetrize(&h.adjoint() * h);
        let eigs: Vec<f64> = herm_eig(&g)
            .values
            .into_iter()
            .take(m)
            .map(|v| v.max(0.0))
            .collect();
        waterfill_det(&eigs, gamma).map_or(0.0, |s| s.rate)
    };
    if law.is_deterministic() {
        return Ok(McEstimate::exact(rate(&law.sample(&mut stream.rng()))));
    }
    if let ChannelLaw::Mixture(mix) = law {
        let mean = mix
            .weights()
            .iter()
            .zip(mix.atoms())
            .map(|(w, a)| w * rate(a))
            .sum();
        return Ok(McEstimate::exact(mean));
    }
    let (acc, _) = run_batches(samples, stream, 1, |rng, out| {
        out[0] = rate(&law.sample(rng));
        true
    });
    Ok(acc.scalar(0))
}

/// Exact peak-to-average power ratio `mξ/γ`.
pub fn papr(xi: f64, gamma: f64, m: usize) -> f64 {
    m as f64 * xi / gamma
}

/// Upper bound `1 + (m/γ) E[1/λ]`; `+∞` when `E[1/λ]` diverges.
pub fn papr_bound(f: &EigDensity, gamma: f64, m: usize) -> f64 {
    1.0 + m as f64 / gamma * f.inverse_mean()
}

/// Distribution of the per-eigenvector transmit power.
#[derive(Clone, Debug, PartialEq)]
pub struct PowerDensity {
    /// `P(power = 0) = F(1/ξ)`.
    pub zero_atom: f64,
    /// Further atoms `(power, probability)` from discrete eigenvalue laws.
    pub atoms: Vec<(f64, f64)>,
    /// Continuous density at each grid point.
    pub values: Vec<f64>,
    /// Atoms plus the integral of the continuous part over `(0, ξ)`.
    pub total_mass: f64,
}

/// `q(g) = F(1/ξ) δ(g) + f(1/(ξ−g)) / (ξ−g)²` for `g ∈ (0, ξ)`.
pub fn power_density(f: &EigDensity, xi: f64, grid: &[f64]) -> Result<PowerDensity> {
    if !(xi > 0.0) {
        return Err(domain!("water level must be positive, got {xi}"));
    }
    if let Some(&g) = grid.iter().find(|&&g| !(g > 0.0 && g < xi)) {
        return Err(domain!("grid point {g} outside (0, ξ={xi})"));
    }
    let q = |g: f64| {
        let d = xi - g;
        f.pdf(1.0 / d) / (d * d)
    };
    let zero_atom = f.cdf(1.0 / xi);
    let atoms: Vec<(f64, f64)> = match f {
        EigDensity::PointMasses(p) => p
            .values()
            .iter()
            .zip(p.weights())
            .filter(|(v, _)| **v > 1.0 / xi)
            .map(|(v, w)| (xi - 1.0 / v, *w))
            .collect(),
        _ => Vec::new(),
    };
    let values = grid.iter().map(|&g| q(g)).collect();
    let continuous = match f {
        EigDensity::PointMasses(_) => 0.0,
        // q(g) dg = f(λ) dλ with λ = 1/(ξ − g); integrate in g up to the
        // point where the remaining λ-tail is negligible.
        _ => {
            let lam_top = f.quantile(1.0 - 1e-15).max(2.0 / xi);
            let g_top = xi - 1.0 / lam_top;
            let body = if g_top > 0.0 {
                quad::integrate(q, 0.0, g_top, 1e-12)
            } else {
                0.0
            };
            body + (1.0 - f.cdf(lam_top.max(1.0 / xi)))
        }
    };
    let total_mass = zero_atom + atoms.iter().map(|a| a.1).sum::<f64>() + continuous;
    Ok(PowerDensity {
        zero_atom,
        atoms,
        values,
        total_mass,
    })
}

/// Space-time solution adjusted for a peak per-mode power `γ_max`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PeakLimited {
    pub xi: f64,
    pub rate: f64,
    /// False when `γ_max` already exceeds the unconstrained level.
    pub truncated: bool,
}

/// Power and rate integrals restricted to `[1/ξ, 1/(ξ − γ_max)]`.
///
/// Above `γ_max` the truncated power first rises and then falls with `ξ`;
/// the level is taken on the rising branch. When its maximum stays below
/// `γ/m` the budget cannot be spent and the result is `Infeasible`.
pub fn peak_limited_rate(
    f: &EigDensity,
    gamma: f64,
    gamma_max: f64,
    m: usize,
) -> Result<PeakLimited> {
    if !(gamma_max > 0.0) {
        return Err(domain!("peak power must be positive, got {gamma_max}"));
    }
    let target = check_budget(f, gamma, m)?;
    let free = st_water_level(f, gamma, m)?;
    if free <= gamma_max {
        return Ok(PeakLimited {
            xi: free,
            rate: st_capacity(f, free, m)?,
            truncated: false,
        });
    }
    let upper = |xi: f64| Some(1.0 / (xi - gamma_max));
    let power = |xi: f64| f.tail_power(xi, upper(xi));
    // geometric scan of ξ − γ_max for the first crossing
    let mut prev = gamma_max;
    let mut found = None;
    let mut best: f64 = 0.0;
    let steps = 4000;
    for k in 0..=steps {
        let xi = gamma_max + gamma_max * 1e-9 * (1e15f64).powf(k as f64 / steps as f64);
        let p = power(xi)?;
        best = best.max(p);
        if p >= target {
            found = Some((prev, xi));
            break;
        }
        prev = xi;
    }
    let (mut lo, mut hi) = found.ok_or_else(|| {
        Error::Infeasible(format!(
            "peak power {gamma_max} cannot carry average power {target} per mode (maximum {best:.6})"
        ))
    })?;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if power(mid)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let rate = m as f64 * f.tail_log(hi, upper(hi))?;
    Ok(PeakLimited {
        xi: hi,
        rate,
        truncated: true,
    })
}
