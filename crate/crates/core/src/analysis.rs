//! Beamforming optimality tests, low/high SNR asymptotics, the central
//! Wishart approximation and the interpolated mean/noise study.

use serde::Serialize;

use crate::channels::{cgauss, ChannelLaw};
use crate::covopt::{fixed_point_diag, iterate_general, CovOptResult, CovOptions};
use crate::error::{domain, Error, Result};
use crate::linalg::{
    exp_expint, herm_eig, ln_det_pd, psd_sqrt, quad, Complex64, ComplexMatrix, HermitianMatrix,
};
use crate::montecarlo::{ergodic_mi, run_batches, McEstimate, SeededStream};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BeamformMethod {
    MonteCarlo,
    ClosedForm,
}

/// Result of a beamforming optimality test. `margin` is the left side minus
/// the right side of the test inequality; `optimal ⟺ margin > 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BeamformVerdict {
    pub optimal: bool,
    pub margin: f64,
    pub margin_se: f64,
    pub method: BeamformMethod,
}

fn top_two(eigs: &[f64]) -> (f64, f64) {
    (eigs[0], eigs.get(1).copied().unwrap_or(0.0))
}

/// Monte Carlo test with `u ~ CN(0, I_r)`:
/// `E[(u†Ru + γτ₂ u†R²u) / (1 + γτ₁ u†Ru)] − r τ₂/τ₁`.
///
/// Requires `tr(R) = r` and `tr(T) = t`. Only the second-largest transmit
/// eigenvalue is tested; it gives the tightest condition.
pub fn beamform_opt_mc(
    rx_corr: &HermitianMatrix,
    tx_corr: &HermitianMatrix,
    gamma: f64,
    samples: usize,
    stream: &SeededStream,
) -> Result<BeamformVerdict> {
    let (r, t) = (rx_corr.dim(), tx_corr.dim());
    if (rx_corr.trace() - r as f64).abs() > 1e-9 * r as f64
        || (tx_corr.trace() - t as f64).abs() > 1e-9 * t as f64
    {
        return Err(domain!("correlations must satisfy tr(R) = r and tr(T) = t"));
    }
    if !(gamma > 0.0) {
        return Err(domain!("SNR must be positive, got {gamma}"));
    }
    if samples < 2 {
        return Err(domain!("need at least 2 samples"));
    }
    let (tau1, tau2) = top_two(&herm_eig(tx_corr).values);
    let rm = rx_corr.as_matrix();
    let (acc, _) = run_batches(samples, stream, 1, |rng, out| {
        let u: Vec<Complex64> = (0..r).map(|_| cgauss(rng)).collect();
        let ru: Vec<Complex64> = (0..r)
            .map(|i| (0..r).map(|j| rm[(i, j)] * u[j]).sum())
            .collect();
        let a: f64 = u.iter().zip(&ru).map(|(x, y)| (x.conj() * y).re).sum();
        let b: f64 = ru.iter().map(|y| y.norm_sqr()).sum();
        out[0] = (a + gamma * tau2 * b) / (1.0 + gamma * tau1 * a);
        true
    });
    let est = acc.scalar(0);
    let margin = est.mean - r as f64 * tau2 / tau1;
    Ok(BeamformVerdict {
        optimal: margin > 0.0,
        margin,
        margin_se: est.std_err,
        method: BeamformMethod::MonteCarlo,
    })
}

/// Closed-form test for receive eigenvalues `ρ`:
/// `Σ_{i,j} ρ_i(1+γτ₂ρ_i) ρ_j^{r−1} / Π_{k≠j}(ρ_j−ρ_k) · ζ_ij − rγτ₂`
/// with `f(x) = e^{1/x} Γ(0, 1/x)`, `a_i = γτ₁ρ_i`,
/// `ζ_ij = (f(a_i) − f(a_j)) / (ρ_i − ρ_j)` and
/// `ζ_ii = (1 − f(a_i)/a_i) / ρ_i`.
///
/// The sum cancels badly when two `ρ` nearly coincide; such inputs are
/// evaluated through the equivalent integral instead.
pub fn beamform_opt_closed(
    rho: &[f64],
    tau1: f64,
    tau2: f64,
    gamma: f64,
) -> Result<BeamformVerdict> {
    if rho.is_empty() || rho.iter().any(|&p| !(p > 0.0) || !p.is_finite()) {
        return Err(domain!("receive eigenvalues must be positive"));
    }
    if !(gamma > 0.0) || !(tau1 > 0.0) || !(tau2 >= 0.0) {
        return Err(domain!("need γ > 0, τ₁ > 0 and τ₂ ≥ 0"));
    }
    let r = rho.len();
    let total = if has_cluster(rho) {
        gamma * tau1 * beam_integral(rho, tau1, tau2, gamma)
    } else {
        closed_sum(rho, tau1, tau2, gamma)?
    };
    let margin = total - r as f64 * gamma * tau2;
    if !margin.is_finite() {
        return Err(Error::Numerical(
            "closed-form beamforming margin is not finite".into(),
        ));
    }
    Ok(BeamformVerdict {
        optimal: margin > 0.0,
        margin,
        margin_se: 0.0,
        method: BeamformMethod::ClosedForm,
    })
}

const CLUSTER_GAP: f64 = 1e-2;

/// Two receive eigenvalues closer than `CLUSTER_GAP` (relative).
fn has_cluster(rho: &[f64]) -> bool {
    let mut sorted = rho.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.windows(2).any(|w| w[1] - w[0] < CLUSTER_GAP * w[1])
}

/// `∫ e^{−x} Σ_i ρ_i(1+γτ₂ρ_i)/(1+a_i x) Π_j 1/(1+a_j x) dx`, the integral
/// the divided-difference sum evaluates in closed form.
fn beam_integral(rho: &[f64], tau1: f64, tau2: f64, gamma: f64) -> f64 {
    quad::integrate_to_inf(
        |x| {
            let prod: f64 = rho
                .iter()
                .map(|p| 1.0 / (1.0 + gamma * tau1 * p * x))
                .product();
            let sum: f64 = rho
                .iter()
                .map(|p| p * (1.0 + gamma * tau2 * p) / (1.0 + gamma * tau1 * p * x))
                .sum();
            (-x).exp() * sum * prod
        },
        0.0,
        1e-13,
    )
}

/// Divided-difference sum for well separated `ρ`.
fn closed_sum(rho: &[f64], tau1: f64, tau2: f64, gamma: f64) -> Result<f64> {
    let r = rho.len();
    let a: Vec<f64> = rho.iter().map(|p| gamma * tau1 * p).collect();
    let fa: Vec<f64> = a.iter().map(|&x| beam_f(x)).collect::<Result<_>>()?;
    let mut total = 0.0;
    for j in 0..r {
        let denom: f64 = (0..r)
            .filter(|&k| k != j)
            .map(|k| rho[j] - rho[k])
            .product();
        let wj = rho[j].powi(r as i32 - 1) / denom;
        for i in 0..r {
            let zeta = if i == j {
                (1.0 - fa[i] / a[i]) / rho[i]
            } else {
                beam_f_diff(a[i], fa[i], a[j], fa[j])? / (rho[i] - rho[j])
            };
            total += rho[i] * (1.0 + gamma * tau2 * rho[i]) * wj * zeta;
        }
    }
    Ok(total)
}

/// `f(x) = e^{1/x} Γ(0, 1/x)`.
fn beam_f(x: f64) -> Result<f64> {
    exp_expint(1.0 / x)
}

/// `f(a) − f(b)`. Close arguments integrate `f'(x) = (x − f(x))/x²`, which
/// keeps the difference accurate relative to itself.
fn beam_f_diff(a: f64, fa: f64, b: f64, fb: f64) -> Result<f64> {
    if (a - b).abs() > 0.05 * a.max(b) {
        return Ok(fa - fb);
    }
    const NODES: [f64; 5] = [
        0.0,
        -0.538_469_310_105_683_1,
        0.538_469_310_105_683_1,
        -0.906_179_845_938_664,
        0.906_179_845_938_664,
    ];
    const WEIGHTS: [f64; 5] = [
        0.568_888_888_888_888_9,
        0.478_628_670_499_366_5,
        0.478_628_670_499_366_5,
        0.236_926_885_056_189_1,
        0.236_926_885_056_189_1,
    ];
    let (mid, half) = (0.5 * (a + b), 0.5 * (a - b));
    let mut acc = 0.0;
    for (x, w) in NODES.iter().zip(WEIGHTS) {
        let z = mid + half * x;
        acc += w * (z - beam_f(z)?) / (z * z);
    }
    Ok(acc * half)
}

/// One point of the 2×2 beamforming boundary.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BoundaryPoint {
    pub rho: f64,
    /// Smallest `τ` with positive margin; `None` when the scan finds none.
    pub tau: Option<f64>,
}

/// For `R = diag(ρ, 2−ρ)`, `T = diag(τ, 2−τ)`: the smallest `τ ∈ τ_grid`
/// bracket with positive closed-form margin, refined by bisection.
pub fn beamform_boundary(
    gamma: f64,
    tau_grid: &[f64],
    rho_grid: &[f64],
) -> Result<Vec<BoundaryPoint>> {
    if tau_grid.len() < 2 || tau_grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(domain!("τ grid must be ascending with at least two points"));
    }
    if tau_grid.iter().any(|&t| !(t >= 1.0 && t < 2.0)) {
        return Err(domain!("τ grid must lie in [1, 2)"));
    }
    if rho_grid.iter().any(|&p| !(p > 0.0 && p < 2.0)) {
        return Err(domain!("ρ grid must lie in (0, 2)"));
    }
    rho_grid
        .iter()
        .map(|&rho| {
            let margin = |tau: f64| {
                beamform_opt_closed(&[rho, 2.0 - rho], tau, 2.0 - tau, gamma).map(|v| v.margin)
            };
            let mut prev = tau_grid[0];
            if margin(prev)? > 0.0 {
                return Ok(BoundaryPoint {
                    rho,
                    tau: Some(prev),
                });
            }
            for &tau in &tau_grid[1..] {
                if margin(tau)? > 0.0 {
                    let (mut lo, mut hi) = (prev, tau);
                    for _ in 0..100 {
                        let mid = 0.5 * (lo + hi);
                        if mid <= lo || mid >= hi {
                            break;
                        }
                        if margin(mid)? > 0.0 {
                            hi = mid;
                        } else {
                            lo = mid;
                        }
                    }
                    return Ok(BoundaryPoint { rho, tau: Some(hi) });
                }
                prev = tau;
            }
            Ok(BoundaryPoint { rho, tau: None })
        })
        .collect()
}

/// `n` evenly spaced points from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// First-order optimum at low SNR.
#[derive(Clone, Debug)]
pub struct LowSnr {
    /// `1/k` on the top eigenspace of `E[H†H]`.
    pub q: HermitianMatrix,
    /// `d C/dγ` at `γ = 0`, equal to `λ₁(E[H†H])`.
    pub slope: f64,
    pub multiplicity: usize,
    /// A further eigenvalue lies within `1e-3` (relative) of `λ₁`.
    pub near_degenerate: bool,
}

pub fn low_snr_cov(law: &ChannelLaw) -> Result<LowSnr> {
    let eig = herm_eig(&law.expected_gram());
    let l1 = eig.values[0];
    if !(l1 > 0.0) {
        return Err(domain!("E[H†H] is zero"));
    }
    let k = eig
        .values
        .iter()
        .take_while(|&&v| (l1 - v).abs() <= 1e-8 * l1)
        .count();
    let near_degenerate = eig.values.get(k).is_some_and(|&v| (l1 - v) <= 1e-3 * l1);
    let t = eig.values.len();
    let weights: Vec<f64> = (0..t)
        .map(|i| if i < k { 1.0 / k as f64 } else { 0.0 })
        .collect();
    Ok(LowSnr {
        q: HermitianMatrix::from_eigen(&eig.vectors, &weights),
        slope: l1,
        multiplicity: k,
        near_degenerate,
    })
}

/// High-SNR asymptote against the exact rate of `Q = I/t`.
#[derive(Clone, Debug)]
pub struct HighSnr {
    pub q: HermitianMatrix,
    /// `t ln(γ/t) + E[ln det(H†H)]`.
    pub approx: McEstimate,
    /// `E[ln det(I + γ H H†/t)]`.
    pub exact: McEstimate,
    /// Draws with singular `H†H`, left out of `approx`.
    pub excluded: usize,
}

pub fn high_snr_capacity(
    law: &ChannelLaw,
    gamma: f64,
    samples: usize,
    stream: &SeededStream,
) -> Result<HighSnr> {
    if !(gamma > 0.0) {
        return Err(domain!("SNR must be positive, got {gamma}"));
    }
    let t = law.tx();
    let q = HermitianMatrix::identity(t).scale(1.0 / t as f64);
    let offset = t as f64 * (gamma / t as f64).ln();
    let exact = ergodic_mi(&q, law, gamma, samples, stream)?;
    let logdet = |h: &ComplexMatrix| ln_det_pd(&(&h.adjoint() * h));
    let (approx, excluded) = if law.is_deterministic() {
        let v = logdet(&law.sample(&mut stream.rng()))
            .ok_or_else(|| Error::Domain("deterministic channel has singular H†H".into()))?;
        (McEstimate::exact(offset + v), 0)
    } else {
        let (acc, excluded) = run_batches(samples, stream, 1, |rng, out| {
            match logdet(&law.sample(rng)) {
                Some(v) if v.is_finite() => {
                    out[0] = v;
                    true
                }
                _ => false,
            }
        });
        if acc.n < 2 {
            return Err(Error::Numerical(
                "almost every draw had singular H†H".into(),
            ));
        }
        let mut est = acc.scalar(0);
        est.mean += offset;
        (est, excluded)
    };
    Ok(HighSnr {
        q,
        approx,
        exact,
        excluded,
    })
}

/// Central Wishart scale `Σ = T^{1/2} Q T^{1/2} + M†M / t`.
pub fn wishart_approx(
    mean: &ComplexMatrix,
    tx_corr: &HermitianMatrix,
    q: &HermitianMatrix,
) -> Result<HermitianMatrix> {
    let t = tx_corr.dim();
    if mean.cols() != t || q.dim() != t {
        return Err(crate::error::dimension!(
            "mean, correlation and covariance must all have {t} columns"
        ));
    }
    let root = psd_sqrt(tx_corr);
    let core = &(root.as_matrix() * q.as_matrix()) * root.as_matrix();
    let mean_part = (&mean.adjoint() * mean).scale(1.0 / t as f64);
    Ok(HermitianMatrix::symmetrize(&core + &mean_part))
}

/// Transmit correlation `τ𝟏 + (1 − τ) I`: unit diagonal, `τ` elsewhere.
pub fn uniform_correlation(t: usize, tau: f64) -> Result<HermitianMatrix> {
    let lo = if t > 1 { -1.0 / (t as f64 - 1.0) } else { -1.0 };
    if !(tau >= lo && tau <= 1.0) {
        return Err(domain!(
            "correlation {tau} does not give a PSD matrix for t={t}"
        ));
    }
    let mut m = ComplexMatrix::zeros(t, t);
    for i in 0..t {
        for j in 0..t {
            m[(i, j)] = Complex64::new(if i == j { 1.0 } else { tau }, 0.0);
        }
    }
    Ok(HermitianMatrix::symmetrize(m))
}

/// Capacity under the true Ricean law against the rate of the covariance
/// optimized for its central Wishart stand-in.
#[derive(Clone, Debug)]
pub struct WishartStudy {
    pub capacity: CovOptResult,
    pub approx_q: HermitianMatrix,
    /// Rate of `approx_q` under the true law.
    pub approx_mi: McEstimate,
}

/// The stand-in law is `G (T + M†M/t)^{1/2}`; its optimum is diagonal in
/// the eigenbasis of `T + M†M/t` and found by [`fixed_point_diag`].
pub fn wishart_study(
    mean: &ComplexMatrix,
    tx_corr: &HermitianMatrix,
    gamma: f64,
    opts: &CovOptions,
) -> Result<WishartStudy> {
    let r = mean.rows();
    let truth = ChannelLaw::kronecker(mean.clone(), HermitianMatrix::identity(r), tx_corr.clone())?;
    let scale = wishart_approx(mean, tx_corr, &HermitianMatrix::identity(tx_corr.dim()))?;
    let basis = herm_eig(&scale).vectors;
    let stand_in = ChannelLaw::kronecker(
        ComplexMatrix::zeros(r, mean.cols()),
        HermitianMatrix::identity(r),
        scale,
    )?;
    let approx = fixed_point_diag(&stand_in, gamma, Some(&basis), opts)?;
    let approx_mi = ergodic_mi(
        &approx.q,
        &truth,
        gamma,
        opts.samples,
        &SeededStream::new(opts.seed, 1),
    )?;
    let capacity = iterate_general(&truth, gamma, opts)?;
    Ok(WishartStudy {
        capacity,
        approx_q: approx.q,
        approx_mi,
    })
}

/// Optimal 2×2 covariance at one interpolation factor.
#[derive(Clone, Debug, Serialize)]
pub struct InterpPoint {
    pub kappa: f64,
    /// Eigenvalues of `Q`, descending.
    pub powers: Vec<f64>,
    /// Angle of the dominant eigenvector from the first axis, `atan2(|v₂|, |v₁|)`.
    pub angle: f64,
    /// Angle between the dominant eigenvectors of `Q` and of `E[H†H]`.
    pub angle_to_mean_gram: f64,
    pub mi: f64,
    pub mi_se: f64,
    pub kkt_residual: f64,
    pub converged: bool,
}

fn dominant_angle(v: &ComplexMatrix) -> f64 {
    v[(1, 0)].norm().atan2(v[(0, 0)].norm())
}

fn subspace_angle(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    let dot: Complex64 = (0..a.rows()).map(|i| a[(i, 0)].conj() * b[(i, 0)]).sum();
    dot.norm().clamp(0.0, 1.0).acos()
}

/// Runs the general optimizer on `H = κ M₀ + (1 − κ) G Σ^{1/2}` per `κ`.
pub fn interp_study(
    m0: &ComplexMatrix,
    noise_cov: &HermitianMatrix,
    kappas: &[f64],
    gamma: f64,
    opts: &CovOptions,
) -> Result<Vec<InterpPoint>> {
    if m0.cols() != 2 {
        return Err(domain!(
            "interpolation study is defined for two transmit antennas"
        ));
    }
    kappas
        .iter()
        .map(|&kappa| {
            let law = ChannelLaw::interpolated(kappa, m0.clone(), noise_cov.clone())?;
            let res = iterate_general(&law, gamma, opts)?;
            let eig = herm_eig(&res.q);
            let gram = herm_eig(&law.expected_gram());
            Ok(InterpPoint {
                kappa,
                powers: eig.values.clone(),
                angle: dominant_angle(&eig.vectors),
                angle_to_mean_gram: subspace_angle(&eig.vectors, &gram.vectors),
                mi: res.mi.mean,
                mi_se: res.mi.std_err,
                kkt_residual: res.kkt_residual,
                converged: res.converged,
            })
        })
        .collect()
}

/// `M₀ = [[0, 1], [1, 1]]`, `Σ = diag(4, 1)`.
pub fn interp_defaults() -> (ComplexMatrix, HermitianMatrix) {
    (
        ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[1.0, 1.0]]).expect("constant matrix"),
        HermitianMatrix::from_diag(&[4.0, 1.0]),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    /// `E[(a + γτ₂ b)/(1 + γτ₁ a)]` for diagonal `R` by one-dimensional
    /// quadrature of the Laplace representation.
    fn oracle(rho: &[f64], tau1: f64, tau2: f64, gamma: f64) -> f64 {
        quad::integrate_to_inf(
            |x| {
                let prod: f64 = rho
                    .iter()
                    .map(|p| 1.0 / (1.0 + gamma * tau1 * p * x))
                    .product();
                let sum: f64 = rho
                    .iter()
                    .map(|p| p * (1.0 + gamma * tau2 * p) / (1.0 + gamma * tau1 * p * x))
                    .sum();
                (-x).exp() * sum * prod
            },
            0.0,
            1e-13,
        )
    }

    #[test]
    fn closed_form_matches_quadrature() {
        for (rho, t1, t2, g) in [
            (vec![1.3, 0.7], 1.2, 0.8, 0.5),
            (vec![0.2, 1.8], 1.9, 0.1, 3.0),
            (vec![1.0], 1.5, 0.5, 0.03),
            (vec![0.5, 1.0, 1.5], 1.4, 0.6, 2.0),
        ] {
            let v = beamform_opt_closed(&rho, t1, t2, g).unwrap();
            let r = rho.len() as f64;
            let want = g * t1 * oracle(&rho, t1, t2, g) - r * g * t2;
            assert!(
                (v.margin - want).abs() < 1e-9 * (1.0 + want.abs()),
                "{rho:?}: {} vs {want}",
                v.margin
            );
        }
    }

    #[test]
    fn miso_reduction() {
        let (t1, t2, g) = (1.6, 0.4, 0.8);
        let mc = beamform_opt_mc(
            &HermitianMatrix::identity(1),
            &HermitianMatrix::from_diag(&[t1, t2]),
            g,
            200_000,
            &SeededStream::new(12, 0),
        )
        .unwrap();
        let lhs = quad::integrate_to_inf(
            |w| (1.0 + g * t2) * w / (1.0 + g * t1 * w) * (-w).exp(),
            0.0,
            1e-13,
        );
        let want = lhs - t2 / t1;
        assert!(
            (mc.margin - want).abs() < 4.0 * mc.margin_se,
            "{mc:?} vs {want}"
        );
        let closed = beamform_opt_closed(&[1.0], t1, t2, g).unwrap();
        assert!((closed.margin - g * t1 * want).abs() < 1e-9);
    }

    #[test]
    fn equal_transmit_eigenvalues_never_beamform() {
        for g in [0.01, 0.3, 1.0, 10.0] {
            for rho in [[1.0, 1.0], [0.4, 1.6]] {
                let v = beamform_opt_closed(&rho, 1.0, 1.0, g).unwrap();
                assert!(
                    !v.optimal && v.margin < 0.0,
                    "γ={g}, ρ={rho:?}: {}",
                    v.margin
                );
            }
        }
    }

    #[test]
    fn low_snr_limit_beamforms() {
        let v = beamform_opt_closed(&[0.8, 1.2], 1.3, 0.7, 1e-4).unwrap();
        assert!(v.optimal);
    }

    #[test]
    fn repeated_eigenvalues_are_continuous() {
        let g = 0.5;
        let exact = beamform_opt_closed(&[1.0, 1.0], 1.4, 0.6, g)
            .unwrap()
            .margin;
        let near = beamform_opt_closed(&[1.0, 1.0 + 1e-5], 1.4, 0.6, g)
            .unwrap()
            .margin;
        assert!((exact - near).abs() < 1e-4 * exact.abs());
        // both sides of the switch to the integral
        for rho in [
            [1.0, 1.0 + 0.999 * CLUSTER_GAP],
            [0.7, 0.7 / (1.0 - 1.001 * CLUSTER_GAP)],
        ] {
            assert_eq!(has_cluster(&rho), rho[0] == 1.0);
            let got = beamform_opt_closed(&rho, 1.2, 0.8, 0.3).unwrap().margin;
            let sum = closed_sum(&rho, 1.2, 0.8, 0.3).unwrap() - 2.0 * 0.3 * 0.8;
            let want = 0.3 * 1.2 * oracle(&rho, 1.2, 0.8, 0.3) - 2.0 * 0.3 * 0.8;
            assert!(
                (got - want).abs() < 1e-9 * want.abs(),
                "{rho:?}: {got} vs {want}"
            );
            assert!(
                (sum - want).abs() < 1e-9 * want.abs(),
                "{rho:?}: {sum} vs {want}"
            );
        }
    }

    #[test]
    fn left_side_decreases_with_snr() {
        let mut prev = f64::INFINITY;
        for db in [-20.0, -10.0, 0.0, 10.0, 20.0] {
            let g = 10f64.powf(db / 10.0);
            let lhs = oracle(&[0.7, 1.3], 1.5, 0.5, g);
            assert!(lhs < prev);
            prev = lhs;
        }
    }

    #[test]
    fn boundary_low_snr() {
        let g = 10f64.powf(-1.5);
        let taus = linspace(1.0, 1.99, 100);
        let pts = beamform_boundary(g, &taus, &[0.5, 1.0, 1.5]).unwrap();
        for p in &pts {
            let tau = p.tau.unwrap();
            assert!((tau - 1.03).abs() < 0.02, "{p:?}");
        }
        let high = beamform_boundary(100.0, &taus, &[1.0]).unwrap();
        assert!(high[0].tau.map_or(true, |t| t > pts[1].tau.unwrap()));
    }

    #[test]
    fn low_snr_covariances() {
        let law = ChannelLaw::rayleigh(3, 3);
        let low = low_snr_cov(&law).unwrap();
        assert_eq!(low.multiplicity, 3);
        assert!(
            (low.q.as_matrix() - &ComplexMatrix::identity(3).scale(1.0 / 3.0)).max_abs() < 1e-12
        );

        let law = ChannelLaw::kronecker(
            ComplexMatrix::zeros(2, 2),
            HermitianMatrix::identity(2),
            HermitianMatrix::from_diag(&[1.5, 0.5]),
        )
        .unwrap();
        let low = low_snr_cov(&law).unwrap();
        assert_eq!(low.multiplicity, 1);
        assert!((low.slope - 3.0).abs() < 1e-12);
        assert!((low.q[(0, 0)].re - 1.0).abs() < 1e-12);
        assert!((low.q.trace() - 1.0).abs() < 1e-12);

        // Ricean M = αI: λ₁ = α² + tr(R) λ₁(T)
        let alpha = 0.7;
        let law = ChannelLaw::kronecker(
            ComplexMatrix::identity(2).scale(alpha),
            HermitianMatrix::from_diag(&[1.2, 0.8]),
            HermitianMatrix::from_diag(&[1.5, 0.5]),
        )
        .unwrap();
        let low = low_snr_cov(&law).unwrap();
        assert!((low.slope - (alpha * alpha + 2.0 * 1.5)).abs() < 1e-12);
    }

    #[test]
    fn high_snr_point_mass() {
        let law = ChannelLaw::point(ComplexMatrix::identity(2));
        let mut prev_gap = f64::INFINITY;
        for g in [10.0, 100.0, 1000.0] {
            let h = high_snr_capacity(&law, g, 10, &SeededStream::new(0, 0)).unwrap();
            assert!((h.approx.mean - 2.0 * (g / 2.0f64).ln()).abs() < 1e-12);
            let gap = h.exact.mean - h.approx.mean;
            assert!(gap > 0.0 && gap < prev_gap);
            prev_gap = gap;
        }
    }

    #[test]
    fn high_snr_rayleigh() {
        let law = ChannelLaw::rayleigh(2, 2);
        let h = high_snr_capacity(&law, 1000.0, 100_000, &SeededStream::new(6, 0)).unwrap();
        assert!(
            (h.approx.mean - h.exact.mean).abs() < 0.05,
            "{:?} vs {:?}",
            h.approx,
            h.exact
        );
    }

    #[test]
    fn wishart_scale_examples() {
        let t = HermitianMatrix::from_diag(&[1.5, 0.5]);
        let q = HermitianMatrix::from_diag(&[0.3, 0.7]);
        let s = wishart_approx(&ComplexMatrix::zeros(2, 2), &t, &q).unwrap();
        assert!((s.as_matrix() - &ComplexMatrix::from_diag(&[0.45, 0.35])).max_abs() < 1e-12);
        let m = ComplexMatrix::from_real_rows(&[&[1.0, 2.0], &[0.0, 1.0]]).unwrap();
        let q = HermitianMatrix::identity(2).scale(0.5);
        let s = wishart_approx(&m, &HermitianMatrix::identity(2), &q).unwrap();
        let want = &ComplexMatrix::identity(2).scale(0.5) + &(&m.adjoint() * &m).scale(0.5);
        assert!((s.as_matrix() - &want).max_abs() < 1e-12);
        assert!(uniform_correlation(3, 0.3).unwrap()[(0, 0)].re == 1.0);
        assert!(uniform_correlation(3, -0.9).is_err());
    }
}
