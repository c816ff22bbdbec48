//! Capacity-achieving transmit covariance under statistical channel knowledge.
//!
//! Two solvers share one sample pool per run (common random numbers), so the
//! stochastic fixed point becomes deterministic for that pool:
//!
//! * [`fixed_point_diag`] for a known eigenbasis `U`, iterating
//!   `q_k ← ν q_k E[((I + S Q̂)^{-1} S)_kk]`;
//! * [`iterate_general`] on the upper-triangular factor `T` of `Q = T†T`,
//!   iterating `T ← T (M + M†)` with `M = E[(I + S T†T)^{-1} S]`.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::channels::ChannelLaw;
use crate::error::{dimension, domain, Error, Result};
use crate::linalg::{
    chol_upper, ut_gram, Complex64, ComplexMatrix, HermitianMatrix, UpperTriangular,
};
use crate::montecarlo::{
    ergodic_mi, moments_over, McEstimate, SamplePool, SeededStream, DEFAULT_INNER_SAMPLES,
    DEFAULT_SEED,
};

/// Powers below this are reported as zero.
const ZERO_POWER: f64 = 1e-6;
/// Floor kept during the diagonal iteration, which needs `Q̂` invertible.
const POWER_FLOOR: f64 = 1e-12;
/// Factor entries below this magnitude do not enter the multiplier fit.
const ACTIVE_ENTRY: f64 = 1e-8;

/// Solver options, also accepted as JSON.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CovOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub samples: usize,
    pub damping: f64,
    pub seed: u64,
}

impl Default for CovOptions {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iter: 200,
            samples: DEFAULT_INNER_SAMPLES,
            damping: 0.5,
            seed: DEFAULT_SEED,
        }
    }
}

impl CovOptions {
    pub fn from_json(text: &str) -> Result<Self> {
        let opts: Self = serde_json::from_str(text)
            .map_err(|e| Error::Descriptor(format!("invalid solver options: {e}")))?;
        opts.validate()?;
        Ok(opts)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(domain!("tol must be positive"));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(domain!("damping must lie in (0, 1]"));
        }
        if self.samples < 2 {
            return Err(domain!("need at least 2 samples"));
        }
        Ok(())
    }

    fn pool_stream(&self) -> SeededStream {
        SeededStream::new(self.seed, 0)
    }

    fn check_stream(&self) -> SeededStream {
        SeededStream::new(self.seed, 1)
    }
}

/// One optimizer iteration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iter: usize,
    pub mi: f64,
    pub residual: f64,
}

#[derive(Clone, Debug)]
pub struct CovOptResult {
    /// Unit-trace optimal covariance.
    pub q: HermitianMatrix,
    /// `ut_gram(factor) = q`.
    pub factor: UpperTriangular,
    /// Evaluated on a stream independent of the optimization pool.
    pub mi: McEstimate,
    pub kkt_residual: f64,
    pub trace: Vec<TraceRow>,
    pub iterations: usize,
    pub converged: bool,
}

impl CovOptResult {
    /// `iter,mi,residual` with a header row.
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("iter,mi,residual\n");
        for row in &self.trace {
            let _ = writeln!(out, "{},{},{}", row.iter, row.mi, row.residual);
        }
        out
    }
}

/// Monte Carlo estimate of `M = E[(I + S T†T)^{-1} S]`.
#[derive(Clone, Debug, PartialEq)]
pub struct GradMatrix {
    pub m: ComplexMatrix,
    /// Row-major entrywise standard errors.
    pub std_err: Vec<f64>,
    pub samples: usize,
}

/// Diagonal KKT quantities for a power vector in a fixed basis.
#[derive(Clone, Debug, PartialEq)]
pub struct DiagKkt {
    /// `d_k = E[((I + S Q̂)^{-1} S)_kk]`.
    pub d: Vec<f64>,
    pub std_err: Vec<f64>,
    /// Mean of `d_k` over active modes.
    pub mu: f64,
    pub residual: f64,
}

fn check_basis(u: Option<&ComplexMatrix>, t: usize) -> Result<()> {
    if let Some(u) = u {
        if u.rows() != t || u.cols() != t {
            return Err(dimension!("basis must be {t}x{t}"));
        }
        let gram = &u.adjoint() * u;
        if (&gram - &ComplexMatrix::identity(t)).max_abs() > 1e-8 {
            return Err(domain!("basis is not unitary"));
        }
    }
    Ok(())
}

/// `(I + S Q)^{-1} S`.
fn resolvent_times(s: &ComplexMatrix, q: &ComplexMatrix) -> Result<ComplexMatrix> {
    let mut a = s * q;
    for i in 0..a.rows() {
        a[(i, i)] += 1.0;
    }
    a.solve(s)
}

fn diag_stats(pool: &SamplePool, q: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let t = q.len();
    let qm = ComplexMatrix::from_diag(q);
    let (m, skipped) = moments_over(pool.matrices(), t, |s, out| match resolvent_times(s, &qm) {
        Ok(x) => {
            for (k, o) in out.iter_mut().enumerate() {
                *o = x[(k, k)].re;
            }
            out.iter().all(|v| v.is_finite())
        }
        Err(_) => false,
    });
    if skipped > 0 {
        return Err(Error::Numerical(format!(
            "{skipped} samples gave a singular or non-finite resolvent"
        )));
    }
    let se = (0..t)
        .map(|k| {
            if pool.is_deterministic() {
                0.0
            } else {
                m.std_err(k)
            }
        })
        .collect();
    Ok((m.mean, se))
}

fn diag_residual(q: &[f64], d: &[f64], active_above: f64) -> (f64, f64) {
    let active: Vec<usize> = (0..q.len()).filter(|&k| q[k] > active_above).collect();
    if active.is_empty() {
        return (0.0, f64::INFINITY);
    }
    let mu = active.iter().map(|&k| d[k]).sum::<f64>() / active.len() as f64;
    if !(mu > 0.0) {
        return (mu, f64::INFINITY);
    }
    let spread = active
        .iter()
        .map(|&k| (d[k] - mu).abs() / mu)
        .fold(0.0, f64::max);
    let excess = (0..q.len())
        .filter(|&k| q[k] <= active_above)
        .map(|k| (d[k] - mu).max(0.0) / mu)
        .fold(0.0, f64::max);
    (mu, spread + excess)
}

/// KKT residual of the power vector `qhat` in basis `U` (identity when
/// `None`): relative spread of `d_k` over active modes plus the worst excess
/// of an inactive `d_k` over their mean.
pub fn kkt_residual_diag(
    qhat: &[f64],
    law: &ChannelLaw,
    gamma: f64,
    u: Option<&ComplexMatrix>,
    samples: usize,
    stream: &SeededStream,
) -> Result<DiagKkt> {
    let t = law.tx();
    if qhat.len() != t {
        return Err(dimension!(
            "power vector has {} entries, channel has {t} inputs",
            qhat.len()
        ));
    }
    if qhat.iter().any(|&q| !(q >= 0.0)) || (qhat.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(domain!("powers must be non-negative and sum to 1"));
    }
    check_basis(u, t)?;
    let pool = SamplePool::draw_rotated(law, gamma, u, samples, stream)?;
    let (d, std_err) = diag_stats(&pool, qhat)?;
    let (mu, residual) = diag_residual(qhat, &d, 0.0);
    Ok(DiagKkt {
        d,
        std_err,
        mu,
        residual,
    })
}

fn normalize(q: &mut [f64]) {
    let total: f64 = q.iter().sum();
    q.iter_mut().for_each(|x| *x /= total);
}

fn rotate_diag(u: Option<&ComplexMatrix>, q: &[f64]) -> HermitianMatrix {
    match u {
        Some(u) => HermitianMatrix::from_eigen(u, q),
        None => HermitianMatrix::from_diag(q),
    }
}

/// Optimal powers in the known eigenbasis `U` (identity when `None`).
pub fn fixed_point_diag(
    law: &ChannelLaw,
    gamma: f64,
    u: Option<&ComplexMatrix>,
    opts: &CovOptions,
) -> Result<CovOptResult> {
    opts.validate()?;
    let t = law.tx();
    check_basis(u, t)?;
    let pool = SamplePool::draw_rotated(law, gamma, u, opts.samples, &opts.pool_stream())?;
    let mut q = vec![1.0 / t as f64; t];
    let mut alpha = opts.damping;
    let mut trace = Vec::new();
    let mut mi = pool.mi(&HermitianMatrix::from_diag(&q))?;
    let mut best = (mi.mean, q.clone());
    let mut converged = false;
    let mut iterations = 0;
    for iter in 0..opts.max_iter {
        iterations = iter + 1;
        let (d, _) = diag_stats(&pool, &q)?;
        let reported: Vec<f64> = q
            .iter()
            .map(|&x| if x < ZERO_POWER { 0.0 } else { x })
            .collect();
        let (_, residual) = diag_residual(&reported, &d, 0.0);
        trace.push(TraceRow {
            iter,
            mi: mi.mean,
            residual,
        });
        if residual <= opts.tol {
            converged = true;
            break;
        }
        let mut next: Vec<f64> = q.iter().zip(&d).map(|(qk, dk)| qk * dk.max(0.0)).collect();
        normalize(&mut next);
        loop {
            let mut cand: Vec<f64> = q
                .iter()
                .zip(&next)
                .map(|(a, b)| ((1.0 - alpha) * a + alpha * b).max(POWER_FLOOR))
                .collect();
            normalize(&mut cand);
            let cand_mi = pool.mi(&HermitianMatrix::from_diag(&cand))?;
            if !cand_mi.mean.is_finite() {
                return Err(Error::Numerical(
                    "mutual information became non-finite".into(),
                ));
            }
            if cand_mi.mean >= mi.mean - 2.0 * mi.std_err || alpha < 1e-6 {
                q = cand;
                mi = cand_mi;
                break;
            }
            alpha *= 0.5;
        }
        if mi.mean > best.0 {
            best = (mi.mean, q.clone());
        }
    }
    if !converged {
        q = best.1;
    }
    let q: Vec<f64> = {
        let mut z: Vec<f64> = q
            .iter()
            .map(|&x| if x < ZERO_POWER { 0.0 } else { x })
            .collect();
        normalize(&mut z);
        z
    };
    let (d, _) = diag_stats(&pool, &q)?;
    let (_, kkt_residual) = diag_residual(&q, &d, 0.0);
    let full = rotate_diag(u, &q);
    finish(
        full,
        law,
        gamma,
        opts,
        kkt_residual,
        trace,
        iterations,
        converged,
    )
}

#[allow(clippy::too_many_arguments)]
fn finish(
    q: HermitianMatrix,
    law: &ChannelLaw,
    gamma: f64,
    opts: &CovOptions,
    kkt_residual: f64,
    trace: Vec<TraceRow>,
    iterations: usize,
    converged: bool,
) -> Result<CovOptResult> {
    let tr = q.trace();
    let q = q.scale(1.0 / tr);
    let factor = chol_upper(&q)?;
    let mi = ergodic_mi(&q, law, gamma, opts.samples, &opts.check_stream())?;
    Ok(CovOptResult {
        q,
        factor,
        mi,
        kkt_residual,
        trace,
        iterations,
        converged,
    })
}

/// Per-mode powers `γ q_k(γ)` along an ascending SNR grid, from
/// [`fixed_point_diag`].
pub fn mode_powers(
    law: &ChannelLaw,
    u: Option<&ComplexMatrix>,
    gammas: &[f64],
    opts: &CovOptions,
) -> Result<Vec<Vec<f64>>> {
    gammas
        .iter()
        .map(|&g| {
            let res = fixed_point_diag(law, g, u, opts)?;
            let basis = u
                .cloned()
                .unwrap_or_else(|| ComplexMatrix::identity(law.tx()));
            let inner = &(&basis.adjoint() * res.q.as_matrix()) * &basis;
            Ok((0..law.tx()).map(|k| g * inner[(k, k)].re).collect())
        })
        .collect()
}

/// True when every per-mode power is non-decreasing along the grid, up to
/// `0.01 γ` at the later grid point.
pub fn powers_nondecreasing(gammas: &[f64], powers: &[Vec<f64>]) -> bool {
    gammas
        .windows(2)
        .zip(powers.windows(2))
        .all(|(g, p)| p[0].iter().zip(&p[1]).all(|(a, b)| *b >= *a - 0.01 * g[1]))
}

/// Checks that un-normalized optimal powers grow with SNR.
pub fn monotonicity_check(
    law: &ChannelLaw,
    u: Option<&ComplexMatrix>,
    gammas: &[f64],
    opts: &CovOptions,
) -> Result<bool> {
    if gammas.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(domain!("SNR grid must be strictly ascending"));
    }
    Ok(powers_nondecreasing(
        gammas,
        &mode_powers(law, u, gammas, opts)?,
    ))
}

fn grad_on_pool(pool: &SamplePool, q: &ComplexMatrix) -> Result<GradMatrix> {
    let est = pool.expect(|s| {
        resolvent_times(s, q).unwrap_or_else(|_| {
            ComplexMatrix::new(1, 1, vec![Complex64::new(f64::NAN, 0.0)])
                .unwrap_or_else(|_| ComplexMatrix::zeros(0, 0))
        })
    })?;
    Ok(GradMatrix {
        m: est.mean,
        std_err: est.std_err,
        samples: est.samples,
    })
}

/// Monte Carlo estimate of `M = E[(I + S T†T)^{-1} S]` with `S = γ H†H`.
pub fn grad_matrix(
    tfac: &UpperTriangular,
    law: &ChannelLaw,
    gamma: f64,
    samples: usize,
    stream: &SeededStream,
) -> Result<GradMatrix> {
    if tfac.dim() != law.tx() {
        return Err(dimension!(
            "factor is {0}x{0}, channel has {1} inputs",
            tfac.dim(),
            law.tx()
        ));
    }
    let pool = SamplePool::draw(law, gamma, samples, stream)?;
    grad_on_pool(&pool, ut_gram(tfac).as_matrix())
}

/// `G = T (M + M†)`.
fn stationarity(t: &UpperTriangular, m: &ComplexMatrix) -> ComplexMatrix {
    t.as_matrix() * &(m + &m.adjoint())
}

/// General KKT residual from `G = T(M + M†)` against `2 μ̂ T`, with `μ̂`
/// fitted by least squares over the non-zero entries of `T`.
///
/// A zero diagonal entry `T_ii` adds the violation `(M_ii − μ̂)⁺` of the
/// boundary condition, read as the derivative net of the multiplier.
fn general_residual(t: &UpperTriangular, m: &ComplexMatrix) -> (f64, f64) {
    let g = stationarity(t, m);
    let n = t.dim();
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..n {
        for j in i..n {
            let tij = t[(i, j)];
            if tij.norm() > ACTIVE_ENTRY {
                num += (tij.conj() * g[(i, j)]).re;
                den += tij.norm_sqr();
            }
        }
    }
    if den == 0.0 {
        return (0.0, f64::INFINITY);
    }
    let mu = num / (2.0 * den);
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            if t[(i, j)].norm() > ACTIVE_ENTRY {
                worst = worst.max((g[(i, j)] - t[(i, j)] * (2.0 * mu)).norm());
            }
        }
    }
    let boundary = (0..n)
        .filter(|&i| t[(i, i)].re <= ACTIVE_ENTRY)
        .map(|i| (m[(i, i)].re - mu).max(0.0))
        .fold(0.0, f64::max);
    (mu, worst + boundary)
}

/// KKT residual of the factor `T` for the law, on a fresh pool.
pub fn kkt_residual_general(
    tfac: &UpperTriangular,
    law: &ChannelLaw,
    gamma: f64,
    samples: usize,
    stream: &SeededStream,
) -> Result<f64> {
    if (tfac.gram_trace() - 1.0).abs() > 1e-9 {
        return Err(domain!("factor must satisfy tr(T†T) = 1"));
    }
    let grad = grad_matrix(tfac, law, gamma, samples, stream)?;
    Ok(general_residual(tfac, &grad.m).1)
}

/// Factor iteration from `T = I/√t`.
pub fn iterate_general(law: &ChannelLaw, gamma: f64, opts: &CovOptions) -> Result<CovOptResult> {
    let t = law.tx();
    let start = UpperTriangular::identity(t).scale(1.0 / (t as f64).sqrt());
    iterate_general_from(law, gamma, start, opts)
}

/// Factor iteration from a given factor, which is rescaled to unit trace.
pub fn iterate_general_from(
    law: &ChannelLaw,
    gamma: f64,
    start: UpperTriangular,
    opts: &CovOptions,
) -> Result<CovOptResult> {
    opts.validate()?;
    if start.dim() != law.tx() {
        return Err(dimension!(
            "factor is {0}x{0}, channel has {1} inputs",
            start.dim(),
            law.tx()
        ));
    }
    let pool = SamplePool::draw(law, gamma, opts.samples, &opts.pool_stream())?;
    let mut tf = start.normalized()?;
    let mut mi = pool.mi(&ut_gram(&tf))?;
    let mut alpha = opts.damping;
    let mut trace = Vec::new();
    let mut best = (mi.mean, tf.clone());
    let mut converged = false;
    let mut iterations = 0;
    for iter in 0..opts.max_iter {
        iterations = iter + 1;
        let grad = grad_on_pool(&pool, ut_gram(&tf).as_matrix())?;
        let (_, residual) = general_residual(&tf, &grad.m);
        trace.push(TraceRow {
            iter,
            mi: mi.mean,
            residual,
        });
        if residual <= opts.tol {
            converged = true;
            break;
        }
        if trace.len() > 5 {
            let old = trace[trace.len() - 6].mi;
            if (mi.mean - old).abs() < opts.tol / 10.0 * mi.mean.abs().max(f64::MIN_POSITIVE) {
                converged = true;
                break;
            }
        }
        let update = UpperTriangular::from_upper_part(&stationarity(&tf, &grad.m))?.normalized()?;
        loop {
            let mixed = &tf.as_matrix().scale(1.0 - alpha) + &update.as_matrix().scale(alpha);
            let cand = UpperTriangular::from_upper_part(&mixed)?.normalized()?;
            if !cand.as_matrix().is_finite() {
                return Err(Error::Numerical("factor update became non-finite".into()));
            }
            let cand_mi = pool.mi(&ut_gram(&cand))?;
            if cand_mi.mean >= mi.mean - 2.0 * mi.std_err || alpha < 1e-6 {
                tf = cand;
                mi = cand_mi;
                break;
            }
            alpha *= 0.5;
        }
        if mi.mean > best.0 {
            best = (mi.mean, tf.clone());
        }
    }
    if !converged {
        tf = best.1;
    }
    let grad = grad_on_pool(&pool, ut_gram(&tf).as_matrix())?;
    let (_, kkt_residual) = general_residual(&tf, &grad.m);
    let q = ut_gram(&tf);
    let mut res = finish(
        q,
        law,
        gamma,
        opts,
        kkt_residual,
        trace,
        iterations,
        converged,
    )?;
    // keep the optimizer's own factor rather than a re-factorization
    res.factor = tf;
    Ok(res)
}
