//! Seeded, reproducible Monte Carlo estimation.
//!
//! Samples are generated in fixed-size batches. Batch `b` of stream
//! `(seed, index)` always draws from the same ChaCha8 block range, so the
//! batch results do not depend on how batches are scheduled across threads.
//! Per-batch statistics are merged in batch order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::channels::ChannelLaw;
use crate::error::{dimension, domain, Error, Result};
use crate::linalg::{log_det_plus_factored, psd_sqrt, ComplexMatrix, HermitianMatrix};

/// Draws per batch. Part of the reproducibility contract.
pub const BATCH: usize = 1024;

/// Default sample count inside optimizer iterations.
pub const DEFAULT_INNER_SAMPLES: usize = 10_000;

/// Default sample count for reported values.
pub const DEFAULT_FINAL_SAMPLES: usize = 100_000;

/// Seed used when the caller does not supply one.
pub const DEFAULT_SEED: u64 = 20_240_917;

/// Identifies one reproducible random sequence.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SeededStream {
    seed: u64,
    index: u64,
}

impl SeededStream {
    pub fn new(seed: u64, index: u64) -> Self {
        Self { seed, index }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn index(&self) -> u64 {
        self.index
    }

    /// Generator positioned at the start of batch `batch`.
    pub fn batch_rng(&self, batch: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.index);
        rng.set_word_pos(u128::from(batch) << 40);
        rng
    }

    /// Generator for sequential use; same as batch 0.
    pub fn rng(&self) -> ChaCha8Rng {
        self.batch_rng(0)
    }

    /// A distinct substream derived from this one.
    pub fn child(&self, tag: u64) -> Self {
        Self {
            seed: self.seed,
            index: splitmix64(self.index ^ splitmix64(tag.wrapping_add(0x5851_f42d_4c95_7f2d))),
        }
    }
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Scalar estimate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    /// Sample standard deviation over `√samples`.
    pub std_err: f64,
    pub samples: usize,
}

impl McEstimate {
    pub fn exact(value: f64) -> Self {
        Self {
            mean: value,
            std_err: 0.0,
            samples: 1,
        }
    }
}

/// Entrywise matrix estimate. The standard error of a complex entry combines
/// the real and imaginary parts: `√(var re + var im) / √samples`.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixEstimate {
    pub mean: ComplexMatrix,
    /// Row-major, same shape as `mean`.
    pub std_err: Vec<f64>,
    pub samples: usize,
}

impl MatrixEstimate {
    pub fn se(&self, i: usize, j: usize) -> f64 {
        self.std_err[i * self.mean.cols() + j]
    }

    pub fn max_se(&self) -> f64 {
        self.std_err.iter().fold(0.0, |a, &b| a.max(b))
    }
}

/// Running mean and centred second moment for a vector of observables.
#[derive(Clone, Debug)]
pub(crate) struct Moments {
    pub n: usize,
    pub mean: Vec<f64>,
    pub m2: Vec<f64>,
}

impl Moments {
    pub fn new(dim: usize) -> Self {
        Self {
            n: 0,
            mean: vec![0.0; dim],
            m2: vec![0.0; dim],
        }
    }

    pub fn push(&mut self, x: &[f64]) {
        self.n += 1;
        let n = self.n as f64;
        for ((m, s), &v) in self.mean.iter_mut().zip(self.m2.iter_mut()).zip(x) {
            let d = v - *m;
            *m += d / n;
            *s += d * (v - *m);
        }
    }

    pub fn merge(&mut self, other: &Self) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = other.clone();
            return;
        }
        let (na, nb) = (self.n as f64, other.n as f64);
        let n = na + nb;
        for i in 0..self.mean.len() {
            let d = other.mean[i] - self.mean[i];
            self.mean[i] += d * nb / n;
            self.m2[i] += other.m2[i] + d * d * na * nb / n;
        }
        self.n += other.n;
    }

    /// Standard error of component `i`.
    pub fn std_err(&self, i: usize) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        let n = self.n as f64;
        (self.m2[i] / (n - 1.0)).max(0.0).sqrt() / n.sqrt()
    }

    pub fn scalar(&self, i: usize) -> McEstimate {
        McEstimate {
            mean: self.mean[i],
            std_err: self.std_err(i),
            samples: self.n,
        }
    }
}

/// Runs `samples` draws in batches. `f` fills the observable buffer and
/// returns `false` to exclude a draw. Returns the moments and the number of
/// excluded draws.
pub(crate) fn run_batches<F>(
    samples: usize,
    stream: &SeededStream,
    dim: usize,
    f: F,
) -> (Moments, usize)
where
    F: Fn(&mut ChaCha8Rng, &mut [f64]) -> bool + Sync,
{
    let batches = samples.div_ceil(BATCH);
    let parts: Vec<(Moments, usize)> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream.batch_rng(b as u64);
            let count = BATCH.min(samples - b * BATCH);
            let mut acc = Moments::new(dim);
            let mut buf = vec![0.0; dim];
            let mut skipped = 0;
            for _ in 0..count {
                if f(&mut rng, &mut buf) {
                    acc.push(&buf);
                } else {
                    skipped += 1;
                }
            }
            (acc, skipped)
        })
        .collect();
    merge_ordered(dim, parts)
}

/// Same as [`run_batches`] over a fixed slice of items.
pub(crate) fn moments_over<T, F>(items: &[T], dim: usize, f: F) -> (Moments, usize)
where
    T: Sync,
    F: Fn(&T, &mut [f64]) -> bool + Sync,
{
    let parts: Vec<(Moments, usize)> = items
        .par_chunks(BATCH)
        .map(|chunk| {
            let mut acc = Moments::new(dim);
            let mut buf = vec![0.0; dim];
            let mut skipped = 0;
            for item in chunk {
                if f(item, &mut buf) {
                    acc.push(&buf);
                } else {
                    skipped += 1;
                }
            }
            (acc, skipped)
        })
        .collect();
    merge_ordered(dim, parts)
}

fn merge_ordered(dim: usize, parts: Vec<(Moments, usize)>) -> (Moments, usize) {
    let mut total = Moments::new(dim);
    let mut skipped = 0;
    for (m, s) in &parts {
        total.merge(m);
        skipped += s;
    }
    (total, skipped)
}

fn check_trace(q: &HermitianMatrix) -> Result<()> {
    let tr = q.trace();
    if tr > 1.0 + 1e-9 {
        return Err(domain!("covariance trace {tr} exceeds 1"));
    }
    Ok(())
}

/// `E[ln det(I + γ H Q H†)]` in nats.
pub fn ergodic_mi(
    q: &HermitianMatrix,
    law: &ChannelLaw,
    gamma: f64,
    samples: usize,
    stream: &SeededStream,
) -> Result<McEstimate> {
    if q.dim() != law.tx() {
        return Err(dimension!(
            "covariance is {0}x{0}, channel has {1} inputs",
            q.dim(),
            law.tx()
        ));
    }
    if !(gamma > 0.0) {
        return Err(domain!("SNR must be positive, got {gamma}"));
    }
    check_trace(q)?;
    let root = psd_sqrt(q);
    let root = root.as_matrix();
    let eval = |h: &ComplexMatrix| -> Result<f64> {
        let s = (&h.adjoint() * h).scale(gamma);
        log_det_plus_factored(&s, root)
    };
    if law.is_deterministic() {
        let h = law.sample(&mut stream.rng());
        return Ok(McEstimate::exact(eval(&h)?));
    }
    if samples < 2 {
        return Err(domain!("need at least 2 samples"));
    }
    let (m, _) = run_batches(samples, stream, 1, |rng, out| {
        let h = law.sample(rng);
        match eval(&h) {
            Ok(v) => {
                out[0] = v;
                true
            }
            Err(_) => false,
        }
    });
    finite(m.scalar(0), samples, m.n)
}

fn finite(est: McEstimate, wanted: usize, got: usize) -> Result<McEstimate> {
    if got != wanted || !est.mean.is_finite() {
        return Err(Error::Numerical(format!(
            "{} of {wanted} draws gave a non-finite value",
            wanted - got
        )));
    }
    Ok(est)
}

/// Entrywise mean of a matrix-valued function of `H`.
pub fn expect_matrix<F>(
    f: F,
    law: &ChannelLaw,
    samples: usize,
    stream: &SeededStream,
) -> Result<MatrixEstimate>
where
    F: Fn(&ComplexMatrix) -> ComplexMatrix + Sync,
{
    if law.is_deterministic() {
        let mean = f(&law.sample(&mut stream.rng()));
        let n = mean.rows() * mean.cols();
        return Ok(MatrixEstimate {
            mean,
            std_err: vec![0.0; n],
            samples: 1,
        });
    }
    if samples < 2 {
        return Err(domain!("need at least 2 samples"));
    }
    let probe = f(&law.sample(&mut stream.child(u64::MAX).rng()));
    let (rows, cols) = (probe.rows(), probe.cols());
    let (m, skipped) = run_batches(samples, stream, 2 * rows * cols, |rng, out| {
        let v = f(&law.sample(rng));
        if v.rows() != rows || v.cols() != cols || !v.is_finite() {
            return false;
        }
        for (k, z) in v.data().iter().enumerate() {
            out[2 * k] = z.re;
            out[2 * k + 1] = z.im;
        }
        true
    });
    if skipped > 0 {
        return Err(Error::Numerical(format!(
            "{skipped} of {samples} draws gave a non-finite or misshapen value"
        )));
    }
    Ok(moments_to_matrix(&m, rows, cols))
}

pub(crate) fn moments_to_matrix(m: &Moments, rows: usize, cols: usize) -> MatrixEstimate {
    let n = rows * cols;
    let data = (0..n)
        .map(|k| num_complex::Complex64::new(m.mean[2 * k], m.mean[2 * k + 1]))
        .collect();
    let std_err = (0..n)
        .map(|k| m.std_err(2 * k).hypot(m.std_err(2 * k + 1)))
        .collect();
    MatrixEstimate {
        mean: ComplexMatrix::new(rows, cols, data).expect("finite moments"),
        std_err,
        samples: m.n,
    }
}

/// Fixed pool of `S = γ H†H` draws, reused across optimizer iterations so
/// each iteration sees the same randomness.
#[derive(Clone, Debug)]
pub struct SamplePool {
    gamma: f64,
    s: Vec<ComplexMatrix>,
    deterministic: bool,
}

impl SamplePool {
    /// Draws `samples` matrices; a deterministic law yields a single entry.
    pub fn draw(
        law: &ChannelLaw,
        gamma: f64,
        samples: usize,
        stream: &SeededStream,
    ) -> Result<Self> {
        Self::draw_rotated(law, gamma, None, samples, stream)
    }

    /// As [`SamplePool::draw`] with `S = γ U†H†HU` for a fixed unitary `U`.
    pub fn draw_rotated(
        law: &ChannelLaw,
        gamma: f64,
        u: Option<&ComplexMatrix>,
        samples: usize,
        stream: &SeededStream,
    ) -> Result<Self> {
        if !(gamma > 0.0) {
            return Err(domain!("SNR must be positive, got {gamma}"));
        }
        if let Some(u) = u {
            if u.rows() != law.tx() || u.cols() != law.tx() {
                return Err(dimension!("basis must be {0}x{0}", law.tx()));
            }
        }
        let make = |h: ComplexMatrix| -> ComplexMatrix {
            let g = &h.adjoint() * &h;
            let g = match u {
                Some(u) => &(&u.adjoint() * &g) * u,
                None => g,
            };
            HermitianMatrix::symmetrize(g.scale(gamma)).into_matrix()
        };
        let deterministic = law.is_deterministic();
        if deterministic {
            let h = law.sample(&mut stream.rng());
            return Ok(Self {
                gamma,
                s: vec![make(h)],
                deterministic,
            });
        }
        if samples < 2 {
            return Err(domain!("need at least 2 samples"));
        }
        let batches = samples.div_ceil(BATCH);
        let s: Vec<ComplexMatrix> = (0..batches)
            .into_par_iter()
            .flat_map_iter(|b| {
                let mut rng = stream.batch_rng(b as u64);
                let count = BATCH.min(samples - b * BATCH);
                (0..count)
                    .map(|_| make(law.sample(&mut rng)))
                    .collect::<Vec<_>>()
            })
            .collect();
        Ok(Self {
            gamma,
            s,
            deterministic,
        })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }

    pub fn is_deterministic(&self) -> bool {
        self.deterministic
    }

    pub fn dim(&self) -> usize {
        self.s[0].rows()
    }

    pub fn matrices(&self) -> &[ComplexMatrix] {
        &self.s
    }

    /// `E[ln det(I + S Q)]` over the pool.
    pub fn mi(&self, q: &HermitianMatrix) -> Result<McEstimate> {
        if q.dim() != self.dim() {
            return Err(dimension!(
                "covariance is {0}x{0}, pool is {1}x{1}",
                q.dim(),
                self.dim()
            ));
        }
        let root = psd_sqrt(q);
        let root = root.as_matrix();
        let (m, _) = moments_over(&self.s, 1, |s, out| match log_det_plus_factored(s, root) {
            Ok(v) => {
                out[0] = v;
                true
            }
            Err(_) => false,
        });
        let est = finite(m.scalar(0), self.s.len(), m.n)?;
        Ok(if self.deterministic {
            McEstimate::exact(est.mean)
        } else {
            est
        })
    }

    /// Entrywise mean of `f(S)` over the pool.
    pub fn expect<F>(&self, f: F) -> Result<MatrixEstimate>
    where
        F: Fn(&ComplexMatrix) -> ComplexMatrix + Sync,
    {
        let probe = f(&self.s[0]);
        let (rows, cols) = (probe.rows(), probe.cols());
        let (m, skipped) = moments_over(&self.s, 2 * rows * cols, |s, out| {
            let v = f(s);
            if v.rows() != rows || v.cols() != cols || !v.is_finite() {
                return false;
            }
            for (k, z) in v.data().iter().enumerate() {
                out[2 * k] = z.re;
                out[2 * k + 1] = z.im;
            }
            true
        });
        if skipped > 0 {
            return Err(Error::Numerical(format!(
                "{skipped} pool entries gave a non-finite value"
            )));
        }
        let mut est = moments_to_matrix(&m, rows, cols);
        if self.deterministic {
            est.std_err.iter_mut().for_each(|e| *e = 0.0);
        }
        Ok(est)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{exp_expint, quad};
    use rand::RngCore;

    #[test]
    fn streams_reproduce() {
        let a = SeededStream::new(7, 3);
        let mut r1 = a.batch_rng(5);
        let mut r2 = a.batch_rng(5);
        assert_eq!(r1.next_u64(), r2.next_u64());
        let mut r3 = SeededStream::new(7, 4).batch_rng(5);
        assert_ne!(a.batch_rng(5).next_u64(), r3.next_u64());
        assert_ne!(a.child(1), a.child(2));
    }

    #[test]
    fn merge_matches_single_pass() {
        let xs: Vec<f64> = (0..1000).map(|i| ((i * 37) % 101) as f64 * 0.1).collect();
        let mut whole = Moments::new(1);
        xs.iter().for_each(|x| whole.push(&[*x]));
        let mut parts = Moments::new(1);
        for chunk in xs.chunks(77) {
            let mut m = Moments::new(1);
            chunk.iter().for_each(|x| m.push(&[*x]));
            parts.merge(&m);
        }
        assert!((whole.mean[0] - parts.mean[0]).abs() < 1e-12);
        assert!((whole.m2[0] - parts.m2[0]).abs() < 1e-9 * whole.m2[0]);
    }

    #[test]
    fn point_mass_is_exact() {
        let h = ComplexMatrix::from_real_rows(&[&[2.0, 0.0], &[0.0, 1.0]]).unwrap();
        let law = ChannelLaw::point(h);
        let q = HermitianMatrix::from_diag(&[0.5, 0.5]);
        let est = ergodic_mi(&q, &law, 1.0, 1000, &SeededStream::new(1, 0)).unwrap();
        assert_eq!(est.std_err, 0.0);
        assert!((est.mean - (3.0f64.ln() + 1.5f64.ln())).abs() < 1e-14);
    }

    #[test]
    fn siso_rayleigh_against_closed_form() {
        let law = ChannelLaw::rayleigh(1, 1);
        let q = HermitianMatrix::identity(1);
        for gamma in [0.5, 2.0] {
            let est = ergodic_mi(&q, &law, gamma, 100_000, &SeededStream::new(11, 0)).unwrap();
            let exact = exp_expint(1.0 / gamma).unwrap();
            let oracle =
                quad::integrate_to_inf(|x| (1.0 + gamma * x).ln() * (-x).exp(), 0.0, 1e-12);
            assert!((exact - oracle).abs() < 1e-9);
            assert!(
                (est.mean - exact).abs() < 3.0 * est.std_err,
                "{est:?} vs {exact}"
            );
        }
    }

    #[test]
    fn std_err_scales_as_inverse_root() {
        let law = ChannelLaw::rayleigh(1, 1);
        let q = HermitianMatrix::identity(1);
        let a = ergodic_mi(&q, &law, 1.0, 25_000, &SeededStream::new(5, 0)).unwrap();
        let b = ergodic_mi(&q, &law, 1.0, 100_000, &SeededStream::new(5, 1)).unwrap();
        let ratio = a.std_err / b.std_err;
        assert!((ratio - 2.0).abs() < 0.4, "ratio {ratio}");
    }

    #[test]
    fn bit_identical_across_thread_counts() {
        let law = ChannelLaw::rayleigh(2, 2);
        let q = HermitianMatrix::from_diag(&[0.5, 0.5]);
        let stream = SeededStream::new(99, 2);
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| ergodic_mi(&q, &law, 1.0, 10_000, &stream).unwrap())
        };
        let one = run(1);
        let four = run(4);
        assert_eq!(one.mean.to_bits(), four.mean.to_bits());
        assert_eq!(one.std_err.to_bits(), four.std_err.to_bits());
    }

    #[test]
    fn expectation_of_constant_and_zero_mean() {
        let law = ChannelLaw::rayleigh(2, 3);
        let c = ComplexMatrix::from_diag(&[1.0, 2.0]);
        let est = expect_matrix(|_| c.clone(), &law, 5000, &SeededStream::new(3, 0)).unwrap();
        assert_eq!(est.mean, c);
        assert_eq!(est.max_se(), 0.0);

        let est = expect_matrix(|h| h.clone(), &law, 50_000, &SeededStream::new(3, 1)).unwrap();
        for i in 0..2 {
            for j in 0..3 {
                assert!(est.mean[(i, j)].norm() < 3.0 * est.se(i, j) + 1e-12);
            }
        }
    }

    #[test]
    fn pool_matches_direct_estimate() {
        let law = ChannelLaw::rayleigh(2, 2);
        let q = HermitianMatrix::from_diag(&[0.5, 0.5]);
        let stream = SeededStream::new(8, 0);
        let direct = ergodic_mi(&q, &law, 1.0, 3000, &stream).unwrap();
        let pooled = SamplePool::draw(&law, 1.0, 3000, &stream)
            .unwrap()
            .mi(&q)
            .unwrap();
        assert!((direct.mean - pooled.mean).abs() < 1e-12);
    }

    #[test]
    fn rejects_oversized_trace() {
        let law = ChannelLaw::rayleigh(1, 2);
        let q = HermitianMatrix::identity(2);
        assert!(ergodic_mi(&q, &law, 1.0, 100, &SeededStream::new(0, 0)).is_err());
    }
}
