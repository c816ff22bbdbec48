use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{dimension, domain, Result};
use crate::linalg::{chol_upper, psd_sqrt, svd, ComplexMatrix, HermitianMatrix};
use crate::montecarlo::SeededStream;

/// Probability law of the `r × t` channel matrix `H`.
///
/// The Gaussian variants use column stacking: `vec(H)` lists column 0 first,
/// so entry `(i, j)` sits at position `j·r + i`.
#[derive(Clone, Debug)]
pub enum ChannelLaw {
    PointMass(PointMass),
    MatrixGaussian(MatrixGaussian),
    Kronecker(Kronecker),
    Interpolated(Interpolated),
    Mixture(Mixture),
    OnOff(OnOff),
}

/// Deterministic channel.
#[derive(Clone, Debug)]
pub struct PointMass {
    h: ComplexMatrix,
}

/// `vec(H) ~ CN(vec(M), Σ)` with a general `rt × rt` covariance.
#[derive(Clone, Debug)]
pub struct MatrixGaussian {
    mean: ComplexMatrix,
    cov: HermitianMatrix,
    // Σ = L L†
    cov_lower: ComplexMatrix,
}

/// `H = M + R^{1/2} G T^{1/2}` with `G` i.i.d. unit-variance circular Gaussian.
#[derive(Clone, Debug)]
pub struct Kronecker {
    mean: ComplexMatrix,
    rx_corr: HermitianMatrix,
    tx_corr: HermitianMatrix,
    rx_sqrt: HermitianMatrix,
    tx_sqrt: HermitianMatrix,
}

/// `H = κ M₀ + (1 − κ) X` with `X = G Σ^{1/2}`, so the noise correlation acts
/// on the transmit side.
#[derive(Clone, Debug)]
pub struct Interpolated {
    kappa: f64,
    m0: ComplexMatrix,
    noise_cov: HermitianMatrix,
    noise_sqrt: HermitianMatrix,
}

/// Finitely many channel matrices drawn with the given probabilities.
#[derive(Clone, Debug)]
pub struct Mixture {
    weights: Vec<f64>,
    atoms: Vec<ComplexMatrix>,
}

/// `m` parallel channels, each independently on (gain 1) with probability `p`.
#[derive(Clone, Debug)]
pub struct OnOff {
    m: usize,
    p: f64,
}

fn check_psd(a: &HermitianMatrix, what: &str) -> Result<()> {
    chol_upper(a)
        .map(|_| ())
        .map_err(|_| domain!("{what} must be positive semidefinite"))
}

impl ChannelLaw {
    pub fn point(h: ComplexMatrix) -> Self {
        Self::PointMass(PointMass { h })
    }

    pub fn matrix_gaussian(mean: ComplexMatrix, cov: HermitianMatrix) -> Result<Self> {
        let n = mean.rows() * mean.cols();
        if cov.dim() != n {
            return Err(dimension!(
                "covariance must be {n}x{n} for a {}x{} mean",
                mean.rows(),
                mean.cols()
            ));
        }
        let upper =
            chol_upper(&cov).map_err(|_| domain!("covariance must be positive semidefinite"))?;
        Ok(Self::MatrixGaussian(MatrixGaussian {
            mean,
            cov,
            cov_lower: upper.as_matrix().adjoint(),
        }))
    }

    pub fn kronecker(
        mean: ComplexMatrix,
        rx_corr: HermitianMatrix,
        tx_corr: HermitianMatrix,
    ) -> Result<Self> {
        if rx_corr.dim() != mean.rows() || tx_corr.dim() != mean.cols() {
            return Err(dimension!(
                "correlation sizes {}/{} do not match a {}x{} mean",
                rx_corr.dim(),
                tx_corr.dim(),
                mean.rows(),
                mean.cols()
            ));
        }
        check_psd(&rx_corr, "receive correlation")?;
        check_psd(&tx_corr, "transmit correlation")?;
        Ok(Self::Kronecker(Kronecker {
            rx_sqrt: psd_sqrt(&rx_corr),
            tx_sqrt: psd_sqrt(&tx_corr),
            mean,
            rx_corr,
            tx_corr,
        }))
    }

    /// Zero-mean i.i.d. Rayleigh fading with `rx` receive and `tx` transmit antennas.
    pub fn rayleigh(rx: usize, tx: usize) -> Self {
        Self::kronecker(
            ComplexMatrix::zeros(rx, tx),
            HermitianMatrix::identity(rx),
            HermitianMatrix::identity(tx),
        )
        .expect("identity correlations are valid")
    }

    pub fn interpolated(kappa: f64, m0: ComplexMatrix, noise_cov: HermitianMatrix) -> Result<Self> {
        if !(0.0..=1.0).contains(&kappa) {
            return Err(domain!("interpolation factor {kappa} outside [0, 1]"));
        }
        if noise_cov.dim() != m0.cols() {
            return Err(dimension!(
                "noise covariance must be {}x{}",
                m0.cols(),
                m0.cols()
            ));
        }
        check_psd(&noise_cov, "noise covariance")?;
        Ok(Self::Interpolated(Interpolated {
            kappa,
            noise_sqrt: psd_sqrt(&noise_cov),
            m0,
            noise_cov,
        }))
    }

    pub fn mixture(weights: Vec<f64>, atoms: Vec<ComplexMatrix>) -> Result<Self> {
        if weights.is_empty() || weights.len() != atoms.len() {
            return Err(dimension!("mixture needs one weight per atom"));
        }
        if weights.iter().any(|&w| !(w >= 0.0)) {
            return Err(domain!("mixture weights must be non-negative"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(domain!("mixture weights sum to {total}, not 1"));
        }
        let (r, t) = (atoms[0].rows(), atoms[0].cols());
        if atoms.iter().any(|a| a.rows() != r || a.cols() != t) {
            return Err(dimension!("mixture atoms must share one shape"));
        }
        Ok(Self::Mixture(Mixture { weights, atoms }))
    }

    pub fn on_off(m: usize, p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(domain!("on probability {p} outside [0, 1]"));
        }
        if m == 0 {
            return Err(domain!("on-off channel needs at least one branch"));
        }
        Ok(Self::OnOff(OnOff { m, p }))
    }

    /// Number of receive antennas (rows of `H`).
    pub fn rx(&self) -> usize {
        match self {
            Self::PointMass(l) => l.h.rows(),
            Self::MatrixGaussian(l) => l.mean.rows(),
            Self::Kronecker(l) => l.mean.rows(),
            Self::Interpolated(l) => l.m0.rows(),
            Self::Mixture(l) => l.atoms[0].rows(),
            Self::OnOff(l) => l.m,
        }
    }

    /// Number of transmit antennas (columns of `H`).
    pub fn tx(&self) -> usize {
        match self {
            Self::PointMass(l) => l.h.cols(),
            Self::MatrixGaussian(l) => l.mean.cols(),
            Self::Kronecker(l) => l.mean.cols(),
            Self::Interpolated(l) => l.m0.cols(),
            Self::Mixture(l) => l.atoms[0].cols(),
            Self::OnOff(l) => l.m,
        }
    }

    /// True when every draw returns the same matrix.
    pub fn is_deterministic(&self) -> bool {
        match self {
            Self::PointMass(_) => true,
            Self::Interpolated(l) => l.kappa == 1.0,
            Self::Mixture(l) => l.weights.iter().filter(|&&w| w > 0.0).count() == 1,
            Self::OnOff(l) => l.p == 0.0 || l.p == 1.0,
            Self::MatrixGaussian(l) => l.cov.as_matrix().max_abs() == 0.0,
            Self::Kronecker(l) => {
                l.rx_corr.as_matrix().max_abs() == 0.0 || l.tx_corr.as_matrix().max_abs() == 0.0
            }
        }
    }

    /// One draw of `H`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> ComplexMatrix {
        match self {
            Self::PointMass(l) => l.h.clone(),
            Self::MatrixGaussian(l) => {
                let (r, t) = (l.mean.rows(), l.mean.cols());
                let g: Vec<Complex64> = (0..r * t).map(|_| cgauss(rng)).collect();
                let mut h = l.mean.clone();
                for a in 0..r * t {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for (b, gb) in g.iter().enumerate().take(a + 1) {
                        acc += l.cov_lower[(a, b)] * gb;
                    }
                    let (i, j) = (a % r, a / r);
                    h[(i, j)] += acc;
                }
                h
            }
            Self::Kronecker(l) => {
                let g = gaussian_matrix(rng, l.mean.rows(), l.mean.cols());
                let coloured = &(l.rx_sqrt.as_matrix() * &g) * l.tx_sqrt.as_matrix();
                &l.mean + &coloured
            }
            Self::Interpolated(l) => {
                if l.kappa == 1.0 {
                    return l.m0.clone();
                }
                let g = gaussian_matrix(rng, l.m0.rows(), l.m0.cols());
                let x = &g * l.noise_sqrt.as_matrix();
                &l.m0.scale(l.kappa) + &x.scale(1.0 - l.kappa)
            }
            Self::Mixture(l) => {
                let u: f64 = rng.gen();
                let mut acc = 0.0;
                for (w, a) in l.weights.iter().zip(&l.atoms) {
                    acc += w;
                    if u < acc {
                        return a.clone();
                    }
                }
                l.atoms[l.weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)].clone()
            }
            Self::OnOff(l) => {
                let diag: Vec<f64> = (0..l.m)
                    .map(|_| if rng.gen::<f64>() < l.p { 1.0 } else { 0.0 })
                    .collect();
                ComplexMatrix::from_diag(&diag)
            }
        }
    }

    /// `n` draws from the stream, reproducible for a fixed `(seed, index)`.
    pub fn sample_n(&self, n: usize, stream: &SeededStream) -> Vec<ComplexMatrix> {
        let mut rng = stream.rng();
        (0..n).map(|_| self.sample(&mut rng)).collect()
    }

    /// The `t × t` matrix `E[H†H]`.
    pub fn expected_gram(&self) -> HermitianMatrix {
        let gram = |m: &ComplexMatrix| &m.adjoint() * m;
        let out = match self {
            Self::PointMass(l) => gram(&l.h),
            Self::Kronecker(l) => {
                let tr_r = l.rx_corr.trace();
                &gram(&l.mean) + &l.tx_corr.as_matrix().scale(tr_r)
            }
            Self::MatrixGaussian(l) => {
                let (r, t) = (l.mean.rows(), l.mean.cols());
                let mut out = gram(&l.mean);
                // E[conj(H_ij) H_ik] (centred) = Σ[(i,k), (i,j)].
                for j in 0..t {
                    for k in 0..t {
                        let mut acc = Complex64::new(0.0, 0.0);
                        for i in 0..r {
                            acc += l.cov[(k * r + i, j * r + i)];
                        }
                        out[(j, k)] += acc;
                    }
                }
                out
            }
            Self::Interpolated(l) => {
                let r = l.m0.rows() as f64;
                let k = l.kappa;
                &gram(&l.m0).scale(k * k)
                    + &l.noise_cov.as_matrix().scale((1.0 - k) * (1.0 - k) * r)
            }
            Self::Mixture(l) => {
                let t = l.atoms[0].cols();
                let mut out = ComplexMatrix::zeros(t, t);
                for (w, a) in l.weights.iter().zip(&l.atoms) {
                    out = &out + &gram(a).scale(*w);
                }
                out
            }
            Self::OnOff(l) => ComplexMatrix::from_diag(&vec![l.p; l.m]),
        };
        HermitianMatrix::symmetrize(out)
    }
}

impl PointMass {
    pub fn matrix(&self) -> &ComplexMatrix {
        &self.h
    }
}

impl MatrixGaussian {
    pub fn mean(&self) -> &ComplexMatrix {
        &self.mean
    }

    pub fn cov(&self) -> &HermitianMatrix {
        &self.cov
    }
}

impl Kronecker {
    pub fn mean(&self) -> &ComplexMatrix {
        &self.mean
    }

    pub fn rx_corr(&self) -> &HermitianMatrix {
        &self.rx_corr
    }

    pub fn tx_corr(&self) -> &HermitianMatrix {
        &self.tx_corr
    }

    /// True when `tr(T) = t` and `tr(R) = r` to within `1e-9` relative.
    pub fn is_normalized(&self) -> bool {
        let t = self.tx_corr.dim() as f64;
        let r = self.rx_corr.dim() as f64;
        (self.tx_corr.trace() - t).abs() <= 1e-9 * t && (self.rx_corr.trace() - r).abs() <= 1e-9 * r
    }
}

impl Interpolated {
    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn m0(&self) -> &ComplexMatrix {
        &self.m0
    }

    pub fn noise_cov(&self) -> &HermitianMatrix {
        &self.noise_cov
    }
}

impl Mixture {
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn atoms(&self) -> &[ComplexMatrix] {
        &self.atoms
    }
}

impl OnOff {
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn p(&self) -> f64 {
        self.p
    }
}

/// Circularly symmetric unit-variance complex Gaussian: real and imaginary
/// parts i.i.d. `N(0, 1/2)`.
pub(crate) fn cgauss<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub(crate) fn gaussian_matrix<R: Rng + ?Sized>(
    rng: &mut R,
    rows: usize,
    cols: usize,
) -> ComplexMatrix {
    let data = (0..rows * cols).map(|_| cgauss(rng)).collect();
    ComplexMatrix::new(rows, cols, data).expect("finite Gaussian draws")
}

/// Haar-distributed `n × n` unitary: the polar factor `U V` of a complex
/// Gaussian matrix `G = U diag(σ) V`.
pub fn haar_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> ComplexMatrix {
    let d = svd(&gaussian_matrix(rng, n, n));
    &d.u * &d.v
}
