use crate::channels::ChannelLaw;
use crate::error::{domain, Error, Result};
use crate::linalg::{
    expint_gamma0, herm_eig, ln_factorial, quad, upper_gamma_int, HermitianMatrix,
};
use crate::montecarlo::{SeededStream, BATCH};
use rayon::prelude::*;

/// Unordered eigenvalue density of `H H†` (one eigenvalue picked at random).
#[derive(Clone, Debug)]
pub enum EigDensity {
    Wishart(WishartDensity),
    Empirical(EmpiricalDensity),
    PointMasses(PointMasses),
}

/// Complex `m × m` Wishart with `n` degrees of freedom and unit-variance
/// entries, stored as `f(λ) = Σ_j c_j λ^j e^{−λ}`.
#[derive(Clone, Debug)]
pub struct WishartDensity {
    m: usize,
    n: usize,
    coeffs: Vec<f64>,
}

/// Sorted eigenvalue pool; every query is an exact pool average.
#[derive(Clone, Debug)]
pub struct EmpiricalDensity {
    values: Vec<f64>,
    // suffix[i] = Σ_{k ≥ i} over positive values
    suffix_inv: Vec<f64>,
    suffix_ln: Vec<f64>,
    bandwidth: f64,
}

/// Finitely many atoms.
#[derive(Clone, Debug)]
pub struct PointMasses {
    values: Vec<f64>,
    weights: Vec<f64>,
}

/// Closed-form unordered eigenvalue density of the `m × m` complex Wishart
/// with `n ≥ m` degrees of freedom.
pub fn wishart_density(m: usize, n: usize) -> Result<EigDensity> {
    if m == 0 || m > n {
        return Err(domain!("Wishart density needs 1 ≤ m ≤ n, got m={m}, n={n}"));
    }
    let alpha = n - m;
    let mut coeffs = vec![0.0; 2 * (m - 1) + alpha + 1];
    for k in 0..m {
        // L_k^{(α)}(x) = Σ_i (−1)^i C(k+α, k−i) x^i / i!
        let lag: Vec<f64> = (0..=k)
            .map(|i| {
                let ln_binom =
                    ln_factorial(k + alpha) - ln_factorial(k - i) - ln_factorial(alpha + i);
                let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
                sign * (ln_binom - ln_factorial(i)).exp()
            })
            .collect();
        let weight = (ln_factorial(k) - ln_factorial(k + alpha)).exp() / m as f64;
        for (i, a) in lag.iter().enumerate() {
            for (j, b) in lag.iter().enumerate() {
                coeffs[i + j + alpha] += weight * a * b;
            }
        }
    }
    Ok(EigDensity::Wishart(WishartDensity { m, n, coeffs }))
}

/// Per-eigenvalue marginal of `m` parallel on-off branches.
pub fn onoff_density(m: usize, p: f64) -> Result<EigDensity> {
    if m == 0 {
        return Err(domain!("on-off channel needs at least one branch"));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(domain!("on probability {p} outside [0, 1]"));
    }
    PointMasses::new(vec![0.0, 1.0], vec![1.0 - p, p]).map(EigDensity::PointMasses)
}

/// Eigenvalue density of `H H†` for an arbitrary law. Exact atoms for
/// laws with finite support; otherwise a pool of `pool` draws, each
/// contributing its `min(r, t)` eigenvalues.
pub fn empirical_density(
    law: &ChannelLaw,
    pool: usize,
    stream: &SeededStream,
) -> Result<EigDensity> {
    if pool < 1000 {
        return Err(domain!(
            "empirical pool must hold at least 1000 draws, got {pool}"
        ));
    }
    let m = law.rx().min(law.tx());
    match law {
        ChannelLaw::OnOff(l) => return onoff_density(l.m(), l.p()),
        ChannelLaw::Mixture(l) => {
            let mut values = Vec::new();
            let mut weights = Vec::new();
            for (w, a) in l.weights().iter().zip(l.atoms()) {
                for v in top_eigs(a, m) {
                    values.push(v);
                    weights.push(w / m as f64);
                }
            }
            return PointMasses::new(values, weights).map(EigDensity::PointMasses);
        }
        _ if law.is_deterministic() => {
            let h = law.sample(&mut stream.rng());
            let values = top_eigs(&h, m);
            let weights = vec![1.0 / m as f64; m];
            return PointMasses::new(values, weights).map(EigDensity::PointMasses);
        }
        _ => {}
    }
    let batches = pool.div_ceil(BATCH);
    let values: Vec<f64> = (0..batches)
        .into_par_iter()
        .flat_map_iter(|b| {
            let mut rng = stream.batch_rng(b as u64);
            let count = BATCH.min(pool - b * BATCH);
            let mut out = Vec::with_capacity(count * m);
            for _ in 0..count {
                out.extend(top_eigs(&law.sample(&mut rng), m));
            }
            out
        })
        .collect();
    EmpiricalDensity::new(values).map(EigDensity::Empirical)
}

fn top_eigs(h: &crate::linalg::ComplexMatrix, m: usize) -> Vec<f64> {
    let g = HermitianMatrix::symmetrize(&h.adjoint() * h);
    herm_eig(&g)
        .values
        .into_iter()
        .take(m)
        .map(|v| v.max(0.0))
        .collect()
}

impl PointMasses {
    /// Atoms sorted ascending; equal values are merged.
    pub fn new(values: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if values.is_empty() || values.len() != weights.len() {
            return Err(domain!("point masses need one weight per value"));
        }
        if values.iter().any(|&v| !(v >= 0.0) || !v.is_finite())
            || weights.iter().any(|&w| !(w >= 0.0))
        {
            return Err(domain!(
                "point masses need finite non-negative values and weights"
            ));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(domain!("point mass weights sum to {total}, not 1"));
        }
        let mut pairs: Vec<(f64, f64)> = values
            .into_iter()
            .zip(weights)
            .filter(|p| p.1 > 0.0)
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut values: Vec<f64> = Vec::new();
        let mut weights: Vec<f64> = Vec::new();
        for (v, w) in pairs {
            if values.last() == Some(&v) {
                *weights.last_mut().unwrap() += w;
            } else {
                values.push(v);
                weights.push(w);
            }
        }
        Ok(Self { values, weights })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

impl EmpiricalDensity {
    /// Pool of eigenvalues; negative round-off is clamped to 0.
    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 || values.iter().any(|v| !v.is_finite()) {
            return Err(domain!(
                "empirical density needs at least two finite values"
            ));
        }
        values.iter_mut().for_each(|v| *v = v.max(0.0));
        values.sort_by(f64::total_cmp);
        let n = values.len();
        let mut suffix_inv = vec![0.0; n + 1];
        let mut suffix_ln = vec![0.0; n + 1];
        for i in (0..n).rev() {
            let v = values[i];
            let (inv, ln) = if v > 0.0 {
                (1.0 / v, v.ln())
            } else {
                (0.0, 0.0)
            };
            suffix_inv[i] = suffix_inv[i + 1] + inv;
            suffix_ln[i] = suffix_ln[i + 1] + ln;
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let sd = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
        let iqr = values[3 * n / 4] - values[n / 4];
        let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
        let bandwidth = (0.9 * spread * (n as f64).powf(-0.2)).max(1e-12);
        Ok(Self {
            values,
            suffix_inv,
            suffix_ln,
            bandwidth,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Index of the first value strictly above `x`.
    fn above(&self, x: f64) -> usize {
        self.values.partition_point(|&v| v <= x)
    }

    /// Sums over the values in `(lo, hi]`: count, Σ 1/λ, Σ ln λ.
    fn window(&self, lo: f64, hi: f64) -> (f64, f64, f64) {
        let a = self.above(lo);
        let b = self.above(hi).max(a);
        (
            (b - a) as f64,
            self.suffix_inv[a] - self.suffix_inv[b],
            self.suffix_ln[a] - self.suffix_ln[b],
        )
    }
}

impl WishartDensity {
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Coefficients `c_j` of `f(λ) = Σ c_j λ^j e^{−λ}`.
    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// `∫_x^∞ (ξ − 1/λ) f dλ`.
    fn power_tail(&self, xi: f64, x: f64) -> Result<f64> {
        let mut acc = 0.0;
        for (j, &c) in self.coeffs.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            acc += c * (xi * upper_gamma_int(j + 1, x)? - upper_gamma_int(j, x)?);
        }
        Ok(acc)
    }

    /// `∫_x^∞ ln(ξλ) f dλ`.
    fn log_tail(&self, xi: f64, x: f64) -> Result<f64> {
        let e1 = expint_gamma0(x)?;
        let mut acc = 0.0;
        for (j, &c) in self.coeffs.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let mut inner = e1;
            for i in 1..=j {
                inner += upper_gamma_int(i, x)? / ln_factorial(i).exp();
            }
            acc += c * ((xi * x).ln() * upper_gamma_int(j + 1, x)? + ln_factorial(j).exp() * inner);
        }
        Ok(acc)
    }
}

impl EigDensity {
    /// Density of the continuous part. Point masses have none and return 0.
    pub fn pdf(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        match self {
            Self::Wishart(w) => {
                let poly = w.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c);
                (poly * (-x).exp()).max(0.0)
            }
            Self::Empirical(e) => {
                let h = e.bandwidth;
                (self.cdf(x + h) - self.cdf(x - h)) / (2.0 * h)
            }
            Self::PointMasses(_) => 0.0,
        }
    }

    /// `P(λ ≤ x)`.
    pub fn cdf(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        match self {
            Self::Wishart(w) => {
                if x == 0.0 {
                    return 0.0;
                }
                let tail: f64 = w
                    .coeffs
                    .iter()
                    .enumerate()
                    .map(|(j, &c)| c * upper_gamma_int(j + 1, x).unwrap_or(0.0))
                    .sum();
                (1.0 - tail).clamp(0.0, 1.0)
            }
            Self::Empirical(e) => e.above(x) as f64 / e.len() as f64,
            Self::PointMasses(p) => p
                .values
                .iter()
                .zip(&p.weights)
                .filter(|(v, _)| **v <= x)
                .map(|(_, w)| w)
                .sum(),
        }
    }

    /// Smallest `x` with `F(x) ≥ prob`.
    pub fn quantile(&self, prob: f64) -> f64 {
        let prob = prob.clamp(0.0, 1.0);
        match self {
            Self::Empirical(e) => {
                let k = ((prob * e.len() as f64).ceil() as usize).clamp(1, e.len());
                e.values[k - 1]
            }
            Self::PointMasses(p) => {
                let mut acc = 0.0;
                for (v, w) in p.values.iter().zip(&p.weights) {
                    acc += w;
                    if acc >= prob - 1e-15 {
                        return *v;
                    }
                }
                *p.values.last().unwrap()
            }
            Self::Wishart(_) => {
                let (mut lo, mut hi) = (0.0, 1.0);
                while self.cdf(hi) < prob {
                    hi *= 2.0;
                }
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if self.cdf(mid) < prob {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                hi
            }
        }
    }

    /// `P(λ > 0)`.
    pub fn mass_above_zero(&self) -> f64 {
        1.0 - self.cdf(0.0)
    }

    /// `E[λ]`.
    pub fn mean(&self) -> f64 {
        match self {
            Self::Wishart(w) => w
                .coeffs
                .iter()
                .enumerate()
                .map(|(j, c)| c * ln_factorial(j + 1).exp())
                .sum(),
            Self::Empirical(e) => e.values.iter().sum::<f64>() / e.len() as f64,
            Self::PointMasses(p) => p.values.iter().zip(&p.weights).map(|(v, w)| v * w).sum(),
        }
    }

    /// `E[1/λ]`; `+∞` when it diverges or an atom sits at 0.
    pub fn inverse_mean(&self) -> f64 {
        match self {
            Self::Wishart(w) => {
                if w.coeffs[0] != 0.0 {
                    return f64::INFINITY;
                }
                w.coeffs
                    .iter()
                    .enumerate()
                    .skip(1)
                    .map(|(j, c)| c * ln_factorial(j - 1).exp())
                    .sum()
            }
            Self::Empirical(e) => {
                if e.values[0] <= 0.0 {
                    f64::INFINITY
                } else {
                    e.suffix_inv[0] / e.len() as f64
                }
            }
            Self::PointMasses(p) => {
                if p.values[0] <= 0.0 {
                    f64::INFINITY
                } else {
                    p.values.iter().zip(&p.weights).map(|(v, w)| w / v).sum()
                }
            }
        }
    }

    /// `E[g(λ)]`. Closed-form densities use adaptive quadrature.
    pub fn expect<G: Fn(f64) -> f64>(&self, g: G) -> f64 {
        match self {
            Self::Wishart(_) => quad::integrate_to_inf(|x| g(x) * self.pdf(x), 0.0, 1e-12),
            Self::Empirical(e) => e.values.iter().map(|&v| g(v)).sum::<f64>() / e.len() as f64,
            Self::PointMasses(p) => p
                .values
                .iter()
                .zip(&p.weights)
                .map(|(&v, w)| w * g(v))
                .sum(),
        }
    }

    /// `∫_{1/ξ}^{upper} (ξ − 1/λ) f dλ`, with `upper = None` meaning `∞`.
    pub fn tail_power(&self, xi: f64, upper: Option<f64>) -> Result<f64> {
        check_level(xi)?;
        let lo = 1.0 / xi;
        if let Some(u) = upper {
            if u <= lo {
                return Ok(0.0);
            }
        }
        match self {
            Self::Wishart(w) => {
                let head = w.power_tail(xi, lo)?;
                let cut = match upper {
                    Some(u) if u.is_finite() => w.power_tail(xi, u)?,
                    _ => 0.0,
                };
                Ok((head - cut).max(0.0))
            }
            Self::Empirical(e) => {
                let (count, inv, _) = e.window(lo, upper.unwrap_or(f64::INFINITY));
                Ok(((xi * count - inv) / e.len() as f64).max(0.0))
            }
            Self::PointMasses(p) => Ok(p
                .atoms_in(lo, upper)
                .map(|(v, w)| w * (xi - 1.0 / v))
                .sum::<f64>()
                .max(0.0)),
        }
    }

    /// `∫_{1/ξ}^{upper} ln(ξλ) f dλ`, with `upper = None` meaning `∞`.
    pub fn tail_log(&self, xi: f64, upper: Option<f64>) -> Result<f64> {
        check_level(xi)?;
        let lo = 1.0 / xi;
        if let Some(u) = upper {
            if u <= lo {
                return Ok(0.0);
            }
        }
        match self {
            Self::Wishart(w) => {
                let head = w.log_tail(xi, lo)?;
                let cut = match upper {
                    Some(u) if u.is_finite() => w.log_tail(xi, u)?,
                    _ => 0.0,
                };
                Ok((head - cut).max(0.0))
            }
            Self::Empirical(e) => {
                let (count, _, ln) = e.window(lo, upper.unwrap_or(f64::INFINITY));
                Ok(((count * xi.ln() + ln) / e.len() as f64).max(0.0))
            }
            Self::PointMasses(p) => Ok(p
                .atoms_in(lo, upper)
                .map(|(v, w)| w * (xi * v).ln())
                .sum::<f64>()
                .max(0.0)),
        }
    }

    /// Number of eigenvalues backing an empirical density.
    pub fn pool_size(&self) -> Option<usize> {
        match self {
            Self::Empirical(e) => Some(e.len()),
            _ => None,
        }
    }
}

impl PointMasses {
    fn atoms_in(&self, lo: f64, upper: Option<f64>) -> impl Iterator<Item = (f64, f64)> + '_ {
        let hi = upper.unwrap_or(f64::INFINITY);
        self.values
            .iter()
            .zip(&self.weights)
            .filter(move |(v, _)| **v > lo && **v <= hi)
            .map(|(v, w)| (*v, *w))
    }
}

fn check_level(xi: f64) -> Result<()> {
    if !(xi > 0.0) || !xi.is_finite() {
        return Err(Error::Domain(format!(
            "water level must be positive and finite, got {xi}"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_closed_forms() {
        let f = wishart_density(1, 1).unwrap();
        assert!((f.pdf(1.0) - (-1.0f64).exp()).abs() < 1e-12);
        let f = wishart_density(2, 2).unwrap();
        assert!((f.pdf(2.0) - (-2.0f64).exp()).abs() < 1e-12);
        for x in [0.0, 0.3, 1.7, 6.0] {
            let want = (2.0 + (x - 2.0) * x) / (2.0 * f64::exp(x));
            assert!((f.pdf(x) - want).abs() < 1e-12);
        }
    }

    #[test]
    fn normalized_and_non_negative() {
        for (m, n) in [(1, 1), (2, 2), (2, 3), (3, 5), (4, 4)] {
            let f = wishart_density(m, n).unwrap();
            let total = quad::integrate_to_inf(|x| f.pdf(x), 0.0, 1e-13);
            assert!(
                (total - 1.0).abs() < 1e-6,
                "({m},{n}) integrates to {total}"
            );
            let top = n as f64 + 10.0 * (n as f64).sqrt();
            for k in 0..1000 {
                let x = top * k as f64 / 999.0;
                let WishartDensity { coeffs, .. } = match &f {
                    EigDensity::Wishart(w) => w.clone(),
                    _ => unreachable!(),
                };
                let poly = coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c);
                assert!(poly * (-x).exp() > -1e-12, "negative density at {x}");
            }
            // E[λ] = n for unit-variance entries.
            assert!((f.mean() - n as f64).abs() < 1e-9);
        }
        assert!(wishart_density(3, 2).is_err());
    }

    #[test]
    fn exact_tails_match_quadrature() {
        let f = wishart_density(2, 3).unwrap();
        let xi = 1.7;
        let p = quad::integrate(|x| (xi - 1.0 / x) * f.pdf(x), 1.0 / xi, 60.0, 1e-13);
        let l = quad::integrate(|x| (xi * x).ln() * f.pdf(x), 1.0 / xi, 60.0, 1e-13);
        assert!((f.tail_power(xi, None).unwrap() - p).abs() < 1e-10);
        assert!((f.tail_log(xi, None).unwrap() - l).abs() < 1e-10);
        let pb = quad::integrate(|x| (xi - 1.0 / x) * f.pdf(x), 1.0 / xi, 3.0, 1e-13);
        assert!((f.tail_power(xi, Some(3.0)).unwrap() - pb).abs() < 1e-10);
        let inv = quad::integrate_to_inf(|x| f.pdf(x) / x, 0.0, 1e-12);
        assert!((f.inverse_mean() - inv).abs() < 1e-8);
        assert!(wishart_density(2, 2).unwrap().inverse_mean().is_infinite());
    }

    #[test]
    fn four_by_four_matches_sampled_spectrum() {
        let f = wishart_density(4, 4).unwrap();
        let law = ChannelLaw::rayleigh(4, 4);
        let e = empirical_density(&law, 25_000, &SeededStream::new(21, 0)).unwrap();
        let EigDensity::Empirical(pool) = &e else {
            panic!("expected an empirical pool")
        };
        assert_eq!(pool.len(), 100_000);
        let n = pool.len() as f64;
        let ks = pool
            .values()
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                let fv = f.cdf(v);
                (fv - i as f64 / n)
                    .abs()
                    .max((fv - (i + 1) as f64 / n).abs())
            })
            .fold(0.0, f64::max);
        assert!(ks < 0.01, "KS distance {ks}");
    }

    #[test]
    fn point_and_onoff_densities() {
        let h = crate::linalg::ComplexMatrix::from_diag(&[2.0f64.sqrt(), 1.0]);
        let d = empirical_density(&ChannelLaw::point(h), 1000, &SeededStream::new(0, 0)).unwrap();
        let EigDensity::PointMasses(p) = &d else {
            panic!("expected atoms")
        };
        assert!((p.values()[0] - 1.0).abs() < 1e-12 && (p.values()[1] - 2.0).abs() < 1e-12);
        assert_eq!(p.weights(), &[0.5, 0.5]);

        let d = onoff_density(3, 0.5).unwrap();
        assert_eq!(d.cdf(0.5), 0.5);
        assert_eq!(onoff_density(3, 1.0).unwrap().cdf(0.5), 0.0);
        assert_eq!(onoff_density(3, 0.0).unwrap().cdf(0.0), 1.0);
        assert_eq!(onoff_density(3, 0.0).unwrap().mass_above_zero(), 0.0);
    }

    #[test]
    fn rayleigh_pool_mean() {
        let d = empirical_density(
            &ChannelLaw::rayleigh(1, 1),
            100_000,
            &SeededStream::new(4, 0),
        )
        .unwrap();
        assert!((d.mean() - 1.0).abs() < 0.02);
    }

    #[test]
    fn empirical_tails_are_pool_averages() {
        let d =
            EigDensity::Empirical(EmpiricalDensity::new(vec![0.0, 0.5, 1.0, 2.0, 4.0]).unwrap());
        let xi = 1.5;
        let want: f64 = [1.0, 2.0, 4.0].iter().map(|v| xi - 1.0 / v).sum::<f64>() / 5.0;
        assert!((d.tail_power(xi, None).unwrap() - want).abs() < 1e-15);
        let want: f64 = [1.0, 2.0].iter().map(|v| (xi * v).ln()).sum::<f64>() / 5.0;
        assert!((d.tail_log(xi, Some(3.0)).unwrap() - want).abs() < 1e-15);
        assert!(d.inverse_mean().is_infinite());
    }
}
