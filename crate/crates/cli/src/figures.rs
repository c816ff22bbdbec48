//! Data tables for the capacity, PAPR, beamforming and convergence plots. Each table is deterministic for a given
//! seed; `--snr-db`/`--snr` replace the default SNR grid.

use clap::Args;
use ergocap::analysis::{interp_defaults, interp_study, uniform_correlation, wishart_study};
use ergocap::channels::{haar_unitary, wishart_density, ChannelLaw, EigDensity};
use ergocap::covopt::{iterate_general, TraceRow};
use ergocap::linalg::{ComplexMatrix, HermitianMatrix};
use ergocap::montecarlo::{SeededStream, DEFAULT_FINAL_SAMPLES};
use ergocap::waterfill::{naive_avg_rate, papr, power_density, space_time, waterfill_det};
use serde_json::{json, Value};

use crate::args::{parse_grid, parse_sizes, OutputArgs, SnrArgs, SolverArgs, Unit};
use crate::commands::{boundary_rows, snr_record};
use crate::error::CliError;
use crate::output::{emit, num, Record};

#[derive(Args, Debug)]
pub struct FiguresArgs {
    /// siso, rayleigh-rates, rayleigh-gains, rayleigh-gains-4x4, papr, power-density, wishart-approx,
    /// beamform-boundary, convergence-rotated, convergence-ricean, interp-angles, interp-powers
    /// (or fig1 … fig12 in that order).
    pub id: String,
    /// Matrix sizes for wishart-approx and convergence-ricean, comma separated.
    #[arg(long)]
    pub sizes: Option<String>,
    /// Off-diagonal transmit correlation for wishart-approx and convergence-ricean.
    #[arg(long, default_value_t = 0.5)]
    pub tau: f64,
    /// Random instances for the convergence tables.
    #[arg(long)]
    pub instances: Option<usize>,
    #[arg(long = "kappa-grid", default_value = "0:1:0.05")]
    pub kappa_grid: String,
    /// Points per power-density curve.
    #[arg(long, default_value_t = 200)]
    pub points: usize,
    #[command(flatten)]
    pub snr: SnrArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

/// Table ids in their conventional order; `figN` names the N-th entry.
pub const TABLES: [&str; 12] = [
    "siso",
    "rayleigh-rates",
    "rayleigh-gains",
    "rayleigh-gains-4x4",
    "papr",
    "power-density",
    "wishart-approx",
    "beamform-boundary",
    "convergence-rotated",
    "convergence-ricean",
    "interp-angles",
    "interp-powers",
];

/// Resolves a table id or its `figN` alias.
pub fn resolve(id: &str) -> Option<&'static str> {
    if let Some(k) = id.strip_prefix("fig").and_then(|n| n.parse::<usize>().ok()) {
        return k.checked_sub(1).and_then(|i| TABLES.get(i)).copied();
    }
    TABLES.iter().find(|&&t| t == id).copied()
}

pub fn cmd_figures(a: &FiguresArgs) -> Result<(), CliError> {
    let id = resolve(&a.id).ok_or_else(|| {
        CliError::usage(format!(
            "unknown table {:?}; expected one of {} or fig1 … fig{}",
            a.id,
            TABLES.join(", "),
            TABLES.len()
        ))
    })?;
    let rows = match id {
        "siso" => siso(a)?,
        "rayleigh-rates" => rayleigh_rates(a, 2, false)?,
        "rayleigh-gains" => rayleigh_rates(a, 2, true)?,
        "rayleigh-gains-4x4" => rayleigh_rates(a, 4, true)?,
        "papr" => papr_table(a)?,
        "power-density" => power_density_table(a)?,
        "wishart-approx" => wishart_table(a)?,
        "beamform-boundary" => {
            let tau = parse_grid("1:1.995:0.005", "tau")?;
            let rho = parse_grid("1:1.95:0.05", "rho")?;
            boundary_rows(&a.snr.points("-15,-10,-5,0,5,10,15")?, &tau, &rho)?
        }
        "convergence-rotated" => convergence_rotated(a)?,
        "convergence-ricean" => convergence_ricean(a)?,
        "interp-angles" => interp(a, false)?,
        _ => interp(a, true)?,
    };
    emit(&rows, &a.output)
}

/// `m E[ln(1 + γλ/t)]`, the rate of `Q = I/t`.
fn equal_power(f: &EigDensity, gamma: f64, m: usize, t: usize) -> f64 {
    m as f64 * f.expect(|l| (1.0 + gamma / t as f64 * l).ln())
}

fn rate(unit: Unit, r: &mut Record, name: &str, nats: f64) {
    r.insert(unit.column(name), num(unit.convert(nats)));
}

/// SISO Rayleigh: space-time capacity and the no-transmitter-knowledge rate.
fn siso(a: &FiguresArgs) -> Result<Vec<Record>, CliError> {
    let f = wishart_density(1, 1)?;
    let unit = a.output.unit;
    a.snr
        .points("-10:30:1")?
        .into_iter()
        .map(|p| {
            let mut r = snr_record(p);
            rate(
                unit,
                &mut r,
                "capacity",
                space_time(&f, p.linear, 1)?.capacity,
            );
            rate(unit, &mut r, "no_csit", equal_power(&f, p.linear, 1, 1));
            Ok(r)
        })
        .collect()
}

/// t = r = n Rayleigh: absolute rates, or gains over `Q = I/t` when `relative`.
fn rayleigh_rates(a: &FiguresArgs, n: usize, relative: bool) -> Result<Vec<Record>, CliError> {
    let f = wishart_density(n, n)?;
    let law = ChannelLaw::rayleigh(n, n);
    let samples = a.solver.samples.unwrap_or(DEFAULT_FINAL_SAMPLES);
    let stream = SeededStream::new(a.solver.seed(), 0);
    let unit = a.output.unit;
    a.snr
        .points("-10:30:2")?
        .into_iter()
        .map(|p| {
            let st = space_time(&f, p.linear, n)?.capacity;
            let space = naive_avg_rate(&law, p.linear, samples, &stream)?;
            let eq = equal_power(&f, p.linear, n, n);
            let mut r = snr_record(p);
            if relative {
                r.insert("space_time_gain".into(), num(st / eq));
                r.insert("space_gain".into(), num(space.mean / eq));
                r.insert("space_gain_se".into(), num(space.std_err / eq));
            } else {
                rate(unit, &mut r, "space_time", st);
                rate(unit, &mut r, "space", space.mean);
                rate(unit, &mut r, "space_se", space.std_err);
                rate(unit, &mut r, "equal_power", eq);
            }
            Ok(r)
        })
        .collect()
}

/// Exact PAPR in dB for t = r ∈ {1, 2, 4}.
fn papr_table(a: &FiguresArgs) -> Result<Vec<Record>, CliError> {
    let dens = [1, 2, 4].map(|n| wishart_density(n, n).map(|f| (n, f)));
    let dens: Vec<(usize, EigDensity)> = dens.into_iter().collect::<Result<_, _>>()?;
    a.snr
        .points("-10:30:1")?
        .into_iter()
        .map(|p| {
            let mut r = snr_record(p);
            for (n, f) in &dens {
                let xi = space_time(f, p.linear, *n)?.xi;
                r.insert(
                    format!("papr_db_t{n}"),
                    num(10.0 * papr(xi, p.linear, *n).log10()),
                );
            }
            Ok(r)
        })
        .collect()
}

/// Per-eigenvector power density for t = r = 2, long format.
fn power_density_table(a: &FiguresArgs) -> Result<Vec<Record>, CliError> {
    if a.points == 0 {
        return Err(CliError::usage("--points must be positive"));
    }
    let f = wishart_density(2, 2)?;
    let mut rows = Vec::new();
    for p in a.snr.points("-10,-5,0,5,10")? {
        let xi = space_time(&f, p.linear, 2)?.xi;
        let grid: Vec<f64> = (1..=a.points)
            .map(|k| xi * k as f64 / (a.points + 1) as f64)
            .collect();
        let pd = power_density(&f, xi, &grid)?;
        for (g, q) in grid.iter().zip(&pd.values) {
            let mut r = snr_record(p);
            r.insert("xi".into(), num(xi));
            r.insert("power".into(), num(*g));
            r.insert("power_db".into(), num(10.0 * g.log10()));
            r.insert("density".into(), num(*q));
            r.insert("zero_atom".into(), num(pd.zero_atom));
            rows.push(r);
        }
    }
    Ok(rows)
}

/// Capacity against the central-Wishart stand-in for rank-one mean
/// `diag(t, 0, …)` and uniform transmit correlation.
fn wishart_table(a: &FiguresArgs) -> Result<Vec<Record>, CliError> {
    let sizes = parse_sizes(a.sizes.as_deref().unwrap_or("2,3,4"), "--sizes")?;
    let opts = a.solver.cov_options()?;
    let unit = a.output.unit;
    let mut rows = Vec::new();
    for &t in &sizes {
        let mut d = vec![0.0; t];
        d[0] = t as f64;
        let mean = ComplexMatrix::from_diag(&d);
        let tc = uniform_correlation(t, a.tau)?;
        for p in a.snr.points("-10:20:5")? {
            let s = wishart_study(&mean, &tc, p.linear, &opts)?;
            let mut r = Record::new();
            r.insert("t".into(), json!(t));
            r.insert("tau".into(), num(a.tau));
            r.extend(snr_record(p));
            rate(unit, &mut r, "capacity", s.capacity.mi.mean);
            rate(unit, &mut r, "capacity_se", s.capacity.mi.std_err);
            rate(unit, &mut r, "approx_mi", s.approx_mi.mean);
            rate(unit, &mut r, "approx_mi_se", s.approx_mi.std_err);
            r.insert("converged".into(), Value::Bool(s.capacity.converged));
            rows.push(r);
        }
    }
    Ok(rows)
}

fn trace_rows(
    rows: &mut Vec<Record>,
    head: &Record,
    trace: &[TraceRow],
    unit: Unit,
    capacity: Option<f64>,
) {
    for t in trace {
        let mut r = head.clone();
        r.insert("iter".into(), json!(t.iter));
        rate(unit, &mut r, "mi", t.mi);
        if let Some(c) = capacity {
            rate(unit, &mut r, "gap", c - t.mi);
        }
        r.insert("residual".into(), num(t.residual));
        rows.push(r);
    }
}

/// Optimizer traces on `S = U diag(2, 1) U†` for random unitary `U`.
fn convergence_rotated(a: &FiguresArgs) -> Result<Vec<Record>, CliError> {
    let opts = a.solver.cov_options()?;
    let stream = SeededStream::new(a.solver.seed(), 7);
    let mut rng = stream.rng();
    let unitaries: Vec<ComplexMatrix> = (0..a.instances.unwrap_or(10))
        .map(|_| haar_unitary(2, &mut rng))
        .collect();
    let root = ComplexMatrix::from_diag(&[2f64.sqrt(), 1.0]);
    let mut rows = Vec::new();
    for p in a.snr.points("0")? {
        let capacity = waterfill_det(&[2.0, 1.0], p.linear)?.rate;
        for (i, u) in unitaries.iter().enumerate() {
            let law = ChannelLaw::point(&root * &u.adjoint());
            let res = iterate_general(&law, p.linear, &opts)?;
            let mut head = snr_record(p);
            head.insert("instance".into(), json!(i));
            trace_rows(&mut rows, &head, &res.trace, a.output.unit, Some(capacity));
        }
    }
    Ok(rows)
}

/// Optimizer traces on n×n Ricean channels with rank-one mean `μ†μ` and
/// uniform transmit correlation.
fn convergence_ricean(a: &FiguresArgs) -> Result<Vec<Record>, CliError> {
    let sizes = parse_sizes(a.sizes.as_deref().unwrap_or("5"), "--sizes")?;
    let opts = a.solver.cov_options()?;
    let stream = SeededStream::new(a.solver.seed(), 8);
    let mut rng = stream.rng();
    let mut rows = Vec::new();
    for &n in &sizes {
        let tc = uniform_correlation(n, a.tau)?;
        for i in 0..a.instances.unwrap_or(3) {
            let mu = ChannelLaw::rayleigh(1, n).sample(&mut rng);
            let mean = &mu.adjoint() * &mu;
            let law = ChannelLaw::kronecker(mean, HermitianMatrix::identity(n), tc.clone())?;
            for p in a.snr.points("0")? {
                let res = iterate_general(&law, p.linear, &opts)?;
                let mut head = Record::new();
                head.insert("n".into(), json!(n));
                head.insert("instance".into(), json!(i));
                head.extend(snr_record(p));
                trace_rows(&mut rows, &head, &res.trace, a.output.unit, None);
            }
        }
    }
    Ok(rows)
}

/// Eigenvector angles (`powers = false`) or power split along the
/// interpolation from Gaussian to deterministic.
fn interp(a: &FiguresArgs, powers: bool) -> Result<Vec<Record>, CliError> {
    let (m0, sigma) = interp_defaults();
    let kappas = parse_grid(&a.kappa_grid, "--kappa-grid")?;
    let opts = a.solver.cov_options()?;
    let unit = a.output.unit;
    let mut rows = Vec::new();
    for p in a.snr.points("0")? {
        for pt in interp_study(&m0, &sigma, &kappas, p.linear, &opts)? {
            let mut r = snr_record(p);
            r.insert("kappa".into(), num(pt.kappa));
            if powers {
                r.insert("q1".into(), num(pt.powers[0]));
                r.insert("q2".into(), num(pt.powers[1]));
                rate(unit, &mut r, "mi", pt.mi);
                rate(unit, &mut r, "mi_se", pt.mi_se);
            } else {
                r.insert("angle".into(), num(pt.angle));
                r.insert("angle_to_mean_gram".into(), num(pt.angle_to_mean_gram));
            }
            r.insert("kkt_residual".into(), num(pt.kkt_residual));
            r.insert("converged".into(), Value::Bool(pt.converged));
            rows.push(r);
        }
    }
    Ok(rows)
}
