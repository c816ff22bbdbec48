use std::path::PathBuf;

use clap::{Args, ValueEnum};
use ergocap::analysis::{beamform_boundary, beamform_opt_closed, beamform_opt_mc, interp_study};
use ergocap::channels::{
    empirical_density, matrix_to_json, onoff_density, wishart_density, ChannelLaw, EigDensity,
    PointMasses,
};
use ergocap::covopt::{fixed_point_diag, iterate_general, CovOptResult};
use ergocap::linalg::herm_eig;
use ergocap::montecarlo::{SeededStream, DEFAULT_FINAL_SAMPLES, DEFAULT_SEED};
use ergocap::waterfill::{papr, papr_bound, peak_limited_rate, space_time};
use serde_json::{json, Value};

use crate::args::{
    parse_grid, read_inline_or_file, OutputArgs, SnrArgs, SnrPoint, SolverArgs, Unit,
};
use crate::error::CliError;
use crate::output::{emit, num, opt_num, write_text, Record};

pub fn load_law(src: &str) -> Result<ChannelLaw, CliError> {
    Ok(ChannelLaw::from_json(&read_inline_or_file(src)?)?)
}

/// `snr_db` (when given in dB) and `gamma` leading columns.
pub fn snr_record(p: SnrPoint) -> Record {
    let mut r = Record::new();
    if let Some(db) = p.db {
        r.insert("snr_db".into(), num(db));
    }
    r.insert("gamma".into(), num(p.linear));
    r
}

#[derive(Args, Debug)]
pub struct WaterfillArgs {
    /// Eigenvalue density: `wishart:M,N`, `onoff:M,P` or `masses:V@W,V@W,...`.
    #[arg(long, conflicts_with = "channel")]
    pub density: Option<String>,
    /// Channel descriptor (path or inline JSON); its eigenvalue density is
    /// sampled, or taken exactly for discrete laws.
    #[arg(long)]
    pub channel: Option<String>,
    /// Number of parallel modes `m`; defaults to what the density implies.
    #[arg(long)]
    pub modes: Option<usize>,
    /// Transmit antennas for the equal-power column; defaults to `m`.
    #[arg(long)]
    pub tx: Option<usize>,
    /// Channel draws for an empirical density.
    #[arg(long, default_value_t = 20_000)]
    pub pool: usize,
    /// Linear peak per-mode power; adds peak-limited columns.
    #[arg(long)]
    pub peak: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub snr: SnrArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

/// Parses the `--density` syntax into a density and its mode count.
pub fn parse_density(spec: &str) -> Result<(EigDensity, Option<usize>), CliError> {
    let bad = || CliError::usage(format!("--density: cannot parse {spec:?}"));
    let (kind, rest) = spec.split_once(':').ok_or_else(bad)?;
    let fields: Vec<&str> = rest.split(',').map(str::trim).collect();
    match (kind.trim(), fields.as_slice()) {
        ("wishart", [m, n]) => {
            let (m, n) = (m.parse().map_err(|_| bad())?, n.parse().map_err(|_| bad())?);
            Ok((wishart_density(m, n)?, Some(m)))
        }
        ("onoff", [m, p]) => {
            let (m, p) = (m.parse().map_err(|_| bad())?, p.parse().map_err(|_| bad())?);
            Ok((onoff_density(m, p)?, Some(m)))
        }
        ("masses", atoms) => {
            let mut values = Vec::new();
            let mut weights = Vec::new();
            for a in atoms {
                let (v, w) = a.split_once('@').ok_or_else(bad)?;
                values.push(v.trim().parse::<f64>().map_err(|_| bad())?);
                weights.push(w.trim().parse::<f64>().map_err(|_| bad())?);
            }
            Ok((
                EigDensity::PointMasses(PointMasses::new(values, weights)?),
                None,
            ))
        }
        _ => Err(bad()),
    }
}

pub fn cmd_waterfill(a: &WaterfillArgs) -> Result<(), CliError> {
    let (density, implied) = match (&a.density, &a.channel) {
        (Some(spec), _) => parse_density(spec)?,
        (None, Some(src)) => {
            let law = load_law(src)?;
            let stream = SeededStream::new(a.seed.unwrap_or(DEFAULT_SEED), 0);
            (
                empirical_density(&law, a.pool, &stream)?,
                Some(law.rx().min(law.tx())),
            )
        }
        (None, None) => return Err(CliError::usage("waterfill needs --density or --channel")),
    };
    let m = a.modes.or(implied).unwrap_or(1);
    if m == 0 {
        return Err(CliError::usage("--modes must be positive"));
    }
    let t = a.tx.unwrap_or(m) as f64;
    let unit = a.output.unit;
    let bound = |g: f64| papr_bound(&density, g, m);
    let mut rows = Vec::new();
    for p in a.snr.points("0")? {
        let g = p.linear;
        let st = space_time(&density, g, m)?;
        let equal = m as f64 * density.expect(|l| (1.0 + g / t * l).ln());
        let mut r = snr_record(p);
        r.insert("xi".into(), num(st.xi));
        r.insert(unit.column("capacity"), num(unit.convert(st.capacity)));
        r.insert(unit.column("equal_power"), num(unit.convert(equal)));
        r.insert("papr_exact".into(), num(papr(st.xi, g, m)));
        r.insert("papr_bound".into(), num(bound(g)));
        if let Some(peak) = a.peak {
            let pl = peak_limited_rate(&density, g, peak, m)?;
            r.insert("peak_xi".into(), num(pl.xi));
            r.insert(unit.column("peak_rate"), num(unit.convert(pl.rate)));
            r.insert("peak_truncated".into(), Value::Bool(pl.truncated));
        }
        rows.push(r);
    }
    emit(&rows, &a.output)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum OptMethod {
    /// Full covariance through its triangular factor.
    General,
    /// Powers in the standard basis only.
    Diag,
}

#[derive(Args, Debug)]
pub struct OptimizeArgs {
    /// Channel descriptor (path or inline JSON).
    #[arg(long)]
    pub channel: String,
    #[arg(long, value_enum, default_value_t = OptMethod::General)]
    pub method: OptMethod,
    /// Iteration trace CSV (`gamma,iter,mi,residual`).
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Interpolation sweep `a:b:step` for an `interp` channel; its own
    /// `kappa` is ignored.
    #[arg(long = "kappa-grid")]
    pub kappa_grid: Option<String>,
    #[command(flatten)]
    pub snr: SnrArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

pub fn optimize_record(p: SnrPoint, res: &CovOptResult, unit: Unit) -> Record {
    let eig = herm_eig(&res.q);
    let mut r = snr_record(p);
    r.insert(unit.column("mi"), num(unit.convert(res.mi.mean)));
    r.insert(unit.column("mi_se"), num(unit.convert(res.mi.std_err)));
    r.insert("kkt_residual".into(), num(res.kkt_residual));
    r.insert("iterations".into(), json!(res.iterations));
    r.insert("converged".into(), Value::Bool(res.converged));
    r.insert(
        "eigenvalues".into(),
        Value::Array(eig.values.iter().map(|&v| num(v)).collect()),
    );
    r.insert("q".into(), json!(matrix_to_json(res.q.as_matrix())));
    r.insert("eigenvectors".into(), json!(matrix_to_json(&eig.vectors)));
    r
}

pub fn cmd_optimize(a: &OptimizeArgs) -> Result<(), CliError> {
    let law = load_law(&a.channel)?;
    let opts = a.solver.cov_options()?;
    let unit = a.output.unit;
    let points = a.snr.points("0")?;
    let mut rows = Vec::new();
    if let Some(grid) = &a.kappa_grid {
        let ChannelLaw::Interpolated(l) = &law else {
            return Err(CliError::usage("--kappa-grid needs an interp channel"));
        };
        let kappas = parse_grid(grid, "--kappa-grid")?;
        for p in points {
            for pt in interp_study(l.m0(), l.noise_cov(), &kappas, p.linear, &opts)? {
                if !pt.converged {
                    eprintln!(
                        "warning: kappa={} did not converge (residual {:.3e})",
                        pt.kappa, pt.kkt_residual
                    );
                }
                let mut r = snr_record(p);
                r.insert("kappa".into(), num(pt.kappa));
                r.insert("q1".into(), num(pt.powers[0]));
                r.insert("q2".into(), num(pt.powers[1]));
                r.insert("angle".into(), num(pt.angle));
                r.insert("angle_to_mean_gram".into(), num(pt.angle_to_mean_gram));
                r.insert(unit.column("mi"), num(unit.convert(pt.mi)));
                r.insert(unit.column("mi_se"), num(unit.convert(pt.mi_se)));
                r.insert("kkt_residual".into(), num(pt.kkt_residual));
                r.insert("converged".into(), Value::Bool(pt.converged));
                rows.push(r);
            }
        }
        return emit(&rows, &a.output);
    }
    let mut trace = String::from("gamma,iter,mi,residual\n");
    for p in points {
        let res = match a.method {
            OptMethod::General => iterate_general(&law, p.linear, &opts)?,
            OptMethod::Diag => fixed_point_diag(&law, p.linear, None, &opts)?,
        };
        if !res.converged {
            eprintln!(
                "warning: gamma={} stopped after {} iterations without converging (residual {:.3e})",
                p.linear, res.iterations, res.kkt_residual
            );
        }
        for row in &res.trace {
            trace.push_str(&format!(
                "{},{},{},{}\n",
                p.linear, row.iter, row.mi, row.residual
            ));
        }
        rows.push(optimize_record(p, &res, unit));
    }
    if let Some(path) = &a.trace {
        write_text(&trace, Some(path))?;
    }
    emit(&rows, &a.output)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum BeamMethod {
    Closed,
    Mc,
}

#[derive(Args, Debug)]
pub struct BeamformArgs {
    /// Sweep the 2×2 boundary `R = diag(ρ, 2−ρ)`, `T = diag(τ, 2−τ)`.
    #[arg(long, conflicts_with = "channel")]
    pub boundary: bool,
    #[arg(long = "tau-grid", default_value = "1:1.995:0.005")]
    pub tau_grid: String,
    #[arg(long = "rho-grid", default_value = "1:1.95:0.05")]
    pub rho_grid: String,
    /// Zero-mean Kronecker descriptor with `tr R = r`, `tr T = t`.
    #[arg(long)]
    pub channel: Option<String>,
    #[arg(long, value_enum, default_value_t = BeamMethod::Closed)]
    pub method: BeamMethod,
    #[arg(long, default_value_t = DEFAULT_FINAL_SAMPLES)]
    pub samples: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub snr: SnrArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

pub fn boundary_rows(
    points: &[SnrPoint],
    tau_grid: &[f64],
    rho_grid: &[f64],
) -> Result<Vec<Record>, CliError> {
    let mut rows = Vec::new();
    for &p in points {
        for b in beamform_boundary(p.linear, tau_grid, rho_grid)? {
            let mut r = snr_record(p);
            r.insert("rho".into(), num(b.rho));
            r.insert("tau".into(), opt_num(b.tau));
            rows.push(r);
        }
    }
    Ok(rows)
}

pub fn cmd_beamform(a: &BeamformArgs) -> Result<(), CliError> {
    if a.boundary {
        let tau = parse_grid(&a.tau_grid, "--tau-grid")?;
        let rho = parse_grid(&a.rho_grid, "--rho-grid")?;
        let rows = boundary_rows(&a.snr.points("-15")?, &tau, &rho)?;
        return emit(&rows, &a.output);
    }
    let src = a
        .channel
        .as_deref()
        .ok_or_else(|| CliError::usage("beamform needs --boundary or --channel"))?;
    let law = load_law(src)?;
    let ChannelLaw::Kronecker(k) = &law else {
        return Err(CliError::usage("beamform needs a kronecker channel"));
    };
    if k.mean().max_abs() != 0.0 {
        return Err(CliError::usage("beamform needs a zero-mean channel"));
    }
    if !k.is_normalized() {
        return Err(CliError::usage("beamform needs tr(R) = r and tr(T) = t"));
    }
    let rho = herm_eig(k.rx_corr()).values;
    let tau = herm_eig(k.tx_corr()).values;
    let (tau1, tau2) = (tau[0], tau.get(1).copied().unwrap_or(0.0));
    let stream = SeededStream::new(a.seed.unwrap_or(DEFAULT_SEED), 0);
    let mut rows = Vec::new();
    for p in a.snr.points("0")? {
        let v = match a.method {
            BeamMethod::Closed => beamform_opt_closed(&rho, tau1, tau2, p.linear)?,
            BeamMethod::Mc => {
                beamform_opt_mc(k.rx_corr(), k.tx_corr(), p.linear, a.samples, &stream)?
            }
        };
        let mut r = snr_record(p);
        r.insert("optimal".into(), Value::Bool(v.optimal));
        r.insert("margin".into(), num(v.margin));
        r.insert("margin_se".into(), num(v.margin_se));
        r.insert(
            "method".into(),
            serde_json::to_value(v.method).expect("method serializes"),
        );
        rows.push(r);
    }
    emit(&rows, &a.output)
}
