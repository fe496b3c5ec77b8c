use std::io::Write;
use std::path::Path;

use teleprobe::formulas::{coherent_baseline_sigma, lossy_moments};
use teleprobe::montecarlo::estimate;
use teleprobe::optimizer::{sweep, SweepGrid};
use teleprobe::parallel::with_workers;
use teleprobe::protocol::run_ensemble;
use teleprobe::verify::{rel_error, verify, VerifyOptions, TOLERANCE};
use teleprobe::{Constraint, ProtocolParams};

use crate::config::{pick, pick_list, ConfigFile};
use crate::csv::{format_number, write_csv};
use crate::{
    CliError, Command, ConfigArg, MonteCarloArgs, OptimizeArgs, PointArgs, ProbeArgs, SweepArgs, VerifyArgs,
    DEFAULT_SEED, SEED_ENV,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Pass,
    Fail,
}

impl Outcome {
    fn from_pass(pass: bool) -> Self {
        if pass {
            Outcome::Pass
        } else {
            Outcome::Fail
        }
    }
}

const PROBE_KEYS: [&str; 9] = ["alpha", "phi", "r", "m", "g_x", "g_p", "eta1", "eta2", "n_th"];

const DEFAULT_N_POINTS: usize = 1000;
const DEFAULT_N_TRAJ: usize = 1_000_000;
const DEFAULT_Z_MAX: f64 = 4.0;
const DEFAULT_SWEEP_R: [f64; 5] = [0.5, 1.0, 1.5, 2.0, 2.5];

pub fn dispatch(command: &Command, out: &mut dyn Write) -> Result<Outcome, CliError> {
    match command {
        Command::Point(args) => cmd_point(args, out),
        Command::Verify(args) => cmd_verify(args, out),
        Command::Optimize(args) => cmd_optimize(args, out),
        Command::Sweep(args) => cmd_sweep(args, out),
        Command::Montecarlo(args) => cmd_montecarlo(args, out),
    }
}

fn load(arg: &ConfigArg, extra: &[&str]) -> Result<ConfigFile, CliError> {
    let Some(path) = &arg.config else {
        return Ok(ConfigFile::default());
    };
    let file = ConfigFile::load(path)?;
    file.check_keys(extra)?;
    Ok(file)
}

fn keys<'a>(probe: bool, own: &[&'a str]) -> Vec<&'a str> {
    let mut all: Vec<&str> = if probe { PROBE_KEYS.to_vec() } else { Vec::new() };
    all.extend_from_slice(own);
    all
}

/// Flag, config file, `TELEPROBE_SEED`, built-in default; first one set wins.
fn resolve_seed(flag: Option<u64>, file: &ConfigFile) -> Result<u64, CliError> {
    if let Some(seed) = flag {
        return Ok(seed);
    }
    if let Some(seed) = file.value("seed")? {
        return Ok(seed);
    }
    match std::env::var(SEED_ENV) {
        Ok(raw) => raw
            .trim()
            .parse()
            .map_err(|_| CliError::Invalid(format!("{SEED_ENV}: cannot parse '{raw}' as a seed"))),
        Err(std::env::VarError::NotPresent) => Ok(DEFAULT_SEED),
        Err(e) => Err(CliError::Invalid(format!("{SEED_ENV}: {e}"))),
    }
}

fn resolve_workers(flag: Option<usize>, file: &ConfigFile) -> Result<Option<usize>, CliError> {
    let workers = flag.or(file.value("workers")?);
    if workers == Some(0) {
        return Err(CliError::Invalid("workers must be at least 1".into()));
    }
    Ok(workers)
}

fn probe_params(args: &ProbeArgs, file: &ConfigFile) -> Result<ProtocolParams, CliError> {
    let params = ProtocolParams::new(
        pick(args.alpha, file, "alpha", 1.0)?,
        pick(args.phi, file, "phi", 0.1)?,
        pick(args.r, file, "r", 1.0)?,
        pick(args.m, file, "m", 2)?,
    )
    .with_gains(pick(args.g_x, file, "g_x", 1.0)?, pick(args.g_p, file, "g_p", 1.0)?)
    .with_losses(pick(args.eta1, file, "eta1", 1.0)?, pick(args.eta2, file, "eta2", 1.0)?)
    .with_thermal(pick(args.n_th, file, "n_th", 0.0)?);
    params.validate()?;
    Ok(params)
}

fn describe(p: &ProtocolParams) -> String {
    format!(
        "alpha={} phi={} r={} m={} g_x={} g_p={} eta1={} eta2={} n_th={}",
        format_number(p.alpha),
        format_number(p.phi),
        format_number(p.r),
        p.m,
        format_number(p.g_x),
        format_number(p.g_p),
        format_number(p.eta1),
        format_number(p.eta2),
        format_number(p.n_th)
    )
}

fn emit(out: &mut dyn Write, text: &str) -> Result<(), CliError> {
    out.write_all(text.as_bytes()).map_err(CliError::io("writing output"))
}

fn emit_csv(out: &mut dyn Write, csv: &str, n_rows: usize, path: Option<&Path>) -> Result<(), CliError> {
    match path {
        None => emit(out, csv),
        Some(path) => {
            std::fs::write(path, csv).map_err(CliError::io(format!("writing {}", path.display())))?;
            emit(out, &format!("wrote {n_rows} rows to {}\n", path.display()))
        }
    }
}

fn cmd_point(args: &PointArgs, out: &mut dyn Write) -> Result<Outcome, CliError> {
    let file = load(&args.config, &keys(true, &[]))?;
    let params = probe_params(&args.probe, &file)?;
    let sim = run_ensemble(&params)?;
    let closed = if params.has_unit_gains() {
        Some(lossy_moments(&params)?)
    } else {
        None
    };

    let mut text = format!("point: {}\n\n", describe(&params));
    text.push_str(&format!(
        "{:<12} {:>20} {:>20} {:>12} {:>12}  check\n",
        "quantity", "simulator", "closed_form", "abs_delta", "rel_delta"
    ));
    let mut all_ok = true;
    let rows = [
        ("mean_x", sim.mean_x, closed.as_ref().map(|c| c.mean_x)),
        ("var_x", sim.var_x, closed.as_ref().map(|c| c.var_x)),
        ("sigma", sim.sigma, closed.as_ref().map(|c| c.sigma)),
        ("n_total", sim.n_total, closed.as_ref().map(|c| c.n_total)),
    ];
    for (name, simulated, closed_form) in rows {
        let line = match closed_form {
            Some(cf) => {
                let rel = rel_error(simulated, cf);
                let ok = rel < TOLERANCE;
                all_ok &= ok;
                format!(
                    "{name:<12} {:>20} {:>20} {:>12.3e} {:>12.3e}  {}\n",
                    format_number(simulated),
                    format_number(cf),
                    (simulated - cf).abs(),
                    rel,
                    if ok { "OK" } else { "MISMATCH" }
                )
            }
            None => format!(
                "{name:<12} {:>20} {:>20} {:>12} {:>12}  -\n",
                format_number(simulated),
                "N/A",
                "N/A",
                "N/A"
            ),
        };
        text.push_str(&line);
    }
    text.push_str(&format!("{:<12} {:>20}\n", "mean_p", format_number(sim.mean_p)));
    text.push_str(&format!("{:<12} {:>20}\n", "var_p", format_number(sim.var_p)));
    text.push_str(&format!(
        "{:<12} {:>20}\n\n",
        "dmeanx_dphi",
        format_number(sim.dmeanx_dphi)
    ));

    text.push_str(&format!("sensitivity: {}\n", format_number(sim.sigma)));
    match coherent_baseline_sigma(sim.n_total, params.phi, params.eta1) {
        Ok(sigma_coh) => {
            let enhancement = sigma_coh / sim.sigma;
            text.push_str(&format!(
                "coherent baseline at the same photon number: {}\nenhancement: {} ({} dB)\n",
                format_number(sigma_coh),
                format_number(enhancement),
                format_number(20.0 * enhancement.log10())
            ));
        }
        Err(_) => text.push_str("coherent baseline: N/A\nenhancement: N/A\n"),
    }
    if closed.is_none() {
        text.push_str("closed forms cover unit gains only\n");
    }
    emit(out, &text)?;
    Ok(Outcome::from_pass(all_ok))
}

fn cmd_verify(args: &VerifyArgs, out: &mut dyn Write) -> Result<Outcome, CliError> {
    let file = load(&args.config, &["n_points", "seed"])?;
    let n_points = pick(args.n_points, &file, "n_points", DEFAULT_N_POINTS)?;
    if n_points == 0 {
        return Err(CliError::Invalid("n_points must be at least 1".into()));
    }
    let seed = resolve_seed(args.seed, &file)?;
    let options = VerifyOptions {
        corrupt_convention: args.corrupt_convention,
        ..VerifyOptions::new(n_points, seed)
    };
    let report = verify::<f64>(&options)?;

    let mut text = format!(
        "verify: {} point{}, seed {}, tolerance {:e}\nmax relative error: {:.3e}\n",
        report.n_points,
        if report.n_points == 1 { "" } else { "s" },
        seed,
        options.tolerance,
        report.max_rel_error
    );
    if let Some(w) = &report.worst {
        text.push_str(&format!(
            "worst: {} simulated={} closed_form={} rel_error={:.3e}\n  at {}\n",
            w.quantity,
            format_number(w.simulated),
            format_number(w.closed_form),
            w.rel_error,
            describe(&w.params)
        ));
    }
    text.push_str(if report.passed { "PASS\n" } else { "FAIL\n" });
    emit(out, &text)?;
    Ok(Outcome::from_pass(report.passed))
}

const OPTIMIZE_KEYS: [&str; 8] = ["r", "n_total", "eta1", "eta2", "n_th", "unit_gains", "m_max", "output"];

fn cmd_optimize(args: &OptimizeArgs, out: &mut dyn Write) -> Result<Outcome, CliError> {
    let file = load(&args.config, &OPTIMIZE_KEYS)?;
    let mut constraint = Constraint::new(
        pick(args.r, &file, "r", 1.5)?,
        pick(args.n_total, &file, "n_total", 100.0)?,
    )
    .with_losses(
        pick(args.eta1, &file, "eta1", 1.0)?,
        pick(args.eta2, &file, "eta2", 1.0)?,
    )
    .with_thermal(pick(args.n_th, &file, "n_th", 0.0)?)
    .with_unit_gains(pick(args.unit_gains, &file, "unit_gains", false)?);
    if let Some(m_max) = args.m_max.or(file.value("m_max")?) {
        constraint = constraint.with_m_max(m_max);
    }
    constraint.validate()?;
    let output = args.output.clone().or(file.value("output")?);
    let rows = sweep(&[constraint], Some(1))?;
    emit_csv(out, &write_csv(&rows)?, rows.len(), output.as_deref())?;
    Ok(Outcome::Pass)
}

const SWEEP_KEYS: [&str; 9] = [
    "r",
    "n_total",
    "eta1",
    "eta2",
    "n_th",
    "unit_gains",
    "m_max",
    "workers",
    "output",
];

fn cmd_sweep(args: &SweepArgs, out: &mut dyn Write) -> Result<Outcome, CliError> {
    let file = load(&args.config, &SWEEP_KEYS)?;
    let grid = SweepGrid {
        r: pick_list(args.r.clone(), &file, "r", &DEFAULT_SWEEP_R)?,
        n_total: pick_list(args.n_total.clone(), &file, "n_total", &[100.0])?,
        eta1: pick_list(args.eta1.clone(), &file, "eta1", &[1.0])?,
        eta2: pick_list(args.eta2.clone(), &file, "eta2", &[1.0])?,
        n_th: pick_list(args.n_th.clone(), &file, "n_th", &[0.0])?,
        unit_gains: pick_list(args.unit_gains.clone(), &file, "unit_gains", &[true, false])?,
        m_max: args.m_max.or(file.value("m_max")?),
    };
    let workers = resolve_workers(args.workers, &file)?;
    let output = args.output.clone().or(file.value("output")?);
    let points = grid.points();
    if points.is_empty() {
        return Err(CliError::Invalid("grid must contain at least one point".into()));
    }
    for point in &points {
        point.validate()?;
    }
    let rows = sweep(&points, workers)?;
    emit_csv(out, &write_csv(&rows)?, rows.len(), output.as_deref())?;
    Ok(Outcome::Pass)
}

fn cmd_montecarlo(args: &MonteCarloArgs, out: &mut dyn Write) -> Result<Outcome, CliError> {
    let file = load(&args.config, &keys(true, &["n_traj", "seed", "z_max", "workers"]))?;
    let params = probe_params(&args.probe, &file)?;
    let n_traj = pick(args.n_traj, &file, "n_traj", DEFAULT_N_TRAJ)?;
    if n_traj < 2 {
        return Err(CliError::Invalid("n_traj must be at least 2".into()));
    }
    let z_max = pick(args.z_max, &file, "z_max", DEFAULT_Z_MAX)?;
    if !(z_max.is_finite() && z_max > 0.0) {
        return Err(CliError::Invalid("z_max must be finite and > 0".into()));
    }
    let seed = resolve_seed(args.seed, &file)?;
    let workers = resolve_workers(args.workers, &file)?;

    let exact = run_ensemble(&params)?;
    let est = with_workers(workers, || estimate(&params, n_traj, seed))??;
    let (z_mean, z_var) = est.z_scores(exact.mean_x, exact.var_x);

    let mut text = format!(
        "montecarlo: {}\ntrajectories: {}, seed {}\n\n{:<12} {:>20} {:>14} {:>20} {:>9}\n",
        describe(&params),
        n_traj,
        seed,
        "quantity",
        "estimate",
        "stderr",
        "ensemble",
        "z"
    );
    let row = |name: &str, hat: f64, se: f64, exact: f64| {
        let z = if se > 0.0 {
            format!("{:.3}", (hat - exact) / se)
        } else {
            "N/A".into()
        };
        format!(
            "{name:<12} {:>20} {:>14.4e} {:>20} {:>9}\n",
            format_number(hat),
            se,
            format_number(exact),
            z
        )
    };
    text.push_str(&row("mean_x", est.mean_x_hat, est.stderr_mean, exact.mean_x));
    text.push_str(&row("var_x", est.var_x_hat, est.stderr_var, exact.var_x));
    for (k, (&hat, &se)) in est.photons_hat.iter().zip(&est.photons_stderr).enumerate() {
        let name = format!("photons[{k}]");
        text.push_str(&row(&name, hat, se, exact.per_pass_photons[k]));
    }
    let pass = z_mean.abs() < z_max && z_var.abs() < z_max;
    text.push_str(&format!(
        "\n|z| < {} on mean_x and var_x: {}\n",
        format_number(z_max),
        if pass { "PASS" } else { "FAIL" }
    ));
    emit(out, &text)?;
    Ok(Outcome::from_pass(pass))
}
