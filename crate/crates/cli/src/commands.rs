//! One function per subcommand. Each computes everything in memory and
//! returns the tables; nothing touches the file system here.

use rayon::prelude::*;
use serde_json::json;

use almg_core::analysis::{self, linear_grid};
use almg_core::classical::{self as cl, Couplings, PhasePoint};
use almg_core::eigensolve::Spectrum;
use almg_core::spinmodel::{dense_hamiltonian, ModelParams, Parity};
use almg_core::workstats::{self as ws, Esqpt, InitialState, PreparedState};
use almg_core::AlmgError;

use crate::output::{num, Table};
use crate::{Grid, QuenchArgs};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(AlmgError),
    Io(std::io::Error),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => f.write_str(m.trim_start_matches("error: ").trim_end()),
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Core(e) if e.is_numerical() => 3,
            CliError::Core(_) => 2,
            CliError::Io(_) => 1,
        }
    }
}

impl From<AlmgError> for CliError {
    fn from(e: AlmgError) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

/// Result of one command before it is written out.
pub struct Run {
    pub command: &'static str,
    pub parameters: serde_json::Value,
    pub seed: Option<u64>,
    pub summary: serde_json::Value,
    pub artifacts: Vec<(String, String)>,
}

impl Run {
    fn new(command: &'static str, parameters: serde_json::Value, tables: Vec<Table>) -> Self {
        Self {
            command,
            parameters,
            seed: None,
            summary: json!({}),
            artifacts: tables.into_iter().map(|t| (t.name.clone(), t.render())).collect(),
        }
    }

    fn with_summary(mut self, summary: serde_json::Value) -> Self {
        self.summary = summary;
        self
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

pub fn spectrum(
    n: usize,
    gamma: f64,
    alpha: f64,
    parity: Parity,
    gamma_end: Option<f64>,
    gamma_step: f64,
) -> Result<Run, CliError> {
    let base = ModelParams::reduced(n, gamma, alpha)?;
    let Some(end) = gamma_end else {
        let s = Spectrum::compute(&base, parity, false)?;
        let mut t = Table::new("spectrum.csv", &["n", "E_n", "epsilon_n"]);
        for (k, (e, eps)) in s.eigenvalues.iter().zip(s.excitation_energies()).enumerate() {
            t.push(&[k.to_string(), num(*e), num(eps)]);
        }
        let params = json!({"n": n, "gamma": gamma, "alpha": alpha, "parity": parity.to_string()});
        return Ok(Run::new("spectrum", params, vec![t]).with_summary(json!({"dim": s.dim()})));
    };
    if !(gamma_step > 0.0) || end < gamma {
        return Err(usage("gamma sweep needs --gamma-end >= --gamma and --gamma-step > 0"));
    }
    let steps = ((end - gamma) / gamma_step + 1e-9).floor() as usize;
    let gammas: Vec<f64> = (0..=steps).map(|k| gamma + k as f64 * gamma_step).collect();
    let spectra = gammas
        .par_iter()
        .map(|&g| Spectrum::compute(&base.with_gamma(g)?, parity, false))
        .collect::<Result<Vec<_>, _>>()?;
    let mut t = Table::new("spectrum.csv", &["gamma", "n", "E_n", "epsilon_n"]);
    for (g, s) in gammas.iter().zip(&spectra) {
        for (k, (e, eps)) in s.eigenvalues.iter().zip(s.excitation_energies()).enumerate() {
            t.push(&[num(*g), k.to_string(), num(*e), num(eps)]);
        }
    }
    let params = json!({
        "n": n, "gamma": gamma, "gamma_end": end, "gamma_step": gamma_step,
        "alpha": alpha, "parity": parity.to_string(),
    });
    Ok(Run::new("spectrum", params, vec![t]).with_summary(json!({"gamma_values": gammas.len()})))
}

pub fn dos(n: usize, gamma: f64, alpha: f64, bins: Option<usize>) -> Result<Run, CliError> {
    let p = ModelParams::reduced(n, gamma, alpha)?;
    let s = Spectrum::compute(&p, Parity::Even, false)?;
    let bins = bins.unwrap_or_else(|| analysis::default_bins(s.dim()));
    let h = analysis::quantum_dos(&s, bins)?;
    let mut t = Table::new("dos.csv", &["bin_lo", "bin_hi", "center", "count", "rho", "rho_smoothed"]);
    for i in 0..h.counts.len() {
        t.push(&[
            num(h.edges[i]),
            num(h.edges[i + 1]),
            num(0.5 * (h.edges[i] + h.edges[i + 1])),
            h.counts[i].to_string(),
            num(h.rescaled[i]),
            num(h.smoothed[i]),
        ]);
    }
    let params = json!({"n": n, "gamma": gamma, "alpha": alpha, "parity": "even", "bins": bins});
    Ok(Run::new("dos", params, vec![t]).with_summary(json!({"dim": s.dim(), "epsilon_max": h.edges[bins]})))
}

pub fn dos_sc(gamma: f64, alpha: f64, samples: u64, bins: usize, seed: u64) -> Result<Run, CliError> {
    let c = Couplings::new(gamma, alpha)?;
    if bins < 1 {
        return Err(usage("--bins must be positive"));
    }
    let (lo, hi) = cl::energy_range(&c);
    let edges = cl::uniform_edges(0.0, hi - lo, bins);
    let d = cl::semiclassical_dos(&c, &edges, samples, seed)?;
    let mut t = Table::new("dos_sc.csv", &["bin_lo", "bin_hi", "center", "count", "rho", "stderr"]);
    for i in 0..bins {
        t.push(&[
            num(edges[i]),
            num(edges[i + 1]),
            num(0.5 * (edges[i] + edges[i + 1])),
            d.counts[i].to_string(),
            num(d.rho[i]),
            num(d.stderr[i]),
        ]);
    }
    let params = json!({"gamma": gamma, "alpha": alpha, "samples": samples, "bins": bins, "seed": seed});
    let mut run = Run::new("dos-sc", params, vec![t])
        .with_summary(json!({"energy_shift": d.energy_shift, "empty_bins": d.empty_bins().len()}));
    run.seed = Some(seed);
    Ok(run)
}

pub fn dos_slice(
    n: usize,
    alpha: f64,
    epsilon: f64,
    width: f64,
    gamma_start: f64,
    gamma_end: f64,
    gamma_points: usize,
) -> Result<Run, CliError> {
    if gamma_points < 1 || gamma_end < gamma_start {
        return Err(usage("gamma range must be non-empty"));
    }
    let gammas = linear_grid(gamma_start, gamma_end, gamma_points);
    let rows = analysis::dos_slice(alpha, n, epsilon, width, &gammas)?;
    let mut t = Table::new("dos_slice.csv", &["gamma", "rho"]);
    for (g, r) in &rows {
        t.push(&[num(*g), num(*r)]);
    }
    let params = json!({
        "n": n, "alpha": alpha, "epsilon": epsilon, "width": width,
        "gamma_start": gamma_start, "gamma_end": gamma_end, "gamma_points": gamma_points,
    });
    Ok(Run::new("dos-slice", params, vec![t]))
}

pub fn quench(a: &QuenchArgs) -> Result<Run, CliError> {
    let (delta, critical) = match (a.dgamma, a.dgamma_tilde, a.esqpt) {
        (Some(d), None, _) => (d, None),
        (None, Some(t), Some(which)) => {
            let cq = ws::critical_quench(a.gamma_i, a.alpha, which)?;
            (t * cq.value, Some(cq))
        }
        _ => return Err(usage("give either --dgamma or --dgamma-tilde with --esqpt")),
    };
    let initial = a.initial.or(a.esqpt.map(Esqpt::initial_state)).unwrap_or(InitialState::Ground);
    let params = ModelParams::reduced(a.n, a.gamma_i, a.alpha)?;
    let prepared = PreparedState::new(&params, a.parity, initial)?;
    let wd = prepared.quench(delta)?;
    let mut t = Table::new("quench.csv", &["k", "work", "probability"]);
    for (k, (w, p)) in wd.works.iter().zip(&wd.probs).enumerate() {
        t.push(&[k.to_string(), num(*w), num(*p)]);
    }
    let mut merged = Table::new("quench_merged.csv", &["work", "probability"]);
    for (w, p) in wd.merged(ws::merge_tolerance(a.n)) {
        merged.push(&[num(w), num(p)]);
    }
    let run_params = json!({
        "gamma_i": a.gamma_i, "alpha": a.alpha, "n": a.n, "dgamma": delta,
        "dgamma_tilde": a.dgamma_tilde, "esqpt": a.esqpt.map(|e| e.label()),
        "critical_quench": critical.map(|c| c.value),
        "initial": initial, "parity": a.parity.to_string(),
    });
    let summary = json!({
        "gamma_f": a.gamma_i + delta,
        "initial_index": wd.initial_index,
        "initial_energy": wd.initial_energy,
        "entropy": wd.entropy,
        "mean_work": wd.mean,
        "work_variance": wd.variance,
        "support": wd.support(ws::SUPPORT_THRESHOLD),
        "mean_postquench_excitation": prepared.mean_postquench_excitation(delta)?,
    });
    Ok(Run::new("quench", run_params, vec![t, merged]).with_summary(summary))
}

fn sweep_grid(g: &Grid) -> Result<Vec<f64>, CliError> {
    if g.grid_points < 3 || !(g.grid_max > g.grid_min) {
        return Err(usage("sweep grid needs at least 3 points and --grid-max > --grid-min"));
    }
    Ok(linear_grid(g.grid_min, g.grid_max, g.grid_points))
}

fn grid_json(g: &Grid) -> serde_json::Value {
    json!({"min": g.grid_min, "max": g.grid_max, "points": g.grid_points})
}

pub fn entropy_sweep(which: Esqpt, gamma_i: f64, alpha: f64, n: usize, grid: &Grid) -> Result<Run, CliError> {
    let points = sweep_grid(grid)?;
    let s = analysis::entropy_sweep(which, gamma_i, alpha, n, &points)?;
    if !s.dropped.is_empty() {
        eprintln!("warning: dropped {} grid points with gamma_f outside [0, 1]", s.dropped.len());
    }
    let mut t = Table::new("entropy_sweep.csv", &["dgamma_tilde", "dgamma", "gamma_f", "entropy"]);
    for (x, e) in s.grid.iter().zip(&s.entropies) {
        let d = x * s.critical_quench;
        t.push(&[num(*x), num(d), num(gamma_i + d), num(*e)]);
    }
    let params = json!({"esqpt": which.label(), "gamma_i": gamma_i, "alpha": alpha, "n": n, "grid": grid_json(grid)});
    let summary = json!({
        "critical_quench": s.critical_quench, "argmax": s.argmax, "max": s.max, "dropped": s.dropped,
    });
    Ok(Run::new("entropy-sweep", params, vec![t]).with_summary(summary))
}

pub fn entropy_energy(gamma_i: f64, alpha: f64, n: usize, dgamma: f64, parity: Parity) -> Result<Run, CliError> {
    let levels = ws::entropy_vs_energy(gamma_i, alpha, n, dgamma, parity)?;
    let mut t = Table::new("entropy_energy.csv", &["n", "epsilon_n", "entropy"]);
    for l in &levels {
        t.push(&[l.n.to_string(), num(l.epsilon), num(l.entropy)]);
    }
    let params = json!({"gamma_i": gamma_i, "alpha": alpha, "n": n, "dgamma": dgamma, "parity": parity.to_string()});
    Ok(Run::new("entropy-energy", params, vec![t]))
}

pub fn scaling(which: Esqpt, alpha: f64, gamma_i: f64, sizes: &[usize], grid: &Grid) -> Result<Run, CliError> {
    let points = sweep_grid(grid)?;
    let (fit, sweeps) = analysis::scaling_fit(which, gamma_i, alpha, sizes, &points)?;
    let mut t = Table::new("scaling.csv", &["N", "argmax", "max"]);
    for s in &sweeps {
        t.push(&[s.n.to_string(), num(s.argmax), num(s.max)]);
    }
    let report = json!({
        "esqpt": which.label(),
        "gamma_i": gamma_i,
        "alpha": alpha,
        "mu": fit.mu, "mu_stderr": fit.mu_stderr, "mu_r_squared": fit.mu_r_squared, "mu_residuals": fit.mu_residuals,
        "nu": fit.nu, "nu_stderr": fit.nu_stderr, "nu_r_squared": fit.nu_r_squared, "nu_residuals": fit.nu_residuals,
        "low_confidence": fit.low_confidence,
        "sizes": fit.sizes, "argmaxes": fit.argmaxes, "maxima": fit.maxima,
    });
    let params = json!({"esqpt": which.label(), "gamma_i": gamma_i, "alpha": alpha, "sizes": sizes, "grid": grid_json(grid)});
    let mut text = serde_json::to_string_pretty(&report).expect("report serializes");
    text.push('\n');
    let mut run = Run::new("scaling", params, vec![t]).with_summary(json!({"mu": fit.mu, "nu": fit.nu}));
    run.artifacts.push(("scaling.json".into(), text));
    Ok(run)
}

pub fn gs_marker(alpha: f64, n: usize, gamma_start: f64, gamma_end: f64, gamma_points: usize) -> Result<Run, CliError> {
    if gamma_points < 3 || !(gamma_end > gamma_start) {
        return Err(usage("need at least 3 gamma points and --gamma-end > --gamma-start"));
    }
    let g = analysis::gs_qpt_marker(alpha, n, &linear_grid(gamma_start, gamma_end, gamma_points))?;
    let mut t = Table::new("gs_marker.csv", &["gamma", "d2_energy_density"]);
    for (x, d) in &g.points {
        t.push(&[num(*x), num(*d)]);
    }
    let params = json!({
        "alpha": alpha, "n": n, "gamma_start": gamma_start, "gamma_end": gamma_end, "gamma_points": gamma_points,
    });
    Ok(Run::new("gs-marker", params, vec![t])
        .with_summary(json!({"peak_gamma": g.peak_gamma, "peak_value": g.peak_value})))
}

pub const DENSE_MAX_N: usize = 40;

pub fn dense(n: usize, gamma: f64, alpha: f64) -> Result<Run, CliError> {
    if n > DENSE_MAX_N {
        return Err(usage(format!("dense output is limited to N <= {DENSE_MAX_N}")));
    }
    let p = ModelParams::reduced(n, gamma, alpha)?;
    let h = dense_hamiltonian(&p)?;
    let j = p.j();
    let mut t = Table::new("dense.csv", &["m_row", "m_col", "value"]);
    for (r, row) in h.iter().enumerate() {
        for (c, v) in row.iter().enumerate() {
            t.push(&[(r as i64 - j).to_string(), (c as i64 - j).to_string(), num(*v)]);
        }
    }
    Ok(Run::new("dense", json!({"n": n, "gamma": gamma, "alpha": alpha}), vec![t]))
}

pub fn fixed_points(gamma: f64, alpha: f64) -> Result<Run, CliError> {
    let c = Couplings::new(gamma, alpha)?;
    let rep = cl::find_fixed_points(&c);
    let mut t = Table::new("fixed_points.csv", &["family", "p", "q", "energy", "stability"]);
    for fp in &rep.points {
        let family = serde_json::to_value(fp.family).unwrap();
        t.push(&[family.as_str().unwrap().to_string(), num(fp.p), num(fp.q), num(fp.energy), fp.stability.to_string()]);
    }
    let (lo, hi) = cl::energy_range(&c);
    Ok(Run::new("classical-fixed-points", json!({"gamma": gamma, "alpha": alpha}), vec![t])
        .with_summary(json!({"energy_min": lo, "energy_max": hi})))
}

pub fn critical_energies(gamma: f64, alpha: f64) -> Result<Run, CliError> {
    let c = Couplings::new(gamma, alpha)?;
    let ce = cl::critical_energies(&c)?;
    let mut t = Table::new("critical_energies.csv", &["esqpt", "epsilon_c"]);
    if let Some(e1) = ce.eps_c1 {
        t.push(&["1".into(), num(e1)]);
    }
    t.push(&["2".into(), num(ce.eps_c2)]);
    Ok(Run::new("classical-critical-energies", json!({"gamma": gamma, "alpha": alpha}), vec![t])
        .with_summary(json!({"eps_c1": ce.eps_c1, "eps_c2": ce.eps_c2})))
}

pub fn evolve(gamma: f64, alpha: f64, p: f64, q: f64, dt: f64, steps: usize, stride: usize) -> Result<Run, CliError> {
    if stride == 0 {
        return Err(usage("--stride must be positive"));
    }
    let c = Couplings::new(gamma, alpha)?;
    let traj = cl::integrate_trajectory(&c, &PhasePoint::new(p, q)?, dt, steps)?;
    let mut t = Table::new("evolve.csv", &["t", "p", "q", "energy"]);
    let last = traj.samples.len() - 1;
    for (i, s) in traj.samples.iter().enumerate() {
        if i % stride == 0 || i == last {
            t.push(&[num(s.t), num(s.p), num(s.q), num(s.energy)]);
        }
    }
    if traj.exited_domain {
        eprintln!("warning: trajectory left the phase-space disk after {} steps", last);
    }
    let params = json!({"gamma": gamma, "alpha": alpha, "p": p, "q": q, "dt": dt, "steps": steps, "stride": stride});
    Ok(Run::new("classical-evolve", params, vec![t])
        .with_summary(json!({"exited_domain": traj.exited_domain, "energy_drift": traj.energy_drift()})))
}
