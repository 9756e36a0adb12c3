use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use homodyne_core::analysis::{
    delta_terms, error_upper_bound, l2_error, linspace, witness_mean_from_grid, witness_stats,
};
use homodyne_core::estimator::{reconstruct_exact, reconstruct_fast, Method};
use homodyne_core::io::{
    atomic_write, read_batch, read_grid, sha256_file, write_batch, write_batch_csv, write_grid, write_grid_csv,
    write_json,
};
use homodyne_core::sampling::BatchMeta;
use homodyne_core::{ErrorReport, NoiseModel, QuadratureBatch, ReconstructionParams, WignerGrid, WitnessStats};

use crate::config::{ExperimentConfig, PathChoice};
use crate::error::{CliError, CliResult};

pub fn batch_path(out: &Path, replicate: usize) -> PathBuf {
    out.join("batches").join(format!("rep{replicate:03}.bin"))
}

pub fn grid_dir(out: &Path, beta: f64) -> PathBuf {
    out.join("grids").join(format!("beta{beta}"))
}

pub fn grid_path(out: &Path, beta: f64, replicate: usize) -> PathBuf {
    grid_dir(out, beta).join(format!("rep{replicate:03}.bin"))
}

pub fn report_path(out: &Path, beta: f64) -> PathBuf {
    out.join("reports").join(format!("beta{beta}.json"))
}

fn batch_meta(cfg: &ExperimentConfig, replicate: usize) -> BatchMeta {
    let e = &cfg.experiment;
    BatchMeta {
        state: cfg.state(),
        eta: e.eta,
        n: e.n,
        seed: e.seed,
        replicate: replicate as u32,
    }
}

pub fn params_for(cfg: &ExperimentConfig, beta: f64) -> CliResult<ReconstructionParams> {
    let e = &cfg.experiment;
    let mut p = ReconstructionParams::optimal(e.n, beta, NoiseModel::new(e.eta)?)?.with_grid_size(cfg.grid.size);
    if let Some(x) = cfg.grid.extent {
        p = p.with_grid_extent(x);
    }
    Ok(p)
}

/// Write one batch file per replicate.
pub fn sample(cfg: &ExperimentConfig, csv: bool) -> CliResult<Vec<PathBuf>> {
    let out = &cfg.run.output;
    let mut paths = Vec::new();
    for k in 0..cfg.experiment.replicates {
        let batch = batch_meta(cfg, k).generate()?;
        let path = batch_path(out, k);
        let hash = write_batch(&path, &batch)?;
        log::info!("replicate {k}: {} pairs -> {} ({})", batch.len(), path.display(), &hash[..12]);
        if csv {
            write_batch_csv(&path.with_extension("csv"), &batch)?;
        }
        paths.push(path);
    }
    Ok(paths)
}

fn check_batch(cfg: &ExperimentConfig, batch: &QuadratureBatch, path: &Path) -> CliResult<()> {
    let m = &batch.meta;
    let e = &cfg.experiment;
    let mismatch = if m.eta != e.eta {
        Some(format!("efficiency {} differs from configured {}", m.eta, e.eta))
    } else if m.state != cfg.state() {
        Some(format!(
            "alpha = ({}, {}) differs from configured ({}, {})",
            m.state.alpha1, m.state.alpha2, cfg.state.alpha1, cfg.state.alpha2
        ))
    } else if m.n != e.n {
        Some(format!("{} pairs, configured {}", m.n, e.n))
    } else if m.seed != e.seed {
        Some(format!("seed {} differs from configured {}", m.seed, e.seed))
    } else {
        None
    };
    match mismatch {
        Some(msg) => Err(CliError::Provenance(format!("{}: {msg}", path.display()))),
        None => Ok(()),
    }
}

fn reconstruct_one(cfg: &ExperimentConfig, batch: &QuadratureBatch, params: &ReconstructionParams) -> CliResult<WignerGrid> {
    Ok(match cfg.run.method {
        PathChoice::Fast => reconstruct_fast(batch, params)?,
        PathChoice::Exact => reconstruct_exact(batch, params)?,
    })
}

/// One grid per batch and β, plus the replicate average per β.
pub fn reconstruct(cfg: &ExperimentConfig, batches: &[PathBuf], csv: bool) -> CliResult<Vec<PathBuf>> {
    let out = &cfg.run.output;
    let inputs: Vec<PathBuf> = if batches.is_empty() {
        (0..cfg.experiment.replicates).map(|k| batch_path(out, k)).collect()
    } else {
        batches.to_vec()
    };
    let betas = &cfg.experiment.betas;
    let mut grids: Vec<Vec<(WignerGrid, String)>> = vec![Vec::new(); betas.len()];
    let mut written = Vec::new();
    for path in &inputs {
        let (batch, hash) = read_batch(path)?;
        check_batch(cfg, &batch, path)?;
        let k = batch.meta.replicate as usize;
        for (bi, &beta) in betas.iter().enumerate() {
            let params = params_for(cfg, beta)?;
            let mut grid = reconstruct_one(cfg, &batch, &params)?;
            grid.meta.sources = vec![hash.clone()];
            let gp = grid_path(out, beta, k);
            let ghash = write_grid(&gp, &grid)?;
            log::info!("beta {beta}, replicate {k}: {:?} grid -> {}", grid.meta.method, gp.display());
            if csv {
                write_grid_csv(&gp.with_extension("csv"), &grid)?;
            }
            written.push(gp);
            grids[bi].push((grid, ghash));
        }
    }
    for (bi, &beta) in betas.iter().enumerate() {
        let (reps, hashes): (Vec<WignerGrid>, Vec<String>) = std::mem::take(&mut grids[bi]).into_iter().unzip();
        let mut avg = WignerGrid::average(&reps)?;
        avg.meta.sources = hashes;
        let dir = grid_dir(out, beta);
        write_grid(&dir.join("average.bin"), &avg)?;
        write_grid_csv(&dir.join("average.csv"), &avg)?;
        written.push(dir.join("average.bin"));
    }
    Ok(written)
}

/// Contents of a per-β analysis report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub beta: f64,
    pub method: Vec<Method>,
    pub error: ErrorReport,
    pub witness: Option<WitnessStats>,
    /// Squared L² error of the replicate-averaged grid. A diagnostic next to
    /// `error.delta_numeric`, which averages the per-replicate errors.
    #[serde(default)]
    pub error_of_average: Option<f64>,
    /// Hashes of the analysed grid files, in replicate order.
    pub grid_sources: Vec<String>,
}

fn check_grids(cfg: &ExperimentConfig, beta: f64, grids: &[(WignerGrid, PathBuf)]) -> CliResult<()> {
    let expected = params_for(cfg, beta)?;
    let out = &cfg.run.output;
    for (k, (g, path)) in grids.iter().enumerate() {
        let m = &g.meta;
        let prov = |msg: String| Err(CliError::Provenance(format!("{}: {msg}", path.display())));
        let Some(p) = m.params else {
            return prov("grid carries no reconstruction parameters".into());
        };
        if p.beta != expected.beta || p.n != expected.n || p.eta != expected.eta || p.grid_size != expected.grid_size {
            return prov(format!(
                "grid built with beta {}, n {}, eta {}, size {}; expected beta {}, n {}, eta {}, size {}",
                p.beta, p.n, p.eta, p.grid_size, expected.beta, expected.n, expected.eta, expected.grid_size
            ));
        }
        if m.state != Some(cfg.state()) || m.seed != Some(cfg.experiment.seed) || m.replicate != Some(k as u32) {
            return prov(format!("grid does not belong to replicate {k} of this experiment"));
        }
        let batch = batch_path(out, k);
        if batch.exists() {
            let h = sha256_file(&batch)?;
            if m.sources.first() != Some(&h) {
                return prov(format!("grid was not reconstructed from {}", batch.display()));
            }
        }
    }
    Ok(())
}

/// Error report and witness statistics for every configured β.
pub fn analyze(cfg: &ExperimentConfig) -> CliResult<Vec<AnalysisReport>> {
    let out = &cfg.run.output;
    let e = &cfg.experiment;
    if e.eta >= 1.0 {
        return Err(CliError::Config("experiment.eta: the error bound needs eta < 1".into()));
    }
    let state = cfg.state();
    let mut reports = Vec::new();
    for &beta in &e.betas {
        let mut grids = Vec::new();
        let mut hashes = Vec::new();
        for k in 0..e.replicates {
            let path = grid_path(out, beta, k);
            if !path.exists() {
                return Err(CliError::Io(format!(
                    "{}: missing; {} replicates configured for beta {beta}",
                    path.display(),
                    e.replicates
                )));
            }
            let (g, h) = read_grid(&path)?;
            grids.push((g, path));
            hashes.push(h);
        }
        check_grids(cfg, beta, &grids)?;
        let mut errors = Vec::new();
        let mut means = Vec::new();
        for (g, _) in &grids {
            errors.push(l2_error(g, &state)?);
            means.push(witness_mean_from_grid(g, &state)?);
        }
        let error = error_upper_bound(e.n, beta, e.eta, &state)?.with_errors(errors)?;
        let owned: Vec<WignerGrid> = grids.iter().map(|(g, _)| g.clone()).collect();
        let error_of_average = Some(l2_error(&WignerGrid::average(&owned)?, &state)?);
        let witness = if means.len() >= 2 { Some(witness_stats(&means, &state)?) } else { None };
        let report = AnalysisReport {
            beta,
            method: grids.iter().map(|(g, _)| g.meta.method).collect(),
            error,
            witness,
            error_of_average,
            grid_sources: hashes,
        };
        write_json(&report_path(out, beta), &report)?;
        reports.push(report);
    }
    Ok(reports)
}

fn read_report(path: &Path) -> Option<AnalysisReport> {
    let text = std::fs::read_to_string(path).ok()?;
    serde_json::from_str(&text).ok()
}

fn report_matches(r: &AnalysisReport, cfg: &ExperimentConfig, eta: f64) -> bool {
    let p = &r.error.params;
    p.eta == eta && p.n == cfg.experiment.n && p.state == cfg.state()
}

fn csv_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// Bound curve over β for the configured and the comparison efficiency,
/// with witness statistics where reports exist.
pub fn sweep_beta(cfg: &ExperimentConfig) -> CliResult<Vec<PathBuf>> {
    let out = &cfg.run.output;
    let e = &cfg.experiment;
    let s = &cfg.sweep;
    let state = cfg.state();
    let betas = linspace(s.beta_min, s.beta_max, s.points);
    let mut etas = vec![];
    if e.eta < 1.0 {
        etas.push(e.eta);
    }
    if s.compare_eta != e.eta {
        etas.push(s.compare_eta);
    }
    let mut written = Vec::new();
    for eta in etas {
        let mut bound = String::from("beta,delta,term_var,term_tail,term_bias\n");
        for &b in &betas {
            match delta_terms(e.n, b, eta, &state) {
                Ok(t) => writeln!(
                    bound,
                    "{},{},{},{},{}",
                    csv_float(b),
                    csv_float(t.total()),
                    csv_float(t.term_variance),
                    csv_float(t.term_tail),
                    csv_float(t.term_bias)
                )
                .expect("string write"),
                Err(err) => log::warn!("beta {b}, eta {eta}: {err}"),
            }
        }
        let path = out.join("sweep").join(format!("bound_eta{eta}.csv"));
        atomic_write(&path, bound.as_bytes())?;
        written.push(path);

        let mut rows: Vec<f64> = betas.clone();
        if eta == e.eta {
            rows.extend(e.betas.iter().filter(|b| !betas.contains(b)));
        }
        rows.sort_by(f64::total_cmp);
        let mut witness = String::from("beta,delta,av,sd,separated\n");
        for &b in &rows {
            let Ok(t) = delta_terms(e.n, b, eta, &state) else {
                continue;
            };
            let stats = read_report(&report_path(out, b))
                .filter(|r| report_matches(r, cfg, eta))
                .and_then(|r| r.witness);
            match stats {
                Some(w) => writeln!(
                    witness,
                    "{},{},{},{},{}",
                    csv_float(b),
                    csv_float(t.total()),
                    csv_float(w.av),
                    csv_float(w.sd),
                    w.separated
                ),
                None => writeln!(witness, "{},{},,,", csv_float(b), csv_float(t.total())),
            }
            .expect("string write");
        }
        let path = out.join("sweep").join(format!("witness_eta{eta}.csv"));
        atomic_write(&path, witness.as_bytes())?;
        written.push(path);
    }
    Ok(written)
}

/// x to `digits` significant digits.
fn sig(x: f64, digits: i32) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let mag = x.abs().log10().floor() as i32;
    let decimals = (digits - 1 - mag).max(0) as usize;
    format!("{x:.decimals$}")
}

/// Table of numeric and bound errors per β. With `run`, the full pipeline
/// is executed first.
pub fn table1(cfg: &ExperimentConfig, run: bool) -> CliResult<String> {
    if run {
        sample(cfg, false)?;
        reconstruct(cfg, &[], false)?;
        analyze(cfg)?;
    }
    let e = &cfg.experiment;
    let state = cfg.state();
    let mut t = String::new();
    writeln!(
        t,
        "eta = {}, n = {}, alpha = ({}, {}), M = {}",
        e.eta, e.n, cfg.state.alpha1, cfg.state.alpha2, e.replicates
    )
    .expect("string write");
    writeln!(t, "{:<8}{:>16}{:>16}", "beta", "Delta_numeric", "Delta_bound").expect("string write");
    let mut witness_lines = String::new();
    for &beta in &e.betas {
        let bound = error_upper_bound(e.n, beta, e.eta, &state)?;
        let report = read_report(&report_path(&cfg.run.output, beta)).filter(|r| report_matches(r, cfg, e.eta));
        let numeric = report
            .as_ref()
            .and_then(|r| r.error.delta_numeric)
            .map_or_else(|| "-".to_string(), |d| sig(d, 3));
        writeln!(t, "{:<8}{:>16}{:>16}", beta, numeric, sig(bound.delta_bound, 4)).expect("string write");
        if let Some(w) = report.and_then(|r| r.witness) {
            writeln!(
                witness_lines,
                "beta {beta}: witness av = {}, sd = {}, incoherent = {}, pure = {}, separated = {}",
                sig(w.av, 4),
                sig(w.sd, 3),
                sig(w.incoherent_ref, 4),
                w.pure_ref,
                w.separated
            )
            .expect("string write");
        }
    }
    t.push_str(&witness_lines);
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn significant_digits() {
        assert_eq!(sig(2.3924, 3), "2.39");
        assert_eq!(sig(26.0724, 4), "26.07");
        assert_eq!(sig(0.07612, 3), "0.0761");
        assert_eq!(sig(0.0, 3), "0");
    }

    #[test]
    fn layout() {
        let out = Path::new("o");
        assert_eq!(grid_path(out, 0.05, 3), Path::new("o/grids/beta0.05/rep003.bin"));
        assert_eq!(report_path(out, 0.1), Path::new("o/reports/beta0.1.json"));
    }
}
