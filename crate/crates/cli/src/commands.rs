use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use log::info;
use quasisphere::bartnik::{
    certify_no_fill_in, proportionality_diagnostic, quasilocal_masses, solve_mu0, BartnikData, Certificate,
    CertificateStatus, Mu0Result, Proportionality,
};
use quasisphere::evolution::SolverConfig;
use quasisphere::geometry::{ConvexSurface, GridField, Resolution};
use quasisphere::mass::{fmt17, run_mass, MassEstimate};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{FieldSpec, RunConfig};
use crate::error::CliError;

/// Exit code and the JSON summary printed on stdout.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub exit_code: i32,
    pub summary: serde_json::Value,
}

impl Outcome {
    fn ok(summary: impl Serialize) -> Result<Self, CliError> {
        Ok(Outcome {
            exit_code: 0,
            summary: serde_json::to_value(summary)?,
        })
    }
}

/// What produced an output file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    /// SHA-256 of the surface spec's JSON.
    pub surface_hash: String,
    pub resolution: Resolution,
    pub solver: SolverConfig,
    pub config: RunConfig,
}

impl Provenance {
    pub fn of(config: &RunConfig) -> Self {
        let spec = serde_json::to_vec(&config.surface).expect("surface spec serializes");
        let digest = Sha256::digest(&spec);
        let mut hash = String::with_capacity(64);
        for b in digest {
            write!(hash, "{b:02x}").unwrap();
        }
        Provenance {
            surface_hash: hash,
            resolution: config.surface.resolution,
            solver: config.solver,
            config: config.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    #[serde(flatten)]
    pub estimate: MassEstimate,
    pub steps: usize,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mu0Report {
    #[serde(flatten)]
    pub result: Mu0Result,
    pub m1: f64,
    pub m2: f64,
    /// The Brown-York type mass `m0` is not computed; only `m0 <= m2` is known.
    pub m0: String,
    pub proportionality: Proportionality,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    #[serde(flatten)]
    pub certificate: Certificate,
    pub mu0_result: Mu0Result,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub t: f64,
    pub mass: f64,
    pub bracket_lo: f64,
    pub bracket_hi: f64,
}

pub(crate) fn write_text(dir: &Path, name: &str, text: &str) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Io {
        path: dir.to_path_buf(),
        message: e.to_string(),
    })?;
    let path = dir.join(name);
    fs::write(&path, text).map_err(|e| CliError::Io {
        path,
        message: e.to_string(),
    })
}

pub(crate) fn write_json(dir: &Path, name: &str, value: &impl Serialize) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(dir, name, &text)
}

/// Builds the surface and the data `(surface, H)` of a config.
pub fn load_data(config: &RunConfig, base: &Path) -> Result<BartnikData, CliError> {
    let surface = config.build_surface()?;
    let h = config.h.evaluate(&surface, base)?;
    Ok(BartnikData::new(surface, h)?)
}

fn u_csv(surface: &ConvexSurface, u: &GridField) -> String {
    let u = if u.n_phi() == surface.n_phi() { u.clone() } else { u.expand(surface.n_phi()) };
    let mut out = String::from("theta,phi,u\n");
    for j in 0..u.n_theta() {
        for k in 0..u.n_phi() {
            writeln!(out, "{},{},{}", fmt17(surface.theta(j)), fmt17(surface.phi(k)), fmt17(u.get(j, k))).unwrap();
        }
    }
    out
}

/// Evolves `u0 = H0 / H` and writes `mass_series.csv`, `u_final.csv` and
/// `estimate.json`. The series are written before the convergence check.
pub fn extend(config: &RunConfig, base: &Path) -> Result<Outcome, CliError> {
    let data = load_data(config, base)?;
    let u0 = data.initial_data(1.0);
    let run = run_mass(data.surface(), &u0, &config.solver, false)?;
    let dir = &config.output_dir;
    write_text(dir, "mass_series.csv", &run.series.to_csv())?;
    write_text(dir, "u_final.csv", &u_csv(data.surface(), &run.evolution.state.u))?;
    let estimate = run.estimate(config.mass_tol)?;
    info!("mass {:.9} in [{:.9}, {:.9}]", estimate.value, estimate.bracket_lo, estimate.bracket_hi);
    let report = EstimateReport {
        estimate,
        steps: run.evolution.steps,
        provenance: Provenance::of(config),
    };
    write_json(dir, "estimate.json", &report)?;
    Outcome::ok(estimate)
}

fn mu0_report(config: &RunConfig, data: &BartnikData) -> Result<Mu0Report, CliError> {
    let result = solve_mu0(data, &config.solver, &config.mu0_options())?;
    let (m1, m2) = quasilocal_masses(data, result.mu0);
    Ok(Mu0Report {
        result,
        m1,
        m2,
        m0: "<= m2".into(),
        proportionality: proportionality_diagnostic(data),
        provenance: Provenance::of(config),
    })
}

/// Solves for `mu0` and writes `mu0.json`.
pub fn mu0(config: &RunConfig, base: &Path) -> Result<Outcome, CliError> {
    let data = load_data(config, base)?;
    let report = mu0_report(config, &data)?;
    write_json(&config.output_dir, "mu0.json", &report)?;
    Outcome::ok(report.result)
}

/// Solves for `mu0`, then tests `certify.h_hat`. Exit code 0 when granted,
/// 2 when inconclusive.
pub fn certify(config: &RunConfig, base: &Path) -> Result<Outcome, CliError> {
    let data = load_data(config, base)?;
    let report = mu0_report(config, &data)?;
    write_json(&config.output_dir, "mu0.json", &report)?;
    let mu0 = report.result;
    let h_hat = match &config.certify.h_hat {
        FieldSpec::MultipleOfMu0H(k) => data.h().scale(k * mu0.mu0),
        spec => spec.evaluate(data.surface(), base)?,
    };
    let certificate = certify_no_fill_in(&data, &h_hat, &mu0, config.certify.margin)?;
    let exit_code = match certificate.status {
        CertificateStatus::Granted => 0,
        CertificateStatus::Inconclusive => 2,
    };
    let report = CertificateReport {
        certificate,
        mu0_result: mu0,
        provenance: Provenance::of(config),
    };
    write_json(&config.output_dir, "certificate.json", &report)?;
    Ok(Outcome {
        exit_code,
        summary: serde_json::to_value(&report.certificate)?,
    })
}

/// Mass of the extension of `t H0 / H` for each `t` of `sweep.t`, on up to
/// `jobs` threads. Writes `sweep.csv`.
pub fn sweep(config: &RunConfig, base: &Path, jobs: usize) -> Result<Outcome, CliError> {
    let data = load_data(config, base)?;
    let u0 = data.initial_data(1.0);
    let ts = &config.sweep.t;
    let jobs = jobs.clamp(1, ts.len().max(1));
    let mut rows: Vec<Option<Result<SweepRow, CliError>>> = (0..ts.len()).map(|_| None).collect();
    std::thread::scope(|s| {
        for (worker, chunk) in rows.chunks_mut(ts.len().div_ceil(jobs).max(1)).enumerate() {
            let (data, u0) = (&data, &u0);
            let offset = worker * ts.len().div_ceil(jobs).max(1);
            s.spawn(move || {
                for (i, slot) in chunk.iter_mut().enumerate() {
                    let t = ts[offset + i];
                    let res = run_mass(data.surface(), &u0.scale(t), &config.solver, false)
                        .and_then(|run| run.fit())
                        .map(|e| SweepRow {
                            t,
                            mass: e.value,
                            bracket_lo: e.bracket_lo,
                            bracket_hi: e.bracket_hi,
                        })
                        .map_err(CliError::from);
                    *slot = Some(res);
                }
            });
        }
    });
    let rows: Vec<SweepRow> = rows
        .into_iter()
        .map(|r| r.expect("every sweep entry is computed"))
        .collect::<Result<_, _>>()?;
    let mut csv = String::from("t,mass,bracket_lo,bracket_hi\n");
    for r in &rows {
        writeln!(csv, "{},{},{},{}", fmt17(r.t), fmt17(r.mass), fmt17(r.bracket_lo), fmt17(r.bracket_hi)).unwrap();
    }
    write_text(&config.output_dir, "sweep.csv", &csv)?;
    Outcome::ok(rows)
}
