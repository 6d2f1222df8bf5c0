use std::fs;
use std::path::{Path, PathBuf};

use quasisphere::bartnik::{h0_of, BartnikData, Mu0Options};
use quasisphere::evolution::SolverConfig;
use quasisphere::expr::HExpression;
use quasisphere::geometry::{build_surface, ConvexSurface, GridField, SurfaceSpec};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::CliError;

/// How a positive function on the surface is specified.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldSpec {
    /// Expression in `theta` and `phi`.
    Expression(HExpression),
    /// CSV of node samples; see [`read_samples`].
    Samples(PathBuf),
    /// `k` times the mean curvature of the embedding.
    ConstantMultipleOfH0(f64),
    /// `k * mu0 * H`; only meaningful for the certificate's `h_hat`.
    MultipleOfMu0H(f64),
}

impl FieldSpec {
    /// Samples the field on `surface`. `relative_to` resolves sample paths.
    pub fn evaluate(&self, surface: &ConvexSurface, relative_to: &Path) -> Result<GridField, CliError> {
        let field = match self {
            FieldSpec::Expression(e) => e.evaluate_on(surface)?,
            FieldSpec::Samples(path) => read_samples(&relative_to.join(path), surface)?,
            FieldSpec::ConstantMultipleOfH0(k) => {
                if !(*k > 0.0 && k.is_finite()) {
                    return Err(CliError::Config(format!("H0 multiple must be positive, got {k}")));
                }
                h0_of(&BartnikData::new(surface.clone(), GridField::constant(surface.n_theta(), 1, 1.0))?).scale(*k)
            }
            FieldSpec::MultipleOfMu0H(_) => {
                return Err(CliError::Config(
                    "multiple_of_mu0_h is only allowed for certify.h_hat".into(),
                ))
            }
        };
        Ok(field)
    }
}

/// Reads node samples from CSV with header `theta,value` (one row per
/// parallel) or `theta,phi,value` (one row per node, ring by ring).
pub fn read_samples(path: &Path, surface: &ConvexSurface) -> Result<GridField, CliError> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| CliError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let with_phi = match headers.iter().map(String::as_str).collect::<Vec<_>>()[..] {
        ["theta", "value"] => false,
        ["theta", "phi", "value"] => true,
        _ => {
            return Err(CliError::Config(format!(
                "{}: header must be `theta,value` or `theta,phi,value`, got `{}`",
                path.display(),
                headers.join(",")
            )))
        }
    };
    let n_phi = if with_phi { surface.n_phi() } else { 1 };
    let mut values = Vec::with_capacity(surface.n_theta() * n_phi);
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let nums: Vec<f64> = record
            .iter()
            .map(|f| f.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| CliError::Config(format!("{}: row {}: {e}", path.display(), row + 1)))?;
        let (j, k) = (row / n_phi, row % n_phi);
        if j >= surface.n_theta() {
            return Err(CliError::Config(format!(
                "{}: more rows than grid nodes ({})",
                path.display(),
                surface.n_theta() * n_phi
            )));
        }
        if (nums[0] - surface.theta(j)).abs() > 1e-9 {
            return Err(CliError::Config(format!(
                "{}: row {} has theta = {}, grid node is at {}",
                path.display(),
                row + 1,
                nums[0],
                surface.theta(j)
            )));
        }
        if with_phi && (nums[1] - surface.phi(k)).abs() > 1e-9 {
            return Err(CliError::Config(format!(
                "{}: row {} has phi = {}, grid node is at {}",
                path.display(),
                row + 1,
                nums[1],
                surface.phi(k)
            )));
        }
        values.push(nums[nums.len() - 1]);
    }
    Ok(GridField::new(surface.n_theta(), n_phi, values)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CertifyOptions {
    pub h_hat: FieldSpec,
    pub margin: f64,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        CertifyOptions {
            h_hat: FieldSpec::MultipleOfMu0H(1.1),
            margin: 0.02,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepOptions {
    /// Scalings `t` applied to `u0 = H0 / H`.
    pub t: Vec<f64>,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            t: vec![0.5, 0.75, 1.0, 1.5, 2.0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fault {
    /// Corrupts the mass series so the monotonicity checks must fail.
    BrokenMonotonicity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyOptions {
    pub seed: u64,
    /// Random fields per discrete-operator check.
    pub cases: usize,
    pub inject_fault: Option<Fault>,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            seed: 1,
            cases: 16,
            inject_fault: None,
        }
    }
}

/// Everything that determines a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub surface: SurfaceSpec,
    pub h: FieldSpec,
    pub solver: SolverConfig,
    pub mass_tol: f64,
    pub mu_tol: f64,
    pub output_dir: PathBuf,
    pub certify: CertifyOptions,
    pub sweep: SweepOptions,
    pub verify: VerifyOptions,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            surface: SurfaceSpec::sphere(1.0, 64),
            h: FieldSpec::Expression(HExpression::parse("2").expect("literal parses")),
            solver: SolverConfig::default(),
            mass_tol: 1e-3,
            mu_tol: 1e-4,
            output_dir: PathBuf::from("out"),
            certify: CertifyOptions::default(),
            sweep: SweepOptions::default(),
            verify: VerifyOptions::default(),
        }
    }
}

impl RunConfig {
    /// Reads `path` (or starts from the defaults) and applies `key=value` overrides.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<(RunConfig, PathBuf), CliError> {
        let (mut value, base) = match path {
            Some(p) => {
                let text = fs::read_to_string(p).map_err(|e| CliError::Io {
                    path: p.to_path_buf(),
                    message: e.to_string(),
                })?;
                let v: Value = serde_json::from_str(&text)
                    .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
                let base = p.parent().map(Path::to_path_buf).unwrap_or_default();
                (v, base)
            }
            None => (serde_json::to_value(RunConfig::default())?, PathBuf::new()),
        };
        for o in overrides {
            apply_override(&mut value, o)?;
        }
        // parse expressions up front so their errors keep the parser's kind
        for field in [&value["h"], &value["certify"]["h_hat"]] {
            if let Some(text) = field.get("expression").and_then(Value::as_str) {
                HExpression::parse(text)?;
            }
        }
        let config: RunConfig =
            serde_json::from_value(value).map_err(|e| CliError::Config(e.to_string()))?;
        config.validate()?;
        Ok((config, base))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        for (name, v) in [("mass_tol", self.mass_tol), ("mu_tol", self.mu_tol)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(CliError::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.certify.margin >= 0.0) {
            return Err(CliError::Config("certify.margin must be nonnegative".into()));
        }
        if self.sweep.t.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
            return Err(CliError::Config("sweep.t entries must be positive".into()));
        }
        self.solver.validate()?;
        Ok(())
    }

    /// Pretty JSON with fields in declaration order, newline-terminated.
    pub fn canonical_text(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }

    pub fn mu0_options(&self) -> Mu0Options {
        Mu0Options {
            mu_tol: self.mu_tol,
            mass_tol: self.mass_tol,
            ..Mu0Options::default()
        }
    }

    pub fn build_surface(&self) -> Result<ConvexSurface, CliError> {
        Ok(build_surface(&self.surface)?)
    }
}

/// Sets a dotted `key` in `root` to `raw`, parsed as JSON when possible.
///
/// A value that replaces an existing string stays a string, so
/// `h.expression=4` sets the expression text rather than a number.
pub fn apply_override(root: &mut Value, assignment: &str) -> Result<(), CliError> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override `{assignment}` is not of the form key=value")))?;
    let path: Vec<&str> = key.trim().split('.').collect();
    if path.iter().any(|p| p.is_empty()) {
        return Err(CliError::Config(format!("malformed key `{key}`")));
    }
    let mut node = root;
    for part in &path[..path.len() - 1] {
        let obj = node
            .as_object_mut()
            .ok_or_else(|| CliError::Config(format!("`{key}`: `{part}` is not inside an object")))?;
        node = obj.entry(part.to_string()).or_insert_with(|| Value::Object(Default::default()));
    }
    let last = path[path.len() - 1];
    let obj = node
        .as_object_mut()
        .ok_or_else(|| CliError::Config(format!("`{key}` does not name an object field")))?;
    let keep_string = matches!(obj.get(last), Some(Value::String(_)));
    let value = match serde_json::from_str::<Value>(raw) {
        Ok(v) if !(keep_string && !v.is_string()) => v,
        _ => Value::String(raw.to_string()),
    };
    obj.insert(last.to_string(), value);
    Ok(())
}
