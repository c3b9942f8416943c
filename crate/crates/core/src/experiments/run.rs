//! Declarative experiment runs: a JSON config in, CSV/JSON artifacts and a
//! run record out.
//!
//! ```json
//! {
//!   "schema_version": 1,
//!   "experiment": { "kind": "duality" },
//!   "complex": { "grid": { "dim": 2, "extents": [6, 6], "spacing": [1, 1], "periodic": [true, true] } },
//!   "metric": { "mode": { "kind": "native" } },
//!   "seed": 7,
//!   "tol": 1e-8,
//!   "output_dir": "out/duality"
//! }
//! ```
//!
//! Relative paths in a config loaded from disk are resolved against the
//! config's directory. Spectra go to `spectrum_k{k}.csv`, reports to
//! `report.json` and the record to `record.json`; every file is written to a
//! temporary sibling and renamed into place.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::checks::{check_adjacent_degree, check_duality, check_partial_relations, degree_spectra};
use super::cover::{build_gromov_cover, partition_localization_check};
use super::deformation::{deformation_experiment, DeformationFamily};
use super::localization::localization_experiment;
use crate::complex::{build_grid, load_complex_file, CellComplex, GridSpec};
use crate::eigensolve::{eig_pencil, Selection, SolverOptions, SpectrumSet};
use crate::error::{Error, Result};
use crate::metric::{assemble_masses, assemble_pencil, MetricSpec};
use crate::weyl::{certify, witness};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ComplexSource {
    Grid(GridSpec),
    File(PathBuf),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeKind {
    /// Seeded random unit vector.
    Random,
    /// Eigenvector nearest the target value.
    Witness,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Experiment {
    Spectrum {
        #[serde(default)]
        degree: Option<usize>,
        #[serde(default)]
        window: Option<f64>,
    },
    Partial {
        #[serde(default)]
        degree: Option<usize>,
    },
    Adjacent,
    Duality,
    Deformation {
        family: DeformationFamily,
        sweep: Vec<f64>,
        window: f64,
    },
    Certify {
        degree: usize,
        lambda: f64,
        alpha: f64,
        probe: ProbeKind,
    },
    Localize {
        radii: Vec<f64>,
        #[serde(default)]
        degree: usize,
    },
    Partition {
        radius: usize,
        #[serde(default = "default_probe_count")]
        random_probes: usize,
    },
}

fn default_probe_count() -> usize {
    4
}

/// Optional seeded perturbation of the metric: every star weight is multiplied
/// by a factor drawn uniformly from `[low, high]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomWeights {
    pub low: f64,
    pub high: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub experiment: Experiment,
    pub complex: ComplexSource,
    #[serde(default)]
    pub metric: MetricSpec,
    #[serde(default)]
    pub random_weights: Option<RandomWeights>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_tol")]
    pub tol: f64,
    pub output_dir: PathBuf,
}

fn default_tol() -> f64 {
    1e-8
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid run config: {e}")))?;
        if config.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                config.schema_version
            )));
        }
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config = Self::from_json(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        if config.output_dir.is_relative() {
            config.output_dir = base.join(&config.output_dir);
        }
        if let ComplexSource::File(file) = &mut config.complex {
            if file.is_relative() {
                *file = base.join(&*file);
            }
        }
        Ok(config)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub schema_version: u32,
    pub tool_version: String,
    pub config: RunConfig,
    /// Seconds since the Unix epoch.
    pub started: f64,
    pub finished: f64,
    /// Pass/fail verdict for experiments that have one.
    pub passed: Option<bool>,
    pub artifacts: Vec<PathBuf>,
}

fn now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

/// Writes `contents` to a temporary sibling of `path`, then renames it into place.
pub(crate) fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let name = path
        .file_name()
        .ok_or_else(|| Error::InvalidArgument(format!("{} has no file name", path.display())))?;
    let tmp = path.with_file_name(format!(".{}.tmp", name.to_string_lossy()));
    fs::write(&tmp, contents).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

struct Artifacts {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl Artifacts {
    fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        let path = self.dir.join(name);
        write_atomic(&path, contents)?;
        self.written.push(path);
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let text = serde_json::to_string_pretty(value).expect("report serializes");
        self.write(name, &(text + "\n"))
    }

    fn spectra(&mut self, spectra: &[(usize, SpectrumSet)]) -> Result<()> {
        for (k, s) in spectra {
            self.write(&format!("spectrum_k{k}.csv"), &s.to_csv())?;
        }
        Ok(())
    }
}

fn load_source(source: &ComplexSource) -> Result<CellComplex> {
    match source {
        ComplexSource::Grid(spec) => build_grid(spec),
        ComplexSource::File(path) => load_complex_file(path),
    }
}

fn resolve_metric(config: &RunConfig, complex: &CellComplex, rng: &mut ChaCha8Rng) -> Result<MetricSpec> {
    match config.random_weights {
        None => Ok(config.metric.clone()),
        Some(RandomWeights { low, high }) => {
            if config.metric != MetricSpec::native() {
                return Err(Error::Config(
                    "random_weights can only perturb the native metric".into(),
                ));
            }
            MetricSpec::random_per_cell(complex, low, high, rng)
        }
    }
}

fn enumerate(spectra: Vec<SpectrumSet>) -> Vec<(usize, SpectrumSet)> {
    spectra.into_iter().enumerate().collect()
}

/// Executes the configured experiment and writes its artifacts and record.
pub fn run(config: &RunConfig) -> Result<RunRecord> {
    let started = now();
    if config.schema_version != SCHEMA_VERSION {
        return Err(Error::Config(format!(
            "schema_version {} is not supported (expected {SCHEMA_VERSION})",
            config.schema_version
        )));
    }
    fs::create_dir_all(&config.output_dir).map_err(|e| Error::io(&config.output_dir, e))?;
    let complex = load_source(&config.complex)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let metric = resolve_metric(config, &complex, &mut rng)?;
    let tol = config.tol;
    let opts = SolverOptions {
        seed: config.seed,
        ..SolverOptions::default()
    };
    let mut out = Artifacts {
        dir: config.output_dir.clone(),
        written: Vec::new(),
    };

    let passed = match &config.experiment {
        Experiment::Spectrum { degree, window } => {
            let masses = assemble_masses(&complex, &metric)?;
            let degrees: Vec<usize> = match degree {
                Some(k) => vec![*k],
                None => (0..=complex.dim()).collect(),
            };
            let selection = window.map_or(Selection::All, Selection::Window);
            let mut spectra = Vec::new();
            for k in degrees {
                let pencil = assemble_pencil(&complex, &masses, k)?;
                spectra.push((k, eig_pencil(pencil.full(), selection, &SolverOptions { tol, ..opts })?));
            }
            out.spectra(&spectra)?;
            None
        }
        Experiment::Partial { degree } => {
            let report = check_partial_relations(&complex, &metric, *degree, tol)?;
            out.spectra(&enumerate(degree_spectra(&complex, &metric, tol)?))?;
            out.json("report.json", &report)?;
            Some(report.passed)
        }
        Experiment::Adjacent => {
            let report = check_adjacent_degree(&complex, &metric, tol)?;
            out.spectra(&enumerate(degree_spectra(&complex, &metric, tol)?))?;
            out.json("report.json", &report)?;
            Some(report.passed)
        }
        Experiment::Duality => {
            let report = check_duality(&complex, &metric, tol)?;
            out.spectra(&enumerate(degree_spectra(&complex, &metric, tol)?))?;
            out.json("report.json", &report)?;
            Some(report.passed)
        }
        Experiment::Deformation {
            family,
            sweep,
            window,
        } => {
            let report = deformation_experiment(&complex, &metric, *family, sweep, *window, tol)?;
            out.write("deformation.csv", &report.to_csv())?;
            out.json("report.json", &report)?;
            Some(report.passed())
        }
        Experiment::Certify {
            degree,
            lambda,
            alpha,
            probe,
        } => {
            let masses = assemble_masses(&complex, &metric)?;
            let pencil = assemble_pencil(&complex, &masses, *degree)?;
            let pencil = pencil.full();
            let psi = match probe {
                ProbeKind::Witness => witness(pencil, *lambda, *alpha)?.psi,
                ProbeKind::Random => {
                    let v: Vec<f64> = (0..pencil.size()).map(|_| rng.random_range(-1.0..1.0)).collect();
                    let norm = pencil.m_norm(&v);
                    v.into_iter().map(|x| x / norm).collect()
                }
            };
            let cert = certify(pencil, &psi, *lambda, *alpha)?;
            out.json("certificate.json", &cert)?;
            None
        }
        Experiment::Localize { radii, degree } => {
            let spec = complex.grid().ok_or_else(|| {
                Error::Config("localize needs a grid complex".into())
            })?;
            let report = localization_experiment(spec, radii, *degree, &opts)?;
            out.json("report.json", &report)?;
            Some(report.within_range)
        }
        Experiment::Partition {
            radius,
            random_probes,
        } => {
            let pou = build_gromov_cover(&complex, *radius)?;
            let nv = complex.cell_count(0);
            let mut probes = vec![vec![1.0; nv]];
            for _ in 0..*random_probes {
                probes.push((0..nv).map(|_| rng.random_range(-1.0..1.0)).collect());
            }
            let report = partition_localization_check(&complex, &metric, &pou, &probes, 0)?;
            out.json("report.json", &report)?;
            Some(report.within_bound && pou.normalization_error <= 1e-12)
        }
    };

    let record = RunRecord {
        schema_version: SCHEMA_VERSION,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        config: config.clone(),
        started,
        finished: now(),
        passed,
        artifacts: out.written.clone(),
    };
    out.json("record.json", &record)?;
    Ok(record)
}
