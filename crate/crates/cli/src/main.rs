use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use hodge_core::analytic::{
    alpha_invariant, continuum_torus_spectrum, discrete_torus_oracle, hyperbolic_reference, FlatTable,
};
use hodge_core::complex::{build_grid, load_complex_file};
use hodge_core::eigensolve::{eig_pencil, Method, Selection};
use hodge_core::experiments::{
    check_adjacent_degree, check_duality, check_partial_relations, deformation_experiment, localization_experiment,
    run, DeformationFamily, RunConfig,
};
use hodge_core::metric::{assemble_masses, assemble_pencil};
use hodge_core::weyl::{certify, witness};
use hodge_core::{CellComplex, GridSpec, MetricSpec, SolverOptions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Discrete Hodge Laplacian spectra on metrized cell complexes.
#[derive(Parser)]
#[command(name = "hodgespec", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build or load a complex and print its validation report.
    Build {
        #[command(flatten)]
        complex: ComplexArgs,
        /// Also write the complex document here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Eigenvalues of the Hodge Laplacian as `value,multiplicity` CSV.
    Spectrum {
        #[command(flatten)]
        complex: ComplexArgs,
        #[command(flatten)]
        metric: MetricArgs,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long, short)]
        degree: usize,
        /// Eigenvalues in `[0, A]`.
        #[arg(long, conflicts_with = "count")]
        window: Option<f64>,
        /// The smallest `n` eigenvalues.
        #[arg(long)]
        count: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Certify that the spectrum meets a neighbourhood of `lambda`.
    Certify {
        #[command(flatten)]
        complex: ComplexArgs,
        #[command(flatten)]
        metric: MetricArgs,
        #[arg(long, short)]
        degree: usize,
        #[arg(long)]
        lambda: f64,
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
        #[arg(long, value_enum, default_value_t = Probe::Witness)]
        probe: Probe,
        /// Seed for the random probe.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Spectrum distances along a metric deformation sweep.
    Deform {
        #[command(flatten)]
        complex: ComplexArgs,
        #[command(flatten)]
        metric: MetricArgs,
        /// Deform along this axis only; uniform scaling otherwise.
        #[arg(long)]
        axis: Option<usize>,
        #[arg(long, value_delimiter = ',', required = true)]
        sweep: Vec<f64>,
        #[arg(long)]
        window: f64,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
    /// First Dirichlet eigenvalue of growing balls in a flat torus.
    Localize {
        #[arg(long, default_value_t = 2)]
        dim: usize,
        #[arg(long, default_value_t = 40)]
        extent: usize,
        #[arg(long, default_value_t = 1.0)]
        spacing: f64,
        #[arg(long, value_delimiter = ',', required = true)]
        radii: Vec<f64>,
        #[arg(long, short, default_value_t = 0)]
        degree: usize,
    },
    /// Structural spectrum identities; exits with status 1 when a check fails.
    Check {
        #[arg(value_enum)]
        which: CheckKind,
        #[command(flatten)]
        complex: ComplexArgs,
        #[command(flatten)]
        metric: MetricArgs,
        /// Restrict the partial-operator check to one degree.
        #[arg(long, short)]
        degree: Option<usize>,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
    },
    /// Closed-form reference spectra.
    Flat {
        #[command(subcommand)]
        which: FlatCommand,
    },
    /// Execute a JSON run config.
    Run { config: PathBuf },
}

#[derive(Subcommand)]
enum FlatCommand {
    /// Exact spectrum of the discretized flat torus.
    Oracle {
        #[arg(long, value_delimiter = ',', required = true)]
        extents: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "1.0")]
        spacing: Vec<f64>,
        #[arg(long, short)]
        degree: usize,
        #[arg(long)]
        count: Option<usize>,
    },
    /// Continuum flat torus spectrum below a cutoff; basis rows separated by `;`.
    Continuum {
        #[arg(long)]
        basis: String,
        #[arg(long, short)]
        degree: usize,
        #[arg(long)]
        cutoff: f64,
    },
    /// Bottom of the k-form spectrum of a flat product from a JSON table `{n, s, lambda}`.
    Alpha {
        table: PathBuf,
        #[arg(long, short)]
        degree: usize,
    },
    /// Essential spectrum of k-forms on hyperbolic (N+1)-space.
    Hyperbolic {
        #[arg(long = "big-n")]
        big_n: usize,
        #[arg(long, short)]
        degree: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum CheckKind {
    Partial,
    Adjacent,
    Duality,
}

#[derive(Clone, Copy, ValueEnum)]
enum Probe {
    Witness,
    Random,
}

#[derive(Args)]
struct ComplexArgs {
    /// Complex document (JSON).
    #[arg(long, conflicts_with = "extents")]
    complex: Option<PathBuf>,
    /// Cells per axis of a cubical grid, e.g. `6,6`.
    #[arg(long, value_delimiter = ',')]
    extents: Vec<usize>,
    /// Grid spacing, one value or one per axis.
    #[arg(long, value_delimiter = ',', default_value = "1.0")]
    spacing: Vec<f64>,
    /// Axes that are not periodic.
    #[arg(long, value_delimiter = ',')]
    open: Vec<usize>,
}

impl ComplexArgs {
    fn load(&self) -> Result<CellComplex> {
        if let Some(path) = &self.complex {
            return Ok(load_complex_file(path)?);
        }
        if self.extents.is_empty() {
            bail!("give either --complex <file> or --extents");
        }
        let dim = self.extents.len();
        let spacing = match self.spacing.as_slice() {
            [h] => vec![*h; dim],
            s => s.to_vec(),
        };
        let spec = GridSpec {
            dim,
            extents: self.extents.clone(),
            spacing,
            periodic: (0..dim).map(|a| !self.open.contains(&a)).collect(),
        };
        Ok(build_grid(&spec)?)
    }
}

#[derive(Args)]
struct MetricArgs {
    /// Metric document: a JSON file, or inline JSON such as
    /// `{"mode": {"kind": "per_axis", "spacings": [1, 2]}}`.
    #[arg(long, conflicts_with = "per_axis")]
    metric: Option<String>,
    /// Per-axis spacings overriding the grid's.
    #[arg(long, value_delimiter = ',')]
    per_axis: Vec<f64>,
    /// Global factor multiplying the metric tensor.
    #[arg(long)]
    factor: Option<f64>,
}

impl MetricArgs {
    fn load(&self) -> Result<MetricSpec> {
        let mut metric = match &self.metric {
            Some(inline) if inline.trim_start().starts_with('{') => {
                serde_json::from_str(inline).context("invalid inline metric")?
            }
            Some(path) => serde_json::from_str(&read(Path::new(path))?)
                .with_context(|| format!("invalid metric in {path}"))?,
            None if !self.per_axis.is_empty() => MetricSpec::per_axis(self.per_axis.clone()),
            None => MetricSpec::native(),
        };
        if let Some(f) = self.factor {
            metric.factor *= f;
        }
        Ok(metric)
    }
}

#[derive(Args)]
struct SolverArgs {
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    /// Force the dense or the iterative solver.
    #[arg(long, value_enum)]
    method: Option<SolverMethod>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SolverMethod {
    Dense,
    ShiftInvert,
}

impl SolverArgs {
    fn options(&self) -> SolverOptions {
        SolverOptions {
            tol: self.tol,
            method: match self.method {
                None => Method::Auto,
                Some(SolverMethod::Dense) => Method::Dense,
                Some(SolverMethod::ShiftInvert) => Method::ShiftInvert,
            },
            ..SolverOptions::default()
        }
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("cannot write {}", path.display())),
        None => stdout(text),
    }
}

/// Writes to stdout; a reader that closed the pipe early is not an error.
fn stdout(text: &str) -> Result<()> {
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|()| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<()> {
    stdout(&(serde_json::to_string_pretty(value)? + "\n"))
}

fn parse_basis(text: &str) -> Result<Vec<Vec<f64>>> {
    text.split(';')
        .map(|row| {
            row.split(',')
                .map(|x| x.trim().parse::<f64>().with_context(|| format!("bad basis entry {x:?}")))
                .collect()
        })
        .collect()
}

fn execute(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Build { complex, out } => {
            let c = complex.load()?;
            let report = c.validate();
            if let Some(path) = out {
                let doc = serde_json::to_string_pretty(&c.to_document())?;
                emit(&(doc + "\n"), Some(&path))?;
            }
            let ok = report.failures.is_empty();
            print_json(&report)?;
            Ok(ok)
        }
        Command::Spectrum {
            complex,
            metric,
            solver,
            degree,
            window,
            count,
            out,
        } => {
            let c = complex.load()?;
            let masses = assemble_masses(&c, &metric.load()?)?;
            let pencil = assemble_pencil(&c, &masses, degree)?;
            let selection = match (window, count) {
                (Some(a), _) => Selection::Window(a),
                (None, Some(n)) => Selection::Smallest(n),
                (None, None) => Selection::All,
            };
            let spectrum = eig_pencil(pencil.full(), selection, &solver.options())?;
            emit(&spectrum.to_csv(), out.as_deref())?;
            Ok(true)
        }
        Command::Certify {
            complex,
            metric,
            degree,
            lambda,
            alpha,
            probe,
            seed,
        } => {
            let c = complex.load()?;
            let masses = assemble_masses(&c, &metric.load()?)?;
            let pencil = assemble_pencil(&c, &masses, degree)?;
            let pencil = pencil.full();
            let psi = match probe {
                Probe::Witness => witness(pencil, lambda, alpha)?.psi,
                Probe::Random => {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    let v: Vec<f64> = (0..pencil.size()).map(|_| rng.random_range(-1.0..1.0)).collect();
                    let norm = pencil.m_norm(&v);
                    v.into_iter().map(|x| x / norm).collect()
                }
            };
            print_json(&certify(pencil, &psi, lambda, alpha)?)?;
            Ok(true)
        }
        Command::Deform {
            complex,
            metric,
            axis,
            sweep,
            window,
            tol,
        } => {
            let c = complex.load()?;
            let family = match axis {
                Some(axis) => DeformationFamily::PerAxis { axis },
                None => DeformationFamily::UniformScaling,
            };
            let report = deformation_experiment(&c, &metric.load()?, family, &sweep, window, tol)?;
            print_json(&report)?;
            Ok(report.passed())
        }
        Command::Localize {
            dim,
            extent,
            spacing,
            radii,
            degree,
        } => {
            let spec = GridSpec::torus(dim, extent, spacing);
            let report = localization_experiment(&spec, &radii, degree, &SolverOptions::default())?;
            print_json(&report)?;
            Ok(report.within_range)
        }
        Command::Check {
            which,
            complex,
            metric,
            degree,
            tol,
        } => {
            let c = complex.load()?;
            let m = metric.load()?;
            let report = match which {
                CheckKind::Partial => check_partial_relations(&c, &m, degree, tol)?,
                CheckKind::Adjacent => check_adjacent_degree(&c, &m, tol)?,
                CheckKind::Duality => check_duality(&c, &m, tol)?,
            };
            print_json(&report)?;
            Ok(report.passed)
        }
        Command::Flat { which } => match which {
            FlatCommand::Oracle {
                extents,
                spacing,
                degree,
                count,
            } => {
                let spacing = match spacing.as_slice() {
                    [h] => vec![*h; extents.len()],
                    s => s.to_vec(),
                };
                let spec = GridSpec::periodic_with(&extents, &spacing);
                stdout(&discrete_torus_oracle(&spec, degree, count)?.to_csv())?;
                Ok(true)
            }
            FlatCommand::Continuum { basis, degree, cutoff } => {
                let basis = parse_basis(&basis)?;
                stdout(&continuum_torus_spectrum(&basis, degree, cutoff)?.to_csv())?;
                Ok(true)
            }
            FlatCommand::Alpha { table, degree } => {
                let table: FlatTable = serde_json::from_str(&read(&table)?)
                    .with_context(|| format!("invalid table in {}", table.display()))?;
                table.validate()?;
                stdout(&format!("{}\n", alpha_invariant(&table, degree)?))?;
                Ok(true)
            }
            FlatCommand::Hyperbolic { big_n, degree } => {
                print_json(&hyperbolic_reference(big_n, degree)?)?;
                Ok(true)
            }
        },
        Command::Run { config } => {
            let config = RunConfig::load(&config)?;
            let record = run(&config)?;
            print_json(&record)?;
            Ok(record.passed != Some(false))
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
