//! `padic`: command-line front end for p-adic manifold models.
//!
//! Exit codes: 0 on success, 1 on usage, validation or I/O errors, 2 on
//! numerical failure. Every output is computed before the first file is
//! written, so failed runs leave no files behind.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use padic_manifold::analysis::{
    energy_constants, markov_report, solve_dirichlet, solve_elliptic_dirichlet, DirichletProblem, EnergyConstants,
    SolutionReport,
};
use padic_manifold::export::{distance_csv, matrix_csv, spectrum_csv, to_json, vector_csv, wavelet_csv, write_atomic};
use padic_manifold::manifold::{BuiltinOptions, ManifoldModel, BUILTIN_NAMES};
use padic_manifold::operators::{assemble, ball_cells, EllipticCoefficients, FrameField, KernelSpec};
use padic_manifold::spectral::spectrum;
use padic_manifold::wavelets::verify_wavelets;
use padic_manifold::Error;

#[derive(Parser, Debug)]
#[command(
    name = "padic",
    version,
    about = "Diffusion operators and Dirichlet problems on p-adic manifolds"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Summary of the model: roots, heights, measures.
    Inspect(Common),
    /// Pairwise geodetic distances between cells.
    Distance(Common),
    /// Dump the assembled operator matrix.
    Assemble(Common),
    /// Balanced spectrum with multiplicities.
    Spectrum(Common),
    /// Wavelet eigenvalue checks.
    Wavelets {
        #[command(subcommand)]
        action: WaveletAction,
    },
    /// Markov semigroup report for the heat flow.
    Heat(Common),
    /// Dirichlet problem for the kNN operator on a domain.
    Dirichlet(Common),
    /// Dirichlet problem for the elliptic composite on a domain.
    Elliptic(Common),
}

#[derive(Subcommand, Debug)]
enum WaveletAction {
    /// Compare closed-form eigenvalues with the assembled operator.
    Verify(Common),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum KernelKind {
    Vt,
    Knn,
}

#[derive(Args, Debug)]
struct Common {
    /// Built-in model name.
    #[arg(long, conflicts_with = "spec")]
    builtin: Option<String>,
    /// Model file (TOML).
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Residue characteristic override.
    #[arg(long)]
    p: Option<u32>,
    /// Dimension override.
    #[arg(long)]
    n: Option<usize>,
    /// Truncation depth override.
    #[arg(long)]
    depth: Option<usize>,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    /// Height threshold of the nearest-neighbour kernel.
    #[arg(long, default_value_t = 1)]
    k: usize,
    /// Operator family for assemble, spectrum, wavelets and heat; the
    /// boundary value problems always use knn.
    #[arg(long, value_enum, default_value_t = KernelKind::Vt)]
    kernel: KernelKind,
    /// Domain: ball selectors such as `v0/1` or `v0/1/0`, or `cells:0,1,2`.
    /// Repeatable; the union is taken.
    #[arg(long)]
    omega: Vec<String>,
    /// Right-hand side: `const:<c>` or `values:<a>,<b>,...` in domain order.
    #[arg(long, default_value = "const:1")]
    f: String,
    /// Frame field file (TOML); identity when absent.
    #[arg(long)]
    frame: Option<PathBuf>,
    /// Coefficient file (TOML); identity when absent.
    #[arg(long)]
    coeffs: Option<PathBuf>,
    /// Output directory; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Residual tolerance for wavelet verification.
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    /// Heat times, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.1, 1.0, 10.0])]
    times: Vec<f64>,
}

/// Rendered outputs: file name and contents. The first one goes to stdout
/// when no output directory is given.
type Outputs = Vec<(&'static str, String)>;

fn load_model(c: &Common) -> Result<ManifoldModel, Error> {
    match (&c.builtin, &c.spec) {
        (Some(name), None) => {
            if !BUILTIN_NAMES.contains(&name.as_str()) {
                return Err(Error::Validation(format!(
                    "unknown builtin '{name}' (expected one of {})",
                    BUILTIN_NAMES.join(", ")
                )));
            }
            ManifoldModel::builtin(
                name,
                &BuiltinOptions {
                    p: c.p,
                    n: c.n,
                    depth: c.depth,
                    densities: None,
                },
            )
        }
        (None, Some(path)) => {
            let model = ManifoldModel::load_model(&read(path)?)?;
            if c.p.is_none() && c.n.is_none() && c.depth.is_none() {
                return Ok(model);
            }
            let mut doc = model.to_document();
            doc.p = c.p.unwrap_or(doc.p);
            doc.n = c.n.unwrap_or(doc.n);
            doc.depth = c.depth.unwrap_or(doc.depth);
            ManifoldModel::from_document(&doc)
        }
        _ => Err(Error::Validation(
            "exactly one of --builtin or --spec is required".into(),
        )),
    }
}

fn read(path: &Path) -> Result<String, Error> {
    fs::read_to_string(path).map_err(|e| Error::Validation(format!("cannot read '{}': {e}", path.display())))
}

fn check_alpha(alpha: f64) -> Result<(), Error> {
    if alpha.is_finite() && alpha > 0.0 {
        Ok(())
    } else {
        Err(Error::Validation(format!("--alpha must be positive, got {alpha}")))
    }
}

fn kernel(c: &Common) -> Result<KernelSpec, Error> {
    check_alpha(c.alpha)?;
    Ok(match c.kernel {
        KernelKind::Vt => KernelSpec::Vt { alpha: c.alpha },
        KernelKind::Knn => KernelSpec::Knn { alpha: c.alpha, k: c.k },
    })
}

fn domain(model: &ManifoldModel, selectors: &[String]) -> Result<Vec<usize>, Error> {
    if selectors.is_empty() {
        return Err(Error::Validation("--omega is required".into()));
    }
    let mut cells = Vec::new();
    for s in selectors {
        if let Some(list) = s.strip_prefix("cells:") {
            for item in list.split(',') {
                let c: usize = item
                    .trim()
                    .parse()
                    .map_err(|_| Error::Validation(format!("bad cell index '{item}'")))?;
                if c >= model.cell_count() {
                    return Err(Error::Validation(format!("cell {c} out of range")));
                }
                cells.push(c);
            }
        } else {
            let (root, addr) = model.parse_ball(s)?;
            cells.extend(ball_cells(model, root, &addr));
        }
    }
    cells.sort_unstable();
    cells.dedup();
    Ok(cells)
}

fn rhs(spec: &str, len: usize) -> Result<Vec<f64>, Error> {
    let number = |s: &str| {
        s.trim()
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| Error::Validation(format!("bad value '{s}' in --f")))
    };
    if let Some(c) = spec.strip_prefix("const:") {
        Ok(vec![number(c)?; len])
    } else if let Some(list) = spec.strip_prefix("values:") {
        let v = list.split(',').map(number).collect::<Result<Vec<_>, _>>()?;
        if v.len() != len {
            return Err(Error::Validation(format!(
                "--f has {} values but the domain has {len} cells",
                v.len()
            )));
        }
        Ok(v)
    } else {
        Err(Error::Validation(format!(
            "--f must be const:<c> or values:<list>, got '{spec}'"
        )))
    }
}

#[derive(Serialize)]
struct RootSummary {
    id: String,
    face: String,
    density: String,
    height: usize,
    cells: usize,
}

#[derive(Serialize)]
struct Inspection {
    p: u32,
    n: usize,
    depth: usize,
    dim_nerve: usize,
    faces: usize,
    cells: usize,
    total_measure: String,
    roots: Vec<RootSummary>,
}

fn inspect(m: &ManifoldModel) -> Inspection {
    let ctx = m.ctx();
    Inspection {
        p: ctx.p(),
        n: ctx.n(),
        depth: ctx.depth(),
        dim_nerve: m.dim_nerve(),
        faces: m.nerve().faces().len(),
        cells: m.cell_count(),
        total_measure: m.total_measure().to_string(),
        roots: m
            .roots()
            .iter()
            .enumerate()
            .map(|(i, r)| RootSummary {
                id: r.id.clone(),
                face: m.nerve().faces()[r.face].id.clone(),
                density: r.density.to_string(),
                height: m.root_height(i),
                cells: ctx.cells_per_root(),
            })
            .collect(),
    }
}

#[derive(Serialize)]
struct DirichletOutput<'a> {
    kernel: String,
    omega_cells: Vec<String>,
    closure_cells: Vec<String>,
    #[serde(flatten)]
    report: &'a SolutionReport,
}

#[derive(Serialize)]
struct EllipticOutput<'a> {
    kernel: String,
    omega_cells: Vec<String>,
    closure_cells: Vec<String>,
    energy: EnergyConstants,
    #[serde(flatten)]
    report: &'a SolutionReport,
}

fn labels(m: &ManifoldModel, cells: &[usize]) -> Vec<String> {
    cells.iter().map(|&c| m.cell_label(c)).collect()
}

fn run(command: Command) -> Result<Outputs, Error> {
    match command {
        Command::Inspect(c) => {
            let m = load_model(&c)?;
            Ok(vec![("inspect.json", to_json(&inspect(&m)))])
        }
        Command::Distance(c) => {
            let m = load_model(&c)?;
            Ok(vec![("distances.csv", distance_csv(&m))])
        }
        Command::Assemble(c) => {
            let m = load_model(&c)?;
            let op = assemble(&m, &kernel(&c)?);
            Ok(vec![("operator.csv", matrix_csv(&m, &op))])
        }
        Command::Spectrum(c) => {
            let m = load_model(&c)?;
            let report = spectrum(&assemble(&m, &kernel(&c)?))?;
            Ok(vec![("spectrum.csv", spectrum_csv(&report))])
        }
        Command::Wavelets {
            action: WaveletAction::Verify(c),
        } => {
            let m = load_model(&c)?;
            let k = kernel(&c)?;
            let rows = verify_wavelets(&m, &k)?;
            let worst = rows.iter().fold(0.0f64, |w, r| w.max(r.residual));
            if !(worst <= c.tol) {
                return Err(Error::ToleranceExceeded {
                    what: "largest wavelet residual".into(),
                    value: worst,
                    tol: c.tol,
                });
            }
            Ok(vec![("wavelets.csv", wavelet_csv(&rows))])
        }
        Command::Heat(c) => {
            let m = load_model(&c)?;
            if c.times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
                return Err(Error::Validation("--times must be nonnegative".into()));
            }
            let report = markov_report(&assemble(&m, &kernel(&c)?), &c.times, c.seed)?;
            Ok(vec![("heat.json", to_json(&report))])
        }
        Command::Dirichlet(c) => {
            let m = load_model(&c)?;
            check_alpha(c.alpha)?;
            let omega = domain(&m, &c.omega)?;
            let f = rhs(&c.f, omega.len())?;
            let kernel = KernelSpec::Knn { alpha: c.alpha, k: c.k };
            let problem = DirichletProblem {
                model: &m,
                kernel: kernel.clone(),
                omega,
                f,
                seed: c.seed,
            };
            let report = solve_dirichlet(&problem)?;
            let out = DirichletOutput {
                kernel: kernel.label(),
                omega_cells: labels(&m, &report.omega),
                closure_cells: labels(&m, &report.closure),
                report: &report,
            };
            Ok(vec![
                ("report.json", to_json(&out)),
                ("solution.csv", vector_csv(&m, &report.closure, &report.u)),
            ])
        }
        Command::Elliptic(c) => {
            let m = load_model(&c)?;
            check_alpha(c.alpha)?;
            let frame = match &c.frame {
                Some(path) => FrameField::load(&m, &read(path)?)?,
                None => FrameField::identity(&m),
            };
            let coeffs = match &c.coeffs {
                Some(path) => EllipticCoefficients::load(&m, &read(path)?)?,
                None => EllipticCoefficients::identity(&m),
            };
            let omega = domain(&m, &c.omega)?;
            let f = rhs(&c.f, omega.len())?;
            let kernel = KernelSpec::Knn { alpha: c.alpha, k: c.k };
            let report = solve_elliptic_dirichlet(&m, &frame, &coeffs, &kernel, &omega, &f, c.seed)?;
            let energy = energy_constants(&m, &frame, &coeffs, &kernel, &omega, c.seed)?;
            let out = EllipticOutput {
                kernel: kernel.label(),
                omega_cells: labels(&m, &report.omega),
                closure_cells: labels(&m, &report.closure),
                energy,
                report: &report,
            };
            Ok(vec![
                ("report.json", to_json(&out)),
                ("solution.csv", vector_csv(&m, &report.closure, &report.u)),
            ])
        }
    }
}

fn out_dir(command: &Command) -> Option<&Path> {
    let c = match command {
        Command::Inspect(c)
        | Command::Distance(c)
        | Command::Assemble(c)
        | Command::Spectrum(c)
        | Command::Heat(c)
        | Command::Dirichlet(c)
        | Command::Elliptic(c) => c,
        Command::Wavelets {
            action: WaveletAction::Verify(c),
        } => c,
    };
    c.out.as_deref()
}

fn emit(dir: Option<&Path>, outputs: Outputs) -> Result<(), Error> {
    match dir {
        None => {
            if let Some((_, text)) = outputs.first() {
                print!("{text}");
            }
            Ok(())
        }
        Some(dir) => {
            fs::create_dir_all(dir)?;
            for (name, text) in outputs {
                write_atomic(&dir.join(name), text.as_bytes())?;
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let dir = out_dir(&cli.command).map(Path::to_path_buf);
    let result = run(cli.command).and_then(|outputs| emit(dir.as_deref(), outputs));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 2 } else { 1 })
        }
    }
}
