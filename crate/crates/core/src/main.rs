use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use stokes_afem::adaptivity::{
    extrapolate_reference, fit_rate, run_campaign_with, AdaptivityError, EstimatorKind, RefineMode,
};
use stokes_afem::assembly::Scheme;
use stokes_afem::estimators::{postprocess_velocity, IndicatorField, IndicatorKind, SpectralSolution};
use stokes_afem::io::{
    export_mesh, parse_config, read_csv_table, write_mesh_text, write_vtk, ConfigOverrides, CsvWriter, VtkField,
};
use stokes_afem::mesh::{generate_domain, Domain, Mesh};
use stokes_afem::verify;

#[derive(Parser)]
#[command(name = "stokes-afem", version, about = "Adaptive mixed FEM for the Stokes eigenvalue problem")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a solve-estimate-mark-refine campaign.
    Run(RunArgs),
    /// Fit convergence rates to a CSV table written by `run`.
    Rates {
        csv: PathBuf,
        /// Number of trailing rows used for the fit.
        #[arg(long, default_value_t = 8)]
        window: usize,
        /// First row of the effectivity band (by `iter`).
        #[arg(long, default_value_t = 3)]
        band_from: usize,
    },
    /// Write an initial (optionally refined) mesh as .msh, .vtk or plain text.
    ExportMesh {
        #[arg(long, default_value = "tshape")]
        domain: Domain,
        #[arg(long, default_value_t = 6)]
        n0: usize,
        /// Number of red refinements applied after generation.
        #[arg(long, default_value_t = 0)]
        refine: usize,
        /// Output file; the extension selects the format (.msh, .vtk, anything else: text).
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the assembly, interpolation and estimator oracle suites.
    Selftest,
    /// Richardson extrapolation of the lowest eigenvalue over structured meshes.
    Extrapolate {
        #[arg(long, default_value = "square")]
        domain: Domain,
        #[arg(long, default_value = "full")]
        scheme: Scheme,
        #[arg(long, default_value_t = 0.5)]
        mu: f64,
        /// Comma-separated subdivision counts, coarse to fine.
        #[arg(long, value_delimiter = ',', required = true)]
        n0: Vec<usize>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// JSON config; flags given on the command line override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    domain: Option<Domain>,
    #[arg(long)]
    scheme: Option<Scheme>,
    #[arg(long)]
    refine: Option<RefineMode>,
    #[arg(long)]
    estimator: Option<EstimatorKind>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    n0: Option<usize>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    dof_cap: Option<usize>,
    #[arg(long)]
    fraction: Option<f64>,
    #[arg(long)]
    shift: Option<f64>,
    #[arg(long)]
    nev: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    lambda_ref: Option<f64>,
    /// Output directory for convergence.csv, solution.vtk and manifest.json.
    #[arg(long)]
    out: Option<String>,
}

impl RunArgs {
    fn overrides(&self) -> ConfigOverrides {
        ConfigOverrides {
            domain: self.domain,
            scheme: self.scheme,
            refine: self.refine,
            estimator: self.estimator,
            mu: self.mu,
            n0: self.n0,
            max_iter: self.max_iter,
            dof_cap: self.dof_cap,
            fraction: self.fraction,
            shift: self.shift,
            nev: self.nev,
            tol: self.tol,
            seed: self.seed,
            lambda_ref: self.lambda_ref,
            out: self.out.clone(),
        }
    }
}

fn configure_threads() -> Result<usize> {
    let n = match std::env::var("STOKES_AFEM_THREADS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .with_context(|| format!("STOKES_AFEM_THREADS must be a positive integer, got `{v}`"))?
            .max(1),
        Err(_) => 1,
    };
    faer::set_global_parallelism(if n == 1 { faer::Par::Seq } else { faer::Par::rayon(n) });
    Ok(n)
}

fn solution_vtk(mesh: &Mesh, sol: &SpectralSolution, ind: &IndicatorField, path: &Path) -> Result<()> {
    let geometry = mesh.geometry()?;
    let theta_u = postprocess_velocity(mesh, &geometry, &sol.velocity);
    let mut cells = vec![VtkField::vector("u_h", sol.velocity.clone())];
    if let Some(p) = &sol.pressure {
        cells.push(VtkField::scalar("p_h", p.clone()));
    }
    let name = match ind.kind {
        IndicatorKind::Theta => "theta_T_sq",
        IndicatorKind::Eta => "eta_T_sq",
    };
    cells.push(VtkField::scalar(name, ind.local.clone()));
    write_vtk(mesh, &cells, &[VtkField::vector("theta_u_h", theta_u.vertex_values)], path)?;
    Ok(())
}

fn run(args: RunArgs, threads: usize) -> Result<()> {
    let config = parse_config(args.config.as_deref(), &args.overrides())?;
    let out_dir = PathBuf::from(config.out.clone().unwrap_or_else(|| "out".into()));
    fs::create_dir_all(&out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let csv_path = out_dir.join("convergence.csv");
    if csv_path.exists() {
        fs::remove_file(&csv_path).with_context(|| format!("removing stale {}", csv_path.display()))?;
    }
    let mut csv = CsvWriter::new(&csv_path);
    let mut last: Option<(Mesh, SpectralSolution, IndicatorField)> = None;

    println!(
        "{:>4} {:>9} {:>14} {:>12} {:>12} {:>12} {:>9} {:>8}",
        "iter", "N", "lambda_h1", "err", "est^2", "eff", "elements", "seconds"
    );
    let result = run_campaign_with(&config, |state| {
        let r = state.record;
        println!(
            "{:>4} {:>9} {:>14.8} {:>12.5e} {:>12.5e} {:>12.5e} {:>9} {:>8.2}",
            r.iter, r.n_dofs, r.lambda_h1, r.err, r.estimator_sq, r.effectivity, r.elements, r.seconds
        );
        csv.append(r).map_err(|e| AdaptivityError::Observer(Box::new(e)))?;
        last = Some((state.mesh.clone(), state.solution.clone(), state.indicators.clone()));
        Ok(())
    });
    let (table, failure) = match result {
        Ok(t) => (t, None),
        Err(e) => (e.partial.clone(), Some(e)),
    };

    if let Some((mesh, sol, ind)) = &last {
        solution_vtk(mesh, sol, ind, &out_dir.join("solution.vtk"))?;
    }
    let rate = fit_rate(&table, 8).ok();
    let manifest = json!({
        "program": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "config": config,
        "lambda_ref": config.reference(),
        "threads": threads,
        "rows": table.len(),
        "final_lambda_h1": table.last().map(|r| r.lambda_h1),
        "rate_last_8": rate,
        "total_seconds": table.records.iter().map(|r| r.seconds).sum::<f64>(),
        "refinement": match config.refine {
            RefineMode::Uniform => "red refinement of every element",
            RefineMode::UniformBisect => "newest-vertex bisection of every element",
            RefineMode::Adaptive => "newest-vertex bisection of marked elements with conforming closure",
        },
        "error": failure.as_ref().map(|e| e.to_string()),
    });
    fs::write(out_dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)? + "\n")
        .context("writing manifest.json")?;
    if let Some(r) = rate {
        println!("fitted rate (last {} rows): {r:.3}", table.len().min(8));
    }
    println!("wrote {}", out_dir.display());
    if let Some(e) = failure {
        return Err(e.into());
    }
    Ok(())
}

fn rates(csv: &Path, window: usize, band_from: usize) -> Result<()> {
    let table = read_csv_table(csv)?;
    if table.is_empty() {
        bail!("{} has no rows", csv.display());
    }
    let slope = fit_rate(&table, window)?;
    println!("rows: {}", table.len());
    println!("slope of log err vs log N (last {}): {slope:.4}", window.min(table.len()));
    let eff: Vec<f64> = table
        .records
        .iter()
        .filter(|r| r.iter >= band_from && r.effectivity.is_finite() && r.effectivity > 0.0)
        .map(|r| r.effectivity)
        .collect();
    if !eff.is_empty() {
        let lo = eff.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = eff.iter().copied().fold(0.0, f64::max);
        println!("effectivity from iter {band_from}: [{lo:.4e}, {hi:.4e}], max/min {:.3}", hi / lo);
    }
    Ok(())
}

fn export(domain: Domain, n0: usize, refine: usize, out: &Path) -> Result<()> {
    let mut mesh = generate_domain(domain, n0)?;
    for _ in 0..refine {
        mesh = mesh.uniform_refine();
    }
    match out.extension().and_then(|e| e.to_str()) {
        Some("msh") => export_mesh(&mesh, out)?,
        Some("vtk") => write_vtk(&mesh, &[], &[], out)?,
        _ => write_mesh_text(&mesh, out)?,
    }
    println!(
        "{}: {} vertices, {} triangles, {} edges",
        out.display(),
        mesh.n_vertices(),
        mesh.n_triangles(),
        mesh.n_edges()
    );
    Ok(())
}

fn selftest() -> bool {
    let reports = verify::run_all();
    let mut ok = true;
    for r in &reports {
        println!(
            "{} {:<60} max error {:.3e} (tol {:.0e})",
            if r.passed { "PASS" } else { "FAIL" },
            r.name,
            r.max_error,
            r.tolerance
        );
        ok &= r.passed;
    }
    println!("{} of {} oracle checks passed", reports.iter().filter(|r| r.passed).count(), reports.len());
    ok
}

fn main() -> Result<ExitCode> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let threads = configure_threads()?;
    match cli.command {
        Command::Run(args) => run(args, threads)?,
        Command::Rates { csv, window, band_from } => rates(&csv, window, band_from)?,
        Command::ExportMesh { domain, n0, refine, out } => export(domain, n0, refine, &out)?,
        Command::Selftest => {
            if !selftest() {
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::Extrapolate { domain, scheme, mu, n0 } => {
            let (points, fit) = extrapolate_reference(domain, scheme, mu, &n0)?;
            for (n, l) in &points {
                println!("N = {n:>9}  lambda_h1 = {l:.10}");
            }
            println!(
                "lambda = {:.8}  rate = {:.4}  c = {:.4e}  rms residual = {:.2e}",
                fit.lambda, fit.rate, fit.c, fit.residual
            );
        }
    }
    Ok(ExitCode::SUCCESS)
}
