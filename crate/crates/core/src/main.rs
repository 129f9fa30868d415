//! Command-line harness: convergence sweeps, single solves, search-radius
//! calibration, point-cloud generation, and cloud validation.

use clap::{ArgAction, Args, Parser, Subcommand};
use meshfree_elliptic::calibrate::{calibrate_c, searching_delta, CalibrationTable};
use meshfree_elliptic::experiments::{
    domain_dim, make_domain2, make_domain3, run_convergence, solve_once, ExperimentConfig,
    ALPHA_DEFAULT, SOLVER_TOL_DEFAULT,
};
use meshfree_elliptic::fields::{
    builtin_matrix2, builtin_matrix3, builtin_solution2, builtin_solution3,
};
use meshfree_elliptic::io::{
    dump_stencils, parse_calibration, parse_cloud, raw_to_cloud, write_calibration, write_cloud,
    write_matrix_market,
};
use meshfree_elliptic::pointcloud::{generate_cloud, validate_proper, ProperConstants};
use meshfree_elliptic::simplex::{FEAS_TOL, LP_TOL};
use meshfree_elliptic::solver::dmp_check;
use std::fs;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "meshfree-elliptic",
    about = "Monotone meshfree finite-difference solver for elliptic equations in non-divergence form",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one manufactured problem at a single fill distance
    Solve(SolveArgs),
    /// Run a convergence sweep over a list of fill distances
    Converge(ConvergeArgs),
    /// Compute the search-radius band constants for a dimension
    Calibrate(CalibrateArgs),
    /// Generate a proper point cloud and write it to a file
    Cloud(CloudArgs),
    /// Validate a point-cloud file against the quasi-uniformity conditions
    Check(CheckArgs),
}

#[derive(Args)]
struct ProblemArgs {
    /// Domain: disk2, lshape2, box2, sphere3, lshape3, box3
    #[arg(long)]
    domain: String,
    /// Space dimension (inferred from the domain when omitted)
    #[arg(long)]
    dim: Option<usize>,
    /// Coefficient family index, 0..=9
    #[arg(long, default_value_t = 0)]
    matrix: usize,
    /// Manufactured solution: u1, u2, u3 (u3 is 2d only)
    #[arg(long, default_value = "u1")]
    solution: String,
    /// Kernel decay exponent
    #[arg(long, default_value_t = ALPHA_DEFAULT)]
    alpha: f64,
    /// Use the band-reduced search radius (retries at full radius on
    /// infeasibility); pass `--reduced-c false` to always use the full one
    #[arg(long, default_value_t = true, action = ArgAction::Set)]
    reduced_c: bool,
    /// LP residual tolerance
    #[arg(long, default_value_t = LP_TOL)]
    lp_tol: f64,
    /// Linear-solver relative residual tolerance
    #[arg(long, default_value_t = SOLVER_TOL_DEFAULT)]
    solver_tol: f64,
    /// Stream selector recorded with the run (generation is deterministic)
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Calibration table file overriding the built-in band constants
    #[arg(long)]
    calibration: Option<String>,
}

impl ProblemArgs {
    fn to_config(&self, h_list: Vec<f64>) -> Result<ExperimentConfig, String> {
        let mut cfg = ExperimentConfig::new(&self.domain, self.matrix, &self.solution, h_list);
        if let Some(d) = self.dim {
            cfg.dim = d;
        }
        cfg.alpha = self.alpha;
        cfg.reduced_c = self.reduced_c;
        cfg.lp_tol = self.lp_tol;
        cfg.feas_tol = FEAS_TOL;
        cfg.solver_tol = self.solver_tol;
        cfg.seed = self.seed;
        if let Some(path) = &self.calibration {
            let text = fs::read_to_string(path).map_err(|e| format!("{path}: {e}"))?;
            cfg.calibration = Some(parse_calibration(&text).map_err(|e| format!("{path}: {e}"))?);
        }
        cfg.validate().map_err(|e| e.to_string())?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    /// Target fill distance
    #[arg(long)]
    h: f64,
    /// Write the stencil table to this file
    #[arg(long)]
    dump_stencils: Option<String>,
    /// Write the assembled matrix in Matrix Market format to this file
    #[arg(long)]
    dump_matrix: Option<String>,
    /// Verify the discrete maximum principle on a g-harmonic companion
    /// solve (f ≡ 0, g = x₁)
    #[arg(long, default_value_t = false)]
    check_dmp: bool,
}

#[derive(Args)]
struct ConvergeArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    /// Comma-separated target fill distances
    #[arg(long, value_delimiter = ',', required = true)]
    h: Vec<f64>,
    /// Output CSV path (stdout when omitted)
    #[arg(long)]
    out: Option<String>,
}

#[derive(Args)]
struct CalibrateArgs {
    /// Space dimension, 2 or 3
    #[arg(long)]
    dim: usize,
    /// Nodes of the per-band ellipticity-ratio grid
    #[arg(long, default_value_t = 50)]
    grid: usize,
    /// Write the table (reusable as a --calibration file) to this path
    #[arg(long)]
    out: Option<String>,
}

#[derive(Args)]
struct CloudArgs {
    /// Domain: disk2, lshape2, box2, sphere3, lshape3, box3
    #[arg(long)]
    domain: String,
    /// Target fill distance
    #[arg(long)]
    h: f64,
    /// Collar width; defaults to the full search radius at ratio 1
    #[arg(long)]
    delta: Option<f64>,
    /// Output path (stdout when omitted)
    #[arg(long)]
    out: Option<String>,
}

#[derive(Args)]
struct CheckArgs {
    /// Cloud file produced by the `cloud` subcommand
    #[arg(long)]
    input: String,
    /// Domain the cloud was generated for
    #[arg(long)]
    domain: String,
    /// Collar width used at generation time; defaults as in `cloud`
    #[arg(long)]
    delta: Option<f64>,
}

fn emit(out: &Option<String>, text: &str) -> Result<(), String> {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| format!("{path}: {e}")),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn default_delta(dim: usize, h: f64) -> f64 {
    searching_delta(h, 1.0, &CalibrationTable::defaults(dim), false)
}

fn cmd_solve(args: &SolveArgs) -> Result<(), String> {
    let cfg = args.problem.to_config(vec![args.h])?;
    macro_rules! run_dim {
        ($make:ident, $mat:ident, $sol:ident) => {{
            let dom = $make(&cfg.domain).map_err(|e| e.to_string())?;
            let field = $mat(cfg.matrix_id).map_err(|e| e.to_string())?;
            let case = $sol(&cfg.solution).map_err(|e| e.to_string())?;
            let art = solve_once(&dom, &field, &case, args.h, &cfg).map_err(|e| e.to_string())?;
            let r = &art.row;
            println!(
                "h={:.6e} delta={:.6e} N={} max_error={:.6e} avg_stencil={:.4} max_t3={:.6e} lp_retries={} solver_iters={}",
                r.h, r.delta, r.n, r.max_error, r.avg_stencil, r.max_t3, r.lp_retries,
                r.solver_iters
            );
            if let Some(path) = &args.dump_stencils {
                fs::write(path, dump_stencils(&art.stencils)).map_err(|e| format!("{path}: {e}"))?;
            }
            if let Some(path) = &args.dump_matrix {
                fs::write(path, write_matrix_market(&art.system.matrix))
                    .map_err(|e| format!("{path}: {e}"))?;
            }
            if args.check_dmp {
                // companion solve: f ≡ 0, g = x₁, same stencils
                let interior = &art.cloud.points[..art.cloud.n_interior];
                fn first_coord<const D: usize>(x: &meshfree_elliptic::geometry::Point<D>) -> f64 {
                    x[0]
                }
                let g = first_coord;
                let sys = meshfree_elliptic::solver::assemble(
                    interior,
                    &art.stencils,
                    &|_| 0.0,
                    &g,
                )
                .map_err(|e| e.to_string())?;
                let (rows, stats) = meshfree_elliptic::solver::bicgstab(
                    &sys.matrix,
                    &sys.rhs,
                    cfg.solver_tol,
                    20 * sys.matrix.n.max(1),
                    true,
                )
                .map_err(|e| e.to_string())?;
                if !stats.converged {
                    return Err(format!(
                        "maximum-principle companion solve stalled at residual {:.3e}",
                        stats.final_residual
                    ));
                }
                let sol = meshfree_elliptic::solver::unpermute(&rows, &sys.permutation);
                let report = dmp_check(&art.stencils, &sol, &g, 1e-8);
                println!(
                    "dmp={} worst_violation={:.6e}",
                    if report.ok { "ok" } else { "VIOLATED" },
                    report.worst_violation
                );
                if !report.ok {
                    return Err("discrete maximum principle violated".into());
                }
            }
            Ok(())
        }};
    }
    match cfg.dim {
        2 => run_dim!(make_domain2, builtin_matrix2, builtin_solution2),
        3 => run_dim!(make_domain3, builtin_matrix3, builtin_solution3),
        d => Err(format!("unsupported dimension {d}")),
    }
}

fn cmd_converge(args: &ConvergeArgs) -> Result<(), String> {
    let cfg = args.problem.to_config(args.h.clone())?;
    let report = run_convergence(&cfg).map_err(|e| e.to_string())?;
    emit(&args.out, &report.to_csv())?;
    if args.out.is_some() {
        match report.slope {
            Some(s) => println!("slope={s:.4}"),
            None => println!("slope=nan"),
        }
    }
    let failed = report.rows.iter().filter(|r| r.failure.is_some()).count();
    if failed > 0 {
        return Err(format!("{failed} of {} rows failed", report.rows.len()));
    }
    Ok(())
}

fn cmd_calibrate(args: &CalibrateArgs) -> Result<(), String> {
    if !(args.dim == 2 || args.dim == 3) {
        return Err(format!("unsupported dimension {}", args.dim));
    }
    let edges: Vec<(f64, f64)> = CalibrationTable::defaults(args.dim)
        .bands
        .iter()
        .map(|b| (b.lo, b.hi))
        .collect();
    let table = calibrate_c(args.dim, &edges, args.grid);
    emit(&args.out, &write_calibration(&table))
}

fn cmd_cloud(args: &CloudArgs) -> Result<(), String> {
    let dim = domain_dim(&args.domain).ok_or_else(|| format!("unknown domain {}", args.domain))?;
    let delta = args.delta.unwrap_or_else(|| default_delta(dim, args.h));
    // `check` needs the same collar width to reproduce the fill-distance
    // bound; report it so it can be passed back via --delta
    eprintln!("delta={delta:.17e}");
    let consts = ProperConstants::default();
    let text = match dim {
        2 => {
            let dom = make_domain2(&args.domain).map_err(|e| e.to_string())?;
            let cloud =
                generate_cloud(&dom, args.h, delta, &consts, 60).map_err(|e| e.to_string())?;
            write_cloud(&cloud)
        }
        _ => {
            let dom = make_domain3(&args.domain).map_err(|e| e.to_string())?;
            let cloud =
                generate_cloud(&dom, args.h, delta, &consts, 60).map_err(|e| e.to_string())?;
            write_cloud(&cloud)
        }
    };
    emit(&args.out, &text)
}

fn cmd_check(args: &CheckArgs) -> Result<(), String> {
    let dim = domain_dim(&args.domain).ok_or_else(|| format!("unknown domain {}", args.domain))?;
    let text = fs::read_to_string(&args.input).map_err(|e| format!("{}: {e}", args.input))?;
    let raw = parse_cloud(&text).map_err(|e| e.to_string())?;
    let consts = ProperConstants::default();
    let report = match dim {
        2 => {
            let dom = make_domain2(&args.domain).map_err(|e| e.to_string())?;
            let cloud = raw_to_cloud::<2>(&raw, &dom).map_err(|e| e.to_string())?;
            let delta = args.delta.unwrap_or_else(|| default_delta(2, cloud.h));
            validate_proper(&cloud, &dom, delta, &consts)
        }
        _ => {
            let dom = make_domain3(&args.domain).map_err(|e| e.to_string())?;
            let cloud = raw_to_cloud::<3>(&raw, &dom).map_err(|e| e.to_string())?;
            let delta = args.delta.unwrap_or_else(|| default_delta(3, cloud.h));
            validate_proper(&cloud, &dom, delta, &consts)
        }
    };
    println!(
        "h={:.6e} zeta={:.6e} kappa={:.6e}",
        report.h, report.zeta, report.kappa
    );
    if report.ok {
        println!("proper=ok");
        Ok(())
    } else {
        for v in &report.violated {
            eprintln!("violation: {v}");
        }
        Err("cloud is not proper".into())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Solve(a) => cmd_solve(a),
        Command::Converge(a) => cmd_converge(a),
        Command::Calibrate(a) => cmd_calibrate(a),
        Command::Cloud(a) => cmd_cloud(a),
        Command::Check(a) => cmd_check(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
