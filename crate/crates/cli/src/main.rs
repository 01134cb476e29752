//! Command-line driver: validation, walk statistics, pressure curves and
//! spectra, boundary diagnostics, finitary experiments, and the end-to-end
//! pipeline. Every command reads a config file; flags override single keys.

mod config;
mod output;
mod pipeline;

use clap::{Args, Parser, Subcommand};

use config::ExperimentConfig;
use output::OutputDir;
use pipeline::Session;

#[derive(Parser)]
#[command(
    name = "greenwalk",
    version,
    about = "Random-walk Green functions, pressure curves and boundary spectra on hyperbolic groups"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone)]
struct Common {
    /// Experiment config file (key = value lines).
    #[arg(long)]
    config: String,
    /// Override the output directory.
    #[arg(long)]
    out: Option<String>,
    /// Override the master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the theta grid (lo:hi:step).
    #[arg(long)]
    grid: Option<String>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Automaton structure checks.
    Automaton {
        #[command(subcommand)]
        cmd: AutomatonCmd,
    },
    /// Walk estimators.
    Walk {
        #[command(subcommand)]
        cmd: WalkCmd,
    },
    /// Pressure curves and spectra.
    Thermo {
        #[command(subcommand)]
        cmd: ThermoCmd,
    },
    /// Boundary-measure diagnostics.
    Boundary {
        #[command(subcommand)]
        cmd: BoundaryCmd,
    },
    /// Finitary experiments.
    Experiment {
        #[command(subcommand)]
        cmd: ExperimentCmd,
    },
    /// Aggregated reports.
    Report {
        #[command(subcommand)]
        cmd: ReportCmd,
    },
    /// End-to-end runs.
    Pipeline {
        #[command(subcommand)]
        cmd: PipelineCmd,
    },
}

#[derive(Subcommand)]
enum AutomatonCmd {
    /// Check path-to-sphere bijectivity and geodesy up to a depth.
    Validate {
        #[command(flatten)]
        common: Common,
        /// Validation depth.
        #[arg(long, default_value_t = 8)]
        depth: usize,
    },
}

#[derive(Subcommand)]
enum WalkCmd {
    /// Drift, entropy and the fundamental-inequality verdict.
    Stats {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Subcommand)]
enum ThermoCmd {
    /// Pressure curve beta(theta) over the grid.
    Beta {
        #[command(flatten)]
        common: Common,
    },
    /// Legendre spectrum (theta, alpha, f).
    Spectrum {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Subcommand)]
enum BoundaryCmd {
    /// Gibbs-property log-ratio spreads on shadows.
    Gibbs {
        #[command(flatten)]
        common: Common,
    },
    /// Local-dimension sampling along rays.
    Localdim {
        #[command(flatten)]
        common: Common,
    },
    /// Stationarity residuals (with negative controls).
    Stationarity {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Subcommand)]
enum ExperimentCmd {
    /// Annulus hitting statistics and covering counts.
    Hitting {
        #[command(flatten)]
        common: Common,
    },
    /// Confinement-set growth.
    Confine {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Subcommand)]
enum ReportCmd {
    /// Entropy/drift/growth aggregation and the equality-case verdict.
    Fundamental {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Subcommand)]
enum PipelineCmd {
    /// Run every stage and write the manifest.
    Run {
        #[command(flatten)]
        common: Common,
    },
}

fn load(common: &Common) -> Result<ExperimentConfig, greenwalk_core::Error> {
    let mut cfg = ExperimentConfig::load(&common.config)?;
    if let Some(out) = &common.out {
        cfg.output_dir = out.clone();
    }
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(grid) = &common.grid {
        cfg.grid = greenwalk_core::thermo::GridSpec::parse(grid)?;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), greenwalk_core::Error> {
    match cli.cmd {
        Cmd::Automaton { cmd: AutomatonCmd::Validate { common, depth } } => {
            let cfg = load(&common)?;
            let mut out = OutputDir::new(&cfg.output_dir)?;
            let s = Session::open(cfg)?;
            let rep = pipeline::stage_validate(&s, depth, &mut out)?;
            println!("automaton validation to depth {depth}: {}", verdict(rep.pass));
            for (n, (p, q)) in rep.path_counts.iter().zip(rep.sphere_counts.iter()).enumerate() {
                println!("  n = {n:>2}  paths {p:>10}  sphere {q:>10}");
            }
            if let Some(w) = &rep.first_missing {
                println!("  first missing word: {w}");
            }
            println!("  growth v = {:.12}", rep.volume_growth);
            println!(
                "  components: {} ({} non-trivial, periods {:?})",
                rep.components, rep.nontrivial_components, rep.periods
            );
            ok_or_fail(rep.pass)
        }
        Cmd::Walk { cmd: WalkCmd::Stats { common } } => {
            let cfg = load(&common)?;
            let mut out = OutputDir::new(&cfg.output_dir)?;
            let s = Session::open(cfg)?;
            let rep = pipeline::stage_walk(&s, &mut out)?;
            println!("walk statistics ({} steps x {} replicas)", s.cfg.steps, s.cfg.replicas);
            println!("  drift   l = {:.6} +- {:.6}", rep.drift.value, rep.drift.std_error);
            println!("  entropy h = {:.6} +- {:.6}", rep.entropy.value, rep.entropy.std_error);
            println!("  growth  v = {:.6}", rep.volume_growth);
            println!(
                "  gap h - l v = {:.6} +- {:.6}  ->  {}",
                rep.gap.value, rep.gap.std_error, rep.verdict
            );
            println!("  ray-tracking defect = {:.4}", rep.ray_defect);
            Ok(())
        }
        Cmd::Thermo { cmd } => {
            let (common, spectrum_mode) = match cmd {
                ThermoCmd::Beta { common } => (common, false),
                ThermoCmd::Spectrum { common } => (common, true),
            };
            let cfg = load(&common)?;
            let mut out = OutputDir::new(&cfg.output_dir)?;
            let s = Session::open(cfg)?;
            let (curve, spectrum, summary) = pipeline::stage_thermo(&s, &mut out)?;
            if spectrum_mode {
                println!(
                    "spectrum: alpha in [{:.6}, {:.6}] (grid-edge extrapolation), max f = {:.6}",
                    summary.alpha_min, summary.alpha_max, summary.max_f
                );
            } else {
                println!(
                    "pressure curve on {} points: beta(0) = {:.9}, |beta(1)| = {:.3e}",
                    curve.thetas.len(),
                    summary.beta_zero,
                    summary.beta_one_residual
                );
                println!(
                    "  convexity: min/max second difference {:.3e} / {:.3e}",
                    summary.min_second_difference, summary.max_second_difference
                );
                if !summary.kink_candidates.is_empty() {
                    println!("  kink candidates at theta = {:?}", summary.kink_candidates);
                }
            }
            let _ = spectrum;
            for rep in &summary.semisimplicity {
                println!(
                    "  semisimplicity at theta {:>5}: {}",
                    rep.theta,
                    verdict(rep.pass)
                );
            }
            Ok(())
        }
        Cmd::Boundary { cmd } => match cmd {
            BoundaryCmd::Gibbs { common } => {
                let cfg = load(&common)?;
                let mut out = OutputDir::new(&cfg.output_dir)?;
                let s = Session::open(cfg)?;
                let rep = pipeline::stage_boundary_gibbs(&s, &mut out)?;
                println!(
                    "gibbs ratios over {} apexes (R = {}):",
                    rep.harmonic.apex_count, rep.radius
                );
                println!("  harmonic: spread {:.6}", rep.harmonic.spread);
                for t in &rep.theta_family {
                    println!("  theta = {}: spread {:.6}", t.theta, t.spread);
                }
                Ok(())
            }
            BoundaryCmd::Localdim { common } => {
                let cfg = load(&common)?;
                let mut out = OutputDir::new(&cfg.output_dir)?;
                let s = Session::open(cfg)?;
                let rep = pipeline::stage_boundary_localdim(&s, &mut out)?;
                println!(
                    "local dimension: mean final {:.6} vs h/l {:.6} (gap {:.2}%)",
                    rep.mean_final,
                    rep.reference_h_over_l,
                    100.0 * rep.relative_gap
                );
                Ok(())
            }
            BoundaryCmd::Stationarity { common } => {
                let cfg = load(&common)?;
                let mut out = OutputDir::new(&cfg.output_dir)?;
                let s = Session::open(cfg)?;
                let rep = pipeline::stage_boundary_stationarity(&s, &mut out)?;
                println!("stationarity residuals at depth {}:", rep.exact.depth);
                println!("  exact harmonic:   {:.3e}", rep.exact.max_residual);
                println!(
                    "  counting control: {:.3e}",
                    rep.counting_negative_control.max_residual
                );
                println!(
                    "  point-mass control: {:.3e}",
                    rep.point_mass_negative_control.max_residual
                );
                Ok(())
            }
        },
        Cmd::Experiment { cmd } => match cmd {
            ExperimentCmd::Hitting { common } => {
                let cfg = load(&common)?;
                let mut out = OutputDir::new(&cfg.output_dir)?;
                let s = Session::open(cfg)?;
                let rep = pipeline::stage_hitting(&s, &mut out)?;
                println!(
                    "hitting at n = {} ({} walks, {} excluded, {} distinct points)",
                    rep.n, rep.walks, rep.excluded, rep.distinct_points
                );
                for (a, k, stat) in &rep.covering {
                    println!(
                        "  a = {a:<5} K = {k:>8}  (1/n) log K = {stat:.4}  (h/l = {:.4})",
                        rep.reference_h_over_l
                    );
                }
                Ok(())
            }
            ExperimentCmd::Confine { common } => {
                let cfg = load(&common)?;
                let mut out = OutputDir::new(&cfg.output_dir)?;
                let s = Session::open(cfg)?;
                let rep = pipeline::stage_confine(&s, &mut out)?;
                println!(
                    "confinement at a = {}: calibrated c = {} (coverage {:.3})",
                    rep.report.a, rep.report.c, rep.report.coverage
                );
                println!(
                    "  exponent {:.4} vs h/l {:.4} and v {:.4}",
                    rep.report.exponent, rep.report.hhat, rep.report.volume_growth
                );
                Ok(())
            }
        },
        Cmd::Report { cmd: ReportCmd::Fundamental { common } } => {
            let cfg = load(&common)?;
            let mut out = OutputDir::new(&cfg.output_dir)?;
            let s = Session::open(cfg)?;
            let rep = pipeline::stage_fundamental(&s, &mut out)?;
            println!("fundamental-inequality report");
            println!("  v = {:.6}", rep.volume_growth);
            println!("  l = {:.6} +- {:.6}", rep.drift.value, rep.drift.std_error);
            println!("  h = {:.6} +- {:.6}", rep.entropy.value, rep.entropy.std_error);
            println!("  h - l v = {:.6} +- {:.6}", rep.gap.value, rep.gap.std_error);
            println!("  beta affinity (max second difference on [0,1]) = {:.3e}", rep.beta_affinity);
            println!("  rigidity spread = {:.3e}", rep.rigidity_spread);
            println!("  verdict: {:?}", rep.verdict);
            Ok(())
        }
        Cmd::Pipeline { cmd: PipelineCmd::Run { common } } => {
            let cfg = load(&common)?;
            println!("config hash {:016x}", cfg.hash());
            let stages = pipeline::run_pipeline(cfg)?;
            println!("pipeline complete:");
            for (stage, status) in &stages {
                println!("  {stage}: {status}");
            }
            if stages.iter().any(|(_, st)| st.starts_with("failed")) {
                std::process::exit(3);
            }
            Ok(())
        }
    }
}

fn verdict(pass: bool) -> &'static str {
    if pass {
        "pass"
    } else {
        "FAIL"
    }
}

fn ok_or_fail(pass: bool) -> Result<(), greenwalk_core::Error> {
    if pass {
        Ok(())
    } else {
        std::process::exit(2);
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
