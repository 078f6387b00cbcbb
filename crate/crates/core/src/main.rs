use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use toporecon::pipeline::{
    cmd_diagram, cmd_evaluate, cmd_reconstruct, write_xyz, ConfigFile, RunConfig,
};
use toporecon::synth;
use toporecon::topo_opt::OptimizerConfig;

#[derive(Parser)]
#[command(name = "toporecon", version, about = "Topology-aware surface reconstruction from point clouds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct InputArgs {
    /// Point cloud file (.xyz or .ply); mutually exclusive with --preset
    #[arg(long, conflicts_with = "preset")]
    input: Option<PathBuf>,
    /// Built-in synthetic shape (see `toporecon synth --list`)
    #[arg(long)]
    preset: Option<String>,
    /// Sample count when generating from a preset
    #[arg(long)]
    n: Option<usize>,
    /// Gaussian jitter applied to preset samples
    #[arg(long, default_value_t = 0.0)]
    jitter: f64,
    /// Base grid resolution (default scales with sampling density)
    #[arg(long)]
    base_res: Option<usize>,
    /// Extra field-weighted sample points (default base_res^2 / 2 in 2D,
    /// base_res^3 / 4 in 3D)
    #[arg(long)]
    extra: Option<usize>,
    /// RNG seed for sampling and synthesis
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// JSON config file; its fields override the flags above
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct OptArgs {
    #[arg(long, default_value_t = 1e-3)]
    learning_rate: f64,
    #[arg(long, default_value_t = 500)]
    max_iters: usize,
    #[arg(long, default_value_t = 1e-7)]
    plateau_tol: f64,
    #[arg(long, default_value_t = 25)]
    plateau_window: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline: optimize the field, extract a surface,
    /// write mesh + diagram + trace artifacts
    Reconstruct {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        opt: OptArgs,
        /// Output directory for artifacts
        #[arg(long, short, default_value = ".")]
        out_dir: PathBuf,
        /// Loss specification JSON (overrides the preset's loss)
        #[arg(long)]
        loss: Option<PathBuf>,
        /// Also write the triangulated domain as complex.off
        #[arg(long)]
        export_complex: bool,
    },
    /// Print the persistence diagram of a cloud's likelihood field
    Diagram {
        #[command(flatten)]
        input: InputArgs,
        /// Gaussian parameter JSON (default: data-spacing initialization)
        #[arg(long)]
        params: Option<PathBuf>,
    },
    /// Score reconstructed meshes against ground-truth feature counts
    Evaluate {
        /// Point cloud files, one per mesh
        #[arg(long, required = true, num_args = 1..)]
        clouds: Vec<PathBuf>,
        /// OBJ meshes produced by `reconstruct`
        #[arg(long, required = true, num_args = 1..)]
        meshes: Vec<PathBuf>,
        /// JSON array of {shape, counts} entries
        #[arg(long)]
        truth: PathBuf,
    },
    /// Generate a synthetic point cloud and write it as .xyz
    Synth {
        /// Preset name
        #[arg(long, required_unless_present = "list")]
        preset: Option<String>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.0)]
        jitter: f64,
        #[arg(long, short, default_value = "cloud.xyz")]
        out: PathBuf,
        /// List available presets and exit
        #[arg(long)]
        list: bool,
    },
}

fn build_config(input: InputArgs, opt: Option<OptArgs>) -> toporecon::Result<RunConfig> {
    let mut cfg = RunConfig {
        input: input.input,
        preset: input.preset,
        n: input.n,
        jitter: input.jitter,
        base_res: input.base_res,
        extra: input.extra,
        ..Default::default()
    };
    cfg.optimizer.rng_seed = input.seed;
    if let Some(o) = opt {
        cfg.optimizer = OptimizerConfig {
            learning_rate: o.learning_rate,
            max_iters: o.max_iters,
            plateau_tol: o.plateau_tol,
            plateau_window: o.plateau_window,
            rng_seed: input.seed,
        };
    }
    if let Some(path) = &input.config {
        ConfigFile::load(path)?.apply(&mut cfg);
    }
    Ok(cfg)
}

fn run(cli: Cli) -> toporecon::Result<()> {
    match cli.command {
        Command::Reconstruct {
            input,
            opt,
            out_dir,
            loss,
            export_complex,
        } => {
            let mut cfg = build_config(input, Some(opt))?;
            cfg.out_dir = out_dir;
            if loss.is_some() {
                cfg.loss_path = loss;
            }
            cfg.export_complex |= export_complex;
            let summary = cmd_reconstruct(&cfg)?;
            println!("{}", serde_json::to_string_pretty(&summary)?);
        }
        Command::Diagram { input, params } => {
            let cfg = build_config(input, None)?;
            let diagram = cmd_diagram(&cfg, params.as_deref())?;
            println!("{}", serde_json::to_string_pretty(&diagram)?);
        }
        Command::Evaluate {
            clouds,
            meshes,
            truth,
        } => {
            let report = cmd_evaluate(&clouds, &meshes, &truth)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        Command::Synth {
            preset,
            n,
            seed,
            jitter,
            out,
            list,
        } => {
            if list {
                for name in synth::PRESET_NAMES {
                    let p = synth::preset(name)?;
                    println!("{name}  (dim {}, default n {})", p.dim, p.default_n);
                }
                return Ok(());
            }
            let name = preset.expect("clap enforces presence");
            let p = synth::preset(&name)?;
            let cloud = synth::synth_cloud(&name, n.unwrap_or(p.default_n), seed, jitter)?;
            write_xyz(&cloud, &out)?;
            println!("wrote {} points to {}", cloud.points.len(), out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
