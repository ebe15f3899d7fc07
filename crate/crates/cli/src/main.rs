//! `layoutsplat` command-line tool.
//!
//! Exit codes: 0 success, 2 invalid input (layout schema, config), 3 I/O
//! failure (missing or corrupt files), 4 environment (e.g. port in use),
//! 5 numerical divergence.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use layoutsplat_service::{DEFAULT_PORT, PORT_ENV};

#[derive(Parser)]
#[command(name = "layoutsplat", version, about = "Layout-guided compositional Gaussian scenes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by commands that build a scene from a run config.
#[derive(Args, Clone, Debug, Default)]
pub struct RunFlags {
    /// Run config (TOML). Defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Layout document; overrides the config's `layout`.
    #[arg(long)]
    pub layout: Option<PathBuf>,
    /// Output directory; overrides the config's `out`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Seed; overrides the config's `seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Optimization steps; overrides `optimizer.steps`.
    #[arg(long)]
    pub steps: Option<usize>,
}

/// Orbit camera around the scene bounding sphere. Angles in degrees.
#[derive(Args, Clone, Debug)]
pub struct CameraFlags {
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub azimuth: f64,
    /// Defaults to the scene camera elevation.
    #[arg(long, allow_negative_numbers = true)]
    pub elevation: Option<f64>,
    /// Camera distance, or `auto` for the scene bounding-sphere radius.
    #[arg(long, default_value = "auto")]
    pub radius: String,
    #[arg(long)]
    pub width: Option<usize>,
    #[arg(long)]
    pub height: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Check a layout document and list every schema violation.
    Validate {
        /// Layout document (JSON).
        #[arg(required_unless_present = "layout_flag")]
        layout: Option<PathBuf>,
        #[arg(long = "layout", id = "layout_flag")]
        layout_flag: Option<PathBuf>,
    },
    /// Initialize, optimize and write checkpoint, trace CSV, turntable and PLY.
    Generate(RunFlags),
    /// Render a checkpoint to a .png or .ppm image.
    Render {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Output image; the format follows the extension.
        #[arg(long)]
        out: PathBuf,
        /// Run config supplying camera policy, background and rasterizer settings.
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        camera: CameraFlags,
    },
    /// Export a checkpoint's world-frame Gaussians as binary PLY.
    Export {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the interactive editing service on 127.0.0.1.
    Serve {
        #[command(flatten)]
        run: RunFlags,
        /// Port to bind; 0 picks a free one.
        #[arg(long, env = PORT_ENV, default_value_t = DEFAULT_PORT)]
        port: u16,
        /// Resume from a checkpoint instead of initializing from the layout.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Validate { layout, layout_flag } => commands::validate(&layout.or(layout_flag).expect("clap enforces a layout")),
        Command::Generate(flags) => commands::generate(&flags),
        Command::Render { checkpoint, out, config, camera } => commands::render(&checkpoint, &out, config.as_deref(), &camera),
        Command::Export { checkpoint, out } => commands::export(&checkpoint, &out),
        Command::Serve { run, port, checkpoint } => commands::serve(&run, port, checkpoint.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
