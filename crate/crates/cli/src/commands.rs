use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use layoutsplat::io::{
    export_ply, load_checkpoint, parse_layout, save_checkpoint, write_image, write_trace_csv, LayoutDocument,
    LayoutError,
};
use layoutsplat::optim::{run, OptimError, OptimizationTrace, SceneState, StepControl};
use layoutsplat_service::{render_view, serve as serve_session, CameraSpec, Radius, ServiceConfig, Session};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::{CameraFlags, RunFlags};

pub const CHECKPOINT_FILE: &str = "scene.ckpt";
pub const SESSION_CHECKPOINT_FILE: &str = "session.ckpt";

fn read(path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|e| CliError::io(path, e))
}

fn load_layout(path: &Path) -> Result<LayoutDocument, CliError> {
    parse_layout(&read(path)?).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

pub fn validate(path: &Path) -> Result<(), CliError> {
    match parse_layout(&read(path)?) {
        Ok(doc) => {
            println!("{}: valid ({} instances)", path.display(), doc.instances.len());
            Ok(())
        }
        Err(LayoutError::Schema(violations)) => {
            for v in &violations {
                println!("{v}");
            }
            Err(CliError::Validation(format!("{}: {} schema violation(s)", path.display(), violations.len())))
        }
        Err(e) => Err(CliError::Validation(format!("{}: {e}", path.display()))),
    }
}

/// Config with command-line overrides applied, plus its layout document.
fn resolve(flags: &RunFlags) -> Result<(RunConfig, LayoutDocument), CliError> {
    let mut cfg = match &flags.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(l) = &flags.layout {
        cfg.layout = Some(l.clone());
    }
    if let Some(o) = &flags.out {
        cfg.out = o.clone();
    }
    if let Some(s) = flags.seed {
        cfg.seed = s;
    }
    if let Some(n) = flags.steps {
        cfg.optimizer.steps = n;
    }
    cfg.optimizer.seed = cfg.seed;
    cfg.validate()?;
    let layout = cfg.layout.clone().ok_or_else(|| CliError::Validation("no layout given (--layout or config `layout`)".into()))?;
    let doc = load_layout(&layout)?;
    Ok((cfg, doc))
}

fn optim_error(e: OptimError) -> CliError {
    match e {
        OptimError::Diverged { .. } => CliError::Diverged(e.to_string()),
        other => CliError::Validation(other.to_string()),
    }
}

fn write_outputs(cfg: &RunConfig, doc: &LayoutDocument, state: &SceneState, trace: &OptimizationTrace) -> Result<(), CliError> {
    let out = &cfg.out;
    save_checkpoint(state, &out.join(CHECKPOINT_FILE)).map_err(|e| CliError::io(out, e))?;
    let trace_path = out.join("trace.csv");
    let file = std::fs::File::create(&trace_path).map_err(|e| CliError::io(&trace_path, e))?;
    write_trace_csv(trace, file).map_err(|e| CliError::io(&trace_path, e))?;
    let layout_path = out.join("layout.json");
    let final_doc = doc.sync(&state.scene_prompt, &state.layouts());
    std::fs::write(&layout_path, final_doc.to_json()).map_err(|e| CliError::io(&layout_path, e))?;
    if let Some(snapshot) = state.snapshot() {
        let ply_path = out.join("scene.ply");
        let bytes = export_ply(&snapshot).map_err(|e| CliError::Validation(e.to_string()))?;
        std::fs::write(&ply_path, bytes).map_err(|e| CliError::io(&ply_path, e))?;
    }
    let opt = &cfg.optimizer;
    let n = cfg.output.turntable_views;
    for i in 0..n {
        let spec = CameraSpec { azimuth: 360.0 * i as f64 / n as f64, ..Default::default() };
        let img = render_view(state, &spec, &opt.scene_cameras, opt.background, &opt.raster)
            .map_err(|e| CliError::Validation(e.to_string()))?;
        let path = out.join(format!("turntable_{i:02}.png"));
        write_image(&img, &path).map_err(|e| CliError::io(&path, e))?;
    }
    Ok(())
}

pub fn generate(flags: &RunFlags) -> Result<(), CliError> {
    let (cfg, doc) = resolve(flags)?;
    let provider = cfg.provider()?;
    std::fs::create_dir_all(&cfg.out).map_err(|e| CliError::io(&cfg.out, e))?;
    let mut state = SceneState::initialize(&doc.scene_prompt, doc.to_layouts(), &cfg.sampling, cfg.seed).map_err(optim_error)?;

    let checkpoint = cfg.out.join(CHECKPOINT_FILE);
    let every = cfg.output.checkpoint_every;
    let mut rows = Vec::new();
    let mut save_error = None;
    let started = std::time::Instant::now();
    let result = run(&mut state, provider.as_ref(), &cfg.optimizer, &mut |s, row| {
        rows.push(row.clone());
        if s.step % every == 0 {
            if let Err(e) = save_checkpoint(s, &checkpoint) {
                save_error = Some(CliError::io(&checkpoint, e));
                return StepControl::Stop;
            }
        }
        StepControl::Continue
    });
    if let Some(e) = save_error {
        return Err(e);
    }
    let trace = OptimizationTrace { rows, wall_time_s: started.elapsed().as_secs_f64() };
    if let Err(e) = result {
        // the failed step left `state` at the last good step
        save_checkpoint(&state, &checkpoint).map_err(|e| CliError::io(&checkpoint, e))?;
        let trace_path = cfg.out.join("trace.csv");
        if let Ok(file) = std::fs::File::create(&trace_path) {
            let _ = write_trace_csv(&trace, file);
        }
        return Err(optim_error(e));
    }
    write_outputs(&cfg, &doc, &state, &trace)?;
    let last = trace.rows.last().map(|r| r.report.total).unwrap_or(f64::NAN);
    println!(
        "{} steps in {:.1}s, final loss {last:.6e}; outputs in {}",
        trace.rows.len(),
        trace.wall_time_s,
        cfg.out.display()
    );
    Ok(())
}

fn camera_spec(flags: &CameraFlags) -> Result<CameraSpec, CliError> {
    let radius = match flags.radius.as_str() {
        "auto" => Radius::Auto,
        r => Radius::Fixed(r.parse().map_err(|_| CliError::Validation(format!("--radius must be a number or auto, got {r:?}")))?),
    };
    Ok(CameraSpec { azimuth: flags.azimuth, elevation: flags.elevation, radius: Some(radius), width: flags.width, height: flags.height })
}

fn load_state(path: &Path) -> Result<SceneState, CliError> {
    load_checkpoint(path).map_err(|e| CliError::io(path, e))
}

pub fn render(checkpoint: &Path, out: &Path, config: Option<&Path>, camera: &CameraFlags) -> Result<(), CliError> {
    let cfg = match config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let state = load_state(checkpoint)?;
    let spec = camera_spec(camera)?;
    let opt = &cfg.optimizer;
    let img = render_view(&state, &spec, &opt.scene_cameras, opt.background, &opt.raster)
        .map_err(|e| CliError::Validation(e.to_string()))?;
    write_image(&img, out).map_err(|e| CliError::io(out, e))?;
    Ok(())
}

pub fn export(checkpoint: &Path, out: &Path) -> Result<(), CliError> {
    let state = load_state(checkpoint)?;
    let snapshot = state.snapshot().ok_or_else(|| CliError::Validation("checkpoint has no instances".into()))?;
    let bytes = export_ply(&snapshot).map_err(|e| CliError::Validation(e.to_string()))?;
    std::fs::write(out, bytes).map_err(|e| CliError::io(out, e))
}

pub fn serve(flags: &RunFlags, port: u16, resume: Option<&Path>) -> Result<(), CliError> {
    let (cfg, doc) = match resume {
        // a resumed session only needs the config; the layout comes from the checkpoint
        Some(_) if flags.layout.is_none() => {
            let mut cfg = match &flags.config {
                Some(p) => RunConfig::load(p)?,
                None => RunConfig::default(),
            };
            if let Some(o) = &flags.out {
                cfg.out = o.clone();
            }
            cfg.validate()?;
            (cfg, None)
        }
        _ => {
            let (cfg, doc) = resolve(flags)?;
            (cfg, Some(doc))
        }
    };
    let provider = cfg.provider()?;
    let state = match (resume, &doc) {
        (Some(path), _) => load_state(path)?,
        (None, Some(doc)) => {
            SceneState::initialize(&doc.scene_prompt, doc.to_layouts(), &cfg.sampling, cfg.seed).map_err(optim_error)?
        }
        (None, None) => unreachable!(),
    };
    std::fs::create_dir_all(&cfg.out).map_err(|e| CliError::io(&cfg.out, e))?;

    let listener = std::net::TcpListener::bind(("127.0.0.1", port))
        .map_err(|e| CliError::Environment(format!("cannot bind 127.0.0.1:{port}: {e}")))?;
    listener.set_nonblocking(true).map_err(|e| CliError::Environment(e.to_string()))?;
    let addr = listener.local_addr().map_err(|e| CliError::Environment(e.to_string()))?;

    let checkpoint: PathBuf = cfg.out.join(SESSION_CHECKPOINT_FILE);
    let service_cfg = ServiceConfig { optimizer: cfg.optimizer.clone(), sampling: cfg.sampling, checkpoint_path: Some(checkpoint.clone()) };
    let session = Arc::new(Session::new(state, doc, service_cfg, Arc::from(provider)));

    let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::Environment(e.to_string()))?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::from_std(listener).map_err(|e| CliError::Environment(e.to_string()))?;
        println!("listening on http://{addr}");
        let _ = std::io::stdout().flush();
        let done = serve_session(listener, session, shutdown_signal())
            .await
            .map_err(|e| CliError::Io(e.to_string()))?;
        println!("checkpoint at step {} written to {}", done.state.step, checkpoint.display());
        Ok(())
    })
}

async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    {
        use tokio::signal::unix::{signal, SignalKind};
        match signal(SignalKind::terminate()) {
            Ok(mut term) => {
                tokio::select! {
                    _ = ctrl_c => {}
                    _ = term.recv() => {}
                }
            }
            Err(_) => ctrl_c.await,
        }
    }
    #[cfg(not(unix))]
    ctrl_c.await;
}
