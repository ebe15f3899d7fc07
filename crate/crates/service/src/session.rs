use std::collections::VecDeque;
use std::path::PathBuf;
use std::sync::{mpsc, Arc, Condvar, Mutex, MutexGuard};
use std::thread::JoinHandle;

use layoutsplat::geometry::SurfaceSamplingConfig;
use layoutsplat::guidance::GuidanceProvider;
use layoutsplat::io::{save_checkpoint, CheckpointError, LayoutDocument};
use layoutsplat::optim::{step_with, OptimizerConfig, SceneState};
use serde::{Deserialize, Serialize};
use tokio::sync::watch;

use crate::edit::{apply_edit, EditError, EditOp};

#[derive(Clone, Debug)]
pub struct ServiceConfig {
    pub optimizer: OptimizerConfig,
    /// Used to initialize instances added by edits.
    pub sampling: SurfaceSamplingConfig,
    /// Written when the session shuts down.
    pub checkpoint_path: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Idle,
    Running,
    Paused,
}

/// Which instances a run updates. Instances outside a local scope are
/// still rendered but left bit-identical.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Scope {
    #[default]
    All,
    Local { ids: Vec<String> },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum ControlAction {
    /// Runs `steps` more steps.
    Start { steps: usize },
    Pause,
    Resume,
    /// Always allowed; returns to idle.
    Stop,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ControlRequest {
    #[serde(flatten)]
    pub action: ControlAction,
    #[serde(default)]
    pub scope: Scope,
}

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum ControlError {
    #[error("cannot {action} while {from:?}")]
    InvalidTransition { from: Status, action: &'static str },
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("session is shut down")]
    Closed,
}

/// Immutable copy of the scene after a step or edit.
#[derive(Debug)]
pub struct Published {
    pub state: SceneState,
    pub document: LayoutDocument,
}

/// Body of `GET /scene`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneReport {
    pub document: LayoutDocument,
    pub status: Status,
    pub step: usize,
    /// Step at which the current run ends.
    pub target_step: Option<usize>,
    pub scope: Scope,
    pub last_error: Option<String>,
}

type Reply = mpsc::Sender<Result<usize, EditError>>;

struct Control {
    status: Status,
    target_step: Option<usize>,
    scope: Scope,
    edits: VecDeque<(EditOp, Reply)>,
    busy: bool,
    shutdown: bool,
    last_error: Option<String>,
    step: usize,
}

struct Shared {
    control: Mutex<Control>,
    wake: Condvar,
    boundary: Condvar,
    config: ServiceConfig,
    provider: Arc<dyn GuidanceProvider>,
}

impl Shared {
    fn lock(&self) -> MutexGuard<'_, Control> {
        self.control.lock().unwrap_or_else(|p| p.into_inner())
    }
}

/// One editable scene driven by a background optimizer thread.
pub struct Session {
    shared: Arc<Shared>,
    published: watch::Receiver<Arc<Published>>,
    worker: Mutex<Option<JoinHandle<(SceneState, watch::Sender<Arc<Published>>)>>>,
    finished: Mutex<Option<Arc<Published>>>,
}

impl Session {
    /// `document` is echoed back verbatim for layouts that have not changed;
    /// without it one is derived from `state`.
    pub fn new(
        state: SceneState,
        document: Option<LayoutDocument>,
        config: ServiceConfig,
        provider: Arc<dyn GuidanceProvider>,
    ) -> Self {
        let base = document.unwrap_or_else(|| LayoutDocument::from_layouts(&state.scene_prompt, &state.layouts()));
        let document = base.sync(&state.scene_prompt, &state.layouts());
        let control = Control {
            status: Status::Idle,
            target_step: None,
            scope: Scope::All,
            edits: VecDeque::new(),
            busy: false,
            shutdown: false,
            last_error: None,
            step: state.step,
        };
        let (tx, rx) = watch::channel(Arc::new(Published { state: state.clone(), document: document.clone() }));
        let shared = Arc::new(Shared { control: Mutex::new(control), wake: Condvar::new(), boundary: Condvar::new(), config, provider });
        let worker_shared = shared.clone();
        let worker = std::thread::Builder::new()
            .name("optimizer".into())
            .spawn(move || worker_loop(&worker_shared, state, document, tx))
            .expect("spawn optimizer thread");
        Self { shared, published: rx, worker: Mutex::new(Some(worker)), finished: Mutex::new(None) }
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.shared.config
    }

    pub fn latest(&self) -> Arc<Published> {
        self.published.borrow().clone()
    }

    /// Receives every publication; closes when the session shuts down.
    pub fn subscribe(&self) -> watch::Receiver<Arc<Published>> {
        self.published.clone()
    }

    pub fn report(&self) -> SceneReport {
        let c = self.shared.lock();
        let latest = self.latest();
        SceneReport {
            document: latest.document.clone(),
            status: c.status,
            step: latest.state.step,
            target_step: c.target_step,
            scope: c.scope.clone(),
            last_error: c.last_error.clone(),
        }
    }

    /// Queues `op` and blocks until the worker applies it. Returns the step
    /// counter at which the edit took effect.
    pub fn edit(&self, op: EditOp) -> Result<usize, EditError> {
        op.validate_payload()?;
        let (tx, rx) = mpsc::channel();
        {
            let mut c = self.shared.lock();
            if c.shutdown {
                return Err(EditError::SessionClosed);
            }
            c.edits.push_back((op, tx));
        }
        self.shared.wake.notify_all();
        rx.recv().unwrap_or(Err(EditError::SessionClosed))
    }

    /// Applies a state-machine transition. `pause` and `stop` return only
    /// once no step is in flight, so the step counter is final.
    pub fn control(&self, req: ControlRequest) -> Result<SceneReport, ControlError> {
        {
            let mut c = self.shared.lock();
            if c.shutdown {
                return Err(ControlError::Closed);
            }
            let invalid = |from, action| Err(ControlError::InvalidTransition { from, action });
            match (&req.action, c.status) {
                (ControlAction::Start { steps }, Status::Idle) => {
                    if *steps == 0 {
                        return Err(ControlError::InvalidRequest("steps must be >= 1".into()));
                    }
                    let latest = self.latest();
                    check_scope(&req.scope, &latest.state)?;
                    c.status = Status::Running;
                    c.target_step = Some(latest.state.step + steps);
                    c.scope = req.scope.clone();
                    c.last_error = None;
                }
                (ControlAction::Start { .. }, from) => return invalid(from, "start"),
                (ControlAction::Pause, Status::Running) => c.status = Status::Paused,
                (ControlAction::Pause, from) => return invalid(from, "pause"),
                (ControlAction::Resume, Status::Paused) => c.status = Status::Running,
                (ControlAction::Resume, from) => return invalid(from, "resume"),
                (ControlAction::Stop, _) => {
                    c.status = Status::Idle;
                    c.target_step = None;
                }
            }
            self.shared.wake.notify_all();
            if c.status != Status::Running {
                while c.busy {
                    c = self.shared.boundary.wait(c).unwrap_or_else(|p| p.into_inner());
                }
            }
        }
        Ok(self.report())
    }

    /// Blocks until the session is idle with no queued edits.
    pub fn wait_idle(&self) {
        let mut c = self.shared.lock();
        while !c.shutdown && (c.busy || c.status == Status::Running || !c.edits.is_empty()) {
            c = self.shared.boundary.wait(c).unwrap_or_else(|p| p.into_inner());
        }
    }

    /// Stops the worker and closes frame streams. Idempotent; returns the
    /// final state.
    pub fn stop_worker(&self) -> Arc<Published> {
        let mut finished = self.finished.lock().unwrap_or_else(|p| p.into_inner());
        if let Some(done) = finished.as_ref() {
            return done.clone();
        }
        self.shared.lock().shutdown = true;
        self.shared.wake.notify_all();
        self.shared.boundary.notify_all();
        let handle = self.worker.lock().unwrap_or_else(|p| p.into_inner()).take();
        let (state, tx) = handle.expect("worker present until finished").join().expect("optimizer thread panicked");
        drop(tx);
        let done = Arc::new(Published { document: self.latest().document.clone(), state });
        *finished = Some(done.clone());
        done
    }

    /// [`Session::stop_worker`], then writes the checkpoint if one is
    /// configured.
    pub fn shutdown(&self) -> Result<Arc<Published>, CheckpointError> {
        let done = self.stop_worker();
        if let Some(path) = &self.shared.config.checkpoint_path {
            save_checkpoint(&done.state, path)?;
        }
        Ok(done)
    }
}

impl Drop for Session {
    fn drop(&mut self) {
        self.stop_worker();
    }
}

fn check_scope(scope: &Scope, state: &SceneState) -> Result<(), ControlError> {
    if state.is_empty() {
        return Err(ControlError::InvalidRequest("scene has no instances".into()));
    }
    if let Scope::Local { ids } = scope {
        if ids.is_empty() {
            return Err(ControlError::InvalidRequest("local scope needs at least one id".into()));
        }
        if let Some(missing) = ids.iter().find(|id| state.index_of(id).is_none()) {
            return Err(ControlError::InvalidRequest(format!("unknown instance {missing:?}")));
        }
    }
    Ok(())
}

fn active_mask(scope: &Scope, state: &SceneState) -> Vec<bool> {
    match scope {
        Scope::All => vec![true; state.len()],
        Scope::Local { ids } => state.instances.iter().map(|i| ids.contains(&i.layout.id)).collect(),
    }
}

fn worker_loop(
    shared: &Shared,
    mut state: SceneState,
    mut document: LayoutDocument,
    tx: watch::Sender<Arc<Published>>,
) -> (SceneState, watch::Sender<Arc<Published>>) {
    loop {
        let (edits, run) = {
            let mut c = shared.lock();
            c.step = state.step;
            c.busy = false;
            shared.boundary.notify_all();
            loop {
                if c.shutdown {
                    return (state, tx);
                }
                if !c.edits.is_empty() || c.status == Status::Running {
                    break;
                }
                c = shared.wake.wait(c).unwrap_or_else(|p| p.into_inner());
            }
            c.busy = true;
            let edits: Vec<_> = c.edits.drain(..).collect();
            let run = (c.status == Status::Running).then(|| (c.target_step.unwrap_or(state.step), c.scope.clone()));
            (edits, run)
        };

        let mut changed = false;
        let mut replies = Vec::with_capacity(edits.len());
        for (op, reply) in edits {
            let result = apply_edit(&mut state, &op, &shared.config.sampling, shared.provider.as_ref());
            changed |= result.is_ok();
            replies.push((reply, result.map(|_| state.step)));
        }
        if changed {
            document = document.sync(&state.scene_prompt, &state.layouts());
            tx.send_replace(Arc::new(Published { state: state.clone(), document: document.clone() }));
            changed = false;
        }
        // reply only once the edit is visible to readers
        for (reply, result) in replies {
            let _ = reply.send(result);
        }

        if let Some((target, scope)) = run {
            let active = active_mask(&scope, &state);
            let outcome = if state.step >= target {
                Ok(())
            } else if !active.iter().any(|a| *a) {
                Err("no instances left in scope".to_string())
            } else {
                let cfg = OptimizerConfig { steps: target, ..shared.config.optimizer.clone() };
                step_with(&mut state, shared.provider.as_ref(), &cfg, &active)
                    .map(|_| changed = true)
                    .map_err(|e| e.to_string())
            };
            let mut c = shared.lock();
            if let Err(e) = outcome {
                c.last_error = Some(e);
                c.status = Status::Idle;
                c.target_step = None;
            } else if state.step >= target && c.status == Status::Running {
                c.status = Status::Idle;
                c.target_step = None;
            }
        }

        if changed {
            document = document.sync(&state.scene_prompt, &state.layouts());
            tx.send_replace(Arc::new(Published { state: state.clone(), document: document.clone() }));
        }
    }
}
