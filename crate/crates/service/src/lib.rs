//! Interactive editing service.
//!
//! A [`Session`] owns the optimizer on a dedicated worker thread. Edits are
//! queued and applied between steps, control requests drive an
//! idle/running/paused state machine, and every completed step publishes an
//! immutable copy of the scene that the HTTP handlers read from.
//!
//! | Endpoint | |
//! |---|---|
//! | `GET /scene` | layout document, status and step counter |
//! | `POST /edit` | one [`EditOp`] |
//! | `POST /control` | one [`ControlRequest`] |
//! | `GET /render` | PNG from a [`CameraSpec`] |
//! | `GET /frames` | binary frame stream, see [`encode_frame`] |

mod edit;
mod server;
mod session;
mod view;

pub use edit::{apply_edit, EditError, EditOp};
pub use server::{router, serve, ServeError, DEFAULT_PORT, PORT_ENV};
pub use session::{
    ControlAction, ControlError, ControlRequest, Published, Scope, SceneReport, ServiceConfig, Session, Status,
};
pub use view::{camera_for, decode_frame_header, encode_frame, render_view, CameraSpec, Radius, ViewError, FRAME_HEADER_LEN};

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/edit-service.md")]
mod book {}
