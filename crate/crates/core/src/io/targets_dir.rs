use std::path::Path;

use serde::{Deserialize, Serialize};

use super::image_io::{read_image, write_image, ImageIoError};
use crate::guidance::{PhotometricTarget, ViewKey};

pub const TARGET_MANIFEST: &str = "targets.json";

#[derive(Serialize, Deserialize)]
struct Entry {
    view: ViewKey,
    file: String,
}

#[derive(Debug, thiserror::Error)]
pub enum TargetDirError {
    #[error("bad target manifest: {0}")]
    Manifest(#[from] serde_json::Error),
    #[error(transparent)]
    Image(#[from] ImageIoError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Writes each target as PNG plus a `targets.json` manifest keyed by view.
pub fn save_targets(targets: &PhotometricTarget, dir: &Path) -> Result<(), TargetDirError> {
    std::fs::create_dir_all(dir)?;
    let mut entries = Vec::new();
    for (n, (view, img)) in targets.views().enumerate() {
        let file = match view {
            ViewKey::Scene { index } => format!("scene_{index}.png"),
            ViewKey::Instance { index, .. } => format!("instance_{n}_{index}.png"),
        };
        write_image(img, &dir.join(&file))?;
        entries.push(Entry { view: view.clone(), file });
    }
    std::fs::write(dir.join(TARGET_MANIFEST), serde_json::to_vec_pretty(&entries)?)?;
    Ok(())
}

pub fn load_targets(dir: &Path) -> Result<PhotometricTarget, TargetDirError> {
    let entries: Vec<Entry> = serde_json::from_slice(&std::fs::read(dir.join(TARGET_MANIFEST))?)?;
    let mut targets = PhotometricTarget::new();
    for e in entries {
        targets.insert(e.view, read_image(&dir.join(&e.file))?);
    }
    Ok(targets)
}
