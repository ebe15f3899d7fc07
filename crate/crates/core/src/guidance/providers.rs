use std::collections::BTreeMap;

use super::{check_shape, difference, GuidanceConfig, GuidanceError, GuidanceProvider, GuidanceRequest, GuidanceResidual, ViewKey};
use crate::raster::Image;

/// Pulls every pixel toward one color.
#[derive(Clone, Debug, PartialEq)]
pub struct FlatColor {
    pub color: [f64; 3],
}

impl GuidanceProvider for FlatColor {
    fn provide(&self, req: &GuidanceRequest<'_>, cfg: &GuidanceConfig) -> Result<GuidanceResidual, GuidanceError> {
        let target = Image::filled(req.image.width, req.image.height, self.color);
        difference(req, &target, cfg)
    }
}

/// A checkerboard painted on the sphere of view directions, so each camera
/// sees the part of the pattern it faces.
#[derive(Clone, Debug, PartialEq)]
pub struct CheckerTexture {
    pub colors: [[f64; 3]; 2],
    /// Cell size in radians of azimuth and elevation.
    pub cell: f64,
}

impl CheckerTexture {
    pub fn pattern(&self, cam: &crate::scene::Camera) -> Image {
        let mut img = Image::new(cam.width, cam.height);
        for row in 0..cam.height {
            for col in 0..cam.width {
                let d = cam.pixel_ray(col, row);
                let az = d.y.atan2(d.x);
                let el = d.z.clamp(-1.0, 1.0).asin();
                let parity = ((az / self.cell).floor() + (el / self.cell).floor()).rem_euclid(2.0);
                img.set_pixel(col, row, self.colors[parity as usize]);
            }
        }
        img
    }
}

impl GuidanceProvider for CheckerTexture {
    fn provide(&self, req: &GuidanceRequest<'_>, cfg: &GuidanceConfig) -> Result<GuidanceResidual, GuidanceError> {
        req.validate()?;
        difference(req, &self.pattern(req.camera), cfg)
    }
}

/// Fixed target images per view; the residual is the photometric error.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PhotometricTarget {
    targets: BTreeMap<ViewKey, Image>,
}

impl PhotometricTarget {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, view: ViewKey, image: Image) {
        self.targets.insert(view, image);
    }

    pub fn with(mut self, view: ViewKey, image: Image) -> Self {
        self.insert(view, image);
        self
    }

    pub fn get(&self, view: &ViewKey) -> Option<&Image> {
        self.targets.get(view)
    }

    pub fn views(&self) -> impl Iterator<Item = (&ViewKey, &Image)> {
        self.targets.iter()
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }
}

impl GuidanceProvider for PhotometricTarget {
    fn provide(&self, req: &GuidanceRequest<'_>, cfg: &GuidanceConfig) -> Result<GuidanceResidual, GuidanceError> {
        let target = self
            .targets
            .get(&req.view)
            .ok_or_else(|| GuidanceError::MissingTarget(req.view.to_string()))?;
        check_shape(target, req.image.width, req.image.height)?;
        difference(req, target, cfg)
    }

    fn has_assets_for_prompt(&self, prompt: &str) -> bool {
        self.targets
            .keys()
            .any(|k| matches!(k, ViewKey::Instance { prompt: p, .. } if p == prompt))
    }

    fn has_scene_view(&self, index: usize) -> bool {
        self.targets.contains_key(&ViewKey::Scene { index })
    }
}
