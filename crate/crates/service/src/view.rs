use layoutsplat::guidance::{scene_bounds, CameraPolicy};
use layoutsplat::optim::SceneState;
use layoutsplat::raster::{render_forward, Image, RasterConfig};
use layoutsplat::scene::Camera;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Bytes before the pixels of every streamed frame: step (`u64`), width
/// (`u32`), height (`u32`), little-endian.
pub const FRAME_HEADER_LEN: usize = 16;
const MAX_SIDE: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Radius {
    /// The scene bounding sphere, exactly as the scene guidance cameras use it.
    Auto,
    Fixed(f64),
}

impl Serialize for Radius {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Radius::Auto => s.serialize_str("auto"),
            Radius::Fixed(r) => s.serialize_f64(*r),
        }
    }
}

impl<'de> Deserialize<'de> for Radius {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        // query strings deliver everything as text
        let text = String::deserialize(d)?;
        if text == "auto" {
            return Ok(Radius::Auto);
        }
        text.parse().map(Radius::Fixed).map_err(|_| serde::de::Error::custom(format!("radius must be a number or \"auto\", got {text:?}")))
    }
}

/// Orbit camera around the scene bounding-sphere center. Angles in degrees.
/// Unset fields fall back to the scene camera policy.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CameraSpec {
    pub azimuth: f64,
    pub elevation: Option<f64>,
    pub radius: Option<Radius>,
    pub width: Option<usize>,
    pub height: Option<usize>,
}

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum ViewError {
    #[error("invalid camera: {0}")]
    InvalidSpec(String),
}

/// Camera for `spec`, or `None` for an empty scene.
pub fn camera_for(state: &SceneState, spec: &CameraSpec, policy: &CameraPolicy) -> Result<Option<Camera>, ViewError> {
    let bad = |m: String| Err(ViewError::InvalidSpec(m));
    let width = spec.width.unwrap_or(policy.width);
    let height = spec.height.unwrap_or(policy.height);
    if !(1..=MAX_SIDE).contains(&width) || !(1..=MAX_SIDE).contains(&height) {
        return bad(format!("width and height must lie in 1..={MAX_SIDE}"));
    }
    let elevation = spec.elevation.unwrap_or(policy.elevation_deg);
    if !spec.azimuth.is_finite() || !elevation.is_finite() || elevation.abs() >= 90.0 {
        return bad("azimuth must be finite and elevation within (-90, 90)".into());
    }
    if let Some(Radius::Fixed(r)) = spec.radius {
        if !(r.is_finite() && r > 0.0) {
            return bad(format!("radius must be > 0, got {r}"));
        }
    }
    if state.is_empty() {
        return Ok(None);
    }
    let layouts = state.layouts();
    let bounds = scene_bounds(&layouts).map_err(|e| ViewError::InvalidSpec(e.to_string()))?;
    let view_policy = CameraPolicy { elevation_deg: elevation, width, height, ..*policy };
    let radius = match spec.radius.unwrap_or(Radius::Auto) {
        Radius::Auto => bounds.radius,
        Radius::Fixed(r) => r / policy.radius_multiplier,
    };
    Ok(Some(view_policy.orbit_camera(bounds.center, radius, spec.azimuth.to_radians())))
}

/// Renders `state` from `spec`; an empty scene renders as background.
pub fn render_view(
    state: &SceneState,
    spec: &CameraSpec,
    policy: &CameraPolicy,
    background: [f64; 3],
    raster: &RasterConfig,
) -> Result<Image, ViewError> {
    let cam = camera_for(state, spec, policy)?;
    Ok(match (cam, state.snapshot()) {
        (Some(cam), Some(snapshot)) => render_forward(&snapshot, &cam, background, raster).rgb,
        _ => Image::filled(
            spec.width.unwrap_or(policy.width),
            spec.height.unwrap_or(policy.height),
            background,
        ),
    })
}

/// Header followed by 8-bit RGB pixels in row-major order.
pub fn encode_frame(step: u64, image: &Image) -> Vec<u8> {
    let mut out = Vec::with_capacity(FRAME_HEADER_LEN + 3 * image.width * image.height);
    out.extend_from_slice(&step.to_le_bytes());
    out.extend_from_slice(&(image.width as u32).to_le_bytes());
    out.extend_from_slice(&(image.height as u32).to_le_bytes());
    out.extend(layoutsplat::io::to_rgb8(image));
    out
}

/// `(step, width, height)` from the first bytes of a frame.
pub fn decode_frame_header(bytes: &[u8]) -> Option<(u64, u32, u32)> {
    let h = bytes.get(..FRAME_HEADER_LEN)?;
    Some((
        u64::from_le_bytes(h[0..8].try_into().ok()?),
        u32::from_le_bytes(h[8..12].try_into().ok()?),
        u32::from_le_bytes(h[12..16].try_into().ok()?),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use layoutsplat::geometry::SurfaceSamplingConfig;
    use layoutsplat::guidance::sample_scene_camera;
    use layoutsplat::scene::InstanceLayout;
    use nalgebra::Vector3;

    fn scene() -> SceneState {
        let layouts = vec![
            InstanceLayout::new("a", "a", Vector3::new(-1.0, 0.0, 0.3), Vector3::new(0.6, 0.4, 0.8), 1.0, 0.4).unwrap(),
            InstanceLayout::new("b", "b", Vector3::new(1.0, 0.5, 0.0), Vector3::new(1.0, 0.7, 0.5), 1.3, -1.0).unwrap(),
        ];
        SceneState::initialize("s", layouts, &SurfaceSamplingConfig::default().with_particles(200), 4).unwrap()
    }

    #[test]
    fn auto_radius_matches_scene_guidance_cameras() {
        let s = scene();
        for multiplier in [1.0, 1.7] {
            let policy = CameraPolicy { radius_multiplier: multiplier, ..Default::default() };
            let cam = camera_for(&s, &CameraSpec::default(), &policy).unwrap().unwrap();
            let bounds = scene_bounds(&s.layouts()).unwrap();
            let guide = sample_scene_camera(&bounds, 0, 8, &policy).unwrap();
            assert!((cam.position() - guide.position()).norm() < 1e-12);
        }
    }

    #[test]
    fn fixed_radius_is_the_camera_distance() {
        let s = scene();
        let policy = CameraPolicy { radius_multiplier: 2.0, ..Default::default() };
        let spec = CameraSpec { radius: Some(Radius::Fixed(7.0)), azimuth: 33.0, ..Default::default() };
        let cam = camera_for(&s, &spec, &policy).unwrap().unwrap();
        let center = scene_bounds(&s.layouts()).unwrap().center;
        assert!(((cam.position() - center).norm() - 7.0).abs() < 1e-12);
    }

    #[test]
    fn empty_scene_renders_background() {
        let mut s = scene();
        s.instances.clear();
        let img = render_view(&s, &CameraSpec::default(), &CameraPolicy::default(), [0.1, 0.2, 0.3], &RasterConfig::default()).unwrap();
        assert_eq!(img, Image::filled(128, 128, [0.1, 0.2, 0.3]));
    }

    #[test]
    fn invalid_specs() {
        let s = scene();
        let p = CameraPolicy::default();
        for spec in [
            CameraSpec { width: Some(0), ..Default::default() },
            CameraSpec { elevation: Some(90.0), ..Default::default() },
            CameraSpec { radius: Some(Radius::Fixed(-1.0)), ..Default::default() },
            CameraSpec { azimuth: f64::NAN, ..Default::default() },
        ] {
            assert!(camera_for(&s, &spec, &p).is_err(), "{spec:?}");
        }
    }

    #[test]
    fn frame_header_round_trip() {
        let f = encode_frame(42, &Image::new(3, 2));
        assert_eq!(f.len(), FRAME_HEADER_LEN + 18);
        assert_eq!(decode_frame_header(&f), Some((42, 3, 2)));
    }
}
