use nalgebra::Vector3;

use crate::raster::Image;
use crate::scene::{Camera, InstanceLayout};

const PALETTE: [[f64; 3]; 10] = [
    [0.894, 0.102, 0.110],
    [0.216, 0.494, 0.722],
    [0.302, 0.686, 0.290],
    [0.596, 0.306, 0.639],
    [1.000, 0.498, 0.000],
    [1.000, 1.000, 0.200],
    [0.651, 0.337, 0.157],
    [0.969, 0.506, 0.749],
    [0.600, 0.600, 0.600],
    [0.400, 0.761, 0.647],
];

/// Color used for the instance at position `index` in the layout list.
pub fn palette_color(index: usize) -> [f64; 3] {
    PALETTE[index % PALETTE.len()]
}

/// Ray parameter range where the ray hits the box, if it does in front of
/// the origin.
fn ray_box(origin: &Vector3<f64>, dir: &Vector3<f64>, layout: &InstanceLayout) -> bool {
    let r = layout.rotation();
    let o = r.transpose() * (origin - layout.center) / layout.scale_factor;
    let d = r.transpose() * dir / layout.scale_factor;
    let h = layout.half_extents();
    let (mut t0, mut t1) = (0.0f64, f64::INFINITY);
    for a in 0..3 {
        if d[a] == 0.0 {
            if o[a].abs() > h[a] {
                return false;
            }
            continue;
        }
        let ta = (-h[a] - o[a]) / d[a];
        let tb = (h[a] - o[a]) / d[a];
        t0 = t0.max(ta.min(tb));
        t1 = t1.min(ta.max(tb));
    }
    t0 <= t1
}

/// Flat-shaded render of the layout boxes: each box in its palette color,
/// nearer box centers drawn over farther ones, black elsewhere.
pub fn render_layout_condition(layouts: &[InstanceLayout], cam: &Camera) -> Image {
    let mut order: Vec<(f64, usize)> = layouts
        .iter()
        .enumerate()
        .map(|(i, l)| (cam.to_camera(&l.center).z, i))
        .collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let origin = cam.position();
    let mut img = Image::new(cam.width, cam.height);
    for row in 0..cam.height {
        for col in 0..cam.width {
            let dir = cam.pixel_ray(col, row);
            if let Some(&(_, i)) = order.iter().find(|(_, i)| ray_box(&origin, &dir, &layouts[*i])) {
                img.set_pixel(col, row, palette_color(i));
            }
        }
    }
    img
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cam() -> Camera {
        Camera::look_at(Vector3::new(5.0, 0.0, 0.0), Vector3::zeros(), 0.5, 16, 16).unwrap()
    }

    #[test]
    fn no_layouts_is_black() {
        assert!(render_layout_condition(&[], &cam()).data.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn box_filling_view() {
        let big = InstanceLayout::new("a", "a", Vector3::zeros(), Vector3::new(1.0, 20.0, 20.0), 1.0, 0.0).unwrap();
        let img = render_layout_condition(&[big], &cam());
        assert!(img.data.chunks(3).all(|p| p == palette_color(0)));
    }

    #[test]
    fn nearer_box_occludes() {
        let far = InstanceLayout::new("far", "f", Vector3::zeros(), Vector3::repeat(1.0), 1.0, 0.0).unwrap();
        let near = InstanceLayout::new("near", "n", Vector3::new(2.0, 0.2, 0.0), Vector3::repeat(0.5), 1.0, 0.3).unwrap();
        let img = render_layout_condition(&[far.clone(), near.clone()], &cam());
        assert_eq!(img.pixel(8, 8), palette_color(1));
        // permuting the list only permutes colors
        let swapped = render_layout_condition(&[near, far], &cam());
        for (a, b) in img.data.chunks(3).zip(swapped.data.chunks(3)) {
            let map = |p: &[f64]| {
                if p == palette_color(0) {
                    1
                } else if p == palette_color(1) {
                    0
                } else {
                    9
                }
            };
            assert_eq!(map(a) == 9, map(b) == 9);
            if map(a) != 9 {
                assert_eq!(map(a), 1 - map(b));
            }
        }
    }
}
