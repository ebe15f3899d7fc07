pub mod geometry;
pub mod guidance;
pub mod io;
pub mod loss;
pub mod optim;
pub mod raster;
pub mod rng;
pub mod scene;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/scene.md")]
    mod scene {}
    #[doc = include_str!("../../../book/src/rasterizer.md")]
    mod rasterizer {}
    #[doc = include_str!("../../../book/src/geometry.md")]
    mod geometry {}
    #[doc = include_str!("../../../book/src/losses.md")]
    mod losses {}
    #[doc = include_str!("../../../book/src/guidance.md")]
    mod guidance {}
    #[doc = include_str!("../../../book/src/optimizer.md")]
    mod optimizer {}
    #[doc = include_str!("../../../book/src/layout-format.md")]
    mod layout_format {}
    #[doc = include_str!("../../../book/src/file-formats.md")]
    mod file_formats {}
}
