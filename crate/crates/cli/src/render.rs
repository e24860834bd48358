//! PNG rendering of grid frames, one pixel per cell.

use dogm_core::ism::line_cells;
use dogm_core::{DogmFrame, State};
use image::{Rgb, RgbImage};
use std::path::Path;

pub fn state_color(s: State) -> Rgb<u8> {
    match s {
        State::Unknown => Rgb([0x00, 0x00, 0x00]),
        State::Free => Rgb([0x40, 0x40, 0x40]),
        State::Static => Rgb([0xA0, 0xA0, 0xA0]),
        State::Dynamic => Rgb([0xFF, 0xFF, 0xFF]),
    }
}

const ARROW: Rgb<u8> = Rgb([0xFF, 0x00, 0x00]);

/// Seconds of motion an overlay arrow represents.
const ARROW_HORIZON: f64 = 0.5;

/// Argmax-state image with +y pointing up. With `arrows`, every cell that
/// carries a velocity gets a red line showing half a second of motion.
pub fn render_frame(frame: &DogmFrame, arrows: bool) -> RgbImage {
    let (w, h) = (frame.spec.width_cells, frame.spec.height_cells);
    let states = frame.argmax_grid();
    let mut img = RgbImage::new(w as u32, h as u32);
    for j in 0..h {
        for i in 0..w {
            img.put_pixel(i as u32, (h - 1 - j) as u32, state_color(*states.get(i, j)));
        }
    }
    if arrows {
        for j in 0..h {
            for i in 0..w {
                let Some(v) = frame.velocity.get(i, j) else { continue };
                let d = v * ARROW_HORIZON / frame.spec.resolution;
                let tip = (i as i64 + d.x.round() as i64, j as i64 + d.y.round() as i64);
                for (x, y) in line_cells((i as i64, j as i64), tip).into_iter().skip(1) {
                    if frame.spec.contains_cell(x, y) {
                        img.put_pixel(x as u32, (h as i64 - 1 - y) as u32, ARROW);
                    }
                }
            }
        }
    }
    img
}

pub fn save_png(path: &Path, img: &RgbImage) -> Result<(), image::ImageError> {
    img.save_with_format(path, image::ImageFormat::Png)
}
