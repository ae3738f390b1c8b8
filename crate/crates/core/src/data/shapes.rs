//! Procedural 32×32 binary shapes on a small factor grid.
//!
//! All geometry is integer arithmetic on scaled pixel-centre coordinates, so
//! the rendering is bit-identical on every platform.

use super::{FactorDataset, FactorSpec};

pub const MINI_SHAPES_SIDE: usize = 32;

const SHAPES: usize = 3;
const SCALES: [i64; 3] = [4, 5, 6];
const POSITIONS: usize = 8;

fn position_centre(i: usize) -> i64 {
    8 + 2 * i as i64
}

/// Inside test for shape `shape` with half-size `r` pixels, given the offset
/// of a pixel centre from the shape centre in quarter-pixel units.
fn inside(shape: usize, r: i64, u: i64, v: i64) -> bool {
    let big = 4 * r;
    match shape {
        // square of side 2r
        0 => u.abs() < big && v.abs() < big,
        // ellipse with semi-axes r (horizontal) and 3r/4 (vertical)
        1 => 9 * u * u + 16 * v * v <= 9 * big * big,
        // heart: two round lobes over a downward-pointing triangle
        _ => {
            let lobe = |cx: i64| (4 * u - cx).pow(2) + (4 * v + big).pow(2) <= 4 * big * big;
            let triangle = 4 * v >= -big && v <= big && 5 * u.abs() <= 4 * (big - v);
            lobe(2 * big) || lobe(-2 * big) || triangle
        }
    }
}

/// Renders one image for factor classes `[shape, scale, x, y]`.
pub fn render_mini_shape(classes: &[usize]) -> Vec<u8> {
    let [shape, scale, px, py] = [classes[0], classes[1], classes[2], classes[3]];
    let r = SCALES[scale];
    let (cx, cy) = (position_centre(px), position_centre(py));
    let n = MINI_SHAPES_SIDE;
    let mut img = vec![0u8; n * n];
    for y in 0..n {
        for x in 0..n {
            let u = 4 * x as i64 + 2 - 4 * cx;
            let v = 4 * y as i64 + 2 - 4 * cy;
            img[y * n + x] = inside(shape, r, u, v) as u8;
        }
    }
    img
}

/// The full 3 × 3 × 8 × 8 grid (shape, scale, x-position, y-position) of
/// 32×32 binary images, last factor varying fastest.
pub fn generate_mini_shapes() -> FactorDataset {
    let spec = FactorSpec::new(
        &["shape", "scale", "pos_x", "pos_y"],
        &[SHAPES, SCALES.len(), POSITIONS, POSITIONS],
    );
    let n = spec.grid_size();
    let mut images = Vec::with_capacity(n * MINI_SHAPES_SIDE * MINI_SHAPES_SIDE);
    let mut classes = Vec::with_capacity(n * spec.len());
    for i in 0..n {
        let c = spec.classes_of(i);
        images.extend(render_mini_shape(&c));
        classes.extend(c.iter().map(|&v| v as u32));
    }
    FactorDataset::new(
        "mini-shapes",
        spec,
        (MINI_SHAPES_SIDE, MINI_SHAPES_SIDE, 1),
        images,
        1.0,
        classes,
    )
    .expect("grid is consistent")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_has_expected_area() {
        for (s, &r) in SCALES.iter().enumerate() {
            let img = render_mini_shape(&[0, s, 3, 4]);
            let area: usize = img.iter().map(|&v| v as usize).sum();
            assert_eq!(area as i64, (2 * r) * (2 * r));
        }
    }

    #[test]
    fn shapes_stay_inside_the_frame() {
        let n = MINI_SHAPES_SIDE;
        for shape in 0..3 {
            for pos in [0, 7] {
                let img = render_mini_shape(&[shape, 2, pos, pos]);
                let border = (0..n).any(|i| img[i] == 1 || img[(n - 1) * n + i] == 1 || img[i * n] == 1 || img[i * n + n - 1] == 1);
                assert!(!border, "shape {shape} at {pos} touches the border");
            }
        }
    }

    #[test]
    fn shapes_are_distinct_and_ordered_by_scale() {
        let area = |c: [usize; 4]| render_mini_shape(&c).iter().map(|&v| v as usize).sum::<usize>();
        for shape in 0..3 {
            assert!(area([shape, 0, 4, 4]) < area([shape, 1, 4, 4]));
            assert!(area([shape, 1, 4, 4]) < area([shape, 2, 4, 4]));
        }
        assert_ne!(render_mini_shape(&[0, 1, 4, 4]), render_mini_shape(&[1, 1, 4, 4]));
        assert_ne!(render_mini_shape(&[1, 1, 4, 4]), render_mini_shape(&[2, 1, 4, 4]));
    }

    #[test]
    fn translation_shifts_pixels() {
        let a = render_mini_shape(&[2, 1, 2, 3]);
        let b = render_mini_shape(&[2, 1, 3, 3]);
        let n = MINI_SHAPES_SIDE;
        for y in 0..n {
            for x in 0..n - 2 {
                assert_eq!(a[y * n + x], b[y * n + x + 2]);
            }
        }
    }
}
