use super::{DigitImage, GestureError, GestureTrace, IMAGE_PIXELS, IMAGE_SIDE};

/// Side of the supersampled drawing canvas; downsampled 5×5 to the 28×28 image.
pub const CANVAS_SIDE: usize = 140;
pub const STROKE_RADIUS_PX: f64 = 7.0;

const SUPERSAMPLE: usize = CANVAS_SIDE / IMAGE_SIDE;
// Bounding box of the normalized glyph: 20 of 28 pixels, centered.
const BOX_FRACTION: f64 = 20.0 / 28.0;

/// Uniformly scales and centers a polyline so its bounding box fits the central
/// 20/28 of the unit square, aspect preserved. A single-point (or zero-extent)
/// polyline collapses to the center.
pub fn normalize_points(points: &[[f64; 2]]) -> Result<Vec<[f64; 2]>, GestureError> {
    if points.is_empty() {
        return Err(GestureError::EmptyTrace);
    }
    let (mut min, mut max) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in points {
        for k in 0..2 {
            min[k] = min[k].min(p[k]);
            max[k] = max[k].max(p[k]);
        }
    }
    let extent = (max[0] - min[0]).max(max[1] - min[1]);
    if !(extent > 1e-12) {
        return Ok(vec![[0.5, 0.5]; points.len()]);
    }
    let scale = BOX_FRACTION / extent;
    let center = [(min[0] + max[0]) / 2.0, (min[1] + max[1]) / 2.0];
    Ok(points
        .iter()
        .map(|p| [0.5 + (p[0] - center[0]) * scale, 0.5 + (p[1] - center[1]) * scale])
        .collect())
}

/// Normalized (x, y) polyline of a gesture; z is only used for segmentation.
pub fn normalize_trace(trace: &GestureTrace) -> Result<Vec<[f64; 2]>, GestureError> {
    let xy: Vec<[f64; 2]> = trace.points.iter().map(|c| [c.x_u, c.y_u]).collect();
    normalize_points(&xy)
}

/// Draws the polyline (unit square, y up) with round-capped strokes on the
/// 140×140 canvas and box-averages it down to 28×28.
pub fn rasterize(points: &[[f64; 2]]) -> Result<DigitImage, GestureError> {
    if points.is_empty() {
        return Err(GestureError::EmptyTrace);
    }
    let side = CANVAS_SIDE as f64;
    let to_canvas = |p: &[f64; 2]| [p[0] * side, (1.0 - p[1]) * side];
    let mut canvas = vec![false; CANVAS_SIDE * CANVAS_SIDE];
    let mut paint = |a: [f64; 2], b: [f64; 2]| {
        let r = STROKE_RADIUS_PX;
        let col_lo = ((a[0].min(b[0]) - r).floor().max(0.0)) as usize;
        let col_hi = ((a[0].max(b[0]) + r).ceil().min(side - 1.0)).max(0.0) as usize;
        let row_lo = ((a[1].min(b[1]) - r).floor().max(0.0)) as usize;
        let row_hi = ((a[1].max(b[1]) + r).ceil().min(side - 1.0)).max(0.0) as usize;
        for row in row_lo..=row_hi {
            for col in col_lo..=col_hi {
                let p = [col as f64 + 0.5, row as f64 + 0.5];
                if segment_distance_sq(p, a, b) <= r * r {
                    canvas[row * CANVAS_SIDE + col] = true;
                }
            }
        }
    };
    let pts: Vec<[f64; 2]> = points.iter().map(to_canvas).collect();
    if pts.len() == 1 {
        paint(pts[0], pts[0]);
    }
    for w in pts.windows(2) {
        paint(w[0], w[1]);
    }

    let mut pixels = vec![0.0f32; IMAGE_PIXELS];
    let norm = (SUPERSAMPLE * SUPERSAMPLE) as f32;
    for (i, px) in pixels.iter_mut().enumerate() {
        let (r0, c0) = ((i / IMAGE_SIDE) * SUPERSAMPLE, (i % IMAGE_SIDE) * SUPERSAMPLE);
        let mut on = 0u32;
        for r in r0..r0 + SUPERSAMPLE {
            for c in c0..c0 + SUPERSAMPLE {
                on += canvas[r * CANVAS_SIDE + c] as u32;
            }
        }
        *px = on as f32 / norm;
    }
    DigitImage::new(pixels, None)
}

fn segment_distance_sq(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let ap = [p[0] - a[0], p[1] - a[1]];
    let len_sq = ab[0] * ab[0] + ab[1] * ab[1];
    let t = if len_sq > 0.0 { ((ap[0] * ab[0] + ap[1] * ab[1]) / len_sq).clamp(0.0, 1.0) } else { 0.0 };
    let d = [ap[0] - t * ab[0], ap[1] - t * ab[1]];
    d[0] * d[0] + d[1] * d[1]
}
