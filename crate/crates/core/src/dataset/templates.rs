//! Single-stroke reference paths for the ten digits, in the unit square with y up.

/// Canonical pen path of one digit.
#[derive(Debug, Clone, PartialEq)]
pub struct DigitTemplate {
    pub digit: u8,
    pub points: Vec<[f64; 2]>,
}

fn ellipse(cx: f64, cy: f64, rx: f64, ry: f64, from_deg: f64, to_deg: f64, steps: usize) -> Vec<[f64; 2]> {
    (0..=steps)
        .map(|i| {
            let a = (from_deg + (to_deg - from_deg) * i as f64 / steps as f64).to_radians();
            [cx + rx * a.cos(), cy + ry * a.sin()]
        })
        .collect()
}

impl DigitTemplate {
    /// Template for `digit` (0–9). Digits usually drawn with two strokes ("4", "7")
    /// are traced without lifting the hand.
    pub fn for_digit(digit: u8) -> Self {
        let points = match digit {
            // counter-clockwise from the top, closing on itself
            0 => ellipse(0.5, 0.5, 0.3, 0.43, 90.0, 450.0, 10),
            1 => vec![[0.5, 0.95], [0.5, 0.65], [0.5, 0.35], [0.5, 0.05]],
            2 => vec![
                [0.2, 0.74],
                [0.32, 0.9],
                [0.55, 0.95],
                [0.76, 0.82],
                [0.74, 0.6],
                [0.5, 0.36],
                [0.2, 0.07],
                [0.5, 0.07],
                [0.82, 0.07],
            ],
            3 => vec![
                [0.2, 0.85],
                [0.45, 0.95],
                [0.74, 0.86],
                [0.72, 0.63],
                [0.45, 0.52],
                [0.75, 0.41],
                [0.78, 0.18],
                [0.5, 0.05],
                [0.2, 0.14],
            ],
            4 => vec![
                [0.65, 0.05],
                [0.65, 0.5],
                [0.65, 0.95],
                [0.4, 0.62],
                [0.15, 0.3],
                [0.5, 0.3],
                [0.85, 0.3],
            ],
            5 => vec![
                [0.8, 0.93],
                [0.5, 0.93],
                [0.26, 0.93],
                [0.23, 0.56],
                [0.5, 0.6],
                [0.77, 0.46],
                [0.75, 0.17],
                [0.45, 0.05],
                [0.2, 0.15],
            ],
            6 => vec![
                [0.72, 0.93],
                [0.45, 0.76],
                [0.26, 0.46],
                [0.26, 0.2],
                [0.5, 0.05],
                [0.74, 0.2],
                [0.72, 0.42],
                [0.48, 0.5],
                [0.27, 0.37],
            ],
            7 => vec![[0.15, 0.93], [0.5, 0.93], [0.85, 0.93], [0.65, 0.5], [0.45, 0.05]],
            8 => vec![
                [0.72, 0.84],
                [0.5, 0.95],
                [0.28, 0.83],
                [0.31, 0.63],
                [0.5, 0.52],
                [0.71, 0.38],
                [0.7, 0.13],
                [0.5, 0.04],
                [0.29, 0.13],
                [0.3, 0.38],
                [0.5, 0.52],
                [0.7, 0.66],
                [0.72, 0.84],
            ],
            // closed loop, then a straight stem down the right side
            9 => vec![
                [0.72, 0.78],
                [0.5, 0.94],
                [0.27, 0.8],
                [0.3, 0.58],
                [0.52, 0.52],
                [0.72, 0.64],
                [0.72, 0.78],
                [0.72, 0.42],
                [0.72, 0.05],
            ],
            _ => panic!("digit out of range: {digit}"),
        };
        Self { digit, points }
    }

    pub fn all() -> Vec<Self> {
        (0..10).map(Self::for_digit).collect()
    }
}

/// Uniform Catmull-Rom spline through `ctrl`, `per_segment` samples per
/// span, endpoints duplicated. Collinear control points give a collinear curve.
pub fn catmull_rom(ctrl: &[[f64; 2]], per_segment: usize) -> Vec<[f64; 2]> {
    if ctrl.len() < 2 {
        return ctrl.to_vec();
    }
    let at = |i: isize| ctrl[i.clamp(0, ctrl.len() as isize - 1) as usize];
    let mut out = Vec::with_capacity((ctrl.len() - 1) * per_segment + 1);
    for i in 0..ctrl.len() as isize - 1 {
        let (p0, p1, p2, p3) = (at(i - 1), at(i), at(i + 1), at(i + 2));
        for s in 0..per_segment {
            let t = s as f64 / per_segment as f64;
            let (t2, t3) = (t * t, t * t * t);
            let w = [
                -0.5 * t3 + t2 - 0.5 * t,
                1.5 * t3 - 2.5 * t2 + 1.0,
                -1.5 * t3 + 2.0 * t2 + 0.5 * t,
                0.5 * t3 - 0.5 * t2,
            ];
            out.push([
                w[0] * p0[0] + w[1] * p1[0] + w[2] * p2[0] + w[3] * p3[0],
                w[0] * p0[1] + w[1] * p1[1] + w[2] * p2[1] + w[3] * p3[1],
            ]);
        }
    }
    out.push(ctrl[ctrl.len() - 1]);
    out
}

/// Polyline resampled at `n` points evenly spaced by arc length.
pub fn resample_by_arc_length(path: &[[f64; 2]], n: usize) -> Vec<[f64; 2]> {
    assert!(!path.is_empty() && n >= 2);
    let mut cum = vec![0.0];
    for w in path.windows(2) {
        let d = ((w[1][0] - w[0][0]).powi(2) + (w[1][1] - w[0][1]).powi(2)).sqrt();
        cum.push(cum.last().unwrap() + d);
    }
    let total = *cum.last().unwrap();
    if total == 0.0 {
        return vec![path[0]; n];
    }
    let mut out = Vec::with_capacity(n);
    let mut seg = 0;
    for k in 0..n {
        let s = total * k as f64 / (n - 1) as f64;
        while seg + 1 < cum.len() - 1 && cum[seg + 1] < s {
            seg += 1;
        }
        let span = cum[seg + 1] - cum[seg];
        let w = if span > 0.0 { ((s - cum[seg]) / span).clamp(0.0, 1.0) } else { 0.0 };
        let (a, b) = (path[seg], path[seg + 1]);
        out.push([a[0] + w * (b[0] - a[0]), a[1] + w * (b[1] - a[1])]);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_template_is_a_connected_stroke() {
        for t in DigitTemplate::all() {
            assert!(t.points.len() >= 4, "digit {}", t.digit);
            for p in &t.points {
                assert!((0.0..=1.0).contains(&p[0]) && (0.0..=1.0).contains(&p[1]));
            }
            for w in t.points.windows(2) {
                let gap = ((w[1][0] - w[0][0]).powi(2) + (w[1][1] - w[0][1]).powi(2)).sqrt();
                assert!(gap < 0.5, "digit {} jumps {gap}", t.digit);
            }
        }
    }

    #[test]
    fn spline_interpolates_control_points() {
        let ctrl = DigitTemplate::for_digit(3).points;
        let curve = catmull_rom(&ctrl, 8);
        for (i, p) in ctrl.iter().enumerate() {
            let q = curve[i * 8];
            assert!((p[0] - q[0]).abs() < 1e-12 && (p[1] - q[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn arc_length_resampling_is_even() {
        let out = resample_by_arc_length(&[[0.0, 0.0], [1.0, 0.0], [1.0, 3.0]], 5);
        assert_eq!(out.len(), 5);
        assert!((out[1][0] - 1.0).abs() < 1e-12 && out[1][1].abs() < 1e-12);
        assert!((out[4][1] - 3.0).abs() < 1e-12);
    }
}
