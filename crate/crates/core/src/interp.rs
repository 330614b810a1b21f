//! Quintic Hermite interpolation matching value, first and second
//! derivative at both ends of an interval.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuinticHermite {
    start: f64,
    width: f64,
    coeffs: [f64; 6],
}

impl QuinticHermite {
    /// `left` and `right` are (value, first, second derivative) at `a` and `b`.
    pub fn new(a: f64, b: f64, left: [f64; 3], right: [f64; 3]) -> Self {
        let w = b - a;
        let (p0, d0, s0) = (left[0], left[1] * w, left[2] * w * w);
        let (p1, d1, s1) = (right[0], right[1] * w, right[2] * w * w);
        let dp = p1 - p0;
        let coeffs = [
            p0,
            d0,
            0.5 * s0,
            10.0 * dp - 6.0 * d0 - 4.0 * d1 - 0.5 * (3.0 * s0 - s1),
            -15.0 * dp + 8.0 * d0 + 7.0 * d1 + 0.5 * (3.0 * s0 - 2.0 * s1),
            6.0 * dp - 3.0 * d0 - 3.0 * d1 - 0.5 * (s0 - s1),
        ];
        Self { start: a, width: w, coeffs }
    }

    /// (value, first, second derivative) at `z`.
    pub fn eval(&self, z: f64) -> [f64; 3] {
        let s = (z - self.start) / self.width;
        let c = &self.coeffs;
        let v = c[0] + s * (c[1] + s * (c[2] + s * (c[3] + s * (c[4] + s * c[5]))));
        let d = c[1] + s * (2.0 * c[2] + s * (3.0 * c[3] + s * (4.0 * c[4] + s * 5.0 * c[5])));
        let dd = 2.0 * c[2] + s * (6.0 * c[3] + s * (12.0 * c[4] + s * 20.0 * c[5]));
        [v, d / self.width, dd / (self.width * self.width)]
    }
}
