use super::ChannelParams;
use crate::quad::gauss_legendre_unit;

/// Nodes per side of the closest-approach split.
const HALF_NODES: usize = 16;

/// Fixed-order evaluator of the Kolmogorov phase structure function
///
/// `D(r, r') = 2 Cn2 k^2 L ∫_0^1 |r ξ + r' (1 - ξ)|^(5/3) dξ`.
///
/// The segment `ξ ↦ r' + (r - r') ξ` is split at its point of closest
/// approach to the origin, where the integrand loses smoothness, and each
/// piece is mapped with `ξ - ξ* = h τ^3` before Gauss–Legendre is applied.
#[derive(Debug, Clone)]
pub struct StructureFunction {
    beta: f64,
    // offsets τ^3 and weights 3 τ^2 w for one piece
    off: Vec<f64>,
    wt: Vec<f64>,
}

impl StructureFunction {
    pub fn new(params: &ChannelParams) -> Self {
        Self::with_nodes(params.beta(), HALF_NODES)
    }

    pub fn with_nodes(beta: f64, nodes: usize) -> Self {
        let (x, w) = gauss_legendre_unit(nodes);
        let off = x.iter().map(|t| t * t * t).collect();
        let wt = x.iter().zip(&w).map(|(t, w)| 3.0 * t * t * w).collect();
        StructureFunction { beta, off, wt }
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// `∫_0^1 |r ξ + r'(1-ξ)|^(5/3) dξ` for `r = (rx, ry)`, `r' = (px, py)`.
    #[inline]
    pub fn path_integral(&self, rx: f64, ry: f64, px: f64, py: f64) -> f64 {
        let cx = rx - px;
        let cy = ry - py;
        let cc = cx * cx + cy * cy;
        let xs = if cc > 0.0 {
            (-(px * cx + py * cy) / cc).clamp(0.0, 1.0)
        } else {
            0.0
        };
        // closest point m and its projection on the direction c
        let mx = px + cx * xs;
        let my = py + cy * xs;
        let mm = mx * mx + my * my;
        let mc = mx * cx + my * cy;
        let mut total = 0.0;
        for (h, sign) in [(xs, -1.0), (1.0 - xs, 1.0)] {
            if h <= 0.0 {
                continue;
            }
            let mut s = 0.0;
            for (o, w) in self.off.iter().zip(&self.wt) {
                let d = sign * h * o;
                let q = mm + d * (2.0 * mc + cc * d);
                s += w * pow_five_sixths(q);
            }
            total += h * s;
        }
        total
    }

    /// `D(r, r')`.
    #[inline]
    pub fn eval(&self, r: [f64; 2], rp: [f64; 2]) -> f64 {
        2.0 * self.beta * self.path_integral(r[0], r[1], rp[0], rp[1])
    }

    /// `D(0, r') = (3/4) β |r'|^(5/3)`, exact.
    #[inline]
    pub fn on_axis(&self, rx: f64, ry: f64) -> f64 {
        0.75 * self.beta * pow_five_sixths(rx * rx + ry * ry)
    }
}

/// `q^(5/6)` for `q ≥ 0`.
#[inline]
pub(crate) fn pow_five_sixths(q: f64) -> f64 {
    if q <= 0.0 {
        0.0
    } else {
        q / q.cbrt().sqrt()
    }
}

/// Phase structure function `D_S(r, r')` for one channel.
pub fn phase_structure_function(r: [f64; 2], r_prime: [f64; 2], params: &ChannelParams) -> f64 {
    StructureFunction::new(params).eval(r, r_prime)
}

/// Rytov parameter `1.23 Cn2 k^(7/6) L^(11/6)`.
pub fn rytov_parameter(params: &ChannelParams) -> f64 {
    1.23 * params.cn2 * params.wave_number().powf(7.0 / 6.0) * params.length.powf(11.0 / 6.0)
}
