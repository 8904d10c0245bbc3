//! Gamma(shape, 1) variates by Marsaglia and Tsang's rejection method.
//!
//! Acceptance uses only the exact log test. Shapes below 1 are boosted:
//! if Y ~ Gamma(a + 1) and U ~ Uniform(0, 1] then Y * U^(1/a) ~ Gamma(a).

use rand::Rng;
use rand_distr::StandardNormal;

/// Draws one Gamma(`shape`, 1) variate. `shape` must be positive and finite.
pub fn sample_gamma<R: Rng + ?Sized>(rng: &mut R, shape: f64) -> f64 {
    debug_assert!(shape > 0.0 && shape.is_finite(), "shape = {shape}");
    if shape < 1.0 {
        let boost = open_unit(rng).powf(1.0 / shape);
        return sample_large_shape(rng, shape + 1.0) * boost;
    }
    sample_large_shape(rng, shape)
}

/// Uniform on (0, 1].
fn open_unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    1.0 - rng.random::<f64>()
}

fn sample_large_shape<R: Rng + ?Sized>(rng: &mut R, shape: f64) -> f64 {
    let d = shape - 1.0 / 3.0;
    let c = 1.0 / (9.0 * d).sqrt();
    loop {
        let x: f64 = rng.sample(StandardNormal);
        let t = 1.0 + c * x;
        if t <= 0.0 {
            continue;
        }
        let v = t * t * t;
        let u = open_unit(rng);
        if u.ln() < 0.5 * x * x + d - d * v + d * v.ln() {
            return d * v;
        }
    }
}
