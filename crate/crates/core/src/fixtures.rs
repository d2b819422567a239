//! Ready-made coefficient fields used by the examples, tests and the
//! command-line configs.

use std::f64::consts::PI;

use crate::coefficients::{
    BaseField, FourierTerm, FourierVectorField, FrequencySet, SineTerm, StreamFunction, VectorFieldSpec,
};

/// `f(x, y) = (A / 2 pi) (3/4 sin(2 pi x / A) + 1/4 sin(2 pi y / B))`, scaled
/// so that on `[0, 20]^2` it reads `(10/pi)(3/4 sin(pi x/10) + 1/4 sin(pi y/10))`.
pub fn swirl_stream_function(width: f64, height: f64) -> StreamFunction {
    let scale = width / (2.0 * PI);
    StreamFunction {
        width,
        height,
        terms: vec![
            SineTerm { amplitude: 0.75 * scale, k: 1, l: 0, phase: 0.0 },
            SineTerm { amplitude: 0.25 * scale * height / width, k: 0, l: 1, phase: 0.0 },
        ],
    }
}

/// Rotated gradient of [`swirl_stream_function`]: the field
/// `(-1/4 cos(2 pi y / B), 3/4 cos(2 pi x / A))`.
pub fn swirl_base_field(width: f64, height: f64) -> BaseField {
    BaseField::StreamFunction(swirl_stream_function(width, height))
}

/// `v = (2 + cos(2 pi x/A), 3 + 2 sin(2 pi y/B) + sin(2 pi (x/A + y/B)))`.
pub fn wavy_vector_field(width: f64, height: f64) -> VectorFieldSpec {
    let freqs = FrequencySet::new([(0, 1), (1, 0), (1, 1)]).expect("valid");
    let mut terms = vec![FourierTerm::default(); 3];
    terms[freqs.position(1, 0).unwrap()].a1 = 1.0;
    terms[freqs.position(0, 1).unwrap()].b2 = 2.0;
    terms[freqs.position(1, 1).unwrap()].b2 = 1.0;
    VectorFieldSpec::Fourier(FourierVectorField::new(width, height, [2.0, 3.0], freqs, terms).expect("valid"))
}
