//! Exact marginal variances of the discretized field next to the
//! continuous-domain value, for an isotropic and a rotated tensor.
//!
//! cargo run --example marginal_variance -- [cells]

use std::f64::consts::FRAC_PI_4;

use fvgmrf::analytic::{analytic_marginal_variance, characterize_constant_h};
use fvgmrf::assembly::assemble_precision;
use fvgmrf::coefficients::{AnisotropySpec, KappaSpec};
use fvgmrf::gmrf::{factorize_on_grid, marginal_variances};
use fvgmrf::grid::{GridSpec, Point};

fn main() -> fvgmrf::Result<()> {
    let cells: usize = std::env::args().nth(1).map_or(200, |s| s.parse().expect("cells"));
    let grid = GridSpec::square(20.0, cells)?;
    let kappa = KappaSpec::new(1.0)?;
    for (label, spec) in [
        ("isotropic", AnisotropySpec::isotropic(1.0)?),
        ("rotated", AnisotropySpec::rotated_constant(1.0, 8.0, FRAC_PI_4)?),
    ] {
        let q = assemble_precision(&grid, &kappa, &spec)?.into_precision();
        let var = marginal_variances(&factorize_on_grid(&q, &grid)?);
        let lo = var.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = var.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let h = spec.h_at(Point::new(0.0, 0.0));
        let c = characterize_constant_h(kappa.kappa_sq(), &h)?;
        println!(
            "{label:>9}: variance {lo:.5} .. {hi:.5}, continuous {:.5}, eigenvalues {:.2}/{:.2}, angle {:.4}",
            analytic_marginal_variance(kappa.kappa_sq(), &h)?,
            c.lambda1,
            c.lambda2,
            c.theta
        );
    }
    Ok(())
}
