//! Assemble the precision matrix of a stationary anisotropic model, draw one
//! realization and write it as CSV.
//!
//! cargo run --example assemble_and_sample -- [cells] [seed] [out.csv]

use fvgmrf::assembly::assemble_precision;
use fvgmrf::coefficients::{AnisotropySpec, KappaSpec};
use fvgmrf::gmrf::{factorize_on_grid, sample};
use fvgmrf::grid::GridSpec;
use fvgmrf::io::write_field;

fn main() -> fvgmrf::Result<()> {
    let mut args = std::env::args().skip(1);
    let cells: usize = args.next().map_or(200, |s| s.parse().expect("cells"));
    let seed: u64 = args.next().map_or(0, |s| s.parse().expect("seed"));
    let out = args.next();

    let grid = GridSpec::square(20.0, cells)?;
    // diffusion 9 along the diagonal, 1 across it
    let spec = AnisotropySpec::rotated_constant(1.0, 8.0, std::f64::consts::FRAC_PI_4)?;
    let model = assemble_precision(&grid, &KappaSpec::new(1.0)?, &spec)?;
    let q = model.precision();
    println!("n = {}, nnz = {}, max nnz/row = {}", q.n_rows(), q.nnz(), q.pattern().max_row_nnz());

    let factor = factorize_on_grid(q, &grid)?;
    println!("log det Q = {:.4}", factor.log_det());
    let u = sample(&factor, seed).values;
    let mean = u.iter().sum::<f64>() / u.len() as f64;
    let var = u.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (u.len() - 1) as f64;
    println!("sample mean {mean:.4}, empirical variance {var:.4}");
    if let Some(path) = out {
        write_field(std::path::Path::new(&path), &grid, &u)?;
        println!("wrote {path}");
    }
    Ok(())
}
