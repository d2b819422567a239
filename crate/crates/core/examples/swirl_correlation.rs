//! Correlations around one cell under a tensor field that follows a swirling
//! vector field. Writes the vector field and the correlation field as CSV.
//!
//! cargo run --example swirl_correlation -- [cells] [out_dir]

use std::fmt::Write as _;
use std::path::PathBuf;

use fvgmrf::assembly::assemble_precision;
use fvgmrf::coefficients::{AnisotropySpec, KappaSpec, VectorFieldSpec};
use fvgmrf::fixtures::swirl_base_field;
use fvgmrf::gmrf::{correlation_field, factorize_on_grid};
use fvgmrf::grid::{CellCoord, GridSpec};
use fvgmrf::io::write_field;

fn main() -> fvgmrf::Result<()> {
    let mut args = std::env::args().skip(1);
    let cells: usize = args.next().map_or(100, |s| s.parse().expect("cells"));
    let out_dir = PathBuf::from(args.next().unwrap_or_else(|| ".".into()));

    let grid = GridSpec::square(20.0, cells)?;
    let field = VectorFieldSpec::fixed_scaled(swirl_base_field(20.0, 20.0), 5.0)?;
    let spec = AnisotropySpec::new(0.5, field)?;
    let q = assemble_precision(&grid, &KappaSpec::new(1.0)?, &spec)?.into_precision();
    let factor = factorize_on_grid(&q, &grid)?;

    let mut vectors = String::from("x,y,v1,v2\n");
    for c in grid.cells() {
        let p = grid.cell_center(c);
        let v = spec.field().value_at(p);
        let _ = writeln!(vectors, "{},{},{},{}", p.x, p.y, v[0], v[1]);
    }
    std::fs::write(out_dir.join("swirl_vectors.csv"), vectors)?;

    let reference = CellCoord::new(cells as i64 / 4, cells as i64 / 2);
    let corr = correlation_field(&factor, &grid, reference)?;
    write_field(&out_dir.join("swirl_correlation.csv"), &grid, &corr)?;

    // reach of the correlation along each axis from the reference cell
    let reach = |di: i64, dj: i64| {
        (1..cells as i64)
            .take_while(|k| corr[grid.linear_index(CellCoord::new(reference.i + k * di, reference.j + k * dj))] > 0.1)
            .count() as f64
            * grid.step_x()
    };
    println!("correlation above 0.1 reaches {:.2} along x and {:.2} along y", reach(1, 0), reach(0, 1));
    println!("wrote swirl_vectors.csv and swirl_correlation.csv to {}", out_dir.display());
    Ok(())
}
