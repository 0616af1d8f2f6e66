//! Grillage energies for a uniform load discretized on finer and finer grids.

use hessot::conic::SolverOptions;
use hessot::grillage::{continuous_slab_load, five_columns, refine_study};

fn main() -> hessot::Result<()> {
    let recipe = |k: usize| Ok((five_columns(0.25), continuous_slab_load(k, 0.5)?));
    for row in refine_study(recipe, &[3, 5, 9, 13], &SolverOptions::default())? {
        match row.energy {
            Some(e) => println!("{:>3} per side: energy {e:.6}, {:>4} bars, {:.2} s", row.level, row.segment_count, row.runtime_s),
            None => println!("{:>3} per side: {}", row.level, row.error.unwrap_or_default()),
        }
    }
    Ok(())
}
