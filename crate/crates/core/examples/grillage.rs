//! Optimal grillage for 81 equal loads on a square held by five columns.
//! Writes the drawing to the path given as the first argument, or to
//! `grillage.svg` in the system temporary directory.

use std::path::PathBuf;

use hessot::conic::SolverOptions;
use hessot::grillage::{design, five_columns, slab_load};
use hessot::svg::{render_svg, SvgStyle};

fn main() -> hessot::Result<()> {
    let loads = slab_load(9, 1.0)?;
    let columns = five_columns(0.5);
    let r = design(&loads, &columns, &SolverOptions::default())?;
    println!("energy {:.6}, {} bars, support ok {}", r.energy, r.segment_count, r.support_ok);
    let svg = render_svg(&r.sigma, &SvgStyle::default())?;
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("grillage.svg"));
    std::fs::write(&out, svg)?;
    println!("wrote {}", out.display());
    Ok(())
}
