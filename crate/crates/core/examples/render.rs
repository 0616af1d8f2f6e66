//! Round-trips a plan through CSV and renders its segment measure.
//! Writes `plan.csv` and `plan.svg` into the directory given as the first
//! argument, or the system temporary directory.

use std::path::PathBuf;

use hessot::beckmann::assemble_sigma;
use hessot::io::{plan_to_csv, read_plan};
use hessot::oracles::two_point_oracle;
use hessot::svg::{render_svg, SvgStyle};

fn main() -> hessot::Result<()> {
    let dir = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(std::env::temp_dir);
    let sol = two_point_oracle(&[1.0, 0.2], &[-2.0, -0.4], &[0.1, 0.3], &[-0.1, -0.3])?;
    std::fs::write(dir.join("plan.csv"), plan_to_csv(&sol.plan)?)?;
    let plan = read_plan(&dir.join("plan.csv"))?;
    let style = SvgStyle { width_px: 400.0, ..SvgStyle::default() };
    std::fs::write(dir.join("plan.svg"), render_svg(&assemble_sigma(&plan), &style)?)?;
    println!("{} cells, wrote plan.csv and plan.svg to {}", plan.cells.len(), dir.display());
    Ok(())
}
